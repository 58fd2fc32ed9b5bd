#pragma once

#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thzrsma/analog_mf.hpp"
#include "thzrsma/geometry_channel.hpp"
#include "thzrsma/harness.hpp"
#include "thzrsma/ris_control.hpp"

namespace thzrsma::detail {

/// Seed tags of the per-trial substreams.
enum SeedTag : std::uint64_t {
  kTagPlacement = 1,
  kTagMultipath = 2,
  kTagCsiError = 3,
  kTagPilotNoise = 4,
  kTagPilotDesign = 5,
  kTagCalibration = 1000,
};

/// Everything that depends only on the sweep point.
struct PointSetup {
  SystemConfig config;
  CsiSpec csi;
  ArrayPair geometry;
  BsRisChannel h_br;
  CMatrix f_rf;
  /// Mean over RF chains i of ||H_BR[n]^H f_i||^2, per subcarrier.
  RVector rf_gain;
  std::vector<CMatrix> measurement;
  std::vector<CMatrix> measurement_pinv;
  double solver_sigma_h_sq = 0.0;
};

/// Channels of one trial plus whatever external artifacts replace stages of
/// the pipeline.
struct TrialInput {
  std::vector<RisUeChannel> truth;
  std::optional<std::vector<RisUeChannel>> csi;
  std::optional<RisPhase> phase;
  std::optional<std::vector<AwmmseParams>> params;
};

class ChannelSource {
 public:
  virtual ~ChannelSource() = default;
  virtual int trials() const = 0;
  virtual TrialInput trial(const PointSetup& point, int index, std::uint64_t seed) const = 0;
  /// Input of calibration draw `index`; defaults to a fresh trial.
  virtual TrialInput calibration(const PointSetup& point, int index, std::uint64_t seed) const {
    return trial(point, index, seed);
  }
  /// Optional learned pilots that replace the default LS pilot design.
  virtual std::optional<PilotBundle> pilots(const SystemConfig&) const { return std::nullopt; }
};

/// Draws UE positions and RIS-UE channels from a trial seed.
struct SimulatedChannels {
  UePlacement placement;
  std::vector<RisUeChannel> channels;
};
SimulatedChannels simulate_channels(const SystemConfig& config, const ArrayGeometry& ris,
                                    ChannelMode mode, std::uint64_t trial_seed);

/// Applies the sweep value of the current row to config and CSI settings.
void apply_sweep_value(SweepVariable variable, double value, SystemConfig& config, CsiSpec& csi);

std::unique_ptr<ChannelSource> make_simulated_source(int trials, ChannelMode mode);

ResultTable run_pipeline(const ScenarioSpec& spec, const ChannelSource& source,
                         const SystemConfig& base_config, const RunHooks& hooks);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// collected per index and the one with the lowest index is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Rethrows the current exception with `context` prepended, keeping the
/// error category.
[[noreturn]] void rethrow_with_context(const std::string& context);

std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t value);

/// Interchange tensor names shared by export and import.
inline constexpr const char* kPilotRisPhases = "pilot_ris_phases";
inline constexpr const char* kPilotRfPhases = "pilot_rf_phases";
inline constexpr const char* kPilotBaseband = "pilot_x_bb";
inline constexpr const char* kAwmmseParams = "awmmse_params";
inline constexpr const char* kGramWeights = "gram_weights";
inline constexpr const char* kCsiEstimate = "H_RU_hat";

void write_pilots(InterchangeWriter& writer, const PilotBundle& pilots);
PilotBundle read_pilots(const InterchangeReader& reader);

/// Reads awmmse_params [sample, subcarrier, 3K + 1] and gram_weights
/// [sample, subcarrier, 2K]; result[s][n].
std::vector<std::vector<AwmmseParams>> read_params(const InterchangeReader& reader, int num_ues,
                                                   int num_subcarriers);
void write_params(InterchangeWriter& writer, const std::vector<std::vector<AwmmseParams>>& params);

/// Reads a [sample, UE, subcarrier, element] tensor; result[s][k].
std::vector<std::vector<RisUeChannel>> read_channels(const InterchangeReader& reader,
                                                     const std::string& name, int num_ues,
                                                     int num_subcarriers, int num_elements);
void write_channels(InterchangeWriter& writer, const std::string& name,
                    const std::vector<std::vector<RisUeChannel>>& channels);

}  // namespace thzrsma::detail
