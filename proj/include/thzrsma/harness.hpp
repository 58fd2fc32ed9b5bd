#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "thzrsma/awmmse.hpp"
#include "thzrsma/config.hpp"
#include "thzrsma/csi_acquisition.hpp"

namespace thzrsma {

enum class ChannelMode { kLos, kMultipath };
enum class RisDesign { kBeamAlign, kExternal };
enum class DigitalScheme { kAwmmseRsma, kRzfSdma, kPowerAllocRsma, kExternal };
/// How the BS obtains h_hat_RU.
enum class CsiModel { kPerfect, kGaussian, kLs, kExternal };
/// Where the Gaussian error level is referenced: relative to h_RU itself, or
/// mapped so the equivalent channel sees the stated per-coefficient NMSE.
enum class ErrorDomain { kRisUe, kEquivalent };
enum class SweepVariable { kTxPowerDbm, kCsiErrorNmse, kSigmaHSq, kPilots, kBandwidthHz };

const char* scheme_name(DigitalScheme scheme);
const char* sweep_variable_name(SweepVariable variable);

struct CsiSpec {
  CsiModel model = CsiModel::kPerfect;
  double error_nmse = 0.0;
  ErrorDomain domain = ErrorDomain::kEquivalent;
  /// Absolute equivalent-domain error variance; overrides error_nmse when set.
  std::optional<double> sigma_h_sq;
  /// Pilot symbols Q for the LS model; 0 means Q = M_r.
  int pilots = 0;
  PilotDesign pilot_design = PilotDesign::kDft;
  /// Independent draws used to calibrate the solver's sigma_H^2.
  int calibration_draws = 32;
};

struct ScenarioSpec {
  std::string preset = "desk";
  SystemConfig config = desk_preset();
  ChannelMode channel_mode = ChannelMode::kLos;
  RisDesign ris_design = RisDesign::kBeamAlign;
  std::vector<DigitalScheme> schemes{DigitalScheme::kAwmmseRsma, DigitalScheme::kRzfSdma};
  AwmmseOptions awmmse;
  double alpha_step = 0.05;
  CsiSpec csi;
  SweepVariable sweep_variable = SweepVariable::kTxPowerDbm;
  std::vector<double> sweep_values{40.0};
  int trials = 1;
  std::uint64_t seed = 1;
  /// Worker threads; 0 picks the hardware concurrency.
  int threads = 1;
  /// Directory of externally produced artifacts (phases, params, CSI).
  std::string artifacts_dir;
  /// Dataset directory whose test split supplies the true channels.
  std::string dataset_dir;

  static ScenarioSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError.
  void validate() const;
  /// Applies a dotted-path override such as "config.tx_power_dbm=30".
  void set(const std::string& key, const std::string& value);
};

ScenarioSpec load_scenario(const std::filesystem::path& path);

inline constexpr int kQuantileCount = 101;

struct SchemeStats {
  std::string scheme;
  double rw_mean = 0.0;
  double rw_std = 0.0;
  /// Quantiles 0%, 1%, ..., 100% of the per-UE rates (averaged over
  /// subcarriers) pooled over trials.
  std::vector<double> user_rate_quantiles;
  /// AWMMSE only: trials whose relaxed objective increased.
  int nonmonotone_trials = 0;
};

struct ResultRow {
  double x = 0.0;
  double csi_nmse_mean = 0.0;
  double csi_nmse_std = 0.0;
  /// sigma_H^2 handed to the AWMMSE solver.
  double sigma_h_sq = 0.0;
  std::vector<SchemeStats> schemes;
};

struct ResultTable {
  std::string sweep_variable;
  std::vector<std::string> schemes;
  std::vector<ResultRow> rows;
  nlohmann::json metadata;
};

/// Per-trial observation point: the channels used to score rates and the
/// true/estimated equivalent channels of the same trial.
struct TrialProbe {
  std::size_t row = 0;
  int trial = 0;
  const std::vector<EquivalentChannels>* evaluated = nullptr;
  const std::vector<EquivalentChannels>* truth = nullptr;
  const std::vector<EquivalentChannels>* estimate = nullptr;
};

struct RunHooks {
  /// Called from worker threads; must be thread-safe.
  std::function<void(const TrialProbe&)> on_trial;
};

ResultTable run_scenario(const ScenarioSpec& spec, const RunHooks& hooks = {});

struct SplitSizes {
  std::size_t train = 2048;
  std::size_t validation = 256;
  std::size_t test = 256;
};

/// Writes H_BR, the three H_RU splits and UE positions in the interchange format.
void export_dataset(const ScenarioSpec& spec, const SplitSizes& splits,
                    const std::filesystem::path& dir);

/// Evaluates externally produced artifacts on the test split of a dataset.
/// Uses `H_RU_hat` (reconstructed CSI), `ris_phases` and `awmmse_params`
/// tensors when the spec asks for them.
ResultTable eval_external(const ScenarioSpec& spec, const std::filesystem::path& dataset_dir,
                          const std::filesystem::path& artifacts_dir);

enum OutputFormat : unsigned {
  kFormatCsv = 1u,
  kFormatPlot = 2u,
  kFormatCdf = 4u,
  kFormatMeta = 8u,
  kFormatAll = 15u,
};

/// Column header: sweep_value,csi_nmse_mean,csi_nmse_std,sigma_h_sq, then
/// <scheme>_rw_mean,<scheme>_rw_std for each scheme.
std::string results_csv(const ResultTable& table);
std::string plot_data(const ResultTable& table, std::size_t scheme_index);
std::string cdf_csv(const ResultTable& table, std::size_t scheme_index);

/// Writes results.csv, plot_<scheme>.dat, cdf_<scheme>.csv and meta.json.
std::vector<std::filesystem::path> emit_outputs(const ResultTable& table,
                                                const std::filesystem::path& dir,
                                                unsigned formats = kFormatAll);

/// Validates artifacts against the spec's config (pilot constraints, phase
/// counts, parameter shapes). Returns a human-readable summary.
std::string validate_artifacts(const ScenarioSpec& spec, const std::filesystem::path& dir);

std::string version_string();

}  // namespace thzrsma
