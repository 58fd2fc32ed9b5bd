#include "thzrsma/ris_control.hpp"

#include "thzrsma/error.hpp"
#include "thzrsma/interchange.hpp"

namespace thzrsma {

BeamAlignment beam_alignment_phase(const std::vector<RisUeChannel>& h_ru_hat,
                                   const SystemConfig& config) {
  const int k_count = config.num_subarrays();
  const int m_sub = config.elements_per_subarray();
  if (static_cast<int>(h_ru_hat.size()) != k_count) {
    throw DimensionError("beam_alignment_phase: need one channel per RIS subarray");
  }
  const int n = central_subcarrier(config);
  BeamAlignment out;
  out.phase.phases = RVector::Zero(config.num_elements());
  for (int k = 0; k < k_count; ++k) {
    const RisUeChannel& ch = h_ru_hat[static_cast<std::size_t>(k)];
    if (ch.num_elements() != config.num_elements() || ch.num_subcarriers() <= n) {
      throw DimensionError("beam_alignment_phase: channel shape differs from config");
    }
    for (int j = k * m_sub; j < (k + 1) * m_sub; ++j) {
      const cdouble v = ch.h(n, j);
      if (std::abs(v) == 0.0) {
        ++out.zero_entries;
        continue;
      }
      out.phase.phases(j) = std::arg(v);
    }
  }
  return out;
}

RisPhase phases_to_ris_matrix(const RVector& angles) { return RisPhase{angles}; }

RisPhase load_external_phases(const InterchangeReader& reader, int sample, int expected_elements) {
  const TensorInfo& info = reader.info(kRisPhasesTensor);
  if (info.shape.size() != 2) throw FormatError("ris_phases must have axes [sample, element]");
  if (static_cast<int>(info.shape[1]) != expected_elements) {
    throw FormatError("ris_phases: expected " + std::to_string(expected_elements) +
                      " elements, found " + std::to_string(info.shape[1]));
  }
  if (sample < 0 || static_cast<std::size_t>(sample) >= info.shape[0]) {
    throw FormatError("ris_phases: sample " + std::to_string(sample) + " out of range");
  }
  const auto data = reader.real(kRisPhasesTensor);
  RVector phases(expected_elements);
  const std::size_t offset = static_cast<std::size_t>(sample) * info.shape[1];
  for (int j = 0; j < expected_elements; ++j) {
    const double v = data[offset + static_cast<std::size_t>(j)];
    if (!std::isfinite(v)) throw FormatError("ris_phases: non-finite phase");
    phases(j) = v;
  }
  return RisPhase{phases};
}

void save_phases(InterchangeWriter& writer, const std::vector<RisPhase>& phases) {
  if (phases.empty()) throw DimensionError("save_phases: nothing to write");
  const auto m = static_cast<std::size_t>(phases.front().size());
  std::vector<double> flat;
  flat.reserve(phases.size() * m);
  for (const RisPhase& p : phases) {
    if (static_cast<std::size_t>(p.size()) != m) throw DimensionError("save_phases: ragged input");
    flat.insert(flat.end(), p.phases.data(), p.phases.data() + p.size());
  }
  writer.add_real(kRisPhasesTensor, {phases.size(), m}, {"sample", "element"}, flat);
}

}  // namespace thzrsma
