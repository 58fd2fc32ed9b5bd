#pragma once

#include <vector>

#include "thzrsma/config.hpp"
#include "thzrsma/geometry_channel.hpp"
#include "thzrsma/transceiver.hpp"

namespace thzrsma {

class InterchangeReader;
class InterchangeWriter;

struct BeamAlignment {
  RisPhase phase;
  /// Number of zero-magnitude channel entries that were mapped to phase 0.
  int zero_entries = 0;
};

/// RIS subarray k reflects towards UE k: its diagonal block takes the
/// element-wise phase of h_hat_RU[k] at the central subcarrier.
BeamAlignment beam_alignment_phase(const std::vector<RisUeChannel>& h_ru_hat,
                                   const SystemConfig& config);

RisPhase phases_to_ris_matrix(const RVector& angles);

/// Tensor name used for RIS phases in the interchange format, axes
/// [sample, element].
inline constexpr const char* kRisPhasesTensor = "ris_phases";

/// Reads sample `sample` of the `ris_phases` tensor; throws FormatError when
/// the element count differs from `expected_elements`.
RisPhase load_external_phases(const InterchangeReader& reader, int sample,
                              int expected_elements);

void save_phases(InterchangeWriter& writer, const std::vector<RisPhase>& phases);

}  // namespace thzrsma
