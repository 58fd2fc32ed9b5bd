#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "thzrsma/analog_mf.hpp"
#include "thzrsma/config.hpp"
#include "thzrsma/geometry_channel.hpp"
#include "thzrsma/ris_control.hpp"
#include "thzrsma/transceiver.hpp"
#include "thzrsma/types.hpp"

namespace testsupport {

using thzrsma::cdouble;
using thzrsma::CMatrix;
using thzrsma::CVector;

inline CMatrix random_cmatrix(int rows, int cols, std::mt19937_64& rng, double variance = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  CMatrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = cdouble(n(rng), n(rng));
  }
  return m;
}

inline CMatrix random_precoder(int k, std::mt19937_64& rng, double power) {
  CMatrix f = random_cmatrix(k, k + 1, rng);
  return f * std::sqrt(power) / f.norm();
}

/// Equivalent channels of a random desk-scale drop: LoS geometry, random UE
/// positions, beam-aligned RIS and MF analog precoder. One K x K matrix per
/// subcarrier.
struct DeskDrop {
  thzrsma::SystemConfig config;
  std::vector<CMatrix> h_equ;
};

inline DeskDrop desk_drop(std::uint64_t seed,
                          thzrsma::SystemConfig config = thzrsma::desk_preset()) {
  using namespace thzrsma;
  const ArrayPair arrays = build_geometry(config);
  const BsRisChannel h_br = gen_bs_ris_channel(config, arrays.bs, arrays.ris);
  const UePlacement ues = sample_ue_positions(config, seed);
  const std::vector<RisUeChannel> h_ru = gen_ris_ue_channel_los(config, arrays.ris, ues);
  const CMatrix f_rf = mf_analog_precoder(subarray_phases(h_br, config), config);
  const RisPhase phi = beam_alignment_phase(h_ru, config).phase;
  DeskDrop drop{config, {}};
  for (int n = 0; n < config.num_subcarriers; ++n) {
    std::vector<CVector> per_ue;
    for (const auto& ch : h_ru) per_ue.push_back(ch.at(n));
    drop.h_equ.push_back(equivalent_channels(f_rf, h_br[n], phi, per_ue));
  }
  return drop;
}

}  // namespace testsupport
