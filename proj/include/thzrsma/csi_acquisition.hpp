#pragma once

#include <cstdint>
#include <vector>

#include "thzrsma/config.hpp"
#include "thzrsma/geometry_channel.hpp"
#include "thzrsma/types.hpp"

namespace thzrsma {

/// Downlink pilot symbols q = 0..Q-1.
struct PilotBundle {
  /// Q x M_r RIS phases per pilot symbol.
  RMatrix ris_phases;
  /// Q analog pilot phase matrices, each M_b x K.
  std::vector<RMatrix> rf_phases;
  /// x_bb[q] is N_c x K; row n holds the baseband pilot of subcarrier n.
  std::vector<CMatrix> x_bb;

  int num_symbols() const { return static_cast<int>(ris_phases.rows()); }
};

/// Received pilots of one UE. Entry (n, q) is element q of y_p[k, n].
struct ReceivedPilots {
  CMatrix y;
};

/// Throws ConfigError/DimensionError if shapes disagree with the config or a
/// baseband pilot exceeds P_t.
void validate_pilots(const PilotBundle& pilots, const SystemConfig& config);

/// X[n] (Q x M_r) with row q = (Phi_p[q] H_BR[n]^H X_RF[q] x_bb[q, n])^H.
std::vector<CMatrix> build_measurement(const PilotBundle& pilots, const BsRisChannel& h_br,
                                       const SystemConfig& config);

/// y_p[k, n] = X[n] h_RU[k, n] + z, z ~ CN(0, sigma_n^2 I_Q).
ReceivedPilots simulate_pilot_rx(const std::vector<CMatrix>& measurement,
                                 const RisUeChannel& h_ru, double noise_power,
                                 std::uint64_t seed);

/// Per-subcarrier Moore-Penrose estimate h_hat = X[n]^+ y_p[k, n]; singular
/// values below 1e-10 sigma_max are truncated.
RisUeChannel ls_estimate(const ReceivedPilots& received, const std::vector<CMatrix>& measurement);

/// Same estimate from precomputed pseudo-inverses X[n]^+; lets several UEs
/// share one decomposition.
RisUeChannel ls_apply(const ReceivedPilots& received, const std::vector<CMatrix>& pinv);

std::vector<CMatrix> measurement_pinv(const std::vector<CMatrix>& measurement);

/// Pseudo-inverse with relative singular-value cutoff.
CMatrix pseudo_inverse(const CMatrix& m, double relative_tolerance = 1e-10);

/// h + CN(0, sigma_sq) i.i.d. per coefficient.
CMatrix inject_gaussian_csi_error(const CMatrix& h, double sigma_sq, std::uint64_t seed);

/// (1/K) sum_k ||H_hat[k] - H[k]||_F^2 / ||H[k]||_F^2.
double nmse(const std::vector<RisUeChannel>& estimate, const std::vector<RisUeChannel>& truth);
double nmse(const std::vector<CMatrix>& estimate, const std::vector<CMatrix>& truth);

enum class PilotDesign {
  /// Random RIS phases per symbol, MF analog pilots, x_bb = sqrt(P_t) e_{q mod K}.
  kRandom,
  /// DFT RIS phases 2 pi q j / M_r, MF analog pilots, x_bb = sqrt(P_t / K) 1.
  kDft,
};

PilotBundle default_pilots(const SystemConfig& config, const CMatrix& f_rf, int num_symbols,
                           PilotDesign design, std::uint64_t seed);

}  // namespace thzrsma
