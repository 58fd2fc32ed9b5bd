#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thzrsma/types.hpp"

namespace thzrsma {

/// RIS reflection phases; Phi = diag(exp(j * phases)).
struct RisPhase {
  RVector phases;

  int size() const { return static_cast<int>(phases.size()); }
  /// Diagonal entries exp(j phi_m).
  CVector diagonal() const;
  CMatrix matrix() const;
};

/// Digital precoders of all subcarriers. Each matrix is K x (K + 1); column 0
/// is the common stream, column k (1..K) the private stream of UE k.
struct DigitalPrecoder {
  std::vector<CMatrix> per_subcarrier;
};

/// Equivalent baseband channels of one subcarrier, K x K: column k is
/// h_equ[k, n] of UE k.
using EquivalentChannels = CMatrix;

/// h_equ = F_RF^H H_BR Phi^H h_RU.
CVector equivalent_channel(const CMatrix& f_rf, const CMatrix& h_br, const RisPhase& phi,
                           const CVector& h_ru);

/// Stacks the equivalent channels of all UEs at one subcarrier. `h_ru[k]` is
/// the channel vector of UE k at that subcarrier.
EquivalentChannels equivalent_channels(const CMatrix& f_rf, const CMatrix& h_br,
                                       const RisPhase& phi, const std::vector<CVector>& h_ru);

/// Common-stream SINR: all private streams are interference.
double sinr_common(const CVector& h_equ, const CMatrix& f_bb, double noise_power);

/// Private-stream SINR of UE `k` (1-based column index) after SIC of the
/// common stream.
double sinr_private(const CVector& h_equ, const CMatrix& f_bb, int k, double noise_power);

struct RateReport {
  int num_ues = 0;
  int num_subcarriers = 0;
  /// K x N_c matrices.
  RMatrix private_rate;
  RMatrix common_rate;
  /// Common share C[k, n] = min_k R_c[k, n] / K.
  RMatrix common_share;
  /// R[k, n] = R_p[k, n] + C[k, n].
  RMatrix user_rate;
  /// min_k R_c[k, n] per subcarrier.
  RVector common_rate_min;
  /// ARWU per subcarrier: min_k R_p + min_k R_c.
  RVector worst_user_rate;
  /// Mean of worst_user_rate over subcarriers.
  double arwu = 0.0;

  /// Per-UE rate averaged over subcarriers.
  RVector mean_user_rate() const;
};

/// Evaluates the RSMA rates. `h_equ[n]` is the K x K channel matrix of
/// subcarrier n, `precoder.per_subcarrier[n]` its K x (K + 1) precoder.
RateReport rate_report(const std::vector<EquivalentChannels>& h_equ,
                       const DigitalPrecoder& precoder, double noise_power);

struct ConstraintReport {
  bool ris_ok = true;
  bool analog_ok = true;
  bool power_ok = true;
  double ris_violation = 0.0;
  double analog_violation = 0.0;
  double power_violation = 0.0;

  bool ok() const { return ris_ok && analog_ok && power_ok; }
  std::string describe() const;
};

inline constexpr double kConstraintTolerance = 1e-9;

/// Checks the three precoding constraints: unit-modulus diagonal Phi,
/// |F_RF[i, j]| = 1 / sqrt(M_b) and ||F_BB[n]||_F^2 <= P_t.
ConstraintReport validate_constraints(const CMatrix& phi, const CMatrix& f_rf,
                                      const DigitalPrecoder& f_bb, double tx_power,
                                      double tolerance = kConstraintTolerance);

}  // namespace thzrsma
