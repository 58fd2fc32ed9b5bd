#pragma once

#include <vector>

#include "thzrsma/transceiver.hpp"
#include "thzrsma/types.hpp"

namespace thzrsma {

/// Gaussian error model of the estimated equivalent CSI: R_e = sigma_H^2 I_K.
struct CsiErrorModel {
  double sigma_h_sq = 0.0;
};

/// How the closed-form precoder parameters are built from (e, lambda).
enum class ParamMode {
  /// Stationarity-exact form: b_c uses sigma_n^2 / P_t and b[k] carries every
  /// CSI-error term of the private MSEs. The F_BB step rescales to full power.
  kRepaired,
  /// The printed form: b_c uses sigma_n^2 / K, b[k] adds only the common
  /// weighted equalizer powers of the other UEs, and the F_BB step uses the
  /// min(sqrt(P_t), ||F||) projection.
  kPaperLiteral,
};

/// Per-UE approximate MSE terms at one subcarrier.
struct MseTerms {
  double eps_common = 0.0;
  double eps_private = 0.0;
  /// Received power incl. the common stream, plus noise.
  double t_common = 0.0;
  /// Received power after SIC, plus noise.
  double t_private = 0.0;
};

struct Equalizers {
  CVector common;
  CVector priv;
};

struct Weights {
  RVector common;
  RVector priv;
};

/// Parameter set A of one subcarrier plus the Gram weights the closed form
/// needs (c_c[m] = lambda_c |e_c|^2, c[m] = lambda_c |e_c|^2 + lambda |e|^2).
struct AwmmseParams {
  CVector a_common;
  CVector a_private;
  double b_common = 0.0;
  RVector b_private;
  RVector gram_common;
  RVector gram_private;

  int num_ues() const { return static_cast<int>(a_common.size()); }
};

/// Approximate MSEs of UE `k` (0-based) for equalizers (e_c, e).
MseTerms approx_mse(const EquivalentChannels& h_hat, const CMatrix& f_bb, int k,
                    cdouble e_common, cdouble e_private, double noise_power,
                    const CsiErrorModel& error);

Equalizers mmse_equalizers(const EquivalentChannels& h_hat, const CMatrix& f_bb,
                           double noise_power, const CsiErrorModel& error);

/// MMSEs at the MMSE equalizers; every entry lies in (0, 1].
Weights mmse_values(const EquivalentChannels& h_hat, const CMatrix& f_bb, double noise_power,
                    const CsiErrorModel& error);

/// lambda = 1 / eps_MMSE.
Weights optimal_weights(const Weights& mmse);

/// Augmented weighted MSE lambda * eps - log2(lambda).
double wmse(double eps, double lambda);

/// Approximate rates R_hat = -log2(eps_MMSE) computed through the SINR form
/// gamma = |f^H h|^2 / (D - |f^H h|^2).
Weights approx_rates(const EquivalentChannels& h_hat, const CMatrix& f_bb, double noise_power,
                     const CsiErrorModel& error);

AwmmseParams awmmse_params(const Equalizers& e, const Weights& lambda, double noise_power,
                           double tx_power, const CsiErrorModel& error,
                           ParamMode mode = ParamMode::kRepaired);

/// Closed-form minimiser of the relaxed sum-WMSE objective for fixed A.
CMatrix closed_form_update(const EquivalentChannels& h_hat, const AwmmseParams& params);

/// Scales F by min(sqrt(P_t), ||F||_F) / ||F||_F; the zero matrix is returned
/// unchanged.
CMatrix power_projection(const CMatrix& f_bb, double tx_power);

/// Scales F to ||F||_F^2 = P_t exactly (zero stays zero).
CMatrix scale_to_power(const CMatrix& f_bb, double tx_power);

/// ZF private columns (unit-norm), normalised-sum common column, power split
/// half to the common stream and half evenly over the private streams.
CMatrix zf_init(const EquivalentChannels& h_hat, double tx_power);

/// Relaxed objective sum_k (xi_c[k] + xi[k]) at the MMSE equalizers and
/// weights of F; equals 2K - sum_k (R_hat_c[k] + R_hat_p[k]).
double relaxed_objective(const EquivalentChannels& h_hat, const CMatrix& f_bb,
                         double noise_power, const CsiErrorModel& error);

/// max_k xi_c[k] + max_k xi[k] at the MMSE equalizers and weights of F.
double max_objective(const EquivalentChannels& h_hat, const CMatrix& f_bb, double noise_power,
                     const CsiErrorModel& error);

/// Sum-WMSE quadratic in F for fixed (e, lambda), with the noise term of the
/// repaired mode's power-normalised reformulation:
/// sum_k lambda_c eps_c + lambda eps, noise sigma_n^2 ||F||^2 / P_t.
/// Its unconstrained minimiser is closed_form_update(awmmse_params(...)).
double weighted_mse_quadratic(const EquivalentChannels& h_hat, const CMatrix& f_bb,
                              const Equalizers& e, const Weights& lambda, double noise_power,
                              double tx_power, const CsiErrorModel& error);

enum class AwmmseVariant { kRelaxedSum, kSmoothedMax };

struct AwmmseOptions {
  AwmmseVariant variant = AwmmseVariant::kRelaxedSum;
  ParamMode mode = ParamMode::kRepaired;
  int iterations = 30;
  /// Stop when the tracked objective changes by less than this; 0 runs all
  /// iterations.
  double tolerance = 1e-6;
  /// Smoothed-max temperature schedule.
  double temperature = 0.05;
  double temperature_decay = 0.5;
  int temperature_period = 5;
  int inner_steps = 40;
};

struct AwmmseTrace {
  /// Tracked objective before each F_BB update (relaxed-sum objective for
  /// kRelaxedSum, max objective for kSmoothedMax), plus the final value.
  std::vector<double> objective;
  int iterations_run = 0;
  bool converged = false;
  /// kRelaxedSum only: the objective increased by more than 1e-8 at some
  /// iteration.
  bool nonmonotone = false;
};

struct SubcarrierSolution {
  CMatrix f_bb;
  Equalizers equalizers;
  Weights weights;
  AwmmseParams params;
  AwmmseTrace trace;
};

inline constexpr double kDescentTolerance = 1e-8;

SubcarrierSolution awmmse_solve_subcarrier(const EquivalentChannels& h_hat, double noise_power,
                                           const CsiErrorModel& error, double tx_power,
                                           const AwmmseOptions& options = {});

struct AwmmseResult {
  DigitalPrecoder precoder;
  std::vector<AwmmseTrace> traces;
  std::vector<AwmmseParams> params;
};

/// Runs the alternating optimisation independently on every subcarrier.
AwmmseResult awmmse_solve(const std::vector<EquivalentChannels>& h_hat, double noise_power,
                          const CsiErrorModel& error, double tx_power,
                          const AwmmseOptions& options = {});

/// Ridge-regularised ZF privates H (H^H H + (K sigma_n^2 / P_t) I)^-1 at full
/// power, zero common column.
CMatrix rzf_subcarrier(const EquivalentChannels& h_hat, double noise_power, double tx_power);
DigitalPrecoder rzf_precoder(const std::vector<EquivalentChannels>& h_hat, double noise_power,
                             double tx_power);

/// Common column = normalised sum of the channels (matched beamforming) with
/// power alpha P_t; privates = RZF with power (1 - alpha) P_t.
CMatrix power_split_subcarrier(const EquivalentChannels& h_hat, double noise_power,
                               double tx_power, double alpha);

struct PowerAllocationResult {
  double alpha = 0.0;
  double arwu = 0.0;
  DigitalPrecoder precoder;
  /// ARWU on the true channels for every grid point, in grid order.
  std::vector<double> grid_arwu;
};

/// Exhaustive search of the common-power fraction alpha on `alpha_grid`,
/// scored by the ARWU on the true channels (the idealistic baseline). Ties
/// keep the first grid point.
PowerAllocationResult power_allocation_sweep(const std::vector<EquivalentChannels>& h_hat,
                                             const std::vector<EquivalentChannels>& h_true,
                                             double noise_power, double tx_power,
                                             const std::vector<double>& alpha_grid);

/// Uniform grid 0, step, ..., 1.
std::vector<double> alpha_grid(double step);

/// Mean |h_hat - h|^2 over every coefficient of every matrix pair.
double estimate_sigma_h_sq(const std::vector<EquivalentChannels>& h_hat,
                           const std::vector<EquivalentChannels>& h_true);

}  // namespace thzrsma
