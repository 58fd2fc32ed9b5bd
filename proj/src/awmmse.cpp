#include "thzrsma/awmmse.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

#include "thzrsma/error.hpp"

namespace thzrsma {

namespace {

void check_shapes(const EquivalentChannels& h_hat, const CMatrix& f_bb) {
  const auto k = h_hat.cols();
  if (h_hat.rows() != k || f_bb.rows() != k || f_bb.cols() != k + 1) {
    throw DimensionError("expected K x K channels and a K x (K + 1) precoder");
  }
}

// Per-UE quantities shared by the MSE, equalizer and rate routines.
struct StreamPowers {
  cdouble gain_common;   // h^H f_c
  cdouble gain_private;  // h^H f_k
  double rest_common;    // everything in D_c except |h^H f_c|^2
  double rest_private;   // everything in D_p except |h^H f_k|^2
};

StreamPowers stream_powers(const EquivalentChannels& h_hat, const CMatrix& f_bb, int k,
                           double noise_power, const CsiErrorModel& error) {
  const int K = static_cast<int>(h_hat.cols());
  const CVector h = h_hat.col(k);
  StreamPowers s{};
  s.gain_common = h.dot(f_bb.col(0));
  s.gain_private = h.dot(f_bb.col(k + 1));
  double interference = 0.0;
  double error_all = 0.0;
  for (int m = 1; m <= K; ++m) {
    const double norm_sq = f_bb.col(m).squaredNorm();
    error_all += norm_sq;
    if (m != k + 1) interference += std::norm(h.dot(f_bb.col(m)));
  }
  const double own = std::norm(s.gain_private);
  const double own_norm = f_bb.col(k + 1).squaredNorm();
  s.rest_common = own + interference + error.sigma_h_sq * error_all + noise_power;
  s.rest_private = interference + error.sigma_h_sq * (error_all - own_norm) + noise_power;
  return s;
}

}  // namespace

MseTerms approx_mse(const EquivalentChannels& h_hat, const CMatrix& f_bb, int k,
                    cdouble e_common, cdouble e_private, double noise_power,
                    const CsiErrorModel& error) {
  check_shapes(h_hat, f_bb);
  const int K = static_cast<int>(h_hat.cols());
  if (k < 0 || k >= K) throw DimensionError("approx_mse: UE index out of range");
  const CVector h = h_hat.col(k);
  double t_private = noise_power;
  double err_common = 0.0;
  double err_private = 0.0;
  for (int m = 1; m <= K; ++m) {
    t_private += std::norm(h.dot(f_bb.col(m)));
    const double norm_sq = f_bb.col(m).squaredNorm();
    err_common += norm_sq;
    if (m != k + 1) err_private += norm_sq;
  }
  const cdouble g_c = h.dot(f_bb.col(0));
  const cdouble g_p = h.dot(f_bb.col(k + 1));
  MseTerms out;
  out.t_private = t_private;
  out.t_common = t_private + std::norm(g_c);
  out.eps_common = std::norm(e_common) * out.t_common - 2.0 * (e_common * g_c).real() + 1.0 +
                   std::norm(e_common) * error.sigma_h_sq * err_common;
  out.eps_private = std::norm(e_private) * out.t_private - 2.0 * (e_private * g_p).real() + 1.0 +
                    std::norm(e_private) * error.sigma_h_sq * err_private;
  return out;
}

Equalizers mmse_equalizers(const EquivalentChannels& h_hat, const CMatrix& f_bb,
                           double noise_power, const CsiErrorModel& error) {
  check_shapes(h_hat, f_bb);
  const int K = static_cast<int>(h_hat.cols());
  Equalizers e{CVector(K), CVector(K)};
  for (int k = 0; k < K; ++k) {
    const StreamPowers s = stream_powers(h_hat, f_bb, k, noise_power, error);
    const double d_c = s.rest_common + std::norm(s.gain_common);
    const double d_p = s.rest_private + std::norm(s.gain_private);
    if (!(d_c > 0.0) || !(d_p > 0.0)) throw NumericalError("mmse_equalizers: zero denominator");
    e.common(k) = std::conj(s.gain_common) / d_c;
    e.priv(k) = std::conj(s.gain_private) / d_p;
  }
  return e;
}

Weights mmse_values(const EquivalentChannels& h_hat, const CMatrix& f_bb, double noise_power,
                    const CsiErrorModel& error) {
  check_shapes(h_hat, f_bb);
  const int K = static_cast<int>(h_hat.cols());
  Weights w{RVector(K), RVector(K)};
  for (int k = 0; k < K; ++k) {
    const StreamPowers s = stream_powers(h_hat, f_bb, k, noise_power, error);
    const double d_c = s.rest_common + std::norm(s.gain_common);
    const double d_p = s.rest_private + std::norm(s.gain_private);
    if (!(d_c > 0.0) || !(d_p > 0.0)) throw NumericalError("mmse_values: zero denominator");
    // 1 - |g|^2 / D written without the cancellation.
    w.common(k) = s.rest_common / d_c;
    w.priv(k) = s.rest_private / d_p;
  }
  return w;
}

Weights optimal_weights(const Weights& mmse) {
  return {mmse.common.cwiseInverse(), mmse.priv.cwiseInverse()};
}

double wmse(double eps, double lambda) { return lambda * eps - std::log2(lambda); }

Weights approx_rates(const EquivalentChannels& h_hat, const CMatrix& f_bb, double noise_power,
                     const CsiErrorModel& error) {
  check_shapes(h_hat, f_bb);
  const int K = static_cast<int>(h_hat.cols());
  Weights r{RVector(K), RVector(K)};
  for (int k = 0; k < K; ++k) {
    const StreamPowers s = stream_powers(h_hat, f_bb, k, noise_power, error);
    r.common(k) = log2_1p(std::norm(s.gain_common) / s.rest_common);
    r.priv(k) = log2_1p(std::norm(s.gain_private) / s.rest_private);
  }
  return r;
}

AwmmseParams awmmse_params(const Equalizers& e, const Weights& lambda, double noise_power,
                           double tx_power, const CsiErrorModel& error, ParamMode mode) {
  const auto K = e.common.size();
  if (e.priv.size() != K || lambda.common.size() != K || lambda.priv.size() != K) {
    throw DimensionError("awmmse_params: equalizer/weight sizes differ");
  }
  if ((lambda.common.array() <= 0.0).any() || (lambda.priv.array() <= 0.0).any()) {
    throw NumericalError("awmmse_params: weights must be positive");
  }
  AwmmseParams p;
  p.a_common = e.common.cwiseProduct(lambda.common.cast<cdouble>());
  p.a_private = e.priv.cwiseProduct(lambda.priv.cast<cdouble>());
  p.gram_common = lambda.common.cwiseProduct(e.common.cwiseAbs2());
  const RVector w_private = lambda.priv.cwiseProduct(e.priv.cwiseAbs2());
  p.gram_private = p.gram_common + w_private;
  const double total = p.gram_private.sum();
  p.b_private.resize(K);
  if (mode == ParamMode::kRepaired) {
    if (!(tx_power > 0.0)) throw ConfigError("awmmse_params: tx_power must be positive");
    p.b_common = noise_power / tx_power * total;
    const double common_sum = p.gram_common.sum();
    const double private_sum = w_private.sum();
    for (Eigen::Index k = 0; k < K; ++k) {
      p.b_private(k) = p.b_common + error.sigma_h_sq * (common_sum + private_sum - w_private(k));
    }
  } else {
    p.b_common = noise_power / static_cast<double>(K) * total;
    const double common_sum = p.gram_common.sum();
    for (Eigen::Index k = 0; k < K; ++k) {
      p.b_private(k) = p.b_common + error.sigma_h_sq * (common_sum - p.gram_common(k));
    }
  }
  return p;
}

CMatrix closed_form_update(const EquivalentChannels& h_hat, const AwmmseParams& params) {
  const int K = static_cast<int>(h_hat.cols());
  if (h_hat.rows() != K || params.num_ues() != K || params.a_private.size() != K ||
      params.b_private.size() != K || params.gram_common.size() != K ||
      params.gram_private.size() != K) {
    throw DimensionError("closed_form_update: parameter sizes differ from K");
  }
  const CMatrix gram_c =
      h_hat * params.gram_common.cast<cdouble>().asDiagonal() * h_hat.adjoint();
  const CMatrix gram_p =
      h_hat * params.gram_private.cast<cdouble>().asDiagonal() * h_hat.adjoint();
  const CMatrix eye = CMatrix::Identity(K, K);
  CMatrix f(K, K + 1);
  const CVector rhs_c = h_hat * params.a_common.conjugate();
  Eigen::PartialPivLU<CMatrix> lu_c(params.b_common * eye + gram_c);
  f.col(0) = lu_c.solve(rhs_c);
  for (int k = 0; k < K; ++k) {
    Eigen::PartialPivLU<CMatrix> lu(params.b_private(k) * eye + gram_p);
    f.col(k + 1) = lu.solve(h_hat.col(k) * std::conj(params.a_private(k)));
  }
  if (!f.allFinite()) throw NumericalError("closed_form_update: singular regularised Gram matrix");
  return f;
}

CMatrix power_projection(const CMatrix& f_bb, double tx_power) {
  const double norm = f_bb.norm();
  if (norm == 0.0) return f_bb;
  return f_bb * (std::min(std::sqrt(tx_power), norm) / norm);
}

CMatrix scale_to_power(const CMatrix& f_bb, double tx_power) {
  const double norm = f_bb.norm();
  if (norm == 0.0) return f_bb;
  return f_bb * (std::sqrt(tx_power) / norm);
}

namespace {

CVector unit(const CVector& v) {
  const double n = v.norm();
  return n > 0.0 ? CVector(v / n) : CVector(v);
}

}  // namespace

CMatrix zf_init(const EquivalentChannels& h_hat, double tx_power) {
  const int K = static_cast<int>(h_hat.cols());
  if (h_hat.rows() != K) throw DimensionError("zf_init: expected K x K channels");
  // Private columns solve h_k^H f_m = delta_km.
  const CMatrix zf = Eigen::CompleteOrthogonalDecomposition<CMatrix>(h_hat.adjoint()).pseudoInverse();
  CMatrix f(K, K + 1);
  f.col(0) = unit(h_hat.rowwise().sum()) * std::sqrt(0.5 * tx_power);
  for (int k = 0; k < K; ++k) {
    f.col(k + 1) = unit(zf.col(k)) * std::sqrt(0.5 * tx_power / K);
  }
  return power_projection(f, tx_power);
}

namespace {

double relaxed_from_mmse(const Weights& mmse) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < mmse.common.size(); ++k) {
    sum += 2.0 + std::log2(mmse.common(k)) + std::log2(mmse.priv(k));
  }
  return sum;
}

}  // namespace

double relaxed_objective(const EquivalentChannels& h_hat, const CMatrix& f_bb,
                         double noise_power, const CsiErrorModel& error) {
  return relaxed_from_mmse(mmse_values(h_hat, f_bb, noise_power, error));
}

double max_objective(const EquivalentChannels& h_hat, const CMatrix& f_bb, double noise_power,
                     const CsiErrorModel& error) {
  const Weights mmse = mmse_values(h_hat, f_bb, noise_power, error);
  return 2.0 + std::log2(mmse.common.maxCoeff()) + std::log2(mmse.priv.maxCoeff());
}

double weighted_mse_quadratic(const EquivalentChannels& h_hat, const CMatrix& f_bb,
                              const Equalizers& e, const Weights& lambda, double noise_power,
                              double tx_power, const CsiErrorModel& error) {
  check_shapes(h_hat, f_bb);
  const double noise = noise_power * f_bb.squaredNorm() / tx_power;
  double sum = 0.0;
  for (int k = 0; k < h_hat.cols(); ++k) {
    const MseTerms t = approx_mse(h_hat, f_bb, k, e.common(k), e.priv(k), noise, error);
    sum += lambda.common(k) * t.eps_common + lambda.priv(k) * t.eps_private;
  }
  return sum;
}

namespace {

// Smoothed max objective at fixed (e, lambda) and its Wirtinger gradient
// with respect to conj(F).
struct SmoothedValue {
  double value = 0.0;
  CMatrix gradient;
};

double log_sum_exp(const RVector& x, double tau, RVector* softmax) {
  const double top = x.maxCoeff();
  const RVector w = ((x.array() - top) / tau).exp();
  const double s = w.sum();
  if (softmax) *softmax = w / s;
  return top + tau * std::log(s);
}

SmoothedValue smoothed_max(const EquivalentChannels& h_hat, const CMatrix& f_bb,
                           const Equalizers& e, const Weights& lambda, double noise_power,
                           const CsiErrorModel& error, double tau, bool with_gradient) {
  const int K = static_cast<int>(h_hat.cols());
  RVector xi_c(K), xi_p(K);
  for (int k = 0; k < K; ++k) {
    const MseTerms t = approx_mse(h_hat, f_bb, k, e.common(k), e.priv(k), noise_power, error);
    xi_c(k) = wmse(t.eps_common, lambda.common(k));
    xi_p(k) = wmse(t.eps_private, lambda.priv(k));
  }
  RVector w_c, w_p;
  SmoothedValue out;
  out.value = log_sum_exp(xi_c, tau, &w_c) + log_sum_exp(xi_p, tau, &w_p);
  if (!with_gradient) return out;
  out.gradient = CMatrix::Zero(K, K + 1);
  const double s2 = error.sigma_h_sq;
  for (int k = 0; k < K; ++k) {
    const CVector h = h_hat.col(k);
    const double wc = w_c(k) * lambda.common(k);
    const double wp = w_p(k) * lambda.priv(k);
    const double ec2 = std::norm(e.common(k));
    const double ep2 = std::norm(e.priv(k));
    for (int m = 0; m <= K; ++m) {
      const CVector f = f_bb.col(m);
      const cdouble proj = h.dot(f);
      CVector g = wc * ec2 * proj * h;
      if (m == 0) g -= wc * std::conj(e.common(k)) * h;
      if (m >= 1) {
        g += wc * ec2 * s2 * f + wp * ep2 * proj * h;
        if (m == k + 1) g -= wp * std::conj(e.priv(k)) * h;
        else g += wp * ep2 * s2 * f;
      }
      out.gradient.col(m) += g;
    }
  }
  return out;
}

CMatrix smoothed_max_step(const EquivalentChannels& h_hat, const CMatrix& f_start,
                          const Equalizers& e, const Weights& lambda, double noise_power,
                          double tx_power, const CsiErrorModel& error, double tau,
                          int inner_steps) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 40;
  CMatrix f = f_start;
  SmoothedValue cur = smoothed_max(h_hat, f, e, lambda, noise_power, error, tau, true);
  const double g0 = cur.gradient.norm();
  if (g0 == 0.0) return f;
  double step = 0.1 * std::sqrt(tx_power) / g0;
  for (int it = 0; it < inner_steps; ++it) {
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      const CMatrix trial = power_projection(f - step * cur.gradient, tx_power);
      const double val =
          smoothed_max(h_hat, trial, e, lambda, noise_power, error, tau, false).value;
      const double decrease = 2.0 * (cur.gradient.adjoint() * (trial - f)).trace().real();
      if (val <= cur.value + kArmijo * decrease) {
        f = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    cur = smoothed_max(h_hat, f, e, lambda, noise_power, error, tau, true);
    step *= 2.0;
  }
  return f;
}

}  // namespace

SubcarrierSolution awmmse_solve_subcarrier(const EquivalentChannels& h_hat, double noise_power,
                                           const CsiErrorModel& error, double tx_power,
                                           const AwmmseOptions& options) {
  if (options.iterations < 1) throw ConfigError("awmmse: iterations must be >= 1");
  if (!(tx_power > 0.0) || !(noise_power > 0.0)) {
    throw ConfigError("awmmse: tx and noise power must be positive");
  }
  if (error.sigma_h_sq < 0.0) throw ConfigError("awmmse: sigma_h_sq must be >= 0");
  const bool relaxed = options.variant == AwmmseVariant::kRelaxedSum;
  auto tracked = [&](const CMatrix& f) {
    return relaxed ? relaxed_objective(h_hat, f, noise_power, error)
                   : max_objective(h_hat, f, noise_power, error);
  };

  SubcarrierSolution sol;
  sol.f_bb = zf_init(h_hat, tx_power);
  double previous = tracked(sol.f_bb);
  sol.trace.objective.push_back(previous);
  for (int it = 0; it < options.iterations; ++it) {
    const Equalizers e = mmse_equalizers(h_hat, sol.f_bb, noise_power, error);
    const Weights lambda = optimal_weights(mmse_values(h_hat, sol.f_bb, noise_power, error));
    if (relaxed) {
      const AwmmseParams p = awmmse_params(e, lambda, noise_power, tx_power, error, options.mode);
      const CMatrix f = closed_form_update(h_hat, p);
      sol.f_bb = options.mode == ParamMode::kRepaired ? scale_to_power(f, tx_power)
                                                      : power_projection(f, tx_power);
    } else {
      const int stage = it / std::max(1, options.temperature_period);
      const double tau = options.temperature * std::pow(options.temperature_decay, stage);
      sol.f_bb = smoothed_max_step(h_hat, sol.f_bb, e, lambda, noise_power, tx_power, error, tau,
                                   options.inner_steps);
    }
    ++sol.trace.iterations_run;
    const double current = tracked(sol.f_bb);
    sol.trace.objective.push_back(current);
    if (relaxed && current > previous + kDescentTolerance) sol.trace.nonmonotone = true;
    const double change = std::abs(current - previous);
    previous = current;
    if (options.tolerance > 0.0 && change < options.tolerance) {
      sol.trace.converged = true;
      break;
    }
  }
  sol.equalizers = mmse_equalizers(h_hat, sol.f_bb, noise_power, error);
  sol.weights = optimal_weights(mmse_values(h_hat, sol.f_bb, noise_power, error));
  sol.params = awmmse_params(sol.equalizers, sol.weights, noise_power, tx_power, error,
                             options.mode);
  if (!sol.f_bb.allFinite()) throw NumericalError("awmmse: non-finite precoder");
  return sol;
}

AwmmseResult awmmse_solve(const std::vector<EquivalentChannels>& h_hat, double noise_power,
                          const CsiErrorModel& error, double tx_power,
                          const AwmmseOptions& options) {
  AwmmseResult out;
  out.precoder.per_subcarrier.reserve(h_hat.size());
  for (const auto& h : h_hat) {
    SubcarrierSolution s = awmmse_solve_subcarrier(h, noise_power, error, tx_power, options);
    out.precoder.per_subcarrier.push_back(std::move(s.f_bb));
    out.traces.push_back(std::move(s.trace));
    out.params.push_back(std::move(s.params));
  }
  return out;
}

namespace {

CMatrix rzf_privates(const EquivalentChannels& h_hat, double noise_power, double tx_power) {
  const int K = static_cast<int>(h_hat.cols());
  if (h_hat.rows() != K) throw DimensionError("rzf: expected K x K channels");
  const CMatrix reg = h_hat.adjoint() * h_hat +
                      (K * noise_power / tx_power) * CMatrix::Identity(K, K);
  return h_hat * reg.ldlt().solve(CMatrix::Identity(K, K));
}

}  // namespace

CMatrix rzf_subcarrier(const EquivalentChannels& h_hat, double noise_power, double tx_power) {
  const int K = static_cast<int>(h_hat.cols());
  CMatrix f = CMatrix::Zero(K, K + 1);
  f.rightCols(K) = scale_to_power(rzf_privates(h_hat, noise_power, tx_power), tx_power);
  return f;
}

DigitalPrecoder rzf_precoder(const std::vector<EquivalentChannels>& h_hat, double noise_power,
                             double tx_power) {
  DigitalPrecoder p;
  for (const auto& h : h_hat) p.per_subcarrier.push_back(rzf_subcarrier(h, noise_power, tx_power));
  return p;
}

CMatrix power_split_subcarrier(const EquivalentChannels& h_hat, double noise_power,
                               double tx_power, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("power split alpha must lie in [0, 1]");
  const int K = static_cast<int>(h_hat.cols());
  CMatrix f = CMatrix::Zero(K, K + 1);
  f.col(0) = unit(h_hat.rowwise().sum()) * std::sqrt(alpha * tx_power);
  if (alpha < 1.0) {
    f.rightCols(K) =
        scale_to_power(rzf_privates(h_hat, noise_power, tx_power), (1.0 - alpha) * tx_power);
  }
  return f;
}

PowerAllocationResult power_allocation_sweep(const std::vector<EquivalentChannels>& h_hat,
                                             const std::vector<EquivalentChannels>& h_true,
                                             double noise_power, double tx_power,
                                             const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("power allocation: empty alpha grid");
  if (h_hat.size() != h_true.size()) throw DimensionError("power allocation: subcarrier mismatch");
  PowerAllocationResult best;
  best.arwu = -std::numeric_limits<double>::infinity();
  for (double alpha : grid) {
    DigitalPrecoder p;
    for (const auto& h : h_hat) {
      p.per_subcarrier.push_back(power_split_subcarrier(h, noise_power, tx_power, alpha));
    }
    const double arwu = rate_report(h_true, p, noise_power).arwu;
    best.grid_arwu.push_back(arwu);
    if (arwu > best.arwu) {
      best.arwu = arwu;
      best.alpha = alpha;
      best.precoder = std::move(p);
    }
  }
  return best;
}

std::vector<double> alpha_grid(double step) {
  if (!(step > 0.0) || step > 1.0) throw ConfigError("alpha grid step must lie in (0, 1]");
  const int n = static_cast<int>(std::floor(1.0 / step + 1e-9));
  std::vector<double> grid;
  for (int i = 0; i <= n; ++i) grid.push_back(std::min(1.0, i * step));
  if (grid.back() < 1.0) grid.push_back(1.0);
  return grid;
}

double estimate_sigma_h_sq(const std::vector<EquivalentChannels>& h_hat,
                           const std::vector<EquivalentChannels>& h_true) {
  if (h_hat.size() != h_true.size() || h_hat.empty()) {
    throw DimensionError("estimate_sigma_h_sq: need matching, non-empty sets");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < h_hat.size(); ++i) {
    if (h_hat[i].rows() != h_true[i].rows() || h_hat[i].cols() != h_true[i].cols()) {
      throw DimensionError("estimate_sigma_h_sq: shape mismatch");
    }
    sum += (h_hat[i] - h_true[i]).squaredNorm();
    count += static_cast<std::size_t>(h_hat[i].size());
  }
  return sum / static_cast<double>(count);
}

}  // namespace thzrsma
