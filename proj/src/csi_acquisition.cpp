#include "thzrsma/csi_acquisition.hpp"

#include <random>

#include "thzrsma/error.hpp"
#include "thzrsma/transceiver.hpp"

namespace thzrsma {

void validate_pilots(const PilotBundle& pilots, const SystemConfig& config) {
  const int q_count = pilots.num_symbols();
  const int m = config.num_elements();
  const int k_count = config.num_subarrays();
  if (q_count < 1) throw ConfigError("pilots: need at least one symbol");
  if (pilots.ris_phases.cols() != m) throw DimensionError("pilots: RIS phases need M_r columns");
  if (static_cast<int>(pilots.rf_phases.size()) != q_count ||
      static_cast<int>(pilots.x_bb.size()) != q_count) {
    throw DimensionError("pilots: RF phases and baseband pilots need one entry per symbol");
  }
  if (!pilots.ris_phases.allFinite()) throw ConfigError("pilots: non-finite RIS phase");
  // Slack covers float32 rounding of pilots read back from the interchange format.
  const double limit = config.tx_power_w() * (1.0 + 1e-6);
  for (int q = 0; q < q_count; ++q) {
    const RMatrix& rf = pilots.rf_phases[static_cast<std::size_t>(q)];
    const CMatrix& x = pilots.x_bb[static_cast<std::size_t>(q)];
    if (rf.rows() != m || rf.cols() != k_count) throw DimensionError("pilots: RF phases need M_b x K");
    if (x.rows() != config.num_subcarriers || x.cols() != k_count) {
      throw DimensionError("pilots: baseband pilots need N_c x K");
    }
    if (!rf.allFinite() || !x.allFinite()) throw ConfigError("pilots: non-finite entry");
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
      if (x.row(n).squaredNorm() > limit) {
        throw ConfigError("pilots: baseband pilot of symbol " + std::to_string(q) +
                          " exceeds the transmit power");
      }
    }
  }
}

std::vector<CMatrix> build_measurement(const PilotBundle& pilots, const BsRisChannel& h_br,
                                       const SystemConfig& config) {
  validate_pilots(pilots, config);
  if (h_br.num_subcarriers() != config.num_subcarriers) {
    throw DimensionError("build_measurement: H_BR subcarrier count");
  }
  const int q_count = pilots.num_symbols();
  const int m = config.num_elements();
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  std::vector<CMatrix> x_rf(static_cast<std::size_t>(q_count));
  std::vector<CVector> phi(static_cast<std::size_t>(q_count));
  for (int q = 0; q < q_count; ++q) {
    const RMatrix& rf = pilots.rf_phases[static_cast<std::size_t>(q)];
    x_rf[static_cast<std::size_t>(q)] =
        rf.unaryExpr([scale](double a) { return std::polar(scale, a); });
    phi[static_cast<std::size_t>(q)] = RisPhase{pilots.ris_phases.row(q).transpose()}.diagonal();
  }
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(config.num_subcarriers));
  for (int n = 0; n < config.num_subcarriers; ++n) {
    const CMatrix& h = h_br[n];
    if (h.rows() != m || h.cols() != m) throw DimensionError("build_measurement: H_BR shape");
    CMatrix x(q_count, m);
    for (int q = 0; q < q_count; ++q) {
      const auto qi = static_cast<std::size_t>(q);
      const CVector beam = x_rf[qi] * pilots.x_bb[qi].row(n).transpose();
      const CVector v = phi[qi].cwiseProduct(h.adjoint() * beam);
      x.row(q) = v.adjoint();
    }
    out.push_back(std::move(x));
  }
  return out;
}

ReceivedPilots simulate_pilot_rx(const std::vector<CMatrix>& measurement,
                                 const RisUeChannel& h_ru, double noise_power,
                                 std::uint64_t seed) {
  const int n_count = static_cast<int>(measurement.size());
  if (n_count != h_ru.num_subcarriers()) throw DimensionError("simulate_pilot_rx: subcarriers");
  if (noise_power < 0.0) throw ConfigError("simulate_pilot_rx: negative noise power");
  const Eigen::Index q_count = n_count ? measurement.front().rows() : 0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(noise_power / 2.0));
  ReceivedPilots out{CMatrix(n_count, q_count)};
  for (int n = 0; n < n_count; ++n) {
    const CMatrix& x = measurement[static_cast<std::size_t>(n)];
    if (x.rows() != q_count || x.cols() != h_ru.num_elements()) {
      throw DimensionError("simulate_pilot_rx: measurement shape");
    }
    const CVector clean = x * h_ru.at(n);
    for (Eigen::Index q = 0; q < q_count; ++q) {
      const double re = normal(rng);
      const double im = normal(rng);
      out.y(n, q) = clean(q) + cdouble(re, im);
    }
  }
  return out;
}

CMatrix pseudo_inverse(const CMatrix& m, double relative_tolerance) {
  Eigen::BDCSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& s = svd.singularValues();
  const double cutoff = s.size() ? relative_tolerance * s(0) : 0.0;
  RVector inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) > cutoff && s(i) > 0.0 ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.cast<cdouble>().asDiagonal() * svd.matrixU().adjoint();
}

std::vector<CMatrix> measurement_pinv(const std::vector<CMatrix>& measurement) {
  std::vector<CMatrix> out;
  out.reserve(measurement.size());
  for (const CMatrix& x : measurement) out.push_back(pseudo_inverse(x));
  return out;
}

RisUeChannel ls_apply(const ReceivedPilots& received, const std::vector<CMatrix>& pinv) {
  const auto n_count = static_cast<Eigen::Index>(pinv.size());
  if (received.y.rows() != n_count) throw DimensionError("ls_estimate: subcarrier count");
  if (n_count == 0) return {};
  const Eigen::Index m = pinv.front().rows();
  RisUeChannel out;
  out.h.resize(n_count, m);
  for (Eigen::Index n = 0; n < n_count; ++n) {
    const CMatrix& p = pinv[static_cast<std::size_t>(n)];
    if (p.cols() != received.y.cols() || p.rows() != m) {
      throw DimensionError("ls_estimate: pilot count differs from measurement");
    }
    out.h.row(n) = (p * received.y.row(n).transpose()).transpose();
  }
  return out;
}

RisUeChannel ls_estimate(const ReceivedPilots& received, const std::vector<CMatrix>& measurement) {
  return ls_apply(received, measurement_pinv(measurement));
}

CMatrix inject_gaussian_csi_error(const CMatrix& h, double sigma_sq, std::uint64_t seed) {
  if (sigma_sq < 0.0) throw ConfigError("CSI error variance must be >= 0");
  if (sigma_sq == 0.0) return h;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma_sq / 2.0));
  CMatrix out = h;
  // Column-major traversal fixes the draw order.
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(i, j) += cdouble(re, im);
    }
  }
  return out;
}

double nmse(const std::vector<CMatrix>& estimate, const std::vector<CMatrix>& truth) {
  if (estimate.size() != truth.size() || truth.empty()) {
    throw DimensionError("nmse: need matching, non-empty sets");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (estimate[k].rows() != truth[k].rows() || estimate[k].cols() != truth[k].cols()) {
      throw DimensionError("nmse: shape mismatch");
    }
    const double denom = truth[k].squaredNorm();
    if (denom == 0.0) throw NumericalError("nmse: zero reference channel");
    sum += (estimate[k] - truth[k]).squaredNorm() / denom;
  }
  return sum / static_cast<double>(truth.size());
}

double nmse(const std::vector<RisUeChannel>& estimate, const std::vector<RisUeChannel>& truth) {
  std::vector<CMatrix> a, b;
  for (const auto& e : estimate) a.push_back(e.h);
  for (const auto& t : truth) b.push_back(t.h);
  return nmse(a, b);
}

PilotBundle default_pilots(const SystemConfig& config, const CMatrix& f_rf, int num_symbols,
                           PilotDesign design, std::uint64_t seed) {
  if (num_symbols < 1) throw ConfigError("pilots: need at least one symbol");
  const int m = config.num_elements();
  const int k_count = config.num_subarrays();
  if (f_rf.rows() != m || f_rf.cols() != k_count) throw DimensionError("pilots: F_RF shape");
  const double p = config.tx_power_w();
  PilotBundle out;
  out.ris_phases.resize(num_symbols, m);
  const RMatrix rf = f_rf.unaryExpr([](cdouble v) { return std::arg(v); });
  if (design == PilotDesign::kRandom) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    for (int q = 0; q < num_symbols; ++q) {
      for (int j = 0; j < m; ++j) out.ris_phases(q, j) = angle(rng);
    }
  } else {
    for (int q = 0; q < num_symbols; ++q) {
      for (int j = 0; j < m; ++j) {
        // Reduce q * j mod M_r before scaling to keep the angle small.
        const long long r = (static_cast<long long>(q) * j) % m;
        out.ris_phases(q, j) = 2.0 * kPi * static_cast<double>(r) / m;
      }
    }
  }
  for (int q = 0; q < num_symbols; ++q) {
    out.rf_phases.push_back(rf);
    CMatrix x = CMatrix::Zero(config.num_subcarriers, k_count);
    if (design == PilotDesign::kRandom) {
      x.col(q % k_count).setConstant(std::sqrt(p));
    } else {
      x.setConstant(std::sqrt(p / k_count));
    }
    out.x_bb.push_back(std::move(x));
  }
  return out;
}

}  // namespace thzrsma
