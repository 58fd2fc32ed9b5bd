#include "thzrsma/transceiver.hpp"

#include <algorithm>
#include <sstream>

#include "thzrsma/error.hpp"

namespace thzrsma {

CVector RisPhase::diagonal() const {
  CVector d(phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) d(i) = std::polar(1.0, phases(i));
  return d;
}

CMatrix RisPhase::matrix() const { return diagonal().asDiagonal(); }

CVector equivalent_channel(const CMatrix& f_rf, const CMatrix& h_br, const RisPhase& phi,
                           const CVector& h_ru) {
  if (f_rf.rows() != h_br.rows() || h_br.cols() != phi.size() || h_ru.size() != phi.size()) {
    throw DimensionError("equivalent_channel: F_RF, H_BR, Phi and h_RU shapes disagree");
  }
  // Phi^H h = conj(diag) .* h
  const CVector reflected = phi.diagonal().conjugate().cwiseProduct(h_ru);
  return f_rf.adjoint() * (h_br * reflected);
}

EquivalentChannels equivalent_channels(const CMatrix& f_rf, const CMatrix& h_br,
                                       const RisPhase& phi, const std::vector<CVector>& h_ru) {
  if (f_rf.rows() != h_br.rows() || h_br.cols() != phi.size()) {
    throw DimensionError("equivalent_channels: F_RF, H_BR and Phi shapes disagree");
  }
  const CMatrix a = f_rf.adjoint() * h_br * phi.diagonal().conjugate().asDiagonal();
  EquivalentChannels out(f_rf.cols(), static_cast<Eigen::Index>(h_ru.size()));
  for (std::size_t k = 0; k < h_ru.size(); ++k) {
    if (h_ru[k].size() != phi.size()) throw DimensionError("equivalent_channels: h_RU length");
    out.col(static_cast<Eigen::Index>(k)) = a * h_ru[k];
  }
  return out;
}

double sinr_common(const CVector& h_equ, const CMatrix& f_bb, double noise_power) {
  if (f_bb.rows() != h_equ.size() || f_bb.cols() < 1) throw DimensionError("sinr_common: shapes");
  const double signal = std::norm(h_equ.dot(f_bb.col(0)));
  double interference = 0.0;
  for (Eigen::Index i = 1; i < f_bb.cols(); ++i) interference += std::norm(h_equ.dot(f_bb.col(i)));
  return signal / (interference + noise_power);
}

double sinr_private(const CVector& h_equ, const CMatrix& f_bb, int k, double noise_power) {
  if (f_bb.rows() != h_equ.size() || k < 1 || k >= f_bb.cols()) {
    throw DimensionError("sinr_private: shapes or stream index");
  }
  const double signal = std::norm(h_equ.dot(f_bb.col(k)));
  double interference = 0.0;
  for (Eigen::Index i = 1; i < f_bb.cols(); ++i) {
    if (i != k) interference += std::norm(h_equ.dot(f_bb.col(i)));
  }
  return signal / (interference + noise_power);
}

RVector RateReport::mean_user_rate() const { return user_rate.rowwise().mean(); }

RateReport rate_report(const std::vector<EquivalentChannels>& h_equ,
                       const DigitalPrecoder& precoder, double noise_power) {
  if (h_equ.empty() || h_equ.size() != precoder.per_subcarrier.size()) {
    throw DimensionError("rate_report: channel and precoder subcarrier counts differ");
  }
  const int nc = static_cast<int>(h_equ.size());
  const int k_count = static_cast<int>(h_equ.front().cols());
  RateReport r;
  r.num_ues = k_count;
  r.num_subcarriers = nc;
  r.private_rate.resize(k_count, nc);
  r.common_rate.resize(k_count, nc);
  r.common_share.resize(k_count, nc);
  r.user_rate.resize(k_count, nc);
  r.common_rate_min.resize(nc);
  r.worst_user_rate.resize(nc);
  for (int n = 0; n < nc; ++n) {
    const CMatrix& f = precoder.per_subcarrier[static_cast<std::size_t>(n)];
    const EquivalentChannels& h = h_equ[static_cast<std::size_t>(n)];
    if (h.cols() != k_count || f.cols() != k_count + 1 || f.rows() != h.rows()) {
      throw DimensionError("rate_report: subcarrier shapes disagree");
    }
    for (int k = 0; k < k_count; ++k) {
      const CVector hk = h.col(k);
      r.common_rate(k, n) = log2_1p(sinr_common(hk, f, noise_power));
      r.private_rate(k, n) = log2_1p(sinr_private(hk, f, k + 1, noise_power));
    }
    const double rc_min = r.common_rate.col(n).minCoeff();
    r.common_rate_min(n) = rc_min;
    r.common_share.col(n).setConstant(rc_min / k_count);
    r.user_rate.col(n) = r.private_rate.col(n).array() + rc_min / k_count;
    r.worst_user_rate(n) = r.private_rate.col(n).minCoeff() + rc_min;
  }
  r.arwu = r.worst_user_rate.mean();
  return r;
}

std::string ConstraintReport::describe() const {
  std::ostringstream os;
  os << "RIS " << (ris_ok ? "ok" : "FAIL") << " (max violation " << ris_violation << "), analog "
     << (analog_ok ? "ok" : "FAIL") << " (" << analog_violation << "), power "
     << (power_ok ? "ok" : "FAIL") << " (" << power_violation << ")";
  return os.str();
}

ConstraintReport validate_constraints(const CMatrix& phi, const CMatrix& f_rf,
                                      const DigitalPrecoder& f_bb, double tx_power,
                                      double tolerance) {
  ConstraintReport rep;
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      rep.ris_violation = std::max(rep.ris_violation, std::abs(std::abs(phi(i, j)) - target));
    }
  }
  if (phi.rows() != phi.cols()) rep.ris_violation = std::max(rep.ris_violation, 1.0);
  rep.ris_ok = rep.ris_violation <= tolerance;

  if (f_rf.size() > 0) {
    const double target = 1.0 / std::sqrt(static_cast<double>(f_rf.rows()));
    rep.analog_violation = (f_rf.cwiseAbs().array() - target).abs().maxCoeff();
  }
  rep.analog_ok = rep.analog_violation <= tolerance;

  for (const CMatrix& f : f_bb.per_subcarrier) {
    rep.power_violation = std::max(rep.power_violation, f.squaredNorm() - tx_power);
  }
  rep.power_ok = rep.power_violation <= tolerance * std::max(1.0, tx_power);
  return rep;
}

}  // namespace thzrsma
