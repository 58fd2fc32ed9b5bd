#include "thzrsma/analog_mf.hpp"

#include <cmath>
#include <limits>

#include "thzrsma/error.hpp"

namespace thzrsma {

int central_element_index(int subarray, int elements_per_subarray) {
  // 1-based (k - 0.5) * M_sub with k = subarray + 1, rounded half up, >= 1.
  const double one_based = (subarray + 0.5) * elements_per_subarray;
  const int idx = std::max(1, static_cast<int>(std::floor(one_based + 0.5)));
  return idx - 1;
}

SubarrayPhaseMatrix subarray_phases(const BsRisChannel& h_br, const SystemConfig& config) {
  if (h_br.num_subcarriers() != config.num_subcarriers) {
    throw DimensionError("subarray_phases: H_BR subcarrier count differs from config");
  }
  const CMatrix& h = h_br[central_subcarrier(config)];
  const int k_count = config.num_subarrays();
  const int m_sub = config.elements_per_subarray();
  if (h.rows() != config.num_elements() || h.cols() != config.num_elements()) {
    throw DimensionError("subarray_phases: H_BR shape differs from config");
  }
  SubarrayPhaseMatrix out;
  out.theta.resize(k_count, k_count);
  for (int k1 = 0; k1 < k_count; ++k1) {
    const int row = central_element_index(k1, m_sub);
    for (int k2 = 0; k2 < k_count; ++k2) {
      const int col = central_element_index(k2, m_sub);
      out.theta(k1, k2) = std::arg(h(row, col));
    }
  }
  return out;
}

CMatrix mf_analog_precoder(const SubarrayPhaseMatrix& theta, const SystemConfig& config) {
  const int k_count = config.num_subarrays();
  if (theta.size() != k_count || theta.theta.cols() != k_count) {
    throw DimensionError("mf_analog_precoder: theta must be K x K");
  }
  const int m_sub = config.elements_per_subarray();
  const int mb = config.num_elements();
  const double scale = 1.0 / std::sqrt(static_cast<double>(mb));
  CMatrix f(mb, k_count);
  for (int k1 = 0; k1 < k_count; ++k1) {
    for (int k2 = 0; k2 < k_count; ++k2) {
      f.block(k1 * m_sub, k2, m_sub, 1).setConstant(std::polar(scale, theta.theta(k1, k2)));
    }
  }
  return f;
}

CMatrix subarray_correlation(const SubarrayPhaseMatrix& theta) {
  const int k_count = theta.size();
  CMatrix s = CMatrix::Zero(k_count, k_count);
  for (int a = 0; a < k_count; ++a) {
    for (int b = 0; b < k_count; ++b) {
      cdouble acc{0.0, 0.0};
      for (int k1 = 0; k1 < k_count; ++k1) {
        acc += std::polar(1.0, theta.theta(k1, b) - theta.theta(k1, a));
      }
      s(a, b) = acc / static_cast<double>(k_count);
    }
  }
  return s;
}

double orthogonality_residual(const SubarrayPhaseMatrix& theta) {
  const CMatrix s = subarray_correlation(theta);
  double worst = 0.0;
  for (Eigen::Index a = 0; a < s.rows(); ++a) {
    for (Eigen::Index b = 0; b < s.cols(); ++b) {
      if (a != b) worst = std::max(worst, std::abs(s(a, b)));
    }
  }
  return worst;
}

CMatrix effective_subarray_channel(const CMatrix& f_rf, const CMatrix& h_br,
                                   const SystemConfig& config) {
  const int k_count = config.num_subarrays();
  const int m_sub = config.elements_per_subarray();
  if (h_br.cols() != config.num_elements() || f_rf.rows() != h_br.rows()) {
    throw DimensionError("effective_subarray_channel: shapes");
  }
  CMatrix collapse = CMatrix::Zero(h_br.cols(), k_count);
  const double w = 1.0 / std::sqrt(static_cast<double>(m_sub));
  for (int k = 0; k < k_count; ++k) collapse.block(k * m_sub, k, m_sub, 1).setConstant(w);
  return f_rf.adjoint() * h_br * collapse;
}

double condition_number(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  const RVector& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

}  // namespace thzrsma
