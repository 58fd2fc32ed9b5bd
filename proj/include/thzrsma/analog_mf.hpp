#pragma once

#include "thzrsma/config.hpp"
#include "thzrsma/geometry_channel.hpp"
#include "thzrsma/types.hpp"

namespace thzrsma {

/// K x K phases theta[k1, k2] between BS subarray k1 and RIS subarray k2.
struct SubarrayPhaseMatrix {
  RMatrix theta;

  int size() const { return static_cast<int>(theta.rows()); }
};

/// 0-based index of the element used as the phase reference of subarray k
/// (0-based): round((k + 0.5) * M_sub) - 1, i.e. the 1-based (k - 0.5) M_sub rule.
int central_element_index(int subarray, int elements_per_subarray);

/// Phases of H_BR at the central subcarrier, sampled at the reference element
/// of every (BS subarray, RIS subarray) pair.
SubarrayPhaseMatrix subarray_phases(const BsRisChannel& h_br, const SystemConfig& config);

/// Matched-filter analog precoder: the rows of BS subarray k1 in column k2 are
/// exp(j theta[k1, k2]) / sqrt(M_b).
CMatrix mf_analog_precoder(const SubarrayPhaseMatrix& theta, const SystemConfig& config);

/// max over a != b of |(1/K) sum_k1 exp(j (theta[k1, b] - theta[k1, a]))|.
double orthogonality_residual(const SubarrayPhaseMatrix& theta);

/// K x K matrix S[a, b] = (1/K) sum_k1 exp(-j theta[k1, a]) exp(j theta[k1, b]).
CMatrix subarray_correlation(const SubarrayPhaseMatrix& theta);

/// F_RF^H H_BR[n] collapsed onto RIS subarrays with normalised indicator
/// columns; K x K.
CMatrix effective_subarray_channel(const CMatrix& f_rf, const CMatrix& h_br,
                                   const SystemConfig& config);

/// Ratio of largest to smallest singular value.
double condition_number(const CMatrix& m);

}  // namespace thzrsma
