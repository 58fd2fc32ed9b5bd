#pragma once

#include <cstdint>
#include <vector>

#include "thzrsma/config.hpp"
#include "thzrsma/types.hpp"

namespace thzrsma {

enum class ArrayRole { kBs, kRis };

/// Planar array on a yz-plane. Elements are stored subarray by subarray;
/// subarray k = ky + K_y * kz, element m = my + M_y * mz inside it.
struct ArrayGeometry {
  ArrayRole role = ArrayRole::kBs;
  int num_subarrays = 0;
  int elements_per_subarray = 0;
  std::vector<Vec3> element_positions;
  std::vector<Vec3> subarray_centers;

  int num_elements() const { return static_cast<int>(element_positions.size()); }
  int subarray_of(int element) const { return element / elements_per_subarray; }
};

struct UePlacement {
  std::vector<Vec3> positions;
};

/// H_BR[n], M_b x M_r per subcarrier.
struct BsRisChannel {
  std::vector<CMatrix> per_subcarrier;

  int num_subcarriers() const { return static_cast<int>(per_subcarrier.size()); }
  const CMatrix& operator[](int n) const { return per_subcarrier[static_cast<std::size_t>(n)]; }
};

/// RIS-UE channel of one UE. Entry (n, j) holds h_RU[k, n, j], the j-th
/// element of the channel vector at subcarrier n (not its conjugate).
struct RisUeChannel {
  CMatrix h;
  /// Multipath only: scatterer positions (path 0 is the UE itself) and path gains.
  std::vector<Vec3> scatterers;
  std::vector<cdouble> path_gains;

  int num_subcarriers() const { return static_cast<int>(h.rows()); }
  int num_elements() const { return static_cast<int>(h.cols()); }
  /// h_RU[k, n] as a column vector.
  CVector at(int n) const { return h.row(n).transpose(); }
};

/// lambda_n = c0 / f_n, f_n = f_c + B (n - (N_c + 1) / 2) / N_c with n = 1..N_c.
std::vector<double> subcarrier_wavelengths(const SystemConfig& config);

/// 0-based index of the subcarrier the paper calls N_c / 2 (1-based, floored).
int central_subcarrier(const SystemConfig& config);

struct ArrayPair {
  ArrayGeometry bs;
  ArrayGeometry ris;
};

/// BS array on the plane x = 0 and RIS array on x = T, both centred at (y = 0,
/// z = t) and facing each other along the x axis.
ArrayPair build_geometry(const SystemConfig& config);

/// Deterministic free-space LoS channel between all BS and RIS elements.
BsRisChannel gen_bs_ris_channel(const SystemConfig& config, const ArrayGeometry& bs,
                                const ArrayGeometry& ris);

/// K UEs uniform in area over the 180 degree sector of radius R in front of
/// the RIS, heights uniform in [1, 2] m.
UePlacement sample_ue_positions(const SystemConfig& config, std::uint64_t seed);

inline constexpr double kUeMinHeightM = 1.0;
inline constexpr double kUeMaxHeightM = 2.0;

/// Planar (ground-projected) distance of a point to the RIS centre.
double planar_distance_to_ris(const SystemConfig& config, const Vec3& p);

std::vector<RisUeChannel> gen_ris_ue_channel_los(const SystemConfig& config,
                                                 const ArrayGeometry& ris,
                                                 const UePlacement& placement);

struct MultipathOptions {
  /// Forces every path gain to 1 instead of CN(0, 1); used to check the
  /// single-path reduction to the LoS model.
  bool unit_path_gains = false;
};

/// L_p-path RIS-UE channel. Path 0 uses the UE position itself; paths 1..L_p-1
/// are scatterers drawn uniformly over the UE sector with heights in [0, t].
std::vector<RisUeChannel> gen_ris_ue_channel_multipath(const SystemConfig& config,
                                                       const ArrayGeometry& ris,
                                                       const UePlacement& placement,
                                                       std::uint64_t seed,
                                                       MultipathOptions options = {});

}  // namespace thzrsma
