#pragma once

#include <string>

#include "json.hpp"

namespace thzrsma {

/// Physical, geometric and OFDM parameters of one RIS-aided link.
///
/// Powers are given in dBm and converted once to watts through the accessors;
/// all downstream math is linear.
struct SystemConfig {
  double carrier_freq_hz = 150e9;
  double bandwidth_hz = 10e9;
  int num_subcarriers = 64;
  double noise_power_dbm = -116.0;
  int subarrays_y = 2;
  int subarrays_z = 2;
  double subarray_spacing_y_m = 0.2;
  double subarray_spacing_z_m = 0.2;
  int elements_y = 8;
  int elements_z = 8;
  double element_spacing_m = 1e-3;
  double bs_ris_distance_m = 40.0;
  double mount_height_m = 10.0;
  double ue_sector_radius_m = 10.0;
  int num_paths = 4;
  double tx_power_dbm = 40.0;
  int num_ues = 4;
  /// When set, validation requires the subarray spacings to follow the
  /// LoS-MIMO rule D = sqrt(lambda_c * T / K_axis) to 1e-9 relative.
  bool los_mimo_strict = false;

  int num_subarrays() const { return subarrays_y * subarrays_z; }
  int elements_per_subarray() const { return elements_y * elements_z; }
  /// M_b = M_r = K * M_y * M_z.
  int num_elements() const { return num_subarrays() * elements_per_subarray(); }
  double carrier_wavelength_m() const;
  double noise_power_w() const;
  double tx_power_w() const;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

/// Full-scale parameter set (f_c = 150 GHz, 4 subarrays of 8x8, T = 40 m).
SystemConfig paper_preset();

/// K = 2, 2x1 subarrays of 4x4 elements (M = 32), N_c = 8, spacings from the
/// LoS-MIMO rule. Sized for sweeps that finish in minutes.
SystemConfig desk_preset();

/// Subarray spacing sqrt(lambda_c * T / count) that keeps a pure LoS MIMO
/// channel full rank.
double los_mimo_spacing(const SystemConfig& config, int subarray_count);

/// Rewrites both subarray spacings from the LoS-MIMO rule.
void apply_los_mimo_spacing(SystemConfig& config);

void to_json(nlohmann::json& j, const SystemConfig& config);
/// Applies the keys present in `j` on top of `config`; unknown keys throw.
void merge_json(SystemConfig& config, const nlohmann::json& j);

}  // namespace thzrsma
