#include "thzrsma/config.hpp"

#include <cmath>
#include <sstream>

#include "thzrsma/error.hpp"
#include "thzrsma/types.hpp"

namespace thzrsma {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " must be strictly positive and finite (got " << value << ")";
    throw ConfigError(os.str());
  }
}

void require_positive(int value, const char* name) {
  if (value < 1) {
    std::ostringstream os;
    os << name << " must be >= 1 (got " << value << ")";
    throw ConfigError(os.str());
  }
}

}  // namespace

double SystemConfig::carrier_wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
double SystemConfig::noise_power_w() const { return dbm_to_watts(noise_power_dbm); }
double SystemConfig::tx_power_w() const { return dbm_to_watts(tx_power_dbm); }

void SystemConfig::validate() const {
  require_positive(carrier_freq_hz, "carrier_freq_hz");
  if (!(bandwidth_hz >= 0.0) || !std::isfinite(bandwidth_hz)) {
    throw ConfigError("bandwidth_hz must be >= 0");
  }
  if (bandwidth_hz >= 2.0 * carrier_freq_hz) {
    throw ConfigError("bandwidth_hz must stay below twice the carrier frequency");
  }
  require_positive(num_subcarriers, "num_subcarriers");
  if (!std::isfinite(noise_power_dbm)) throw ConfigError("noise_power_dbm must be finite");
  if (!std::isfinite(tx_power_dbm)) throw ConfigError("tx_power_dbm must be finite");
  require_positive(subarrays_y, "subarrays_y");
  require_positive(subarrays_z, "subarrays_z");
  require_positive(subarray_spacing_y_m, "subarray_spacing_y_m");
  require_positive(subarray_spacing_z_m, "subarray_spacing_z_m");
  require_positive(elements_y, "elements_y");
  require_positive(elements_z, "elements_z");
  require_positive(element_spacing_m, "element_spacing_m");
  require_positive(bs_ris_distance_m, "bs_ris_distance_m");
  require_positive(mount_height_m, "mount_height_m");
  require_positive(ue_sector_radius_m, "ue_sector_radius_m");
  require_positive(num_paths, "num_paths");
  require_positive(num_ues, "num_ues");
  if (num_ues != num_subarrays()) {
    std::ostringstream os;
    os << "num_ues (" << num_ues << ") must equal subarrays_y * subarrays_z ("
       << num_subarrays() << ")";
    throw ConfigError(os.str());
  }
  // Subarrays must not overlap.
  if (subarrays_y > 1 && (elements_y - 1) * element_spacing_m >= subarray_spacing_y_m) {
    throw ConfigError("subarrays overlap along y");
  }
  if (subarrays_z > 1 && (elements_z - 1) * element_spacing_m >= subarray_spacing_z_m) {
    throw ConfigError("subarrays overlap along z");
  }
  if (los_mimo_strict) {
    const double dy = los_mimo_spacing(*this, subarrays_y);
    const double dz = los_mimo_spacing(*this, subarrays_z);
    if (std::abs(subarray_spacing_y_m - dy) > 1e-9 * dy ||
        std::abs(subarray_spacing_z_m - dz) > 1e-9 * dz) {
      std::ostringstream os;
      os.precision(12);
      os << "los_mimo_strict: spacings must be D_y = " << dy << " m, D_z = " << dz
         << " m (set los_mimo_spacing: true to derive them)";
      throw ConfigError(os.str());
    }
  }
}

double los_mimo_spacing(const SystemConfig& config, int subarray_count) {
  return std::sqrt(config.carrier_wavelength_m() * config.bs_ris_distance_m / subarray_count);
}

void apply_los_mimo_spacing(SystemConfig& config) {
  config.subarray_spacing_y_m = los_mimo_spacing(config, config.subarrays_y);
  config.subarray_spacing_z_m = los_mimo_spacing(config, config.subarrays_z);
}

SystemConfig paper_preset() { return SystemConfig{}; }

SystemConfig desk_preset() {
  SystemConfig c;
  c.num_subcarriers = 8;
  c.subarrays_y = 2;
  c.subarrays_z = 1;
  c.elements_y = 4;
  c.elements_z = 4;
  c.num_ues = 2;
  apply_los_mimo_spacing(c);
  c.los_mimo_strict = true;
  return c;
}

void to_json(nlohmann::json& j, const SystemConfig& c) {
  j = nlohmann::json{
      {"carrier_freq_hz", c.carrier_freq_hz},
      {"bandwidth_hz", c.bandwidth_hz},
      {"num_subcarriers", c.num_subcarriers},
      {"noise_power_dbm", c.noise_power_dbm},
      {"subarrays_y", c.subarrays_y},
      {"subarrays_z", c.subarrays_z},
      {"subarray_spacing_y_m", c.subarray_spacing_y_m},
      {"subarray_spacing_z_m", c.subarray_spacing_z_m},
      {"elements_y", c.elements_y},
      {"elements_z", c.elements_z},
      {"element_spacing_m", c.element_spacing_m},
      {"bs_ris_distance_m", c.bs_ris_distance_m},
      {"mount_height_m", c.mount_height_m},
      {"ue_sector_radius_m", c.ue_sector_radius_m},
      {"num_paths", c.num_paths},
      {"tx_power_dbm", c.tx_power_dbm},
      {"num_ues", c.num_ues},
      {"los_mimo_strict", c.los_mimo_strict},
  };
}

void merge_json(SystemConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  bool spacing_from_rule = false;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "carrier_freq_hz") c.carrier_freq_hz = value.get<double>();
      else if (key == "bandwidth_hz") c.bandwidth_hz = value.get<double>();
      else if (key == "num_subcarriers") c.num_subcarriers = value.get<int>();
      else if (key == "noise_power_dbm") c.noise_power_dbm = value.get<double>();
      else if (key == "subarrays_y") c.subarrays_y = value.get<int>();
      else if (key == "subarrays_z") c.subarrays_z = value.get<int>();
      else if (key == "subarray_spacing_y_m") c.subarray_spacing_y_m = value.get<double>();
      else if (key == "subarray_spacing_z_m") c.subarray_spacing_z_m = value.get<double>();
      else if (key == "elements_y") c.elements_y = value.get<int>();
      else if (key == "elements_z") c.elements_z = value.get<int>();
      else if (key == "element_spacing_m") c.element_spacing_m = value.get<double>();
      else if (key == "bs_ris_distance_m") c.bs_ris_distance_m = value.get<double>();
      else if (key == "mount_height_m") c.mount_height_m = value.get<double>();
      else if (key == "ue_sector_radius_m") c.ue_sector_radius_m = value.get<double>();
      else if (key == "num_paths") c.num_paths = value.get<int>();
      else if (key == "tx_power_dbm") c.tx_power_dbm = value.get<double>();
      else if (key == "num_ues") c.num_ues = value.get<int>();
      else if (key == "los_mimo_strict") c.los_mimo_strict = value.get<bool>();
      else if (key == "los_mimo_spacing") spacing_from_rule = value.get<bool>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  if (spacing_from_rule) apply_los_mimo_spacing(c);
}

}  // namespace thzrsma
