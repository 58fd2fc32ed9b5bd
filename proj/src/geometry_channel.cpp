#include "thzrsma/geometry_channel.hpp"

#include <cmath>
#include <random>

#include "thzrsma/error.hpp"

namespace thzrsma {

std::vector<double> subcarrier_wavelengths(const SystemConfig& config) {
  config.validate();
  const int nc = config.num_subcarriers;
  std::vector<double> lambda(static_cast<std::size_t>(nc));
  for (int n = 1; n <= nc; ++n) {
    const double f = config.carrier_freq_hz +
                     config.bandwidth_hz * (n - (nc + 1) / 2.0) / static_cast<double>(nc);
    lambda[static_cast<std::size_t>(n - 1)] = kSpeedOfLight / f;
  }
  return lambda;
}

int central_subcarrier(const SystemConfig& config) {
  // 1-based N_c / 2, floored, clamped to the first subcarrier when N_c = 1.
  return std::max(config.num_subcarriers / 2, 1) - 1;
}

namespace {

ArrayGeometry build_array(const SystemConfig& c, ArrayRole role, double x) {
  ArrayGeometry g;
  g.role = role;
  g.num_subarrays = c.num_subarrays();
  g.elements_per_subarray = c.elements_per_subarray();
  g.element_positions.reserve(static_cast<std::size_t>(c.num_elements()));
  for (int kz = 0; kz < c.subarrays_z; ++kz) {
    for (int ky = 0; ky < c.subarrays_y; ++ky) {
      const Vec3 centre{x, (ky - (c.subarrays_y - 1) / 2.0) * c.subarray_spacing_y_m,
                        c.mount_height_m + (kz - (c.subarrays_z - 1) / 2.0) * c.subarray_spacing_z_m};
      g.subarray_centers.push_back(centre);
    }
  }
  for (const Vec3& centre : g.subarray_centers) {
    for (int mz = 0; mz < c.elements_z; ++mz) {
      for (int my = 0; my < c.elements_y; ++my) {
        g.element_positions.push_back(
            {x, centre.y + (my - (c.elements_y - 1) / 2.0) * c.element_spacing_m,
             centre.z + (mz - (c.elements_z - 1) / 2.0) * c.element_spacing_m});
      }
    }
  }
  return g;
}

// Free-space LoS coefficient lambda / (4 pi d) * exp(-j 2 pi d / lambda).
cdouble los_coefficient(double d, double lambda) {
  const double gain = lambda / (4.0 * kPi * d);
  // Reduce the phase argument before the trig call to keep full precision for
  // d >> lambda.
  const double cycles = d / lambda;
  const double frac = cycles - std::floor(cycles);
  return std::polar(gain, -2.0 * kPi * frac);
}

Vec3 ris_centre(const SystemConfig& c) { return {c.bs_ris_distance_m, 0.0, c.mount_height_m}; }

Vec3 sample_sector_point(const SystemConfig& c, std::mt19937_64& rng, double z_min, double z_max) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = c.ue_sector_radius_m * std::sqrt(unit(rng));
  // The sector faces the BS side (-x) of the RIS.
  const double phi = (unit(rng) - 0.5) * kPi;
  std::uniform_real_distribution<double> height(z_min, z_max);
  const Vec3 centre = ris_centre(c);
  return {centre.x - r * std::cos(phi), r * std::sin(phi), height(rng)};
}

}  // namespace

ArrayPair build_geometry(const SystemConfig& config) {
  config.validate();
  return {build_array(config, ArrayRole::kBs, 0.0),
          build_array(config, ArrayRole::kRis, config.bs_ris_distance_m)};
}

BsRisChannel gen_bs_ris_channel(const SystemConfig& config, const ArrayGeometry& bs,
                                const ArrayGeometry& ris) {
  if (bs.num_elements() != config.num_elements() || ris.num_elements() != config.num_elements()) {
    throw DimensionError("geometry does not match the config element count");
  }
  const auto lambda = subcarrier_wavelengths(config);
  const int mb = bs.num_elements();
  const int mr = ris.num_elements();
  RMatrix dist(mb, mr);
  for (int i = 0; i < mb; ++i) {
    for (int j = 0; j < mr; ++j) {
      const double d = distance(bs.element_positions[static_cast<std::size_t>(i)],
                                ris.element_positions[static_cast<std::size_t>(j)]);
      if (!(d > 0.0)) throw ConfigError("BS and RIS elements coincide");
      dist(i, j) = d;
    }
  }
  BsRisChannel h;
  h.per_subcarrier.reserve(lambda.size());
  for (double l : lambda) {
    CMatrix m(mb, mr);
    for (int j = 0; j < mr; ++j) {
      for (int i = 0; i < mb; ++i) m(i, j) = los_coefficient(dist(i, j), l);
    }
    h.per_subcarrier.push_back(std::move(m));
  }
  return h;
}

UePlacement sample_ue_positions(const SystemConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  UePlacement p;
  p.positions.reserve(static_cast<std::size_t>(config.num_ues));
  for (int k = 0; k < config.num_ues; ++k) {
    p.positions.push_back(sample_sector_point(config, rng, kUeMinHeightM, kUeMaxHeightM));
  }
  return p;
}

double planar_distance_to_ris(const SystemConfig& config, const Vec3& p) {
  const Vec3 c = ris_centre(config);
  return std::hypot(p.x - c.x, p.y - c.y);
}

namespace {

CMatrix path_response(const ArrayGeometry& ris, const Vec3& point,
                      const std::vector<double>& lambda) {
  const int mr = ris.num_elements();
  CMatrix h(static_cast<Eigen::Index>(lambda.size()), mr);
  for (int j = 0; j < mr; ++j) {
    const double d = distance(ris.element_positions[static_cast<std::size_t>(j)], point);
    if (!(d > 0.0)) throw ConfigError("UE or scatterer coincides with a RIS element");
    for (std::size_t n = 0; n < lambda.size(); ++n) {
      h(static_cast<Eigen::Index>(n), j) = los_coefficient(d, lambda[n]);
    }
  }
  return h;
}

}  // namespace

std::vector<RisUeChannel> gen_ris_ue_channel_los(const SystemConfig& config,
                                                 const ArrayGeometry& ris,
                                                 const UePlacement& placement) {
  if (ris.num_elements() != config.num_elements()) {
    throw DimensionError("RIS geometry does not match the config element count");
  }
  const auto lambda = subcarrier_wavelengths(config);
  std::vector<RisUeChannel> out;
  out.reserve(placement.positions.size());
  for (const Vec3& ue : placement.positions) {
    RisUeChannel ch;
    ch.h = path_response(ris, ue, lambda);
    out.push_back(std::move(ch));
  }
  return out;
}

std::vector<RisUeChannel> gen_ris_ue_channel_multipath(const SystemConfig& config,
                                                       const ArrayGeometry& ris,
                                                       const UePlacement& placement,
                                                       std::uint64_t seed,
                                                       MultipathOptions options) {
  if (ris.num_elements() != config.num_elements()) {
    throw DimensionError("RIS geometry does not match the config element count");
  }
  const auto lambda = subcarrier_wavelengths(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::vector<RisUeChannel> out;
  out.reserve(placement.positions.size());
  for (const Vec3& ue : placement.positions) {
    RisUeChannel ch;
    ch.h = CMatrix::Zero(static_cast<Eigen::Index>(lambda.size()), ris.num_elements());
    for (int l = 0; l < config.num_paths; ++l) {
      const Vec3 point = l == 0 ? ue : sample_sector_point(config, rng, 0.0, config.mount_height_m);
      cdouble beta{1.0, 0.0};
      if (!options.unit_path_gains) {
        const double re = normal(rng);
        const double im = normal(rng);
        beta = {re, im};
      }
      ch.h += beta * path_response(ris, point, lambda);
      ch.scatterers.push_back(point);
      ch.path_gains.push_back(beta);
    }
    out.push_back(std::move(ch));
  }
  return out;
}

}  // namespace thzrsma
