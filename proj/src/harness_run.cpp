#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <mutex>
#include <thread>

#include "harness_internal.hpp"
#include "thzrsma/error.hpp"

namespace thzrsma {

namespace detail {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.category(), context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCategory::kInternal, context + ": " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, value);
  return buf;
}

SimulatedChannels simulate_channels(const SystemConfig& config, const ArrayGeometry& ris,
                                    ChannelMode mode, std::uint64_t trial_seed) {
  SimulatedChannels out;
  out.placement = sample_ue_positions(config, derive_seed(trial_seed, kTagPlacement));
  out.channels = mode == ChannelMode::kLos
                     ? gen_ris_ue_channel_los(config, ris, out.placement)
                     : gen_ris_ue_channel_multipath(config, ris, out.placement,
                                                    derive_seed(trial_seed, kTagMultipath));
  return out;
}

void apply_sweep_value(SweepVariable variable, double value, SystemConfig& config, CsiSpec& csi) {
  switch (variable) {
    case SweepVariable::kTxPowerDbm: config.tx_power_dbm = value; break;
    case SweepVariable::kBandwidthHz: config.bandwidth_hz = value; break;
    case SweepVariable::kCsiErrorNmse:
      csi.error_nmse = value;
      csi.sigma_h_sq.reset();
      break;
    case SweepVariable::kSigmaHSq: csi.sigma_h_sq = value; break;
    case SweepVariable::kPilots: csi.pilots = static_cast<int>(value); break;
  }
}

namespace {

class SimulatedSource final : public ChannelSource {
 public:
  SimulatedSource(int trials, ChannelMode mode) : trials_(trials), mode_(mode) {}
  int trials() const override { return trials_; }
  TrialInput trial(const PointSetup& point, int, std::uint64_t seed) const override {
    TrialInput in;
    in.truth = simulate_channels(point.config, point.geometry.ris, mode_, seed).channels;
    return in;
  }

 private:
  int trials_;
  ChannelMode mode_;
};

std::vector<EquivalentChannels> equivalent_set(const PointSetup& point, const RisPhase& phase,
                                               const std::vector<RisUeChannel>& channels) {
  const int n_count = point.config.num_subcarriers;
  std::vector<EquivalentChannels> out;
  out.reserve(static_cast<std::size_t>(n_count));
  std::vector<CVector> h(channels.size());
  for (int n = 0; n < n_count; ++n) {
    for (std::size_t k = 0; k < channels.size(); ++k) h[k] = channels[k].at(n);
    out.push_back(equivalent_channels(point.f_rf, point.h_br[n], phase, h));
  }
  return out;
}

double mean_coefficient_power(const std::vector<EquivalentChannels>& h) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& m : h) {
    sum += m.squaredNorm();
    count += static_cast<std::size_t>(m.size());
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

void check_channels(const std::vector<RisUeChannel>& channels, const SystemConfig& config,
                    const char* what) {
  if (static_cast<int>(channels.size()) != config.num_ues) {
    throw DimensionError(std::string(what) + ": expected one channel per UE");
  }
  for (const auto& c : channels) {
    if (c.num_subcarriers() != config.num_subcarriers || c.num_elements() != config.num_elements()) {
      throw DimensionError(std::string(what) + ": channel shape differs from the config");
    }
  }
}

struct EquivalentPair {
  std::vector<EquivalentChannels> truth;
  std::vector<EquivalentChannels> estimate;
  double csi_nmse = 0.0;
};

RisPhase design_phase(const ScenarioSpec& spec, const PointSetup& point, const TrialInput& input,
                      const std::vector<RisUeChannel>& csi) {
  if (spec.ris_design == RisDesign::kExternal) {
    if (!input.phase) throw FormatError("external RIS design needs ris_phases artifacts");
    if (input.phase->size() != point.config.num_elements()) {
      throw FormatError("external RIS phases have the wrong length");
    }
    return *input.phase;
  }
  return beam_alignment_phase(csi, point.config).phase;
}

std::vector<RisUeChannel> acquire_csi(const ScenarioSpec& spec, const PointSetup& point,
                                      const TrialInput& input, std::uint64_t seed,
                                      double& csi_nmse) {
  const SystemConfig& cfg = point.config;
  const CsiSpec& csi = point.csi;
  std::vector<RisUeChannel> hat;
  switch (csi.model) {
    case CsiModel::kPerfect:
      csi_nmse = 0.0;
      return input.truth;
    case CsiModel::kExternal:
      if (!input.csi) throw FormatError("external CSI model needs H_RU_hat artifacts");
      hat = *input.csi;
      check_channels(hat, cfg, "external CSI");
      break;
    case CsiModel::kLs:
      for (std::size_t k = 0; k < input.truth.size(); ++k) {
        const ReceivedPilots rx =
            simulate_pilot_rx(point.measurement, input.truth[k], cfg.noise_power_w(),
                              derive_seed(derive_seed(seed, kTagPilotNoise), k));
        hat.push_back(ls_apply(rx, point.measurement_pinv));
      }
      break;
    case CsiModel::kGaussian: {
      const std::uint64_t base = derive_seed(seed, kTagCsiError);
      if (csi.domain == ErrorDomain::kRisUe) {
        for (std::size_t k = 0; k < input.truth.size(); ++k) {
          const CMatrix& h = input.truth[k].h;
          const double var = csi.error_nmse * h.squaredNorm() / static_cast<double>(h.size());
          RisUeChannel e = input.truth[k];
          e.h = inject_gaussian_csi_error(h, var, derive_seed(base, k));
          hat.push_back(std::move(e));
        }
        break;
      }
      // Equivalent domain: an element error of variance s^2 on h_RU reaches
      // equivalent coefficient i with variance s^2 ||H_BR[n]^H f_i||^2
      // whatever the (unitary) RIS phases.
      std::vector<CMatrix> unit;
      for (std::size_t k = 0; k < input.truth.size(); ++k) {
        const CMatrix& h = input.truth[k].h;
        CMatrix z = inject_gaussian_csi_error(CMatrix::Zero(h.rows(), h.cols()), 1.0, derive_seed(base, k));
        for (Eigen::Index n = 0; n < h.rows(); ++n) {
          const double g = point.rf_gain(n);
          z.row(n) *= g > 0.0 ? 1.0 / std::sqrt(g) : 0.0;
        }
        unit.push_back(std::move(z));
      }
      auto estimate = [&](double target) {
        std::vector<RisUeChannel> out = input.truth;
        for (std::size_t k = 0; k < out.size(); ++k) out[k].h += std::sqrt(target) * unit[k];
        return out;
      };
      if (csi.sigma_h_sq) {
        hat = estimate(*csi.sigma_h_sq);
        break;
      }
      // The NMSE is referenced to the true channel under the RIS phase the
      // estimate itself produces. That phase degrades as the error grows, so
      // the variance solves t = nmse * P(t), bisected on [0, nmse * P(0)].
      auto excess = [&](double target) {
        const RisPhase phase = design_phase(spec, point, input, estimate(target));
        return csi.error_nmse * mean_coefficient_power(equivalent_set(point, phase, input.truth)) -
               target;
      };
      double target = std::max(excess(0.0), 0.0);
      if (target > 0.0 && excess(target) < 0.0) {
        double lo = 0.0;
        double hi = target;
        for (int it = 0; it < 40 && hi - lo > 1e-4 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          (excess(mid) > 0.0 ? lo : hi) = mid;
        }
        target = 0.5 * (lo + hi);
      }
      hat = estimate(target);
      break;
    }
  }
  csi_nmse = nmse(hat, input.truth);
  return hat;
}

EquivalentPair equivalent_pair(const ScenarioSpec& spec, const PointSetup& point,
                               const TrialInput& input, std::uint64_t seed) {
  check_channels(input.truth, point.config, "true channels");
  EquivalentPair out;
  const std::vector<RisUeChannel> hat = acquire_csi(spec, point, input, seed, out.csi_nmse);
  const RisPhase phase = design_phase(spec, point, input, hat);
  out.truth = equivalent_set(point, phase, input.truth);
  out.estimate = equivalent_set(point, phase, hat);
  return out;
}

struct TrialOutcome {
  double csi_nmse = 0.0;
  std::vector<double> arwu;
  std::vector<RVector> user_rates;
  std::vector<bool> nonmonotone;
};

DigitalPrecoder external_precoder(const std::vector<EquivalentChannels>& h_hat,
                                  const std::vector<AwmmseParams>& params, double tx_power) {
  if (params.size() != h_hat.size()) throw FormatError("awmmse_params: subcarrier count differs");
  DigitalPrecoder p;
  for (std::size_t n = 0; n < h_hat.size(); ++n) {
    p.per_subcarrier.push_back(power_projection(closed_form_update(h_hat[n], params[n]), tx_power));
  }
  return p;
}

TrialOutcome run_trial(const ScenarioSpec& spec, const PointSetup& point, const TrialInput& input,
                       std::uint64_t seed, std::size_t row, int trial, const RunHooks& hooks) {
  const EquivalentPair pair = equivalent_pair(spec, point, input, seed);
  const double noise = point.config.noise_power_w();
  const double power = point.config.tx_power_w();
  TrialOutcome out;
  out.csi_nmse = pair.csi_nmse;
  for (DigitalScheme scheme : spec.schemes) {
    DigitalPrecoder precoder;
    bool nonmonotone = false;
    switch (scheme) {
      case DigitalScheme::kAwmmseRsma: {
        const AwmmseResult r = awmmse_solve(pair.estimate, noise,
                                            CsiErrorModel{point.solver_sigma_h_sq}, power, spec.awmmse);
        for (const auto& t : r.traces) nonmonotone = nonmonotone || t.nonmonotone;
        precoder = r.precoder;
        break;
      }
      case DigitalScheme::kRzfSdma:
        precoder = rzf_precoder(pair.estimate, noise, power);
        break;
      case DigitalScheme::kPowerAllocRsma:
        precoder = power_allocation_sweep(pair.estimate, pair.truth, noise, power,
                                          alpha_grid(spec.alpha_step))
                       .precoder;
        break;
      case DigitalScheme::kExternal:
        if (!input.params) throw FormatError("external scheme needs awmmse_params artifacts");
        precoder = external_precoder(pair.estimate, *input.params, power);
        break;
    }
    for (const CMatrix& f : precoder.per_subcarrier) {
      if (f.squaredNorm() > power * (1.0 + kConstraintTolerance) + kConstraintTolerance) {
        throw NumericalError(std::string(scheme_name(scheme)) + " precoder exceeds the power budget");
      }
    }
    // Rates are always scored on the true channels.
    const RateReport report = rate_report(pair.truth, precoder, noise);
    out.arwu.push_back(report.arwu);
    out.user_rates.push_back(report.mean_user_rate());
    out.nonmonotone.push_back(nonmonotone);
  }
  if (hooks.on_trial) {
    TrialProbe probe;
    probe.row = row;
    probe.trial = trial;
    probe.evaluated = &pair.truth;
    probe.truth = &pair.truth;
    probe.estimate = &pair.estimate;
    hooks.on_trial(probe);
  }
  return out;
}

std::vector<double> quantiles(std::vector<double> values) {
  std::vector<double> q(kQuantileCount, 0.0);
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  const double last = static_cast<double>(values.size() - 1);
  for (int i = 0; i < kQuantileCount; ++i) {
    const double pos = last * i / (kQuantileCount - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    q[static_cast<std::size_t>(i)] = values[lo] + frac * (values[hi] - values[lo]);
  }
  return q;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

PointSetup make_point(const ScenarioSpec& spec, const ChannelSource& source,
                      const SystemConfig& base, double sweep_value) {
  PointSetup p;
  p.config = base;
  p.csi = spec.csi;
  apply_sweep_value(spec.sweep_variable, sweep_value, p.config, p.csi);
  p.config.validate();
  p.geometry = build_geometry(p.config);
  p.h_br = gen_bs_ris_channel(p.config, p.geometry.bs, p.geometry.ris);
  p.f_rf = mf_analog_precoder(subarray_phases(p.h_br, p.config), p.config);
  p.rf_gain.resize(p.config.num_subcarriers);
  for (int n = 0; n < p.config.num_subcarriers; ++n) {
    p.rf_gain(n) = (p.h_br[n].adjoint() * p.f_rf).colwise().squaredNorm().mean();
  }
  if (p.csi.model == CsiModel::kLs) {
    std::optional<PilotBundle> pilots = source.pilots(p.config);
    if (!pilots) {
      const int q = p.csi.pilots > 0 ? p.csi.pilots : p.config.num_elements();
      pilots = default_pilots(p.config, p.f_rf, q, p.csi.pilot_design,
                              derive_seed(spec.seed, kTagPilotDesign));
    }
    p.measurement = build_measurement(*pilots, p.h_br, p.config);
    p.measurement_pinv = measurement_pinv(p.measurement);
  }
  return p;
}

double calibrate(const ScenarioSpec& spec, const ChannelSource& source, const PointSetup& point) {
  if (point.csi.model == CsiModel::kPerfect) return 0.0;
  const int draws = point.csi.calibration_draws;
  std::vector<EquivalentPair> pairs(static_cast<std::size_t>(draws));
  parallel_for(draws, spec.threads, [&](int i) {
    const std::uint64_t seed = derive_seed(spec.seed, kTagCalibration + static_cast<std::uint64_t>(i));
    try {
      pairs[static_cast<std::size_t>(i)] =
          equivalent_pair(spec, point, source.calibration(point, i, seed), seed);
    } catch (...) {
      rethrow_with_context("calibration draw " + std::to_string(i));
    }
  });
  std::vector<EquivalentChannels> hat, truth;
  for (auto& p : pairs) {
    hat.insert(hat.end(), p.estimate.begin(), p.estimate.end());
    truth.insert(truth.end(), p.truth.begin(), p.truth.end());
  }
  return estimate_sigma_h_sq(hat, truth);
}

}  // namespace

ResultTable run_pipeline(const ScenarioSpec& spec, const ChannelSource& source,
                         const SystemConfig& base_config, const RunHooks& hooks) {
  ResultTable table;
  table.sweep_variable = sweep_variable_name(spec.sweep_variable);
  for (DigitalScheme s : spec.schemes) table.schemes.push_back(scheme_name(s));
  const int trials = source.trials();
  if (trials < 1) throw ConfigError("no trials to run");

  for (std::size_t r = 0; r < spec.sweep_values.size(); ++r) {
    const double x = spec.sweep_values[r];
    PointSetup point = make_point(spec, source, base_config, x);
    point.solver_sigma_h_sq = calibrate(spec, source, point);

    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(trials));
    parallel_for(trials, spec.threads, [&](int t) {
      const std::uint64_t seed = spec.seed ^ static_cast<std::uint64_t>(t);
      try {
        outcomes[static_cast<std::size_t>(t)] =
            run_trial(spec, point, source.trial(point, t, seed), seed, r, t, hooks);
      } catch (...) {
        rethrow_with_context("sweep point " + std::to_string(r) + ", trial " + std::to_string(t) +
                             " (seed " + std::to_string(seed) + ")");
      }
    });

    ResultRow row;
    row.x = x;
    row.sigma_h_sq = point.solver_sigma_h_sq;
    std::vector<double> nmse_values;
    for (const auto& o : outcomes) nmse_values.push_back(o.csi_nmse);
    mean_std(nmse_values, row.csi_nmse_mean, row.csi_nmse_std);
    for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
      SchemeStats stats;
      stats.scheme = table.schemes[s];
      std::vector<double> rw, users;
      for (const auto& o : outcomes) {
        rw.push_back(o.arwu[s]);
        for (Eigen::Index k = 0; k < o.user_rates[s].size(); ++k) users.push_back(o.user_rates[s](k));
        if (o.nonmonotone[s]) ++stats.nonmonotone_trials;
      }
      mean_std(rw, stats.rw_mean, stats.rw_std);
      stats.user_rate_quantiles = quantiles(std::move(users));
      row.schemes.push_back(std::move(stats));
    }
    table.rows.push_back(std::move(row));
  }

  const nlohmann::json scenario = spec.to_json();
  table.metadata = {{"version", version_string()},
                    {"config_hash", hex64(fnv1a(scenario.dump()))},
                    {"seed", spec.seed},
                    {"trials", trials},
                    {"sweep_variable", table.sweep_variable},
                    {"scenario", scenario}};
  return table;
}

std::unique_ptr<ChannelSource> make_simulated_source(int trials, ChannelMode mode) {
  return std::make_unique<SimulatedSource>(trials, mode);
}

}  // namespace detail

ResultTable run_scenario(const ScenarioSpec& spec, const RunHooks& hooks) {
  spec.validate();
  if (spec.csi.model == CsiModel::kExternal || spec.ris_design == RisDesign::kExternal ||
      std::find(spec.schemes.begin(), spec.schemes.end(), DigitalScheme::kExternal) !=
          spec.schemes.end()) {
    throw ConfigError("external artifacts are evaluated with eval-external, not run");
  }
  const auto source = detail::make_simulated_source(spec.trials, spec.channel_mode);
  return detail::run_pipeline(spec, *source, spec.config, hooks);
}

}  // namespace thzrsma
