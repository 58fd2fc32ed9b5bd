#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "doctest.h"
#include "harness_internal.hpp"
#include "thzrsma/error.hpp"
#include "thzrsma/harness.hpp"
#include "thzrsma/interchange.hpp"

using namespace thzrsma;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thzrsma_h_" + name);
  fs::remove_all(p);
  return p;
}

ScenarioSpec small_spec() {
  ScenarioSpec s;
  s.trials = 3;
  s.sweep_values = {50.0, 70.0};
  s.csi.model = CsiModel::kGaussian;
  s.csi.error_nmse = 0.05;
  s.csi.calibration_draws = 4;
  s.awmmse.iterations = 10;
  return s;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("scenario JSON defaults and round trip") {
  const ScenarioSpec d = ScenarioSpec::from_json(nlohmann::json::object());
  CHECK(d.preset == "desk");
  CHECK(d.config.num_ues == 2);
  CHECK(d.schemes.size() == 2);
  CHECK(d.sweep_variable == SweepVariable::kTxPowerDbm);

  ScenarioSpec s = small_spec();
  s.csi.sigma_h_sq = 1e-20;
  s.schemes = {DigitalScheme::kPowerAllocRsma, DigitalScheme::kAwmmseRsma};
  const ScenarioSpec back = ScenarioSpec::from_json(s.to_json());
  CHECK(back.to_json() == s.to_json());
  CHECK(back.csi.sigma_h_sq.value() == 1e-20);

  const ScenarioSpec paper = ScenarioSpec::from_json({{"preset", "paper"}});
  CHECK(paper.config.num_elements() == 256);
}

TEST_CASE("scenario JSON errors") {
  CHECK_THROWS_AS(ScenarioSpec::from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(ScenarioSpec::from_json({{"csi", {{"modle", "ls"}}}}), ConfigError);
  CHECK_THROWS_AS(ScenarioSpec::from_json({{"schemes", {"mmse"}}}), ConfigError);
  CHECK_THROWS_AS(ScenarioSpec::from_json({{"trials", "many"}}), ConfigError);
  CHECK_THROWS_AS(ScenarioSpec::from_json({{"preset", "huge"}}), ConfigError);
  CHECK_THROWS_AS(ScenarioSpec::from_json({{"config", {{"num_ues", 3}}}}).validate(), ConfigError);
  CHECK_THROWS_AS(load_scenario(scratch("none.json")), IoError);
  const fs::path bad = scratch("bad.json");
  std::ofstream(bad) << "{";
  CHECK_THROWS_AS(load_scenario(bad), FormatError);
}

TEST_CASE("scenario validation") {
  auto bad = [](auto mutate) {
    ScenarioSpec s = small_spec();
    mutate(s);
    CHECK_THROWS_AS(s.validate(), ConfigError);
  };
  bad([](ScenarioSpec& s) { s.trials = 0; });
  bad([](ScenarioSpec& s) { s.schemes.clear(); });
  bad([](ScenarioSpec& s) { s.schemes = {DigitalScheme::kRzfSdma, DigitalScheme::kRzfSdma}; });
  bad([](ScenarioSpec& s) { s.sweep_values.clear(); });
  bad([](ScenarioSpec& s) { s.alpha_step = 0.0; });
  bad([](ScenarioSpec& s) {
    s.sweep_variable = SweepVariable::kPilots;
    s.sweep_values = {4};
  });
  bad([](ScenarioSpec& s) {
    s.csi.model = CsiModel::kLs;
    s.sweep_variable = SweepVariable::kPilots;
    s.sweep_values = {2.5};
  });
  bad([](ScenarioSpec& s) {
    s.csi.model = CsiModel::kPerfect;
    s.sweep_variable = SweepVariable::kCsiErrorNmse;
  });
  CHECK_NOTHROW(small_spec().validate());
}

TEST_CASE("dotted overrides") {
  ScenarioSpec s;
  s.set("config.tx_power_dbm", "33.5");
  CHECK(s.config.tx_power_dbm == 33.5);
  s.set("csi.model", "ls");
  CHECK(s.csi.model == CsiModel::kLs);
  s.set("sweep.values", "[1, 2, 3]");
  CHECK(s.sweep_values == std::vector<double>{1, 2, 3});
  s.set("schemes", "[\"rzf_sdma\"]");
  CHECK(s.schemes == std::vector<DigitalScheme>{DigitalScheme::kRzfSdma});
  s.set("preset", "paper");
  CHECK(s.config.num_elements() == 256);
  CHECK(s.config.tx_power_dbm == paper_preset().tx_power_dbm);
  CHECK_THROWS_AS(s.set("csi.nope", "1"), ConfigError);
  CHECK_THROWS_AS(s.set("trials.x", "1"), ConfigError);
  CHECK_THROWS_AS(s.set("config..x", "1"), ConfigError);
  CHECK_THROWS_AS(s.set("", "1"), ConfigError);
}

TEST_CASE("sweep values land in the right place") {
  SystemConfig c = desk_preset();
  CsiSpec csi;
  csi.sigma_h_sq = 1.0;
  detail::apply_sweep_value(SweepVariable::kTxPowerDbm, 12.0, c, csi);
  CHECK(c.tx_power_dbm == 12.0);
  detail::apply_sweep_value(SweepVariable::kBandwidthHz, 1e9, c, csi);
  CHECK(c.bandwidth_hz == 1e9);
  detail::apply_sweep_value(SweepVariable::kCsiErrorNmse, 0.2, c, csi);
  CHECK(csi.error_nmse == 0.2);
  CHECK_FALSE(csi.sigma_h_sq.has_value());
  detail::apply_sweep_value(SweepVariable::kSigmaHSq, 3e-3, c, csi);
  CHECK(csi.sigma_h_sq.value() == 3e-3);
  detail::apply_sweep_value(SweepVariable::kPilots, 16.0, c, csi);
  CHECK(csi.pilots == 16);
}

TEST_CASE("parallel_for runs every index and rethrows the lowest failure") {
  std::vector<int> hit(50, 0);
  detail::parallel_for(50, 4, [&](int i) { hit[static_cast<std::size_t>(i)] += 1; });
  for (int h : hit) CHECK(h == 1);
  try {
    detail::parallel_for(20, 3, [](int i) {
      if (i == 7 || i == 13) throw DimensionError("boom " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()) == "boom 7");
  }
}

TEST_CASE("context is added without losing the error category") {
  try {
    try {
      throw NumericalError("inner");
    } catch (...) {
      detail::rethrow_with_context("trial 3");
    }
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::kNumerical);
    CHECK(std::string(e.what()) == "trial 3: inner");
  }
  try {
    try {
      throw std::out_of_range("x");
    } catch (...) {
      detail::rethrow_with_context("ctx");
    }
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::kInternal);
  }
}

TEST_CASE("hash helpers") {
  CHECK(detail::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(detail::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(detail::hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("identical spec and seed give byte-identical CSV") {
  const ScenarioSpec s = small_spec();
  const std::string a = results_csv(run_scenario(s));
  const std::string b = results_csv(run_scenario(s));
  CHECK(a == b);
  ScenarioSpec threaded = s;
  threaded.threads = 3;
  CHECK(results_csv(run_scenario(threaded)) == a);
  ScenarioSpec other = s;
  other.seed = 2;
  CHECK(results_csv(run_scenario(other)) != a);
}

TEST_CASE("rates are scored on the true channels") {
  ScenarioSpec s = small_spec();
  s.trials = 1;
  s.sweep_values = {60.0};
  s.schemes = {DigitalScheme::kRzfSdma};
  std::mutex mu;
  std::vector<EquivalentChannels> truth, estimate;
  int calls = 0;
  const RunHooks hooks{[&](const TrialProbe& p) {
    std::lock_guard<std::mutex> lock(mu);
    ++calls;
    CHECK(p.evaluated == p.truth);
    truth = *p.truth;
    estimate = *p.estimate;
  }};
  const ResultTable t = run_scenario(s, hooks);
  CHECK(calls == 1);
  CHECK(estimate_sigma_h_sq(estimate, truth) > 0.0);
  const double noise = s.config.noise_power_w();
  const double power = dbm_to_watts(60.0);
  const double on_truth = rate_report(truth, rzf_precoder(estimate, noise, power), noise).arwu;
  const double on_estimate = rate_report(estimate, rzf_precoder(estimate, noise, power), noise).arwu;
  CHECK(t.rows[0].schemes[0].rw_mean == doctest::Approx(on_truth).epsilon(1e-12));
  CHECK(on_truth != on_estimate);
}

TEST_CASE("equivalent-domain error hits the requested NMSE") {
  ScenarioSpec s = small_spec();
  s.trials = 40;
  s.sweep_values = {60.0};
  s.schemes = {DigitalScheme::kRzfSdma};
  s.csi.error_nmse = 0.05;
  std::mutex mu;
  double err = 0.0;
  double power = 0.0;
  const RunHooks hooks{[&](const TrialProbe& p) {
    std::lock_guard<std::mutex> lock(mu);
    for (std::size_t n = 0; n < p.truth->size(); ++n) {
      err += ((*p.estimate)[n] - (*p.truth)[n]).squaredNorm();
      power += (*p.truth)[n].squaredNorm();
    }
  }};
  const ResultTable t = run_scenario(s, hooks);
  CHECK(err / power == doctest::Approx(0.05).epsilon(0.1));
  CHECK(t.rows[0].sigma_h_sq > 0.0);
}

TEST_CASE("perfect CSI needs no calibration") {
  ScenarioSpec s = small_spec();
  s.csi.model = CsiModel::kPerfect;
  const ResultTable t = run_scenario(s);
  for (const auto& row : t.rows) {
    CHECK(row.sigma_h_sq == 0.0);
    CHECK(row.csi_nmse_mean == 0.0);
  }
}

TEST_CASE("LS, multipath, bandwidth and power-allocation paths run") {
  ScenarioSpec s = small_spec();
  s.trials = 2;
  s.channel_mode = ChannelMode::kMultipath;
  s.csi.model = CsiModel::kLs;
  s.csi.calibration_draws = 2;
  s.schemes = {DigitalScheme::kAwmmseRsma, DigitalScheme::kRzfSdma, DigitalScheme::kPowerAllocRsma};
  s.sweep_variable = SweepVariable::kPilots;
  s.sweep_values = {8, 32};
  // High SNR, where more pilots must help.
  s.config.tx_power_dbm = 90.0;
  const ResultTable t = run_scenario(s);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1].csi_nmse_mean < t.rows[0].csi_nmse_mean);

  ScenarioSpec b = small_spec();
  b.trials = 1;
  b.sweep_variable = SweepVariable::kBandwidthHz;
  b.sweep_values = {0.0, 20e9};
  const ResultTable tb = run_scenario(b);
  CHECK(tb.rows.size() == 2);
  CHECK(tb.metadata.at("sweep_variable") == "bandwidth_hz");
}

TEST_CASE("run refuses external components") {
  ScenarioSpec s = small_spec();
  s.ris_design = RisDesign::kExternal;
  CHECK_THROWS_AS(run_scenario(s), ConfigError);
}

TEST_CASE("output files") {
  ScenarioSpec s = small_spec();
  s.trials = 4;
  const ResultTable t = run_scenario(s);
  const auto csv = lines(results_csv(t));
  REQUIRE(csv.size() == 3);
  CHECK(csv[0] ==
        "sweep_value,csi_nmse_mean,csi_nmse_std,sigma_h_sq,awmmse_rsma_rw_mean,awmmse_rsma_rw_std,"
        "rzf_sdma_rw_mean,rzf_sdma_rw_std");
  CHECK(csv[1].rfind("50,", 0) == 0);

  const auto cdf = lines(cdf_csv(t, 0));
  REQUIRE(cdf.size() == 102);
  CHECK(cdf[0] == "quantile,tx_power_dbm=50,tx_power_dbm=70");
  CHECK(cdf[1].rfind("0,", 0) == 0);
  CHECK(cdf[101].rfind("1,", 0) == 0);
  const auto& q = t.rows[1].schemes[0].user_rate_quantiles;
  for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i] >= q[i - 1]);

  const auto plot = lines(plot_data(t, 1));
  CHECK(plot[0] == "# tx_power_dbm rzf_sdma_rw_mean rzf_sdma_rw_std");
  CHECK(plot.size() == 3);
  CHECK_THROWS_AS(plot_data(t, 5), DimensionError);

  const fs::path dir = scratch("outputs");
  const auto written = emit_outputs(t, dir);
  CHECK(written.size() == 6);
  std::ifstream meta_in(dir / "meta.json");
  const auto meta = nlohmann::json::parse(meta_in);
  CHECK(meta.at("trials") == 4);
  CHECK(meta.at("seed") == 1);
  CHECK(meta.at("config_hash").get<std::string>().size() == 16);
  CHECK(meta.at("columns").size() == 8);
  CHECK(meta.at("nonmonotone_trials").at("awmmse_rsma") == nlohmann::json::array({0, 0}));
  CHECK(meta.at("scenario") == s.to_json());

  const fs::path only = scratch("csv_only");
  CHECK(emit_outputs(t, only, kFormatCsv).size() == 1);
}

TEST_CASE("standard deviation uses the sample estimator") {
  ScenarioSpec s = small_spec();
  s.schemes = {DigitalScheme::kRzfSdma};
  s.trials = 3;
  s.sweep_values = {60.0};
  std::mutex mu;
  std::vector<double> arwu;
  const double noise = s.config.noise_power_w();
  const RunHooks hooks{[&](const TrialProbe& p) {
    std::lock_guard<std::mutex> lock(mu);
    arwu.push_back(rate_report(*p.truth, rzf_precoder(*p.estimate, noise, dbm_to_watts(60.0)), noise).arwu);
  }};
  const ResultTable t = run_scenario(s, hooks);
  double mean = (arwu[0] + arwu[1] + arwu[2]) / 3.0;
  double ss = 0.0;
  for (double v : arwu) ss += (v - mean) * (v - mean);
  CHECK(t.rows[0].schemes[0].rw_mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(t.rows[0].schemes[0].rw_std == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-10));
}

TEST_CASE("dataset export layout") {
  ScenarioSpec s;
  s.csi.model = CsiModel::kLs;
  s.csi.pilots = 6;
  const fs::path dir = scratch("dataset");
  export_dataset(s, {3, 2, 2}, dir);
  const InterchangeReader r(dir);
  CHECK(r.info("H_BR").shape == std::vector<std::size_t>{8, 32, 32});
  CHECK(r.info("F_RF").shape == std::vector<std::size_t>{32, 2});
  CHECK(r.info("H_RU_train").shape == std::vector<std::size_t>{3, 2, 8, 32});
  CHECK(r.info("H_RU_val").shape == std::vector<std::size_t>{2, 2, 8, 32});
  CHECK(r.info("ue_positions_test").shape == std::vector<std::size_t>{2, 2, 3});
  CHECK(r.info("Y_p_train").shape == std::vector<std::size_t>{3, 2, 8, 6});
  CHECK(r.info(detail::kPilotRfPhases).shape == std::vector<std::size_t>{6, 32, 2});
  CHECK(r.meta().at("splits").at("total") == 7);
  CHECK(r.meta().at("seed") == 1);

  // Sample i of the concatenated splits uses seed ^ i.
  const SystemConfig c = desk_preset();
  const ArrayPair geo = build_geometry(c);
  const auto sim = detail::simulate_channels(c, geo.ris, ChannelMode::kLos, 1ULL ^ 5ULL);
  const auto test = detail::read_channels(r, "H_RU_test", 2, 8, 32);
  CHECK((test[0][1].h - sim.channels[1].h).cwiseAbs().maxCoeff() <= 1e-6 * sim.channels[1].h.cwiseAbs().maxCoeff());

  CHECK_THROWS_AS(export_dataset(s, {0, 1, 1}, scratch("empty_split")), ConfigError);
}

TEST_CASE("external artifacts reproduce the built-in pipeline") {
  ScenarioSpec s;
  s.trials = 1;
  s.sweep_values = {60.0};
  s.schemes = {DigitalScheme::kRzfSdma, DigitalScheme::kAwmmseRsma};
  const fs::path data = scratch("eval_data");
  export_dataset(s, {1, 1, 3}, data);
  const InterchangeReader dataset(data);
  const SystemConfig cfg = desk_preset();
  const auto test = detail::read_channels(dataset, "H_RU_test", 2, 8, 32);

  // Artifacts: CSI equal to the stored truth and beam-aligned phases from it.
  const fs::path art = scratch("eval_art");
  {
    InterchangeWriter w(art);
    detail::write_channels(w, detail::kCsiEstimate, test);
    std::vector<RisPhase> phases;
    for (const auto& sample : test) phases.push_back(beam_alignment_phase(sample, cfg).phase);
    save_phases(w, phases);
    w.finish();
  }
  CHECK(validate_artifacts(s, art).find("ris_phases: 3 samples ok") != std::string::npos);

  const ResultTable base = eval_external(s, data, "");
  CHECK(base.metadata.at("trials") == 3);

  ScenarioSpec ext = s;
  ext.csi.model = CsiModel::kExternal;
  ext.ris_design = RisDesign::kExternal;
  const ResultTable viaart = eval_external(ext, data, art);
  CHECK(viaart.rows[0].csi_nmse_mean == 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(viaart.rows[0].schemes[i].rw_mean ==
          doctest::Approx(base.rows[0].schemes[i].rw_mean).epsilon(1e-4));
  }

  // External digital precoder parameters from the converged solver.
  const fs::path params_dir = scratch("eval_params");
  {
    std::vector<std::vector<AwmmseParams>> params;
    const ArrayPair geo = build_geometry(cfg);
    const auto h_br = gen_bs_ris_channel(cfg, geo.bs, geo.ris);
    const CMatrix f_rf = mf_analog_precoder(subarray_phases(h_br, cfg), cfg);
    for (const auto& sample : test) {
      const RisPhase phi = beam_alignment_phase(sample, cfg).phase;
      std::vector<EquivalentChannels> h;
      for (int n = 0; n < 8; ++n) {
        h.push_back(equivalent_channels(f_rf, h_br[n], phi, {sample[0].at(n), sample[1].at(n)}));
      }
      params.push_back(awmmse_solve(h, cfg.noise_power_w(), {}, dbm_to_watts(60.0)).params);
    }
    InterchangeWriter w(params_dir);
    detail::write_params(w, params);
    w.finish();
  }
  ScenarioSpec with_params = s;
  with_params.schemes = {DigitalScheme::kExternal, DigitalScheme::kAwmmseRsma};
  CHECK_NOTHROW(validate_artifacts(with_params, params_dir));
  const ResultTable p = eval_external(with_params, data, params_dir);
  CHECK(p.rows[0].schemes[0].rw_mean > 0.0);
  CHECK(p.rows[0].schemes[0].rw_mean ==
        doctest::Approx(p.rows[0].schemes[1].rw_mean).epsilon(0.05));

  CHECK_THROWS_AS(eval_external(ext, data, ""), ConfigError);
  CHECK_THROWS_AS(eval_external(ext, data, params_dir), FormatError);
  const fs::path empty = scratch("eval_empty");
  {
    InterchangeWriter w(empty);
    w.finish();
  }
  CHECK_THROWS_AS(validate_artifacts(s, empty), FormatError);
}

TEST_CASE("tampered dataset geometry is rejected") {
  ScenarioSpec s;
  s.trials = 1;
  const fs::path data = scratch("tampered");
  export_dataset(s, {1, 1, 1}, data);
  std::ifstream in(data / kManifestName);
  nlohmann::json m = nlohmann::json::parse(in);
  in.close();
  m["meta"]["config"]["bs_ris_distance_m"] = 41.0;
  m["meta"]["config"]["los_mimo_strict"] = false;
  std::ofstream(data / kManifestName) << m.dump();
  CHECK_THROWS_AS(eval_external(s, data, ""), FormatError);
}

TEST_CASE("pilot bundle round trip through the interchange format") {
  const SystemConfig c = desk_preset();
  const ArrayPair geo = build_geometry(c);
  const CMatrix f_rf = mf_analog_precoder(subarray_phases(gen_bs_ris_channel(c, geo.bs, geo.ris), c), c);
  const PilotBundle p = default_pilots(c, f_rf, 4, PilotDesign::kRandom, 3);
  const fs::path dir = scratch("pilots");
  {
    InterchangeWriter w(dir);
    detail::write_pilots(w, p);
    w.finish();
  }
  const PilotBundle back = detail::read_pilots(InterchangeReader(dir));
  CHECK(back.num_symbols() == 4);
  CHECK((back.ris_phases - p.ris_phases).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.x_bb[2] - p.x_bb[2]).cwiseAbs().maxCoeff() < 1e-3 * std::sqrt(c.tx_power_w()));
  ScenarioSpec s;
  s.csi.model = CsiModel::kLs;
  CHECK(validate_artifacts(s, dir).find("pilots: 4 symbols ok") != std::string::npos);
}

TEST_CASE("version string") { CHECK(version_string() == "0.1.0"); }
