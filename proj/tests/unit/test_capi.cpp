// Exercises the shared library through the C interface only.
#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "thzrsma/thzrsma.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thzrsma_c_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmall =
    R"({"trials": 2, "sweep": {"variable": "tx_power_dbm", "values": [50, 70]},
        "csi": {"model": "gaussian", "error_nmse": 0.05, "calibration_draws": 2},
        "awmmse": {"iterations": 5}})";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(thz_version()) == "0.1.0");
  CHECK(std::string(thz_status_name(THZ_OK)) == "ok");
  CHECK(std::string(thz_status_name(THZ_ERR_CONFIG)) == "config");
  CHECK(std::string(thz_status_name(THZ_ERR_IO)) == "io");
  CHECK(std::string(thz_status_name(THZ_ERR_FORMAT)) == "format");
  CHECK(std::string(thz_status_name(THZ_ERR_INVALID_ARGUMENT)) == "usage");
  CHECK(thz_last_error() != nullptr);
}

TEST_CASE("scenario lifecycle and error reporting") {
  thz_scenario* s = nullptr;
  CHECK(thz_scenario_from_json(nullptr, &s) == THZ_ERR_INVALID_ARGUMENT);
  CHECK(thz_scenario_from_json("{", &s) == THZ_ERR_FORMAT);
  CHECK(s == nullptr);
  CHECK(thz_scenario_from_json(R"({"trials": "x"})", &s) == THZ_ERR_CONFIG);
  CHECK(std::strlen(thz_last_error()) > 0);
  CHECK(thz_scenario_from_file("/nonexistent/scenario.json", &s) == THZ_ERR_IO);

  REQUIRE(thz_scenario_from_json("{}", &s) == THZ_OK);
  CHECK(thz_scenario_set(s, "config.tx_power_dbm", "33") == THZ_OK);
  CHECK(thz_scenario_set(s, "config.nope", "1") == THZ_ERR_CONFIG);
  CHECK(thz_scenario_set(s, nullptr, "1") == THZ_ERR_INVALID_ARGUMENT);
  CHECK(thz_scenario_validate(s) == THZ_OK);
  const std::string json = thz_scenario_json(s);
  CHECK(json.find("\"tx_power_dbm\": 33.0") != std::string::npos);
  CHECK(thz_scenario_set(s, "trials", "0") == THZ_OK);
  CHECK(thz_scenario_validate(s) == THZ_ERR_CONFIG);
  thz_scenario_free(s);
  thz_scenario_free(nullptr);
}

TEST_CASE("run and inspect a result") {
  thz_scenario* s = nullptr;
  REQUIRE(thz_scenario_from_json(kSmall, &s) == THZ_OK);
  thz_result* r = nullptr;
  REQUIRE(thz_scenario_run(s, &r) == THZ_OK);
  CHECK(thz_result_rows(r) == 2);
  CHECK(thz_result_schemes(r) == 2);
  CHECK(std::string(thz_result_scheme_name(r, 0)) == "awmmse_rsma");
  CHECK(thz_result_scheme_name(r, 9) == nullptr);
  double x = 0, mean = 0, sd = 0;
  CHECK(thz_result_point(r, 1, 1, &x, &mean, &sd) == THZ_OK);
  CHECK(x == 70.0);
  CHECK(mean > 0.0);
  CHECK(thz_result_point(r, 2, 0, &x, &mean, &sd) == THZ_ERR_INVALID_ARGUMENT);
  const std::string csv = thz_result_csv(r);
  CHECK(csv.rfind("sweep_value,", 0) == 0);

  thz_result* again = nullptr;
  REQUIRE(thz_scenario_run(s, &again) == THZ_OK);
  CHECK(std::string(thz_result_csv(again)) == csv);
  thz_result_free(again);

  const fs::path out = scratch("out");
  CHECK(thz_result_write(r, out.c_str(), THZ_FORMAT_CSV | THZ_FORMAT_META) == THZ_OK);
  CHECK(fs::exists(out / "results.csv"));
  CHECK(fs::exists(out / "meta.json"));
  CHECK_FALSE(fs::exists(out / "cdf_awmmse_rsma.csv"));
  CHECK(thz_result_write(r, out.c_str(), 0) == THZ_ERR_INVALID_ARGUMENT);
  thz_result_free(r);

  CHECK(thz_scenario_set(s, "ris_design", "external") == THZ_OK);
  CHECK(thz_scenario_run(s, &r) == THZ_ERR_CONFIG);
  thz_scenario_free(s);
}

TEST_CASE("dataset export, evaluation and artifact validation") {
  thz_scenario* s = nullptr;
  REQUIRE(thz_scenario_from_json(R"({"sweep": {"values": [60]}})", &s) == THZ_OK);
  const fs::path data = scratch("data");
  CHECK(thz_export_dataset(s, 2, 1, 2, data.c_str()) == THZ_OK);
  CHECK(thz_export_dataset(s, 0, 1, 2, scratch("bad").c_str()) == THZ_ERR_CONFIG);
  thz_result* r = nullptr;
  REQUIRE(thz_eval_external(s, data.c_str(), nullptr, &r) == THZ_OK);
  CHECK(thz_result_rows(r) == 1);
  thz_result_free(r);

  char buf[256];
  CHECK(thz_validate_artifacts(s, data.c_str(), buf, sizeof buf) == THZ_ERR_FORMAT);
  CHECK(thz_eval_external(s, scratch("none").c_str(), nullptr, &r) == THZ_ERR_IO);
  thz_scenario_free(s);
}

TEST_CASE("ARWU on raw arrays") {
  // K = 1: private SINR |h f|^2 / noise, common stream empty.
  const double h1[] = {2.0, 0.0};
  const double f1[] = {0.0, 0.0, 0.0, 1.0};
  double arwu = 0;
  REQUIRE(thz_arwu(1, 1, h1, f1, 1.0, &arwu) == THZ_OK);
  CHECK(arwu == doctest::Approx(std::log2(5.0)).epsilon(1e-12));

  // Two orthogonal UEs, unit privates, common (1, 1): SINR_p = 1, SINR_c = 1/2.
  const double h2[] = {1, 0, 0, 0, 0, 0, 1, 0};
  const double f2[] = {1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0};
  REQUIRE(thz_arwu(2, 1, h2, f2, 1.0, &arwu) == THZ_OK);
  CHECK(arwu == doctest::Approx(1.0 + std::log2(1.5)).epsilon(1e-12));

  CHECK(thz_arwu(0, 1, h2, f2, 1.0, &arwu) == THZ_ERR_INVALID_ARGUMENT);
  CHECK(thz_arwu(2, 1, nullptr, f2, 1.0, &arwu) == THZ_ERR_INVALID_ARGUMENT);
  CHECK(thz_arwu(2, 1, h2, f2, -1.0, &arwu) != THZ_OK);
}

TEST_CASE("closed-form update on raw arrays") {
  // K = 1: f_c = h conj(a_c) / (b_c + g_c |h|^2), f_p likewise.
  const double h[] = {1, 1};
  const double ac[] = {2, -1};
  const double ap[] = {0, 1};
  const double bp[] = {3};
  const double gc[] = {0.5};
  const double gp[] = {0.5};
  double f[4];
  REQUIRE(thz_closed_form_update(1, h, ac, ap, 1.0, bp, gc, gp, 0.0, f) == THZ_OK);
  CHECK(f[0] == doctest::Approx(0.5));
  CHECK(f[1] == doctest::Approx(1.5));
  CHECK(f[2] == doctest::Approx(0.25));
  CHECK(f[3] == doctest::Approx(-0.25));

  REQUIRE(thz_closed_form_update(1, h, ac, ap, 1.0, bp, gc, gp, 1.0, f) == THZ_OK);
  const double scale = 1.0 / std::sqrt(2.625);
  CHECK(f[0] == doctest::Approx(0.5 * scale));
  CHECK(f[3] == doctest::Approx(-0.25 * scale));
  // Already feasible: the projection leaves it alone.
  REQUIRE(thz_closed_form_update(1, h, ac, ap, 1.0, bp, gc, gp, 100.0, f) == THZ_OK);
  CHECK(f[1] == doctest::Approx(1.5));

  CHECK(thz_closed_form_update(1, h, nullptr, ap, 1.0, bp, gc, gp, 0.0, f) ==
        THZ_ERR_INVALID_ARGUMENT);
  // No regularisation and no Gram weight: singular system.
  const double zero[] = {0.0};
  CHECK(thz_closed_form_update(1, h, ac, ap, 0.0, zero, zero, zero, 0.0, f) ==
        THZ_ERR_NUMERICAL);
}
