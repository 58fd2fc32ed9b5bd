#include "thzrsma/thzrsma.h"

#include <cstring>
#include <string>

#include "thzrsma/awmmse.hpp"
#include "thzrsma/error.hpp"
#include "thzrsma/harness.hpp"
#include "thzrsma/transceiver.hpp"

struct thz_scenario {
  thzrsma::ScenarioSpec spec;
  std::string json;
};

struct thz_result {
  thzrsma::ResultTable table;
  std::string csv;
};

namespace {

thread_local std::string g_last_error;

thz_status status_of(thzrsma::ErrorCategory c) {
  switch (c) {
    case thzrsma::ErrorCategory::kConfig: return THZ_ERR_CONFIG;
    case thzrsma::ErrorCategory::kDimension: return THZ_ERR_DIMENSION;
    case thzrsma::ErrorCategory::kIo: return THZ_ERR_IO;
    case thzrsma::ErrorCategory::kFormat: return THZ_ERR_FORMAT;
    case thzrsma::ErrorCategory::kNumerical: return THZ_ERR_NUMERICAL;
    case thzrsma::ErrorCategory::kInternal: return THZ_ERR_INTERNAL;
  }
  return THZ_ERR_INTERNAL;
}

thz_status fail(thz_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
thz_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return THZ_OK;
  } catch (const thzrsma::Error& e) {
    return fail(status_of(e.category()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(THZ_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(THZ_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(THZ_ERR_INTERNAL, "unknown exception");
  }
}

#define THZ_REQUIRE(cond, msg) \
  if (!(cond)) return fail(THZ_ERR_INVALID_ARGUMENT, msg)

thzrsma::CMatrix read_complex(const double* data, std::size_t rows, std::size_t cols) {
  thzrsma::CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double* p = data + 2 * (r * cols + c);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {p[0], p[1]};
    }
  }
  return m;
}

thz_status new_result(thzrsma::ResultTable table, thz_result** out) {
  auto* r = new thz_result{std::move(table), {}};
  *out = r;
  return THZ_OK;
}

}  // namespace

extern "C" {

const char* thz_version(void) {
  static const std::string v = thzrsma::version_string();
  return v.c_str();
}

const char* thz_status_name(thz_status status) {
  switch (status) {
    case THZ_OK: return "ok";
    case THZ_ERR_INVALID_ARGUMENT: return "usage";
    case THZ_ERR_CONFIG: return "config";
    case THZ_ERR_DIMENSION: return "dimension";
    case THZ_ERR_IO: return "io";
    case THZ_ERR_FORMAT: return "format";
    case THZ_ERR_NUMERICAL: return "numerical";
    case THZ_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* thz_last_error(void) { return g_last_error.c_str(); }

thz_status thz_scenario_from_json(const char* json, thz_scenario** out) {
  THZ_REQUIRE(json && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      throw thzrsma::FormatError(std::string("scenario is not valid JSON: ") + e.what());
    }
    *out = new thz_scenario{thzrsma::ScenarioSpec::from_json(j), {}};
  });
}

thz_status thz_scenario_from_file(const char* path, thz_scenario** out) {
  THZ_REQUIRE(path && out, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new thz_scenario{thzrsma::load_scenario(path), {}}; });
}

thz_status thz_scenario_set(thz_scenario* scenario, const char* key, const char* value) {
  THZ_REQUIRE(scenario && key && value, "null argument");
  return guarded([&] { scenario->spec.set(key, value); });
}

thz_status thz_scenario_validate(const thz_scenario* scenario) {
  THZ_REQUIRE(scenario, "null argument");
  return guarded([&] { scenario->spec.validate(); });
}

const char* thz_scenario_json(thz_scenario* scenario) {
  if (!scenario) return "";
  scenario->json = scenario->spec.to_json().dump(2);
  return scenario->json.c_str();
}

void thz_scenario_free(thz_scenario* scenario) { delete scenario; }

thz_status thz_scenario_run(const thz_scenario* scenario, thz_result** out) {
  THZ_REQUIRE(scenario && out, "null argument");
  *out = nullptr;
  return guarded([&] { new_result(thzrsma::run_scenario(scenario->spec), out); });
}

thz_status thz_export_dataset(const thz_scenario* scenario, size_t train, size_t validation,
                              size_t test, const char* dir) {
  THZ_REQUIRE(scenario && dir, "null argument");
  return guarded([&] {
    thzrsma::export_dataset(scenario->spec, thzrsma::SplitSizes{train, validation, test}, dir);
  });
}

thz_status thz_eval_external(const thz_scenario* scenario, const char* dataset_dir,
                             const char* artifacts_dir, thz_result** out) {
  THZ_REQUIRE(scenario && dataset_dir && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    new_result(thzrsma::eval_external(scenario->spec, dataset_dir,
                                      artifacts_dir ? artifacts_dir : ""),
               out);
  });
}

thz_status thz_validate_artifacts(const thz_scenario* scenario, const char* dir, char* buf,
                                  size_t buf_len) {
  THZ_REQUIRE(scenario && dir, "null argument");
  THZ_REQUIRE(buf || buf_len == 0, "null buffer with non-zero length");
  return guarded([&] {
    const std::string summary = thzrsma::validate_artifacts(scenario->spec, dir);
    if (buf_len > 0) {
      const std::size_t n = std::min(summary.size(), buf_len - 1);
      std::memcpy(buf, summary.data(), n);
      buf[n] = '\0';
    }
  });
}

size_t thz_result_rows(const thz_result* result) { return result ? result->table.rows.size() : 0; }

size_t thz_result_schemes(const thz_result* result) {
  return result ? result->table.schemes.size() : 0;
}

const char* thz_result_scheme_name(const thz_result* result, size_t scheme) {
  if (!result || scheme >= result->table.schemes.size()) return nullptr;
  return result->table.schemes[scheme].c_str();
}

thz_status thz_result_point(const thz_result* result, size_t row, size_t scheme, double* x,
                            double* rw_mean, double* rw_std) {
  THZ_REQUIRE(result, "null argument");
  THZ_REQUIRE(row < result->table.rows.size(), "row out of range");
  THZ_REQUIRE(scheme < result->table.schemes.size(), "scheme out of range");
  const auto& r = result->table.rows[row];
  if (x) *x = r.x;
  if (rw_mean) *rw_mean = r.schemes[scheme].rw_mean;
  if (rw_std) *rw_std = r.schemes[scheme].rw_std;
  return THZ_OK;
}

const char* thz_result_csv(thz_result* result) {
  if (!result) return "";
  result->csv = thzrsma::results_csv(result->table);
  return result->csv.c_str();
}

thz_status thz_result_write(const thz_result* result, const char* dir, unsigned formats) {
  THZ_REQUIRE(result && dir, "null argument");
  THZ_REQUIRE(formats != 0 && (formats & ~THZ_FORMAT_ALL) == 0, "unknown output format bits");
  return guarded([&] { thzrsma::emit_outputs(result->table, dir, formats); });
}

void thz_result_free(thz_result* result) { delete result; }

thz_status thz_arwu(size_t num_ues, size_t num_subcarriers, const double* h_equ,
                    const double* f_bb, double noise_power, double* arwu) {
  THZ_REQUIRE(h_equ && f_bb && arwu, "null argument");
  THZ_REQUIRE(num_ues > 0 && num_subcarriers > 0, "sizes must be positive");
  THZ_REQUIRE(noise_power > 0.0, "noise power must be positive");
  return guarded([&] {
    const std::size_t K = num_ues;
    std::vector<thzrsma::EquivalentChannels> h;
    thzrsma::DigitalPrecoder p;
    for (std::size_t n = 0; n < num_subcarriers; ++n) {
      // Rows of the raw block are UEs; the library stores UEs as columns.
      h.push_back(read_complex(h_equ + 2 * n * K * K, K, K).transpose());
      p.per_subcarrier.push_back(read_complex(f_bb + 2 * n * K * (K + 1), K, K + 1));
    }
    *arwu = thzrsma::rate_report(h, p, noise_power).arwu;
  });
}

thz_status thz_closed_form_update(size_t num_ues, const double* h_equ, const double* a_common,
                                  const double* a_private, double b_common,
                                  const double* b_private, const double* gram_common,
                                  const double* gram_private, double tx_power, double* f_bb) {
  THZ_REQUIRE(h_equ && a_common && a_private && b_private && gram_common && gram_private && f_bb,
              "null argument");
  THZ_REQUIRE(num_ues > 0, "num_ues must be positive");
  return guarded([&] {
    const auto K = static_cast<Eigen::Index>(num_ues);
    thzrsma::AwmmseParams params;
    params.a_common = read_complex(a_common, num_ues, 1);
    params.a_private = read_complex(a_private, num_ues, 1);
    params.b_common = b_common;
    params.b_private = Eigen::Map<const thzrsma::RVector>(b_private, K);
    params.gram_common = Eigen::Map<const thzrsma::RVector>(gram_common, K);
    params.gram_private = Eigen::Map<const thzrsma::RVector>(gram_private, K);
    thzrsma::CMatrix f =
        thzrsma::closed_form_update(read_complex(h_equ, num_ues, num_ues).transpose(), params);
    if (tx_power > 0.0) f = thzrsma::power_projection(f, tx_power);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      for (Eigen::Index c = 0; c < f.cols(); ++c) {
        f_bb[2 * (r * f.cols() + c)] = f(r, c).real();
        f_bb[2 * (r * f.cols() + c) + 1] = f(r, c).imag();
      }
    }
  });
}

}  // extern "C"
