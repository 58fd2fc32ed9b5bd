/* C interface of the thzrsma link simulator. */
#ifndef THZRSMA_H_
#define THZRSMA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define THZ_API __declspec(dllexport)
#else
#define THZ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum thz_status {
  THZ_OK = 0,
  THZ_ERR_INVALID_ARGUMENT = 1,
  THZ_ERR_CONFIG = 2,
  THZ_ERR_DIMENSION = 3,
  THZ_ERR_IO = 4,
  THZ_ERR_FORMAT = 5,
  THZ_ERR_NUMERICAL = 6,
  THZ_ERR_INTERNAL = 7
} thz_status;

/* Output selection for thz_result_write. */
#define THZ_FORMAT_CSV 1u
#define THZ_FORMAT_PLOT 2u
#define THZ_FORMAT_CDF 4u
#define THZ_FORMAT_META 8u
#define THZ_FORMAT_ALL 15u

typedef struct thz_scenario thz_scenario;
typedef struct thz_result thz_result;

THZ_API const char* thz_version(void);
/* Short machine-readable category, e.g. "config", "io". */
THZ_API const char* thz_status_name(thz_status status);
/* Message of the last failing call on this thread; never NULL. */
THZ_API const char* thz_last_error(void);

THZ_API thz_status thz_scenario_from_json(const char* json, thz_scenario** out);
THZ_API thz_status thz_scenario_from_file(const char* path, thz_scenario** out);
/* Dotted-path override, e.g. ("config.tx_power_dbm", "30"). */
THZ_API thz_status thz_scenario_set(thz_scenario* scenario, const char* key, const char* value);
THZ_API thz_status thz_scenario_validate(const thz_scenario* scenario);
/* Resolved scenario as JSON; the string lives until the next call on this
 * scenario or until it is freed. */
THZ_API const char* thz_scenario_json(thz_scenario* scenario);
THZ_API void thz_scenario_free(thz_scenario* scenario);

THZ_API thz_status thz_scenario_run(const thz_scenario* scenario, thz_result** out);
THZ_API thz_status thz_export_dataset(const thz_scenario* scenario, size_t train,
                                      size_t validation, size_t test, const char* dir);
THZ_API thz_status thz_eval_external(const thz_scenario* scenario, const char* dataset_dir,
                                     const char* artifacts_dir, thz_result** out);
/* Writes a summary into buf (truncated to buf_len, NUL-terminated). */
THZ_API thz_status thz_validate_artifacts(const thz_scenario* scenario, const char* dir,
                                          char* buf, size_t buf_len);

THZ_API size_t thz_result_rows(const thz_result* result);
THZ_API size_t thz_result_schemes(const thz_result* result);
THZ_API const char* thz_result_scheme_name(const thz_result* result, size_t scheme);
THZ_API thz_status thz_result_point(const thz_result* result, size_t row, size_t scheme,
                                    double* x, double* rw_mean, double* rw_std);
/* results.csv content; valid until the result is freed. */
THZ_API const char* thz_result_csv(thz_result* result);
THZ_API thz_status thz_result_write(const thz_result* result, const char* dir,
                                    unsigned formats);
THZ_API void thz_result_free(thz_result* result);

/* Rate evaluation on raw arrays. Complex values are interleaved (re, im).
 * h_equ: [subcarrier][ue][K] where entry (n, k, :) is h_equ[k, n].
 * f_bb:  [subcarrier][K][K + 1] row-major, column 0 the common stream.
 * Writes the ARWU averaged over subcarriers to *arwu. */
THZ_API thz_status thz_arwu(size_t num_ues, size_t num_subcarriers, const double* h_equ,
                            const double* f_bb, double noise_power, double* arwu);

/* Closed-form digital precoder for one subcarrier from parameter set A.
 * h_equ: [K][K] complex (row k = h_equ[k]); a_common, a_private: K complex;
 * b_private, gram_common, gram_private: K real. Writes K x (K + 1) complex
 * row-major to f_bb, then applies the min(sqrt(P_t), ||F||) projection when
 * tx_power > 0. */
THZ_API thz_status thz_closed_form_update(size_t num_ues, const double* h_equ,
                                          const double* a_common, const double* a_private,
                                          double b_common, const double* b_private,
                                          const double* gram_common,
                                          const double* gram_private, double tx_power,
                                          double* f_bb);

#ifdef __cplusplus
}
#endif

#endif /* THZRSMA_H_ */
