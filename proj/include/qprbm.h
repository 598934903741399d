/* C API for the quarter-plane reflected-random-walk toolkit.
 *
 * All functions return a qprbm_status; on failure qprbm_last_error() holds a
 * thread-local message. Objects returned through out-parameters are owned by
 * the caller and released with the matching *_free function.
 */
#ifndef QPRBM_H
#define QPRBM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qprbm_status {
    QPRBM_OK = 0,
    QPRBM_INVALID_ARGUMENT = 1,
    QPRBM_RUNTIME_ERROR = 2,
} qprbm_status;

typedef struct qprbm_rates qprbm_rates;   /* opaque rate family */
typedef struct qprbm_record qprbm_record; /* opaque trajectory record */

const char* qprbm_version(void);
const char* qprbm_last_error(void);
void qprbm_string_free(char* s);

/* Rate family from a model JSON object, e.g.
 *   {"kind":"base","lambda":[1,1],"mu":[1,1],"nu":[1.732,1.732]}
 * (kinds: base, gps-ps, coupled; same schema as the config "model" section).
 */
qprbm_status qprbm_rates_parse(const char* model_json, qprbm_rates** out);
void qprbm_rates_free(qprbm_rates* r);

/* Newline-joined diagnostics, or NULL when the family is admissible. */
qprbm_status qprbm_rates_validate(const qprbm_rates* r, char** diagnostics);

typedef struct qprbm_limit_data {
    double b[2];
    double sigma[2];
    double d1[2];
    double d2[2];
    double theta[2];
    double theta_star[2];
    double alpha_star;
    double beta[2];
    double h[2];
} qprbm_limit_data;

qprbm_status qprbm_rates_limit_data(const qprbm_rates* r, qprbm_limit_data* out);

/* 0 = SRBM (alpha* < 1), 1 = extended Skorohod (= 1), 2 = non-semimartingale. */
qprbm_status qprbm_regime(double alpha_star, int* out);

/* Level-n rates in the order l1, l2, m1, m2, n1, n2. */
qprbm_status qprbm_level_rates(const qprbm_rates* r, int64_t n, double out_rates[6]);

/* construction: 0 = thinning, 1 = marked-clocks. */
qprbm_status qprbm_simulate(const qprbm_rates* r, int64_t n, const int64_t x0[2],
                            double horizon, uint64_t seed, uint32_t replication,
                            int construction, qprbm_record** out);
void qprbm_record_free(qprbm_record* rec);

qprbm_status qprbm_record_event_count(const qprbm_record* rec, uint64_t* out);
qprbm_status qprbm_record_state_at(const qprbm_record* rec, double t, int64_t out_xy[2]);
/* t0, t1, t2, interior */
qprbm_status qprbm_record_occupation(const qprbm_record* rec, double t, double out_times[4]);
/* max over breakpoints of the reconstruction residuals (hat and ring). */
qprbm_status qprbm_record_decompose_residual(const qprbm_record* rec, double* out);
qprbm_status qprbm_record_boundary_residual(const qprbm_record* rec, double t, double* out);
qprbm_status qprbm_record_write_jsonl(const qprbm_record* rec, const char* path);

/* Run one experiment. subcommand: validate, simulate, identities, crossings,
 * corner, convergence, girsanov, submartingale. config_json is the full
 * experiment config document. out_dir overrides the config output directory
 * when non-NULL; seed_override < 0 keeps the config seed; jobs <= 0 uses all
 * cores. exit_code: 0 pass, 2 assertion failure. summary (optional) receives
 * a malloc'd report, released with qprbm_string_free.
 *
 * Returns QPRBM_INVALID_ARGUMENT for unknown subcommands or malformed
 * configs (usage errors, exit code 1 at the CLI).
 */
qprbm_status qprbm_run(const char* subcommand, const char* config_json, const char* out_dir,
                       int64_t seed_override, int jobs, int* exit_code, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* QPRBM_H */
