// Exercises the shared-library surface the CLI is built on.
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include "qprbm.h"

static int failures = 0;

#define EXPECT(cond)                                                        \
    do {                                                                    \
        if (!(cond)) {                                                      \
            std::printf("[FAIL] %s:%d: %s\n", __FILE__, __LINE__, #cond);   \
            ++failures;                                                     \
        }                                                                   \
    } while (0)

int main() {
    EXPECT(std::strlen(qprbm_version()) > 0);

    const char* model =
        "{\"kind\":\"base\",\"lambda\":[1,1],\"mu\":[1,1],"
        "\"nu\":[1.7320508075688772,1.7320508075688772]}";
    qprbm_rates* rates = nullptr;
    EXPECT(qprbm_rates_parse(model, &rates) == QPRBM_OK);

    char* diag = nullptr;
    EXPECT(qprbm_rates_validate(rates, &diag) == QPRBM_OK);
    EXPECT(diag == nullptr);

    qprbm_limit_data lim;
    EXPECT(qprbm_rates_limit_data(rates, &lim) == QPRBM_OK);
    EXPECT(std::fabs(lim.alpha_star - 4.0 / 3.0) < 1e-12);
    int regime = -1;
    EXPECT(qprbm_regime(lim.alpha_star, &regime) == QPRBM_OK);
    EXPECT(regime == 2);

    double lr[6];
    EXPECT(qprbm_level_rates(rates, 100, lr) == QPRBM_OK);
    EXPECT(lr[0] == 100.0);

    const int64_t x0[2] = {0, 0};
    qprbm_record* rec = nullptr;
    EXPECT(qprbm_simulate(rates, 100, x0, 2.0, 12345, 0, 1, &rec) == QPRBM_OK);
    uint64_t events = 0;
    EXPECT(qprbm_record_event_count(rec, &events) == QPRBM_OK);
    EXPECT(events > 100);

    double occ[4];
    EXPECT(qprbm_record_occupation(rec, 2.0, occ) == QPRBM_OK);
    EXPECT(std::fabs(occ[0] + occ[1] + occ[2] + occ[3] - 2.0) < 1e-9);

    double resid = 1.0;
    EXPECT(qprbm_record_decompose_residual(rec, &resid) == QPRBM_OK);
    EXPECT(resid < 1e-8);
    double bnd = 1.0;
    EXPECT(qprbm_record_boundary_residual(rec, 1.5, &bnd) == QPRBM_OK);
    EXPECT(std::fabs(bnd) < 1e-8);

    int64_t xy[2];
    EXPECT(qprbm_record_state_at(rec, 1.0, xy) == QPRBM_OK);
    EXPECT(xy[0] >= 0 && xy[1] >= 0);

    EXPECT(qprbm_record_write_jsonl(rec, "test_out_capi_record.jsonl") == QPRBM_OK);

    // Error paths set a message and return INVALID_ARGUMENT.
    qprbm_rates* bad = nullptr;
    EXPECT(qprbm_rates_parse("{\"kind\":\"nope\"}", &bad) == QPRBM_INVALID_ARGUMENT);
    EXPECT(std::strlen(qprbm_last_error()) > 0);

    int exit_code = -1;
    char* summary = nullptr;
    const std::string cfg = std::string("{\"model\":") + model +
                            ",\"out_dir\":\"test_out_capi\"}";
    EXPECT(qprbm_run("validate", cfg.c_str(), nullptr, -1, 0, &exit_code, &summary) ==
           QPRBM_OK);
    EXPECT(exit_code == 0);
    EXPECT(summary != nullptr);
    if (summary) {
        EXPECT(std::strstr(summary, "NonSemimartingale") != nullptr);
        qprbm_string_free(summary);
    }
    EXPECT(qprbm_run("bogus", cfg.c_str(), nullptr, -1, 0, &exit_code, nullptr) ==
           QPRBM_INVALID_ARGUMENT);

    qprbm_record_free(rec);
    qprbm_rates_free(rates);

    if (failures == 0) {
        std::printf("c api: all checks passed\n");
        return 0;
    }
    std::printf("c api: %d failures\n", failures);
    return 1;
}
