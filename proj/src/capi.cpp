#include "qprbm.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qprbm/ctmc.hpp"
#include "qprbm/geometry.hpp"
#include "qprbm/harness.hpp"
#include "qprbm/version.hpp"

struct qprbm_rates {
    qprbm::RateFamily family;
};

struct qprbm_record {
    qprbm::PathRecord rec;
};

namespace {

thread_local std::string g_last_error;

void set_error(const char* what) { g_last_error = what ? what : ""; }

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class Fn>
qprbm_status guarded(Fn&& fn) {
    try {
        fn();
        return QPRBM_OK;
    } catch (const std::invalid_argument& ex) {
        set_error(ex.what());
        return QPRBM_INVALID_ARGUMENT;
    } catch (const std::out_of_range& ex) {
        set_error(ex.what());
        return QPRBM_INVALID_ARGUMENT;
    } catch (const std::exception& ex) {
        set_error(ex.what());
        return QPRBM_RUNTIME_ERROR;
    } catch (...) {
        set_error("unknown error");
        return QPRBM_RUNTIME_ERROR;
    }
}

qprbm::RateFamily family_from_json(const char* model_json) {
    if (!model_json) throw std::invalid_argument("model_json is NULL");
    nlohmann::json cfg;
    cfg["model"] = nlohmann::json::parse(model_json);
    return qprbm::parse_config(cfg).family;
}

}  // namespace

extern "C" {

const char* qprbm_version(void) { return QPRBM_VERSION; }

const char* qprbm_last_error(void) { return g_last_error.c_str(); }

void qprbm_string_free(char* s) { std::free(s); }

qprbm_status qprbm_rates_parse(const char* model_json, qprbm_rates** out) {
    return guarded([&] {
        if (!out) throw std::invalid_argument("out is NULL");
        *out = new qprbm_rates{family_from_json(model_json)};
    });
}

void qprbm_rates_free(qprbm_rates* r) { delete r; }

qprbm_status qprbm_rates_validate(const qprbm_rates* r, char** diagnostics) {
    return guarded([&] {
        if (!r || !diagnostics) throw std::invalid_argument("NULL argument");
        const auto v = qprbm::validate(r->family);
        if (v.empty()) {
            *diagnostics = nullptr;
            return;
        }
        std::string joined;
        for (const auto& s : v) {
            if (!joined.empty()) joined += '\n';
            joined += s;
        }
        *diagnostics = dup_string(joined);
    });
}

qprbm_status qprbm_rates_limit_data(const qprbm_rates* r, qprbm_limit_data* out) {
    return guarded([&] {
        if (!r || !out) throw std::invalid_argument("NULL argument");
        const qprbm::LimitData d = qprbm::limit_data(r->family);
        out->b[0] = d.b.x1;
        out->b[1] = d.b.x2;
        out->sigma[0] = d.sigma.x1;
        out->sigma[1] = d.sigma.x2;
        out->d1[0] = d.d1.x1;
        out->d1[1] = d.d1.x2;
        out->d2[0] = d.d2.x1;
        out->d2[1] = d.d2.x2;
        out->theta[0] = d.theta.x1;
        out->theta[1] = d.theta.x2;
        out->theta_star[0] = d.theta_star.x1;
        out->theta_star[1] = d.theta_star.x2;
        out->alpha_star = d.alpha_star;
        out->beta[0] = d.beta.x1;
        out->beta[1] = d.beta.x2;
        out->h[0] = d.h.x1;
        out->h[1] = d.h.x2;
    });
}

qprbm_status qprbm_regime(double alpha_star, int* out) {
    return guarded([&] {
        if (!out) throw std::invalid_argument("out is NULL");
        *out = static_cast<int>(qprbm::regime_of(alpha_star));
    });
}

qprbm_status qprbm_level_rates(const qprbm_rates* r, int64_t n, double out_rates[6]) {
    return guarded([&] {
        if (!r || !out_rates) throw std::invalid_argument("NULL argument");
        const qprbm::LevelRates lr = qprbm::level_rates(r->family, n);
        out_rates[0] = lr.lambda.x1;
        out_rates[1] = lr.lambda.x2;
        out_rates[2] = lr.mu.x1;
        out_rates[3] = lr.mu.x2;
        out_rates[4] = lr.nu.x1;
        out_rates[5] = lr.nu.x2;
    });
}

qprbm_status qprbm_simulate(const qprbm_rates* r, int64_t n, const int64_t x0[2],
                            double horizon, uint64_t seed, uint32_t replication,
                            int construction, qprbm_record** out) {
    return guarded([&] {
        if (!r || !x0 || !out) throw std::invalid_argument("NULL argument");
        if (construction != 0 && construction != 1)
            throw std::invalid_argument("construction must be 0 (thinning) or 1 (marked-clocks)");
        const auto cons = construction == 0 ? qprbm::Construction::Thinning
                                            : qprbm::Construction::MarkedClocks;
        *out = new qprbm_record{qprbm::simulate(r->family, n, {x0[0], x0[1]}, horizon, seed,
                                                replication, cons)};
    });
}

void qprbm_record_free(qprbm_record* rec) { delete rec; }

qprbm_status qprbm_record_event_count(const qprbm_record* rec, uint64_t* out) {
    return guarded([&] {
        if (!rec || !out) throw std::invalid_argument("NULL argument");
        *out = rec->rec.events.size();
    });
}

qprbm_status qprbm_record_state_at(const qprbm_record* rec, double t, int64_t out_xy[2]) {
    return guarded([&] {
        if (!rec || !out_xy) throw std::invalid_argument("NULL argument");
        const auto x = rec->rec.state_at(t);
        out_xy[0] = x[0];
        out_xy[1] = x[1];
    });
}

qprbm_status qprbm_record_occupation(const qprbm_record* rec, double t, double out_times[4]) {
    return guarded([&] {
        if (!rec || !out_times) throw std::invalid_argument("NULL argument");
        const auto occ = qprbm::occupation(rec->rec, t);
        out_times[0] = occ.t0;
        out_times[1] = occ.t1;
        out_times[2] = occ.t2;
        out_times[3] = occ.tint;
    });
}

qprbm_status qprbm_record_decompose_residual(const qprbm_record* rec, double* out) {
    return guarded([&] {
        if (!rec || !out) throw std::invalid_argument("NULL argument");
        double resid = qprbm::decompose(rec->rec).max_reconstruction_residual();
        if (rec->rec.construction == qprbm::Construction::MarkedClocks) {
            resid = std::max(resid,
                             qprbm::ring_decompose(rec->rec).max_reconstruction_residual());
        }
        *out = resid;
    });
}

qprbm_status qprbm_record_boundary_residual(const qprbm_record* rec, double t, double* out) {
    return guarded([&] {
        if (!rec || !out) throw std::invalid_argument("NULL argument");
        *out = qprbm::boundary_identity_residual(rec->rec, t);
    });
}

qprbm_status qprbm_record_write_jsonl(const qprbm_record* rec, const char* path) {
    return guarded([&] {
        if (!rec || !path) throw std::invalid_argument("NULL argument");
        std::ofstream os(path);
        if (!os) throw std::runtime_error(std::string("cannot open '") + path + "'");
        qprbm::write_jsonl(rec->rec, os);
    });
}

qprbm_status qprbm_run(const char* subcommand, const char* config_json, const char* out_dir,
                       int64_t seed_override, int jobs, int* exit_code, char** summary) {
    return guarded([&] {
        if (!subcommand || !config_json || !exit_code)
            throw std::invalid_argument("NULL argument");
        qprbm::RunOptions opts;
        if (out_dir) opts.out_dir = out_dir;
        if (seed_override >= 0) opts.seed = static_cast<std::uint64_t>(seed_override);
        opts.jobs = jobs;
        const auto result =
            qprbm::run_experiment(subcommand, nlohmann::json::parse(config_json), opts);
        *exit_code = result.exit_code;
        if (summary) *summary = dup_string(result.summary);
    });
}

}  // extern "C"
