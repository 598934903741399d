#include "qprbm/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "harness_internal.hpp"
#include "qprbm/ctmc.hpp"
#include "qprbm/rbm.hpp"
#include "qprbm/version.hpp"

namespace qprbm {

namespace {

// Quintic smoothstep: 0 below 0, 1 above 1, C^2 everywhere.
double ramp(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
double ramp_d1(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double w = u * (1.0 - u);
    return 30.0 * w * w;
}
double ramp_d2(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
}

}  // namespace

ProductCutoff::ProductCutoff(double a1, double a2, double s) : a1_(a1), a2_(a2), s_(s) {
    if (!(a1 > 0.0) || !(a2 > 0.0) || !(s > 0.0))
        throw std::invalid_argument(
            "ProductCutoff: onsets and smoothing width must be positive (f must vanish "
            "in a neighborhood of the origin)");
}

double ProductCutoff::value(Vec2 x) const {
    return ramp((x.x1 - a1_) / s_) * ramp((x.x2 - a2_) / s_);
}

Vec2 ProductCutoff::gradient(Vec2 x) const {
    const double u1 = (x.x1 - a1_) / s_;
    const double u2 = (x.x2 - a2_) / s_;
    return {ramp_d1(u1) * ramp(u2) / s_, ramp(u1) * ramp_d1(u2) / s_};
}

Vec2 ProductCutoff::hessian_diag(Vec2 x) const {
    const double u1 = (x.x1 - a1_) / s_;
    const double u2 = (x.x2 - a2_) / s_;
    return {ramp_d2(u1) * ramp(u2) / (s_ * s_), ramp(u1) * ramp_d2(u2) / (s_ * s_)};
}

namespace {

Vec2 get_vec2(const nlohmann::json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2)
        throw std::invalid_argument("config: '" + key + "' must be a pair");
    return {v[0].get<double>(), v[1].get<double>()};
}

Vec2 get_vec2_or(const nlohmann::json& j, const std::string& key, Vec2 fallback) {
    return j.contains(key) ? get_vec2(j, key) : fallback;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
    }
}

RateFamily parse_base_family(const nlohmann::json& m) {
    reject_unknown(m, {"kind", "lambda", "mu", "nu", "hat_lambda", "hat_mu", "hat_nu"}, "model");
    RateFamily f;
    f.lambda = get_vec2(m, "lambda");
    f.mu = get_vec2(m, "mu");
    f.nu = get_vec2(m, "nu");
    f.hat_lambda = get_vec2_or(m, "hat_lambda", {});
    f.hat_mu = get_vec2_or(m, "hat_mu", {});
    f.hat_nu = get_vec2_or(m, "hat_nu", {});
    return f;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
    reject_unknown(j,
                   {"model", "n_list", "S", "eps_list", "c", "c0", "replications", "seed", "dt",
                    "out_dir", "construction", "x0_lattice", "x0", "t_marginal", "r_escape",
                    "ball_eps", "submartingale", "girsanov", "escape"},
                   "top level");
    ExperimentConfig cfg;
    cfg.raw = j;
    if (!j.contains("model")) throw std::invalid_argument("config: missing 'model'");
    const auto& m = j.at("model");
    cfg.model_kind = m.value("kind", "base");
    if (cfg.model_kind == "base") {
        cfg.family = parse_base_family(m);
    } else if (cfg.model_kind == "gps-ps") {
        reject_unknown(m, {"kind", "phi", "mu_ps", "hat_mu_ps", "hat_lambda"}, "model");
        cfg.family = gps_ps_to_base(get_vec2(m, "phi"), get_vec2(m, "mu_ps"),
                                    get_vec2_or(m, "hat_mu_ps", {}),
                                    get_vec2_or(m, "hat_lambda", {}));
    } else if (cfg.model_kind == "coupled") {
        reject_unknown(m, {"kind", "lambda", "mu_cp", "nu_cp", "hat_lambda", "hat_mu_cp",
                           "hat_nu_cp"},
                       "model");
        cfg.family = coupled_to_base(get_vec2(m, "lambda"), get_vec2(m, "mu_cp"),
                                     get_vec2(m, "nu_cp"), get_vec2_or(m, "hat_lambda", {}),
                                     get_vec2_or(m, "hat_mu_cp", {}),
                                     get_vec2_or(m, "hat_nu_cp", {}));
    } else {
        throw std::invalid_argument("config: model.kind must be base, gps-ps, or coupled");
    }
    if (j.contains("n_list")) {
        cfg.n_list = j["n_list"].get<std::vector<std::int64_t>>();
        if (cfg.n_list.empty()) throw std::invalid_argument("config: n_list must be nonempty");
    }
    if (j.contains("S")) cfg.S = j["S"].get<double>();
    if (!(cfg.S > 0.0)) throw std::invalid_argument("config: S must be positive");
    if (j.contains("eps_list")) {
        cfg.eps_list = j["eps_list"].get<std::vector<double>>();
        if (cfg.eps_list.empty()) throw std::invalid_argument("config: eps_list must be nonempty");
    }
    if (j.contains("c")) {
        if (j["c"].is_string()) {
            if (j["c"].get<std::string>() != "auto")
                throw std::invalid_argument("config: c must be a number or \"auto\"");
            cfg.c = 0.0;
        } else {
            cfg.c = j["c"].get<double>();
            if (!(cfg.c > 1.0)) throw std::invalid_argument("config: c must exceed 1");
        }
    }
    if (j.contains("c0")) cfg.c0 = j["c0"].get<double>();
    if (!(cfg.c0 > 0.0 && cfg.c0 < 1.0))
        throw std::invalid_argument("config: c0 must lie in (0,1)");
    if (j.contains("replications")) cfg.replications = j["replications"].get<std::int64_t>();
    if (cfg.replications < 0) throw std::invalid_argument("config: replications must be >= 0");
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dt")) {
        if (j["dt"].is_string()) {
            if (j["dt"].get<std::string>() != "auto")
                throw std::invalid_argument("config: dt must be a number or \"auto\"");
            cfg.dt = 0.0;
        } else {
            cfg.dt = j["dt"].get<double>();
            if (!(cfg.dt > 0.0)) throw std::invalid_argument("config: dt must be positive");
        }
    }
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("construction")) {
        cfg.construction = j["construction"].get<std::string>();
        if (cfg.construction != "marked-clocks" && cfg.construction != "thinning")
            throw std::invalid_argument("config: construction must be marked-clocks or thinning");
    }
    if (j.contains("x0_lattice")) {
        const auto& v = j["x0_lattice"];
        if (!v.is_array() || v.size() != 2)
            throw std::invalid_argument("config: x0_lattice must be a pair of integers");
        cfg.x0_lattice = {v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
    }
    if (j.contains("x0")) cfg.x0 = get_vec2(j, "x0");
    if (j.contains("t_marginal")) cfg.t_marginal = j["t_marginal"].get<double>();
    if (j.contains("r_escape")) cfg.r_escape = j["r_escape"].get<double>();
    if (j.contains("ball_eps")) cfg.ball_eps = j["ball_eps"].get<double>();
    if (j.contains("submartingale")) {
        const auto& s = j["submartingale"];
        reject_unknown(s, {"t1", "t2", "a1", "a2", "s"}, "submartingale");
        if (s.contains("t1")) cfg.t1 = s["t1"].get<double>();
        if (s.contains("t2")) cfg.t2 = s["t2"].get<double>();
        if (s.contains("a1")) cfg.cutoff_a1 = s["a1"].get<double>();
        if (s.contains("a2")) cfg.cutoff_a2 = s["a2"].get<double>();
        if (s.contains("s")) cfg.cutoff_s = s["s"].get<double>();
        if (!(cfg.t1 >= 0.0 && cfg.t1 < cfg.t2))
            throw std::invalid_argument("config: need 0 <= t1 < t2");
    }
    if (j.contains("girsanov")) {
        const auto& g = j["girsanov"];
        reject_unknown(g, {"target"}, "girsanov");
        cfg.girsanov_target = parse_base_family(g.at("target"));
    }
    if (j.contains("escape")) {
        const auto& esc = j["escape"];
        reject_unknown(esc, {"eps_list", "replications", "c", "x0_angle_deg", "dt_factor"},
                       "escape");
        EscapeConfig ec;
        if (esc.contains("eps_list")) ec.eps_list = esc["eps_list"].get<std::vector<double>>();
        if (esc.contains("replications")) {
            if (esc["replications"].is_array()) {
                ec.replications = esc["replications"].get<std::vector<std::int64_t>>();
            } else {
                ec.replications.assign(ec.eps_list.size(), esc["replications"].get<std::int64_t>());
            }
        }
        if (ec.replications.size() != ec.eps_list.size())
            throw std::invalid_argument("config: escape.replications must match escape.eps_list");
        if (esc.contains("c")) ec.c = esc["c"].get<double>();
        if (!(ec.c > 1.0)) throw std::invalid_argument("config: escape.c must exceed 1");
        if (esc.contains("x0_angle_deg")) ec.x0_angle_deg = esc["x0_angle_deg"].get<double>();
        if (esc.contains("dt_factor")) ec.dt_factor = esc["dt_factor"].get<double>();
        if (!(ec.dt_factor > 0.0))
            throw std::invalid_argument("config: escape.dt_factor must be positive");
        cfg.escape = ec;
    }
    return cfg;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs)
                                : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<std::size_t>(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto body = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mu);
                if (!error) error = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

namespace detail {

void write_manifest(const Effective& e, const std::string& subcommand,
                    const nlohmann::json& derived) {
    nlohmann::json m;
    m["experiment"] = subcommand;
    m["config"] = e.cfg.raw;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(e.cfg.raw.dump())));
    m["config_hash"] = hash;
    m["seed"] = e.cfg.seed;
    m["version"] = QPRBM_VERSION;
    nlohmann::json rates = nlohmann::json::array();
    for (std::int64_t n : e.cfg.n_list) {
        const LevelRates lr = level_rates(e.cfg.family, n);
        rates.push_back({{"n", n},
                         {"lambda_n", {lr.lambda.x1, lr.lambda.x2}},
                         {"mu_n", {lr.mu.x1, lr.mu.x2}},
                         {"nu_n", {lr.nu.x1, lr.nu.x2}}});
    }
    m["level_rates"] = rates;
    m["derived"] = derived;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    m["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(now).count();
    std::ofstream os(std::filesystem::path(e.out_dir) / "manifest.json");
    os << m.dump(2) << '\n';
}

}  // namespace detail

RunResult run_validate(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    const auto violations = validate(e.cfg.family);
    std::ostringstream os;
    os.precision(12);
    nlohmann::json derived;
    if (violations.empty()) {
        const LimitData d = limit_data(e.cfg.family);
        const Regime r = regime_of(d.alpha_star);
        os << "alpha* = " << d.alpha_star << ", regime " << regime_name(r) << "\n";
        os << "b = (" << d.b.x1 << ", " << d.b.x2 << "), sigma = (" << d.sigma.x1 << ", "
           << d.sigma.x2 << ")\n";
        os << "d(1) = (" << d.d1.x1 << ", " << d.d1.x2 << "), d(2) = (" << d.d2.x1 << ", "
           << d.d2.x2 << ")\n";
        os << "theta* = (" << d.theta_star.x1 << ", " << d.theta_star.x2 << ")\n";
        derived["alpha_star"] = d.alpha_star;
        derived["regime"] = regime_name(r);
    } else {
        for (const auto& v : violations) os << "violation: " << v << "\n";
    }
    detail::write_manifest(e, "validate", derived);
    return {violations.empty() ? 0 : 2, os.str()};
}

RunResult run_simulate(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    const Construction cons = e.cfg.construction == "thinning" ? Construction::Thinning
                                                               : Construction::MarkedClocks;
    const std::int64_t n = e.cfg.n_list.front();
    const PathRecord rec =
        simulate(e.cfg.family, n, e.cfg.x0_lattice, e.cfg.S, e.cfg.seed, 0, cons);
    {
        std::ofstream os(std::filesystem::path(e.out_dir) / "record.jsonl");
        write_jsonl(rec, os);
    }
    {
        std::ofstream os(std::filesystem::path(e.out_dir) / "rescaled.jsonl");
        write_jsonl(rescale(rec), os);
    }
    detail::write_manifest(e, "simulate", {{"events", rec.events.size()}});
    std::ostringstream os;
    os << "simulated n=" << n << " S=" << e.cfg.S << " events=" << rec.events.size() << "\n";
    return {0, os.str()};
}

RunResult run_experiment(const std::string& subcommand, const nlohmann::json& config,
                         const RunOptions& opts) {
    const ExperimentConfig cfg = parse_config(config);
    if (subcommand == "validate") return run_validate(cfg, opts);
    if (subcommand == "simulate") return run_simulate(cfg, opts);
    if (subcommand == "identities") return run_identities(cfg, opts);
    if (subcommand == "crossings") return run_crossing_scaling(cfg, opts);
    if (subcommand == "corner") return run_corner(cfg, opts);
    if (subcommand == "convergence") return run_convergence(cfg, opts);
    if (subcommand == "girsanov") return run_girsanov(cfg, opts);
    if (subcommand == "submartingale") return run_submartingale(cfg, opts);
    throw std::invalid_argument("unknown subcommand '" + subcommand + "'");
}

}  // namespace qprbm
