#include "qprbm/ctmc.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace qprbm {

namespace {

// Compensated summation for the occupation accumulators.
struct Kahan {
    double s = 0.0, c = 0.0;
    void add(double v) {
        const double y = v - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
};

struct OccupationFold {
    Kahan t0, t1, t2, tint;
    void add(Region r, double dt) {
        switch (r) {
            case Region::Origin: t0.add(dt); break;
            case Region::F1: t1.add(dt); break;
            case Region::F2: t2.add(dt); break;
            case Region::Interior: tint.add(dt); break;
        }
    }
};

struct RecordingVisitor {
    PathRecord* rec;
    void on_hold(double, double, LatticePoint) {}
    void on_fire(double t, LatticePoint, Clock clock, Jump jump, LatticePoint) {
        rec->events.push_back({t, jump, clock});
        ++rec->clock_counts[static_cast<int>(clock)];
    }
    void on_finish(double, LatticePoint) {}
};

const char* jump_name(Jump j) {
    switch (j) {
        case Jump::UpE1: return "+e1";
        case Jump::DownE1: return "-e1";
        case Jump::UpE2: return "+e2";
        case Jump::DownE2: return "-e2";
        case Jump::None: return "none";
    }
    return "?";
}

Jump jump_from_name(const std::string& s) {
    if (s == "+e1") return Jump::UpE1;
    if (s == "-e1") return Jump::DownE1;
    if (s == "+e2") return Jump::UpE2;
    if (s == "-e2") return Jump::DownE2;
    if (s == "none") return Jump::None;
    throw std::invalid_argument("unknown jump '" + s + "'");
}

const char* clock_name(Clock c) {
    static const char* names[6] = {"A1", "A2", "D1", "D2", "B1", "B2"};
    return names[static_cast<int>(c)];
}

Clock clock_from_name(const std::string& s) {
    for (int i = 0; i < 6; ++i) {
        if (s == clock_name(static_cast<Clock>(i))) return static_cast<Clock>(i);
    }
    throw std::invalid_argument("unknown clock '" + s + "'");
}

LatticePoint apply_jump(LatticePoint x, Jump j) {
    switch (j) {
        case Jump::UpE1: ++x[0]; break;
        case Jump::DownE1: --x[0]; break;
        case Jump::UpE2: ++x[1]; break;
        case Jump::DownE2: --x[1]; break;
        case Jump::None: break;
    }
    return x;
}

}  // namespace

LatticePoint PathRecord::state_at(double t) const {
    LatticePoint x = x0;
    for (const Event& e : events) {
        if (e.t > t) break;
        x = apply_jump(x, e.jump);
    }
    return x;
}

PathRecord simulate(const RateFamily& params, std::int64_t n, LatticePoint x0, double S,
                    std::uint64_t seed, std::uint32_t replication, Construction construction) {
    PathRecord rec;
    rec.n = n;
    rec.x0 = x0;
    rec.horizon = S;
    rec.seed = seed;
    rec.replication = replication;
    rec.construction = construction;
    rec.family = params;
    rec.rates = level_rates(params, n);
    RecordingVisitor v{&rec};
    simulate_visit(rec.rates, x0, S, seed, replication, construction, v);
    return rec;
}

CadlagPath rescale(const PathRecord& rec) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(rec.n));
    CadlagPath p;
    p.kind = PathKind::Step;
    p.horizon = rec.horizon;
    p.t.push_back(0.0);
    LatticePoint x = rec.x0;
    p.x.push_back({inv * static_cast<double>(x[0]), inv * static_cast<double>(x[1])});
    for (const Event& e : rec.events) {
        if (e.jump == Jump::None) continue;
        x = apply_jump(x, e.jump);
        if (x[0] < 0 || x[1] < 0)
            throw std::runtime_error("rescale: event log leaves the quarter lattice");
        p.t.push_back(e.t);
        p.x.push_back({inv * static_cast<double>(x[0]), inv * static_cast<double>(x[1])});
    }
    if (p.t.back() < rec.horizon) {
        p.t.push_back(rec.horizon);
        p.x.push_back(p.x.back());
    }
    return p;
}

OccupationTimes occupation(const PathRecord& rec, double t) {
    if (!(t >= 0.0 && t <= rec.horizon))
        throw std::invalid_argument("occupation: t outside [0, horizon]");
    OccupationFold fold;
    LatticePoint x = rec.x0;
    double prev = 0.0;
    for (const Event& e : rec.events) {
        if (e.t >= t) break;
        fold.add(region_of(x), e.t - prev);
        prev = e.t;
        x = apply_jump(x, e.jump);
    }
    fold.add(region_of(x), t - prev);
    OccupationTimes out;
    out.t = t;
    out.t0 = fold.t0.s;
    out.t1 = fold.t1.s;
    out.t2 = fold.t2.s;
    out.tint = fold.tint.s;
    return out;
}

namespace {

// Shared fold for the decompositions: occupation accumulators plus counting
// processes, sampled at every clock firing.
struct DecompositionFold {
    const PathRecord& rec;
    double inv_sqrt_n;
    Vec2 bn;  // (lambda^n - mu^n)/sqrt(n), exact under heavy traffic scaling

    LatticePoint x;
    OccupationFold occ;
    std::int64_t a_count[2] = {0, 0};   // accepted up jumps
    std::int64_t d_count[2] = {0, 0};   // accepted down jumps
    std::int64_t nd_count[2] = {0, 0};  // all D-clock firings
    double prev_t = 0.0;

    explicit DecompositionFold(const PathRecord& r)
        : rec(r), inv_sqrt_n(1.0 / std::sqrt(static_cast<double>(r.n))), x(r.x0) {
        bn = (rec.rates.lambda - rec.rates.mu) * inv_sqrt_n;
    }

    void advance(const Event& e) {
        occ.add(region_of(x), e.t - prev_t);
        prev_t = e.t;
        switch (e.jump) {
            case Jump::UpE1: ++a_count[0]; break;
            case Jump::UpE2: ++a_count[1]; break;
            case Jump::DownE1: ++d_count[0]; break;
            case Jump::DownE2: ++d_count[1]; break;
            case Jump::None: break;
        }
        if (e.clock == Clock::D1) ++nd_count[0];
        if (e.clock == Clock::D2) ++nd_count[1];
        x = apply_jump(x, e.jump);
    }

    Vec2 xhat() const {
        return {inv_sqrt_n * static_cast<double>(x[0]), inv_sqrt_n * static_cast<double>(x[1])};
    }
    Vec2 ahat(double t) const {
        return {inv_sqrt_n * (static_cast<double>(a_count[0]) - rec.rates.lambda.x1 * t),
                inv_sqrt_n * (static_cast<double>(a_count[1]) - rec.rates.lambda.x2 * t)};
    }
    Vec2 dhat() const {
        const double tint = occ.tint.s;
        const double comp1 = rec.rates.mu.x1 * tint + (rec.rates.mu.x1 + rec.rates.nu.x1) * occ.t2.s;
        const double comp2 = rec.rates.mu.x2 * tint + (rec.rates.mu.x2 + rec.rates.nu.x2) * occ.t1.s;
        return {inv_sqrt_n * (static_cast<double>(d_count[0]) - comp1),
                inv_sqrt_n * (static_cast<double>(d_count[1]) - comp2)};
    }
    Vec2 dring(double t) const {
        return {inv_sqrt_n * (static_cast<double>(nd_count[0]) - rec.rates.mu.x1 * t),
                inv_sqrt_n * (static_cast<double>(nd_count[1]) - rec.rates.mu.x2 * t)};
    }
    Vec2 yhat(double t, Vec2 a, Vec2 d) const {
        const Vec2 xhat0{inv_sqrt_n * static_cast<double>(rec.x0[0]),
                         inv_sqrt_n * static_cast<double>(rec.x0[1])};
        return xhat0 + a - d + bn * t;
    }
    Vec2 rhat() const {
        const double r1 = rec.rates.mu.x1 * (occ.t1.s + occ.t0.s) - rec.rates.nu.x1 * occ.t2.s;
        const double r2 = rec.rates.mu.x2 * (occ.t2.s + occ.t0.s) - rec.rates.nu.x2 * occ.t1.s;
        return {inv_sqrt_n * r1, inv_sqrt_n * r2};
    }
};

double max_abs_residual(const std::vector<Vec2>& lhs, const std::vector<Vec2>& rhs) {
    double m = 0.0;
    for (std::size_t k = 0; k < lhs.size(); ++k) {
        m = std::max({m, std::abs(lhs[k].x1 - rhs[k].x1), std::abs(lhs[k].x2 - rhs[k].x2)});
    }
    return m;
}

}  // namespace

double Decomposition::max_reconstruction_residual() const {
    std::vector<Vec2> sum(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) sum[k] = yhat[k] + rhat[k];
    return max_abs_residual(sum, xhat);
}

Decomposition decompose(const PathRecord& rec) {
    if (rec.family.lambda.x1 != rec.family.mu.x1 || rec.family.lambda.x2 != rec.family.mu.x2)
        throw std::invalid_argument("decompose: requires heavy traffic (lambda_i = mu_i)");
    DecompositionFold fold(rec);
    Decomposition out;
    const std::size_t m = rec.events.size() + 1;
    out.t.reserve(m);
    out.xhat.reserve(m);
    out.ahat.reserve(m);
    out.dhat.reserve(m);
    out.yhat.reserve(m);
    out.rhat.reserve(m);
    auto sample = [&](double t) {
        out.t.push_back(t);
        out.xhat.push_back(fold.xhat());
        const Vec2 a = fold.ahat(t);
        const Vec2 d = fold.dhat();
        out.ahat.push_back(a);
        out.dhat.push_back(d);
        out.yhat.push_back(fold.yhat(t, a, d));
        out.rhat.push_back(fold.rhat());
    };
    sample(0.0);
    for (const Event& e : rec.events) {
        fold.advance(e);
        sample(e.t);
    }
    return out;
}

double RingDecomposition::max_reconstruction_residual() const {
    std::vector<Vec2> sum(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) sum[k] = yring[k] + mring[k] + rhat[k];
    return max_abs_residual(sum, xhat);
}

Vec2 RingDecomposition::mring_quadratic_variation(double s, double t) const {
    Vec2 qv{};
    for (std::size_t k = 1; k < this->t.size(); ++k) {
        if (this->t[k] <= s || this->t[k] > t) continue;
        const Vec2 jump = mring[k] - mring[k - 1];
        // The compensator drift between breakpoints is continuous; only the
        // count jumps contribute. Isolate them by removing the drift part.
        qv += Vec2{jump.x1 * jump.x1, jump.x2 * jump.x2};
    }
    return qv;
}

RingDecomposition ring_decompose(const PathRecord& rec) {
    if (rec.construction != Construction::MarkedClocks)
        throw std::invalid_argument(
            "ring_decompose: requires the marked-clocks construction (clock-level counts)");
    DecompositionFold fold(rec);
    RingDecomposition out;
    const std::size_t m = rec.events.size() + 1;
    out.t.reserve(m);
    out.xhat.reserve(m);
    out.dring.reserve(m);
    out.mring.reserve(m);
    out.yring.reserve(m);
    out.rhat.reserve(m);
    auto sample = [&](double t) {
        out.t.push_back(t);
        out.xhat.push_back(fold.xhat());
        const Vec2 a = fold.ahat(t);
        const Vec2 d = fold.dhat();
        const Vec2 dr = fold.dring(t);
        out.dring.push_back(dr);
        out.mring.push_back(dr - d);
        out.yring.push_back(fold.yhat(t, a, dr));
        out.rhat.push_back(fold.rhat());
    };
    sample(0.0);
    for (const Event& e : rec.events) {
        fold.advance(e);
        sample(e.t);
    }
    return out;
}

double boundary_identity_residual(const PathRecord& rec, double t) {
    if (!(t >= 0.0 && t <= rec.horizon))
        throw std::invalid_argument("boundary_identity_residual: t outside [0, horizon]");
    DecompositionFold fold(rec);
    for (const Event& e : rec.events) {
        if (e.t > t) break;
        fold.advance(e);
    }
    // Close the partial holding interval at t.
    fold.occ.add(region_of(fold.x), t - fold.prev_t);
    fold.prev_t = t;

    const double nd = static_cast<double>(rec.n);
    const double beta1 = rec.rates.mu.x1 / (rec.rates.mu.x1 + rec.rates.nu.x1);
    const double beta2 = rec.rates.mu.x2 / (rec.rates.mu.x2 + rec.rates.nu.x2);
    const Vec2 h{nd / (rec.rates.mu.x1 + rec.rates.nu.x1),
                 nd / (rec.rates.mu.x2 + rec.rates.nu.x2)};
    const double inv_sqrt_n = fold.inv_sqrt_n;
    const Vec2 xbar = fold.xhat() * inv_sqrt_n;
    const Vec2 a = fold.ahat(t);
    const Vec2 d = fold.dhat();
    const Vec2 ybar = fold.yhat(t, a, d) * inv_sqrt_n;
    const double t12 = fold.occ.t1.s + fold.occ.t2.s;
    return (1.0 - beta1 - beta2) * t12 - (beta1 + beta2) * fold.occ.t0.s + h.dot(xbar) -
           h.dot(ybar);
}

void write_jsonl(const PathRecord& rec, std::ostream& os) {
    nlohmann::json header;
    header["n"] = rec.n;
    header["x0"] = {rec.x0[0], rec.x0[1]};
    header["horizon"] = rec.horizon;
    header["seed"] = rec.seed;
    header["replication"] = rec.replication;
    header["construction"] =
        rec.construction == Construction::Thinning ? "thinning" : "marked-clocks";
    header["lambda"] = {rec.family.lambda.x1, rec.family.lambda.x2};
    header["mu"] = {rec.family.mu.x1, rec.family.mu.x2};
    header["nu"] = {rec.family.nu.x1, rec.family.nu.x2};
    header["hat_lambda"] = {rec.family.hat_lambda.x1, rec.family.hat_lambda.x2};
    header["hat_mu"] = {rec.family.hat_mu.x1, rec.family.hat_mu.x2};
    header["hat_nu"] = {rec.family.hat_nu.x1, rec.family.hat_nu.x2};
    header["lambda_n"] = {rec.rates.lambda.x1, rec.rates.lambda.x2};
    header["mu_n"] = {rec.rates.mu.x1, rec.rates.mu.x2};
    header["nu_n"] = {rec.rates.nu.x1, rec.rates.nu.x2};
    os << header.dump() << '\n';
    for (const Event& e : rec.events) {
        nlohmann::json r;
        r["t"] = e.t;
        r["jump"] = jump_name(e.jump);
        r["clock"] = clock_name(e.clock);
        os << r.dump() << '\n';
    }
    nlohmann::json trailer;
    trailer["clock_counts"] = rec.clock_counts;
    os << trailer.dump() << '\n';
}

PathRecord read_record_jsonl(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("record jsonl: missing header");
    const auto header = nlohmann::json::parse(line);
    PathRecord rec;
    rec.n = header.at("n").get<std::int64_t>();
    rec.x0 = {header.at("x0")[0].get<std::int64_t>(), header.at("x0")[1].get<std::int64_t>()};
    rec.horizon = header.at("horizon").get<double>();
    rec.seed = header.at("seed").get<std::uint64_t>();
    rec.replication = header.at("replication").get<std::uint32_t>();
    const std::string cons = header.at("construction").get<std::string>();
    rec.construction = cons == "thinning" ? Construction::Thinning : Construction::MarkedClocks;
    auto vec = [&](const char* key) -> Vec2 {
        return {header.at(key)[0].get<double>(), header.at(key)[1].get<double>()};
    };
    rec.family.lambda = vec("lambda");
    rec.family.mu = vec("mu");
    rec.family.nu = vec("nu");
    rec.family.hat_lambda = vec("hat_lambda");
    rec.family.hat_mu = vec("hat_mu");
    rec.family.hat_nu = vec("hat_nu");
    rec.rates.n = rec.n;
    rec.rates.lambda = {header.at("lambda_n")[0].get<double>(),
                        header.at("lambda_n")[1].get<double>()};
    rec.rates.mu = {header.at("mu_n")[0].get<double>(), header.at("mu_n")[1].get<double>()};
    rec.rates.nu = {header.at("nu_n")[0].get<double>(), header.at("nu_n")[1].get<double>()};
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto r = nlohmann::json::parse(line);
        if (r.contains("clock_counts")) {
            for (int i = 0; i < 6; ++i) rec.clock_counts[i] = r["clock_counts"][i];
            break;
        }
        rec.events.push_back({r.at("t").get<double>(),
                              jump_from_name(r.at("jump").get<std::string>()),
                              clock_from_name(r.at("clock").get<std::string>())});
    }
    return rec;
}

}  // namespace qprbm
