#include "qprbm/rbm.hpp"

#include <cmath>
#include <stdexcept>

#include "qprbm/rng.hpp"

namespace qprbm {

namespace {
constexpr std::uint32_t kBmStream = 8;  // substream id for BM increments
}

std::int64_t BMGrid::steps() const {
    if (!(dt > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("BMGrid: dt and horizon must be positive");
    const double ratio = horizon / dt;
    const std::int64_t k = static_cast<std::int64_t>(std::llround(ratio));
    if (k <= 0 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * ratio)
        throw std::invalid_argument("BMGrid: horizon must be an integer multiple of dt");
    return k;
}

CadlagPath bm_sample(const BMGrid& grid, Vec2 start, std::uint64_t seed,
                     std::uint32_t replication) {
    const std::int64_t k = grid.steps();
    Rng rng(seed, replication, kBmStream);
    const double sdt = std::sqrt(grid.dt);
    CadlagPath p;
    p.kind = PathKind::Linear;
    p.horizon = grid.horizon;
    p.t.reserve(k + 1);
    p.x.reserve(k + 1);
    p.t.push_back(0.0);
    p.x.push_back(start);
    Vec2 x = start;
    for (std::int64_t i = 1; i <= k; ++i) {
        x += grid.b * grid.dt +
             Vec2{grid.sigma.x1 * sdt * rng.normal(), grid.sigma.x2 * sdt * rng.normal()};
        p.t.push_back(static_cast<double>(i) * grid.dt);
        p.x.push_back(x);
    }
    p.t.back() = grid.horizon;
    return p;
}

ReflectedPath rbm_quarter_stopped(Vec2 x0, double eps, double c0, const LimitData& limit,
                                  const BMGrid& grid, std::uint64_t seed,
                                  std::uint32_t replication) {
    if (!(x0.x1 >= 0.0 && x0.x2 >= 0.0))
        throw std::invalid_argument("rbm_quarter_stopped: x0 must lie in the quarter plane");
    if (!(x0.norm() > c0 * eps))
        throw std::invalid_argument("rbm_quarter_stopped: need ||x0|| > c0*eps");
    BMGrid g = grid;
    g.b = limit.b;
    g.sigma = limit.sigma;
    const CadlagPath w = bm_sample(g, x0, seed, replication);
    return lambda_eps(w, eps, c0, limit.d1, limit.d2);
}

double psi_value(Vec2 x, double eps, const RateFamily& params) {
    if (!(eps > 0.0)) throw std::invalid_argument("psi_value: eps must be positive");
    const double l1 = params.lambda.x1;
    const double l2 = params.lambda.x2;
    const double lmin = std::min(l1, l2);
    const double a0 = eps / std::sqrt(lmin);
    const double big_a = std::max(params.nu.x1, params.nu.x2) / std::sqrt(l1 * l2);
    return a0 * a0 -
           (x.x1 * x.x1 / l1 + x.x2 * x.x2 / l2 + 2.0 * big_a * x.x1 * x.x2 / std::sqrt(l1 * l2));
}

double discrete_generator(const std::function<double(Vec2)>& f, LatticePoint x_int,
                          const LevelRates& rates) {
    if (x_int[0] < 0 || x_int[1] < 0)
        throw std::invalid_argument("discrete_generator: state must lie in Z_+^2");
    const double inv = 1.0 / std::sqrt(static_cast<double>(rates.n));
    const Vec2 x{inv * static_cast<double>(x_int[0]), inv * static_cast<double>(x_int[1])};
    const double fx = f(x);
    const double up1 = f({x.x1 + inv, x.x2}) - fx;
    const double up2 = f({x.x1, x.x2 + inv}) - fx;
    double val = rates.lambda.x1 * up1 + rates.lambda.x2 * up2;
    const Region reg = region_of(x_int);
    if (reg == Region::Interior) {
        val += rates.mu.x1 * (f({x.x1 - inv, x.x2}) - fx);
        val += rates.mu.x2 * (f({x.x1, x.x2 - inv}) - fx);
    } else if (reg == Region::F2) {
        // x2 = 0: only coordinate 1 can move down, at the boosted rate.
        val += (rates.mu.x1 + rates.nu.x1) * (f({x.x1 - inv, x.x2}) - fx);
    } else if (reg == Region::F1) {
        val += (rates.mu.x2 + rates.nu.x2) * (f({x.x1, x.x2 - inv}) - fx);
    }
    return val;
}

double phi_value(Vec2 y, const LimitData& limit, PhiPhase phase) {
    const double r2 = y.norm2();
    if (!(r2 > 0.0)) throw std::invalid_argument("phi_value: y = 0 excluded");
    if (y.x1 < 0.0 || y.x2 < 0.0)
        throw std::invalid_argument("phi_value: y must lie in the quarter plane");
    const double theta = std::atan2(y.x2, y.x1);
    const double face =
        phase == PhiPhase::FaceTheta2 ? limit.theta_star.x2 : limit.theta_star.x1;
    const double a = limit.alpha_star;
    return std::pow(std::sqrt(r2), a) * std::cos(a * theta - face);
}

LemmaR1Constants lemma_r1_constants(const LimitData& limit) {
    const double a = limit.alpha_star;
    if (!(a > 0.0 && a < 2.0))
        throw std::invalid_argument("lemma_r1_constants: alpha* must lie in (0, 2)");
    const double s_min = std::min(limit.sigma.x1, limit.sigma.x2);
    const double s_max = std::max(limit.sigma.x1, limit.sigma.x2);
    if (!(s_min > 0.0)) throw std::invalid_argument("lemma_r1_constants: degenerate Sigma");
    LemmaR1Constants out;
    out.kappa2 = std::cos(std::max(std::abs(limit.theta_star.x1), std::abs(limit.theta_star.x2)));
    if (!(out.kappa2 > 0.0))
        throw std::invalid_argument("lemma_r1_constants: cos bound degenerates");
    out.kappa3 = out.kappa2 * std::pow(s_max, -a);
    const double rhs = 2.0 / (out.kappa3 * std::pow(s_min, a));
    out.c = std::max(1.0 + 1e-9, std::pow(rhs, 1.0 / a));
    return out;
}

namespace {

// First time a linear segment [p, q] over [t0, t1] satisfies ||x||^2 <= r2
// (enter == true) or >= r2 (enter == false).
std::optional<double> segment_radius_passage(double t0, double t1, Vec2 p, Vec2 q, double r2,
                                             bool enter) {
    const double f0 = p.norm2() - r2;
    if (enter ? f0 <= 0.0 : f0 >= 0.0) return t0;
    if (t1 == t0) return std::nullopt;
    const Vec2 v = (q - p) * (1.0 / (t1 - t0));
    const double c2 = v.norm2();
    const double c1 = 2.0 * p.dot(v);
    if (c2 == 0.0) return std::nullopt;
    const double disc = c1 * c1 - 4.0 * c2 * f0;
    double tau;
    if (enter) {
        if (disc < 0.0) return std::nullopt;
        tau = (-c1 - std::sqrt(disc)) / (2.0 * c2);  // first root downward
    } else {
        // f0 < 0 here, so the product of roots is negative: one positive root.
        const double sq = std::sqrt(std::max(disc, 0.0));
        tau = (-c1 + sq) / (2.0 * c2);
    }
    if (tau < 0.0 || tau > t1 - t0) return std::nullopt;
    return t0 + tau;
}

}  // namespace

HittingTimes hitting_times(const CadlagPath& path, double inner_radius, double outer_radius) {
    if (!(inner_radius > 0.0 && inner_radius < outer_radius))
        throw std::invalid_argument("hitting_times: need 0 < inner < outer");
    const double ri2 = inner_radius * inner_radius;
    const double ro2 = outer_radius * outer_radius;
    HittingTimes out;
    if (path.kind == PathKind::Step) {
        for (std::size_t k = 0; k < path.t.size(); ++k) {
            const double n2 = path.x[k].norm2();
            if (!out.tau && n2 <= ri2) out.tau = path.t[k];
            if (!out.eta && n2 >= ro2) out.eta = path.t[k];
            if (out.tau && out.eta) break;
        }
        return out;
    }
    for (std::size_t k = 0; k + 1 < path.t.size() && (!out.tau || !out.eta); ++k) {
        if (!out.tau) {
            if (auto t = segment_radius_passage(path.t[k], path.t[k + 1], path.x[k],
                                                path.x[k + 1], ri2, true))
                out.tau = *t;
        }
        if (!out.eta) {
            if (auto t = segment_radius_passage(path.t[k], path.t[k + 1], path.x[k],
                                                path.x[k + 1], ro2, false))
                out.eta = *t;
        }
    }
    if (path.t.size() == 1) {
        const double n2 = path.x[0].norm2();
        if (n2 <= ri2) out.tau = path.t[0];
        if (n2 >= ro2) out.eta = path.t[0];
    }
    return out;
}

}  // namespace qprbm
