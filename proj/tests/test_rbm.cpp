#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "qprbm/geometry.hpp"
#include "qprbm/lambda_eps.hpp"
#include "qprbm/rbm.hpp"
#include "qprbm/rng.hpp"

using namespace qprbm;

namespace {

RateFamily symmetric_43() {
    RateFamily f;
    f.lambda = f.mu = {1.0, 1.0};
    f.nu = {std::sqrt(3.0), std::sqrt(3.0)};
    return f;
}

}  // namespace

TEST_CASE("bm_sample: start, drift limit, variance") {
    BMGrid grid{0.01, 1.0, {0.0, 0.0}, {1.0, 1.0}};
    const CadlagPath p = bm_sample(grid, {2.0, 3.0}, 5);
    CHECK(p.eval(0.0) == Vec2{2.0, 3.0});
    CHECK(p.kind == PathKind::Linear);

    BMGrid drift{0.01, 1.0, {1.0, 0.0}, {1e-6, 1e-6}};
    const CadlagPath q = bm_sample(drift, {0.0, 0.0}, 5);
    CHECK(q.eval(1.0).x1 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(q.eval(1.0).x2) < 1e-4);

    BMGrid g2{0.01, 1.0, {0.0, 0.0}, {std::sqrt(2.0), 1.0}};
    double s2 = 0.0;
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
        const CadlagPath w = bm_sample(g2, {0.0, 0.0}, 31, static_cast<std::uint32_t>(r));
        const double v = w.eval(1.0).x1;
        s2 += v * v;
    }
    CHECK(std::abs(s2 / reps - 2.0) < 0.1);  // within 5% of sigma^2 S

    BMGrid bad{0.3, 1.0, {}, {1.0, 1.0}};
    CHECK_THROWS_AS(bm_sample(bad, {0.0, 0.0}, 1), std::invalid_argument);
}

TEST_CASE("psi value and the discrete generator constants") {
    const RateFamily f = symmetric_43();
    const double a0 = 0.7;  // eps = 0.7, lambda_min = 1
    CHECK(psi_value({0.0, 0.0}, 0.7, f) == doctest::Approx(a0 * a0).epsilon(1e-15));

    const LevelRates lr = level_rates(f, 400);
    auto psi = [&](Vec2 x) { return psi_value(x, 1.0, f); };
    CHECK(discrete_generator(psi, {7, 11}, lr) == doctest::Approx(-4.0).epsilon(1e-10));
    CHECK(discrete_generator(psi, {1, 1}, lr) == doctest::Approx(-4.0).epsilon(1e-10));
    CHECK(discrete_generator(psi, {0, 0}, lr) == doctest::Approx(-2.0).epsilon(1e-10));
    CHECK(discrete_generator(psi, {0, 5}, lr) <= -3.0 + 1e-10);
    CHECK(discrete_generator(psi, {9, 0}, lr) <= -3.0 + 1e-10);
}

TEST_CASE("phi: ray value, cosine bound, harmonicity, conormal derivative") {
    const LimitData d = limit_data(symmetric_43());
    const double a = d.alpha_star;

    // On the ray alpha* theta = theta_face the cosine is 1.
    const double theta0 = d.theta_star.x2 / a;
    const Vec2 y{2.0 * std::cos(theta0), 2.0 * std::sin(theta0)};
    CHECK(phi_value(y, d) == doctest::Approx(std::pow(2.0, a)).epsilon(1e-12));

    // Lower bound kappa2 on the cosine factor over the quadrant.
    const double kappa2 = std::cos(std::max(d.theta_star.x1, d.theta_star.x2));
    for (int k = 0; k <= 10000; ++k) {
        const double th = 0.5 * 3.14159265358979323846 * k / 10000.0;
        const Vec2 p{std::cos(th), std::sin(th)};
        CHECK(phi_value(p, d) >= kappa2 - 1e-12);
    }

    // Five-point Laplacian at (1,1): r^a cos(a theta - phase) is harmonic.
    const double h = 1e-4;
    const double lap = (phi_value({1.0 + h, 1.0}, d) + phi_value({1.0 - h, 1.0}, d) +
                        phi_value({1.0, 1.0 + h}, d) + phi_value({1.0, 1.0 - h}, d) -
                        4.0 * phi_value({1.0, 1.0}, d)) /
                       (h * h);
    CHECK(std::abs(lap) < 1e-6 * a * a);

    CHECK_THROWS_AS(phi_value({0.0, 0.0}, d), std::invalid_argument);
}

TEST_CASE("phi conormal derivative vanishes on both faces (asymmetric family)") {
    RateFamily f;
    f.lambda = f.mu = {1.0, 4.0};
    f.nu = {3.0, 2.0};
    const LimitData d = limit_data(f);
    // d*^(i) = Sigma^{-1} d^(i), normalized.
    auto dstar = [&](Vec2 dir) {
        Vec2 v{dir.x1 / d.sigma.x1, dir.x2 / d.sigma.x2};
        return v * (1.0 / v.norm());
    };
    // One-sided second-order difference into the domain (the reflection
    // directions point inward from their faces).
    const double h = 1e-7;
    auto dderiv = [&](Vec2 y, Vec2 dir) {
        return (-3.0 * phi_value(y, d) + 4.0 * phi_value(y + dir * h, d) -
                phi_value(y + dir * (2.0 * h), d)) /
               (2.0 * h);
    };
    // Face theta = 0 (x2 = 0) carries d*^(2); face theta = pi/2 carries d*^(1).
    const Vec2 on_f2{1.0, 0.0};
    const Vec2 on_f1{0.0, 1.0};
    CHECK(std::abs(dderiv(on_f2, dstar(d.d2))) < 1e-6);
    CHECK(std::abs(dderiv(on_f1, dstar(d.d1))) < 1e-6);
}

TEST_CASE("lemma constants: closed-form case and monotonicity") {
    const LimitData d = limit_data(symmetric_43());
    const LemmaR1Constants lc = lemma_r1_constants(d);
    CHECK(lc.kappa2 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lc.kappa3 == doctest::Approx(0.5 * std::pow(2.0, -2.0 / 3.0)).epsilon(1e-12));
    // kappa3 c^{a}(s_min)^{a} >= 2 with s = sqrt(2), a = 4/3 solves to
    // c = 4^{3/4} = 2^{3/2}.
    CHECK(lc.c == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-12));

    // theta* -> pi/2 sends kappa2 -> 0 and c -> infinity.
    double prev_c = 0.0;
    for (double nu : {2.0, 4.0, 8.0, 16.0}) {
        RateFamily f;
        f.lambda = f.mu = {1.0, 1.0};
        f.nu = {nu, nu};
        const LemmaR1Constants c2 = lemma_r1_constants(limit_data(f));
        CHECK(c2.c > prev_c);
        prev_c = c2.c;
    }
}

TEST_CASE("hitting times on reference paths") {
    CadlagPath radial;
    radial.kind = PathKind::Linear;
    radial.horizon = 2.0;
    radial.t = {0.0, 2.0};
    radial.x = {{2.0, 0.0}, {0.0, 0.0}};
    const HittingTimes ht = hitting_times(radial, 0.5, 3.0);
    REQUIRE(ht.tau.has_value());
    CHECK(*ht.tau == doctest::Approx(1.5).epsilon(1e-14));
    CHECK_FALSE(ht.eta.has_value());

    const CadlagPath mid = CadlagPath::constant({1.0, 0.0}, 1.0);
    const HittingTimes hm = hitting_times(mid, 0.5, 2.0);
    CHECK_FALSE(hm.tau.has_value());
    CHECK_FALSE(hm.eta.has_value());

    const double s = 1.0 / std::sqrt(2.0);
    CadlagPath diag;
    diag.kind = PathKind::Linear;
    diag.horizon = 3.0;
    diag.t = {0.0, 3.0};
    diag.x = {{2.0, 2.0}, {2.0 - 3.0 * s, 2.0 - 3.0 * s}};
    const HittingTimes hd = hitting_times(diag, 0.5, 4.0);
    REQUIRE(hd.tau.has_value());
    CHECK(*hd.tau == doctest::Approx(2.0 * std::sqrt(2.0) - 0.5).epsilon(1e-12));

    CHECK_THROWS_AS(hitting_times(mid, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("rbm_quarter_stopped: degenerate noise stays put") {
    const LimitData d = limit_data(symmetric_43());
    LimitData tiny = d;
    tiny.sigma = {1e-6, 1e-6};
    BMGrid grid{1e-3, 1.0, {}, {}};
    const ReflectedPath rp = rbm_quarter_stopped({1.0, 1.0}, 0.4, 0.5, tiny, grid, 9);
    CHECK_FALSE(rp.absorption_time.has_value());
    CHECK(rp.path.eval(1.0).x1 == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("optional stopping for phi on the stopped process (zero drift)") {
    const LimitData d = limit_data(symmetric_43());
    const LemmaR1Constants lc = lemma_r1_constants(d);
    const double eps = 0.2;
    const double c = lc.c;
    const Vec2 x0 = Vec2{std::cos(0.9), std::sin(0.9)} * (c * eps);
    const double dt = 1e-3 * eps * eps;
    const double sdt = std::sqrt(dt);
    auto phi_sigma_inv = [&](Vec2 z) {
        return phi_value({z.x1 / d.sigma.x1, z.x2 / d.sigma.x2}, d);
    };
    const int reps = 4000;
    double sum = 0.0, sum2 = 0.0;
    int unresolved = 0;
    for (int r = 0; r < reps; ++r) {
        LambdaEpsEngine eng(PathKind::Linear, x0, eps, 0.25, d.d1, d.d2);
        Rng rng(424242, static_cast<std::uint32_t>(r), 8);
        Vec2 w = x0;
        double stopped_val = 0.0;
        bool have = false;
        for (std::int64_t i = 1; i <= 4000000 && !have && !eng.absorbed(); ++i) {
            w += Vec2{d.sigma.x1 * sdt * rng.normal(), d.sigma.x2 * sdt * rng.normal()};
            eng.extend(static_cast<double>(i) * dt, w, [&](const GPiece& p) {
                if (have) return;
                // tau: radius <= eps; eta: radius >= 1. Evaluate Phi at the
                // earlier passage.
                auto hit = [&](double r2, bool enter) -> std::optional<Vec2> {
                    const double f0 = p.a.norm2() - r2;
                    if (enter ? f0 <= 0.0 : f0 >= 0.0) return p.a;
                    if (p.t1 == p.t0) return std::nullopt;
                    const Vec2 v = (p.b - p.a) * (1.0 / (p.t1 - p.t0));
                    const double c2 = v.norm2();
                    if (c2 == 0.0) return std::nullopt;
                    const double c1 = 2.0 * p.a.dot(v);
                    const double disc = c1 * c1 - 4.0 * c2 * f0;
                    double tau;
                    if (enter) {
                        if (disc < 0.0) return std::nullopt;
                        tau = (-c1 - std::sqrt(disc)) / (2.0 * c2);
                    } else {
                        tau = (-c1 + std::sqrt(std::max(disc, 0.0))) / (2.0 * c2);
                    }
                    if (tau < 0.0 || tau > p.t1 - p.t0) return std::nullopt;
                    return p.a + v * tau;
                };
                const auto at_tau = hit(eps * eps, true);
                const auto at_eta = hit(1.0, false);
                if (at_eta && !at_tau) {
                    stopped_val = phi_sigma_inv(*at_eta);
                    have = true;
                } else if (at_tau) {
                    stopped_val = phi_sigma_inv(*at_tau);
                    have = true;
                }
            });
        }
        if (!have) {
            ++unresolved;
            continue;
        }
        sum += stopped_val;
        sum2 += stopped_val * stopped_val;
    }
    const int m = reps - unresolved;
    REQUIRE(m > reps / 2);
    const double mean = sum / m;
    const double se = std::sqrt((sum2 / m - mean * mean) / m);
    const double target = phi_sigma_inv(x0);
    CHECK(std::abs(mean - target) <= 3.0 * se + 0.02 * target);
    CHECK(unresolved < reps / 100);
}

TEST_CASE("brownian self-similarity of the stopped process (zero drift)") {
    // P(reach outer before inner) from x0 matches the halved geometry with
    // time compressed by 4.
    const LimitData d = limit_data(symmetric_43());
    auto escape_prob = [&](double scale, double dt, std::uint64_t seed) {
        const Vec2 x0 = Vec2{0.5, 0.5} * scale;
        const double inner = 0.25 * scale, outer = 2.0 * scale;
        const double eps_map = 2.0 * inner;  // absorption at c0*eps = inner
        const double sdt = std::sqrt(dt);
        const int reps = 1500;
        int esc = 0;
        for (int r = 0; r < reps; ++r) {
            LambdaEpsEngine eng(PathKind::Linear, x0, eps_map, 0.5, d.d1, d.d2);
            Rng rng(seed, static_cast<std::uint32_t>(r), 8);
            Vec2 w = x0;
            int res = -1;
            for (std::int64_t i = 1; i <= 40000000 && res < 0 && !eng.absorbed(); ++i) {
                w += Vec2{d.sigma.x1 * sdt * rng.normal(), d.sigma.x2 * sdt * rng.normal()};
                eng.extend(static_cast<double>(i) * dt, w, [&](const GPiece& p) {
                    if (res >= 0) return;
                    const double na = p.a.norm2(), nb = p.b.norm2();
                    if (std::max(na, nb) >= outer * outer) res = 1;
                    else if (std::min(na, nb) <= inner * inner) res = 0;
                });
            }
            if (res < 0) res = 0;  // absorbed at inner
            esc += res;
        }
        return static_cast<double>(esc) / reps;
    };
    const double p_full = escape_prob(1.0, 4e-4, 77001);
    const double p_half = escape_prob(0.5, 1e-4, 77002);  // time compressed by 4
    const double se = std::sqrt(2.0 * 0.25 / 1500.0);
    CHECK(std::abs(p_full - p_half) <= 3.0 * se + 0.02);
}
