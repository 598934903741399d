#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "qprbm/rng.hpp"
#include "qprbm/skorohod.hpp"

using namespace qprbm;

namespace {

ScalarPath linear_scalar(std::vector<double> t, std::vector<double> v) {
    ScalarPath p;
    p.kind = PathKind::Linear;
    p.t = std::move(t);
    p.v = std::move(v);
    p.horizon = p.t.back();
    return p;
}

CadlagPath linear_planar(std::vector<double> t, std::vector<Vec2> x) {
    CadlagPath p;
    p.kind = PathKind::Linear;
    p.t = std::move(t);
    p.x = std::move(x);
    p.horizon = p.t.back();
    return p;
}

}  // namespace

TEST_CASE("half-line map: identity, full reflection, hand example") {
    // psi(t) = t: never negative.
    {
        const auto r = gamma_half_line(linear_scalar({0.0, 1.0}, {0.0, 1.0}));
        CHECK(r.eta.eval(1.0) == 0.0);
        CHECK(r.phi.eval(0.5) == doctest::Approx(0.5));
    }
    // psi(t) = -t: eta(t) = t, phi = 0.
    {
        const auto r = gamma_half_line(linear_scalar({0.0, 1.0}, {0.0, -1.0}));
        CHECK(r.eta.eval(1.0) == doctest::Approx(1.0));
        CHECK(r.phi.eval(0.3) == doctest::Approx(0.0));
        CHECK(r.phi.eval(1.0) == doctest::Approx(0.0));
    }
    // psi = 1 - 2t on [0,1], then t - 2 on [1,3].
    {
        const auto r =
            gamma_half_line(linear_scalar({0.0, 1.0, 3.0}, {1.0, -1.0, 1.0}));
        CHECK(r.eta.eval(0.75) == doctest::Approx(0.5));
        CHECK(r.eta.eval(3.0) == doctest::Approx(1.0));
        CHECK(r.phi.eval(0.75) == doctest::Approx(0.0));
        CHECK(r.phi.eval(3.0) == doctest::Approx(2.0));
    }
    CHECK_THROWS_AS(gamma_half_line(linear_scalar({0.0, 1.0}, {-0.5, 1.0})),
                    std::invalid_argument);
}

TEST_CASE("half-line map: minimality against the brute-force running minimum") {
    Rng rng(2024, 0, 0);
    for (int rep = 0; rep < 200; ++rep) {
        ScalarPath psi;
        psi.kind = PathKind::Linear;
        psi.t.push_back(0.0);
        psi.v.push_back(rng.uniform());
        for (int k = 1; k <= 30; ++k) {
            psi.t.push_back(static_cast<double>(k) / 30.0);
            psi.v.push_back(2.0 * rng.uniform() - 1.0);
        }
        psi.horizon = 1.0;
        const auto r = gamma_half_line(psi);
        // Oracle: eta(t_k) = max(0, -min_{j<=k} psi(t_j)), recomputed fresh.
        for (std::size_t k = 0; k < psi.t.size(); ++k) {
            double m = psi.v[0];
            for (std::size_t j = 1; j <= k; ++j) m = std::min(m, psi.v[j]);
            const double expect = std::max(0.0, -m);
            CHECK(r.eta.eval(psi.t[k]) == doctest::Approx(expect).epsilon(1e-14));
            CHECK(r.phi.eval(psi.t[k]) ==
                  doctest::Approx(psi.v[k] + expect).epsilon(1e-13));
        }
        // Complementarity on breakpoints: eta grows only where phi = 0.
        for (std::size_t k = 1; k < r.eta.t.size(); ++k) {
            if (r.eta.v[k] > r.eta.v[k - 1] + 1e-15) {
                CHECK(std::abs(r.phi.v[k]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("half-plane map: oblique pushing") {
    // h = (1,-2), psi(t) = (1-2t, 0).
    const auto r = gamma_half_plane({1.0, -2.0}, Axis::X1,
                                    linear_planar({0.0, 1.0}, {{1.0, 0.0}, {-1.0, 0.0}}));
    CHECK(r.phi.eval(1.0).x1 == doctest::Approx(0.0));
    CHECK(r.phi.eval(1.0).x2 == doctest::Approx(-2.0));
    CHECK(r.phi.eval(0.75).x2 == doctest::Approx(-1.0));
    CHECK(r.phi.eval(0.25).x1 == doctest::Approx(0.5));
    CHECK(r.phi.eval(0.25).x2 == doctest::Approx(0.0));
}

TEST_CASE("half-plane map: interior paths pass through; normal reflection") {
    const auto interior = gamma_half_plane(
        {1.0, 0.5}, Axis::X1, linear_planar({0.0, 1.0}, {{1.0, 0.0}, {2.0, 3.0}}));
    CHECK(interior.phi.eval(1.0) == Vec2{2.0, 3.0});
    CHECK(interior.eta.eval(1.0) == Vec2{0.0, 0.0});

    // h = e1: second coordinate untouched.
    const auto normal = gamma_half_plane(
        {1.0, 0.0}, Axis::X1, linear_planar({0.0, 1.0}, {{1.0, 5.0}, {-1.0, 7.0}}));
    CHECK(normal.phi.eval(1.0).x1 == doctest::Approx(0.0));
    CHECK(normal.phi.eval(1.0).x2 == doctest::Approx(7.0));

    CHECK_THROWS_AS(gamma_half_plane({-1.0, 0.0}, Axis::X1,
                                     linear_planar({0.0, 1.0}, {{1.0, 0.0}, {0.5, 0.0}})),
                    std::invalid_argument);
}

TEST_CASE("half-plane oscillation bound") {
    Rng rng(77, 0, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec2 h{0.5 + rng.uniform(), 4.0 * rng.uniform() - 2.0};
        CadlagPath psi;
        psi.kind = PathKind::Linear;
        psi.t.push_back(0.0);
        psi.x.push_back({rng.uniform(), rng.uniform()});
        for (int k = 1; k <= 25; ++k) {
            psi.t.push_back(static_cast<double>(k) / 25.0);
            psi.x.push_back({2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0});
        }
        psi.horizon = 1.0;
        const auto r = gamma_half_plane(h, Axis::X1, psi);
        const double kappa = 1.0 + 2.0 * h.norm() / h.x1;
        for (auto [s, t] : {std::pair{0.0, 1.0}, {0.2, 0.8}, {0.5, 0.9}}) {
            CHECK(osc(r.phi, s, t) <= kappa * osc(psi, s, t) + 1e-12);
        }
    }
}

TEST_CASE("lambda_eps: path that stays clear is untouched") {
    const CadlagPath f = CadlagPath::constant({1.0, 1.0}, 3.0);
    const ReflectedPath rp = lambda_eps(f, 1.0, 0.5, {1.0, -2.0}, {-2.0, 1.0});
    CHECK(rp.switch_times.empty());
    CHECK_FALSE(rp.absorption_time.has_value());
    CHECK(rp.path.eval(2.0) == Vec2{1.0, 1.0});
    CHECK(rp.pushing.eval(2.0) == Vec2{0.0, 0.0});
}

TEST_CASE("lambda_eps: single-face reflection then absorption (hand example)") {
    // f(t) = (2 - t, 2): hits F1 at t = 2, reflected along d1 = (1,-2),
    // g(t) = (0, 2 - 2(t-2)), absorbed when ||g|| = 0.5 at t = 2.75.
    const CadlagPath f =
        linear_planar({0.0, 3.0}, {{2.0, 2.0}, {-1.0, 2.0}});
    const ReflectedPath rp = lambda_eps(f, 1.0, 0.5, {1.0, -2.0}, {-2.0, 1.0});
    REQUIRE(rp.switch_times.size() == 1);
    CHECK(rp.switch_times[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rp.faces[0] == 1);
    REQUIRE(rp.absorption_time.has_value());
    CHECK(*rp.absorption_time == doctest::Approx(2.75).epsilon(1e-12));
    CHECK(rp.absorption_point->x1 == doctest::Approx(0.0));
    CHECK(rp.absorption_point->x2 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rp.path.eval(2.5).x1 == doctest::Approx(0.0));
    CHECK(rp.path.eval(2.5).x2 == doctest::Approx(1.0).epsilon(1e-12));
    // Constant after absorption.
    CHECK(rp.path.eval(3.0).x2 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("lambda_eps: radial path absorbed without face contact") {
    const double s = 1.0 / std::sqrt(2.0);
    const CadlagPath f = linear_planar({0.0, 3.0}, {{2.0, 2.0}, {2.0 - 3.0 * s, 2.0 - 3.0 * s}});
    const ReflectedPath rp = lambda_eps(f, 1.0, 0.5, {1.0, -2.0}, {-2.0, 1.0});
    CHECK(rp.switch_times.empty());
    REQUIRE(rp.absorption_time.has_value());
    CHECK(*rp.absorption_time == doctest::Approx(2.0 * std::sqrt(2.0) - 0.5).epsilon(1e-12));
    CHECK(rp.absorption_point->x1 == doctest::Approx(0.5 * s).epsilon(1e-10));
    CHECK(rp.absorption_point->x2 == doctest::Approx(0.5 * s).epsilon(1e-10));
}

TEST_CASE("lambda_eps: agreement with the single-face map away from the ball") {
    // Drifts against F1, never near the origin or F2.
    Rng rng(5150, 0, 0);
    for (int rep = 0; rep < 40; ++rep) {
        CadlagPath f;
        f.kind = PathKind::Linear;
        f.t.push_back(0.0);
        f.x.push_back({1.5, 10.0});
        for (int k = 1; k <= 50; ++k) {
            f.t.push_back(static_cast<double>(k) / 10.0);
            f.x.push_back({1.5 - 3.0 * rng.uniform(), 10.0 + 2.0 * rng.uniform() - 1.0});
        }
        f.horizon = 5.0;
        const Vec2 d1{1.0, -1.5}, d2{-1.5, 1.0};
        const ReflectedPath rp = lambda_eps(f, 1.0, 0.5, d1, d2);
        REQUIRE_FALSE(rp.absorption_time.has_value());
        const auto hp = gamma_half_plane(d1, Axis::X1, f);
        for (double t : f.t) {
            const Vec2 a = rp.path.eval(t);
            const Vec2 b = hp.phi.eval(t);
            CHECK(std::abs(a.x1 - b.x1) <= 1e-12);
            CHECK(std::abs(a.x2 - b.x2) <= 1e-12);
        }
    }
}

TEST_CASE("lambda_eps: constraint invariants on rough two-face paths") {
    Rng rng(31337, 0, 0);
    int absorbed_count = 0;
    for (int rep = 0; rep < 60; ++rep) {
        CadlagPath f;
        f.kind = PathKind::Linear;
        f.t.push_back(0.0);
        f.x.push_back({1.2, 1.2});
        Vec2 x{1.2, 1.2};
        for (int k = 1; k <= 200; ++k) {
            x += Vec2{0.5 * (2.0 * rng.uniform() - 1.0), 0.5 * (2.0 * rng.uniform() - 1.1)};
            f.t.push_back(static_cast<double>(k) / 20.0);
            f.x.push_back(x);
        }
        f.horizon = 10.0;
        const Vec2 d1{1.0, -1.8}, d2{-1.8, 1.0};
        const ReflectedPath rp = lambda_eps(f, 0.8, 0.5, d1, d2);
        // g stays in the quarter plane up to absorption.
        for (std::size_t k = 0; k < rp.path.t.size(); ++k) {
            if (rp.absorption_time && rp.path.t[k] > *rp.absorption_time) break;
            CHECK(rp.path.x[k].x1 >= -1e-10);
            CHECK(rp.path.x[k].x2 >= -1e-10);
        }
        // Faces alternate strictly.
        for (std::size_t k = 1; k < rp.faces.size(); ++k) CHECK(rp.faces[k] != rp.faces[k - 1]);
        // g = f + pushing up to absorption.
        for (std::size_t k = 0; k < rp.path.t.size(); ++k) {
            const double t = rp.path.t[k];
            if (rp.absorption_time && t > *rp.absorption_time) break;
            const Vec2 lhs = rp.path.x[k];
            const Vec2 rhs = f.eval(t) + rp.pushing.eval(t);
            CHECK(std::abs(lhs.x1 - rhs.x1) <= 1e-9);
            CHECK(std::abs(lhs.x2 - rhs.x2) <= 1e-9);
        }
        if (rp.absorption_time) {
            ++absorbed_count;
            CHECK(rp.absorption_point->norm() <= 0.4 + 1e-12);
            // Constant after absorption.
            const Vec2 end = rp.path.eval(rp.path.horizon);
            CHECK(end.x1 == doctest::Approx(rp.absorption_point->x1));
            CHECK(end.x2 == doctest::Approx(rp.absorption_point->x2));
        }
    }
    CHECK(absorbed_count > 0);  // downward drift reaches the ball in some runs
}

TEST_CASE("lambda_eps: step paths respect the jump bound precondition") {
    CadlagPath f;
    f.kind = PathKind::Step;
    f.horizon = 1.0;
    f.t = {0.0, 0.5, 1.0};
    f.x = {{1.0, 1.0}, {0.5, 1.0}, {0.5, 1.0}};
    // c0*eps/4 = 0.125 < jump size 0.5.
    CHECK_THROWS_AS(lambda_eps(f, 1.0, 0.5, {1.0, -1.0}, {-1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("lambda_eps: rejects bad inputs") {
    const CadlagPath inside = CadlagPath::constant({0.1, 0.1}, 1.0);
    CHECK_THROWS_AS(lambda_eps(inside, 1.0, 0.5, {1.0, -1.0}, {-1.0, 1.0}),
                    std::invalid_argument);
    const CadlagPath ok = CadlagPath::constant({1.0, 1.0}, 1.0);
    CHECK_THROWS_AS(lambda_eps(ok, -1.0, 0.5, {1.0, -1.0}, {-1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(lambda_eps(ok, 1.0, 1.5, {1.0, -1.0}, {-1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(lambda_eps(ok, 1.0, 0.5, {-1.0, -1.0}, {-1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("reflected path serializes to parseable jsonl") {
    CadlagPath f;
    f.kind = PathKind::Linear;
    f.horizon = 3.0;
    f.t = {0.0, 3.0};
    f.x = {{2.0, 2.0}, {-1.0, 2.0}};
    const ReflectedPath rp = lambda_eps(f, 1.0, 0.5, {1.0, -2.0}, {-2.0, 1.0});
    std::ostringstream os;
    write_jsonl(rp, os);
    std::istringstream is(os.str());
    std::string line;
    int lines = 0;
    bool trailer_seen = false;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);  // throws on malformed output
        if (j.contains("absorption_time")) {
            trailer_seen = true;
            CHECK(j["absorption_time"].get<double>() == doctest::Approx(2.75));
            CHECK(j["faces"][0] == 1);
        }
        ++lines;
    }
    CHECK(trailer_seen);
    CHECK(lines >= 6);
}
