#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "qprbm/crossings.hpp"
#include "qprbm/ctmc.hpp"
#include "qprbm/girsanov.hpp"

using namespace qprbm;

namespace {

RateFamily base_43() {
    RateFamily f;
    f.lambda = f.mu = {1.0, 1.0};
    f.nu = {std::sqrt(3.0), std::sqrt(3.0)};
    return f;
}

}  // namespace

TEST_CASE("likelihood ratio is 1 when the target equals the symmetric law") {
    const RateFamily f = base_43();
    const PathRecord rec = simulate(f, 64, {0, 0}, 1.0, 9, 0, Construction::MarkedClocks);
    const LikelihoodCertificate cert = likelihood_ratio(rec, f, 1.0);
    CHECK(cert.l == 1.0);
    CHECK(cert.log_l == 0.0);
    for (const auto& fac : cert.factors) {
        CHECK(fac.rate_ratio == 1.0);
        CHECK(fac.log_factor == 0.0);
    }
    CHECK(cert.analytic_second_moment_bound == 1.0);
}

TEST_CASE("single perturbed clock reproduces the closed-form factor") {
    // lambda = 1, hat = 0.5, n = 100, S = 1, N = 100:
    // factor = exp(100 ln 1.05 - 5).
    RateFamily target = base_43();
    target.hat_lambda = {0.5, 0.0};
    PathRecord rec;
    rec.n = 100;
    rec.horizon = 1.0;
    rec.construction = Construction::MarkedClocks;
    RateFamily sym = base_43();
    rec.family = sym;
    rec.rates = level_rates(sym, 100);
    rec.clock_counts = {100, 7, 13, 19, 23, 29};
    const LikelihoodCertificate cert = likelihood_ratio(rec, target, 1.0);
    const double expect = std::exp(100.0 * std::log(1.05) - 5.0);
    CHECK(cert.l == doctest::Approx(expect).epsilon(1e-12));
    CHECK(cert.l == doctest::Approx(0.88606).epsilon(1e-4));
    for (int c = 1; c < 6; ++c) CHECK(cert.factors[c].log_factor == 0.0);
}

TEST_CASE("second-moment bound closed form") {
    RateFamily target = base_43();
    target.hat_lambda = {0.5, 0.0};
    const double expect = std::exp(0.25 * 2.0 * (3.0 + std::sqrt(3.0)));
    CHECK(second_moment_bound(target, 1.0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(second_moment_bound(target, 1.0) == doctest::Approx(10.6556).epsilon(1e-3));

    CHECK(second_moment_bound(base_43(), 1.0) == 1.0);
}

TEST_CASE("likelihood ratio rejects unusable records") {
    RateFamily target = base_43();
    target.hat_lambda = {0.5, 0.0};
    const PathRecord thin = simulate(base_43(), 64, {0, 0}, 1.0, 4, 0, Construction::Thinning);
    CHECK_THROWS_AS(likelihood_ratio(thin, target, 1.0), std::invalid_argument);

    const PathRecord rec = simulate(base_43(), 64, {0, 0}, 1.0, 4, 0,
                                    Construction::MarkedClocks);
    CHECK_THROWS_AS(likelihood_ratio(rec, target, 0.5), std::invalid_argument);

    // Record simulated under a non-symmetric law is rejected.
    const PathRecord wrong = simulate(target, 64, {0, 0}, 1.0, 4, 0,
                                      Construction::MarkedClocks);
    CHECK_THROWS_AS(likelihood_ratio(wrong, target, 1.0), std::invalid_argument);
}

TEST_CASE("martingale normalization and the second-moment bound hold empirically") {
    RateFamily target = base_43();
    target.hat_lambda = {0.5, 0.0};
    target.hat_mu = {0.0, 0.25};
    const int reps = 4000;
    std::vector<double> ls(reps);
    for (int r = 0; r < reps; ++r) {
        const PathRecord rec = simulate(base_43(), 100, {0, 0}, 1.0, 5150,
                                        static_cast<std::uint32_t>(r),
                                        Construction::MarkedClocks);
        ls[r] = likelihood_ratio(rec, target, 1.0).l;
    }
    const BoundReport rep = verify_bound(ls, target, 1.0);
    CHECK(rep.mean_within_3se);
    CHECK(rep.second_moment_ok);
}

TEST_CASE("reweighting matches direct simulation on three functionals") {
    RateFamily target = base_43();
    target.hat_lambda = {0.4, 0.0};
    target.hat_nu = {0.0, -0.3};
    const int reps = 4000;
    const std::int64_t n = 100;
    const double ball_eps = 0.5;
    std::vector<double> l(reps);
    std::vector<double> f_term_s(reps), f_ball_s(reps), f_cross_s(reps);
    std::vector<double> f_term_d(reps), f_ball_d(reps), f_cross_d(reps);
    auto functionals = [&](const PathRecord& rec, double& term, double& ball, double& cross) {
        const CadlagPath p = rescale(rec);
        term = p.eval(rec.horizon).x1;
        ball = time_in_ball(p, ball_eps, rec.horizon);
        cross = static_cast<double>(crossing_sequence(p, 0.3, 2.0, rec.horizon).size());
    };
    for (int r = 0; r < reps; ++r) {
        const PathRecord sym = simulate(base_43(), n, {0, 0}, 1.0, 777,
                                        static_cast<std::uint32_t>(r),
                                        Construction::MarkedClocks);
        l[r] = likelihood_ratio(sym, target, 1.0).l;
        functionals(sym, f_term_s[r], f_ball_s[r], f_cross_s[r]);
        const PathRecord dir = simulate(target, n, {0, 0}, 1.0, 778,
                                        static_cast<std::uint32_t>(r),
                                        Construction::MarkedClocks);
        functionals(dir, f_term_d[r], f_ball_d[r], f_cross_d[r]);
    }
    auto agree = [&](const std::vector<double>& fs, const std::vector<double>& fd) {
        const Estimate rw = reweighted_expectation(l, fs);
        const Estimate direct = sample_mean(fd);
        const double se = std::sqrt(rw.se * rw.se + direct.se * direct.se);
        CHECK(std::abs(rw.value - direct.value) <= 3.0 * se);
    };
    agree(f_term_s, f_term_d);
    agree(f_ball_s, f_ball_d);
    agree(f_cross_s, f_cross_d);

    // Constant functional integrates to E[L] ~ 1.
    std::vector<double> ones(reps, 1.0);
    const Estimate rw1 = reweighted_expectation(l, ones);
    CHECK(std::abs(rw1.value - 1.0) <= 3.0 * rw1.se);

    // Degenerate weights rejected.
    std::vector<double> zeros(reps, 0.0);
    CHECK_THROWS_AS(reweighted_expectation(zeros, ones), std::invalid_argument);
}
