#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "harness_internal.hpp"
#include "qprbm/crossings.hpp"
#include "qprbm/ctmc.hpp"
#include "qprbm/girsanov.hpp"
#include "qprbm/harness.hpp"
#include "qprbm/lambda_eps.hpp"
#include "qprbm/rbm.hpp"
#include "qprbm/rng.hpp"
#include "qprbm/stats.hpp"

namespace qprbm {

namespace {

using detail::Effective;
using detail::fmt;
using detail::Kahan;

constexpr std::uint32_t kBmStream = 8;

struct CheckList {
    bool ok = true;
    std::ostringstream out;

    void check(bool cond, const std::string& what) {
        out << (cond ? "  [ok]   " : "  [FAIL] ") << what << "\n";
        ok = ok && cond;
    }
    void note(const std::string& what) { out << "  [info] " << what << "\n"; }
};

double lattice_r2(LatticePoint x) {
    return static_cast<double>(x[0] * x[0] + x[1] * x[1]);
}

// First time on a linear span at which ||x||^2 crosses r2 (enter: <=, else >=).
std::optional<double> span_passage(const GPiece& p, double r2, bool enter) {
    const double f0 = p.a.norm2() - r2;
    if (enter ? f0 <= 0.0 : f0 >= 0.0) return p.t0;
    if (p.t1 == p.t0) {
        const double f1 = p.b.norm2() - r2;
        if (enter ? f1 <= 0.0 : f1 >= 0.0) return p.t0;
        return std::nullopt;
    }
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
    return p.t0 + tau;
}

// ---------------------------------------------------------------------------
// identities

RunResult run_identities_impl(const Effective& e, const RunOptions& opts) {
    const ExperimentConfig& cfg = e.cfg;
    CheckList cl;
    auto csv = detail::open_csv(
        e, "identities.csv",
        "n,rep,events,max_hat_residual,max_ring_residual,max_boundary_residual,"
        "occupation_residual");
    constexpr double kTol = 1e-8;

    struct Row {
        std::size_t events;
        double hat, ring, bnd, occ;
    };
    double worst_hat = 0.0, worst_ring = 0.0, worst_bnd = 0.0, worst_occ = 0.0;
    for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        const std::int64_t n = cfg.n_list[ni];
        const std::size_t R = static_cast<std::size_t>(cfg.replications);
        std::vector<Row> rows(R);
        parallel_for(R, opts.jobs, [&](std::size_t r) {
            const std::uint32_t rep = static_cast<std::uint32_t>(ni * R + r);
            const PathRecord rec = simulate(cfg.family, n, cfg.x0_lattice, cfg.S, cfg.seed, rep,
                                            Construction::MarkedClocks);
            Row row;
            row.events = rec.events.size();
            row.hat = decompose(rec).max_reconstruction_residual();
            row.ring = ring_decompose(rec).max_reconstruction_residual();
            double bnd = 0.0;
            for (int k = 1; k <= 16; ++k) {
                const double t = cfg.S * static_cast<double>(k) / 16.0;
                bnd = std::max(bnd, std::abs(boundary_identity_residual(rec, t)));
            }
            row.bnd = bnd;
            const OccupationTimes occ = occupation(rec, cfg.S);
            row.occ = std::abs(occ.t0 + occ.t1 + occ.t2 + occ.tint - cfg.S);
            rows[r] = row;
        });
        for (std::size_t r = 0; r < R; ++r) {
            const Row& row = rows[r];
            csv << n << ',' << r << ',' << row.events << ',' << fmt(row.hat) << ','
                << fmt(row.ring) << ',' << fmt(row.bnd) << ',' << fmt(row.occ) << '\n';
            worst_hat = std::max(worst_hat, row.hat);
            worst_ring = std::max(worst_ring, row.ring);
            worst_bnd = std::max(worst_bnd, row.bnd);
            worst_occ = std::max(worst_occ, row.occ);
        }
    }
    cl.check(worst_hat <= kTol, "Xhat = Yhat + Rhat residual " + fmt(worst_hat));
    cl.check(worst_ring <= kTol, "Xhat = Yring + Mring + Rhat residual " + fmt(worst_ring));
    cl.check(worst_bnd <= kTol, "boundary-time identity residual " + fmt(worst_bnd));
    cl.check(worst_occ <= 1e-9 * cfg.S, "occupation partition residual " + fmt(worst_occ));

    // Discrete-generator constants of the quadratic test function (symmetric
    // rate family only).
    if (cfg.family.symmetric()) {
        const std::int64_t n = cfg.n_list.front();
        const LevelRates lr = level_rates(cfg.family, n);
        auto psi = [&](Vec2 x) { return psi_value(x, 1.0, cfg.family); };
        Rng rng(cfg.seed, 0, 0xacce);
        const std::int64_t span = 4 * static_cast<std::int64_t>(std::sqrt(double(n))) + 8;
        double interior_dev = 0.0, face_excess = -1e300, origin_dev = 0.0;
        auto gcsv = detail::open_csv(e, "generator.csv", "region,x1,x2,value");
        const int total = 10000;
        for (int k = 0; k < total; ++k) {
            LatticePoint x;
            const char* region;
            if (k % 4 == 0) {  // faces, alternating
                const std::int64_t j = 1 + static_cast<std::int64_t>(rng.next_u64() % span);
                x = (k % 8 == 0) ? LatticePoint{0, j} : LatticePoint{j, 0};
                region = (k % 8 == 0) ? "F1" : "F2";
            } else {
                x = {1 + static_cast<std::int64_t>(rng.next_u64() % span),
                     1 + static_cast<std::int64_t>(rng.next_u64() % span)};
                region = "interior";
            }
            const double v = discrete_generator(psi, x, lr);
            gcsv << region << ',' << x[0] << ',' << x[1] << ',' << fmt(v) << '\n';
            if (region[0] == 'i') {
                interior_dev = std::max(interior_dev, std::abs(v + 4.0));
            } else {
                face_excess = std::max(face_excess, v + 3.0);
            }
        }
        const double v0 = discrete_generator(psi, {0, 0}, lr);
        gcsv << "origin,0,0," << fmt(v0) << '\n';
        origin_dev = std::abs(v0 + 2.0);
        cl.check(interior_dev <= kTol, "L^n Psi = -4 in the interior, dev " + fmt(interior_dev));
        cl.check(face_excess <= kTol, "L^n Psi <= -3 on the faces, excess " + fmt(face_excess));
        cl.check(origin_dev <= kTol, "L^n Psi = -2 at the origin, dev " + fmt(origin_dev));
    } else {
        cl.note("generator constants skipped (rate family not symmetric)");
    }

    const nlohmann::json derived{{"max_hat_residual", worst_hat},
                                 {"max_ring_residual", worst_ring},
                                 {"max_boundary_residual", worst_bnd},
                                 {"max_occupation_residual", worst_occ}};
    detail::write_manifest(e, "identities", derived);
    return {cl.ok ? 0 : 2, cl.out.str(), derived};
}

// ---------------------------------------------------------------------------
// crossings

struct EscapeSection {
    std::vector<double> eps;
    std::vector<double> freq, freq_se;
    std::vector<std::int64_t> reps, unresolved;
    SlopeFit fit;
};

EscapeSection run_escape_section(const Effective& e, const RunOptions& opts,
                                 const LimitData& limit) {
    const ExperimentConfig& cfg = e.cfg;
    const EscapeConfig& esc = *cfg.escape;
    EscapeSection out;
    const double ang = esc.x0_angle_deg * 3.14159265358979323846 / 180.0;
    for (std::size_t ei = 0; ei < esc.eps_list.size(); ++ei) {
        const double eps = esc.eps_list[ei];
        const std::size_t R = static_cast<std::size_t>(esc.replications[ei]);
        const double dt = cfg.dt > 0.0 ? cfg.dt : esc.dt_factor * eps * eps;
        const Vec2 x0 = Vec2{std::cos(ang), std::sin(ang)} * (esc.c * eps);
        const double sdt = std::sqrt(dt);
        const double resc2 = cfg.r_escape * cfg.r_escape;
        const double eps2 = eps * eps;
        const double t_max = 64.0;  // generous horizon; unresolved runs are counted
        std::vector<std::int8_t> outcome(R);  // 1 escape, 0 return, -1 unresolved
        parallel_for(R, opts.jobs, [&](std::size_t r) {
            const std::uint32_t rep = static_cast<std::uint32_t>(ei * R + r);
            LambdaEpsEngine eng(PathKind::Linear, x0, eps, cfg.c0, limit.d1, limit.d2);
            Rng rng(cfg.seed, rep, kBmStream);
            Vec2 w = x0;
            std::int8_t res = -1;
            std::int64_t step = 0;
            while (res < 0 && !eng.absorbed()) {
                ++step;
                const double t = static_cast<double>(step) * dt;
                if (t > t_max) break;
                w += Vec2{limit.sigma.x1 * sdt * rng.normal(),
                          limit.sigma.x2 * sdt * rng.normal()};
                eng.extend(t, w, [&](const GPiece& p) {
                    if (res >= 0) return;
                    const auto t_esc = span_passage(p, resc2, false);
                    const auto t_ret = span_passage(p, eps2, true);
                    if (t_esc && (!t_ret || *t_esc < *t_ret)) res = 1;
                    else if (t_ret) res = 0;
                });
            }
            if (res < 0 && eng.absorbed()) res = 0;  // absorbed implies tau < eta
            outcome[r] = res;
        });
        std::int64_t esc_n = 0, unres = 0;
        for (auto o : outcome) {
            if (o == 1) ++esc_n;
            if (o < 0) ++unres;
        }
        const double denom = static_cast<double>(R) - static_cast<double>(unres);
        const double p = denom > 0.0 ? static_cast<double>(esc_n) / denom : 0.0;
        out.eps.push_back(eps);
        out.freq.push_back(p);
        out.freq_se.push_back(denom > 0.0 ? std::sqrt(p * (1.0 - p) / denom) : 0.0);
        out.reps.push_back(static_cast<std::int64_t>(R));
        out.unresolved.push_back(unres);
    }
    out.fit = loglog_slope(out.eps, out.freq, out.freq_se);
    return out;
}

RunResult run_crossing_scaling_impl(const Effective& e, const RunOptions& opts) {
    const ExperimentConfig& cfg = e.cfg;
    CheckList cl;
    nlohmann::json derived;
    const LimitData limit = limit_data(cfg.family);

    double c = cfg.c;
    if (c <= 0.0) c = lemma_r1_constants(limit).c;
    derived["c"] = c;

    if (cfg.replications > 0) {
        if (!cfg.family.symmetric())
            throw std::invalid_argument(
                "crossings: the upcrossing bound requires the symmetric rate family");
        const std::int64_t n = cfg.n_list.back();
        // kappa = A0 sqrt(2 (l1 ^ l2)), A0 = 0.99 (1+A)^{-1/2},
        // A = (nu1 v nu2)(l1 l2)^{-1/2}.
        const double big_a =
            std::max(cfg.family.nu.x1, cfg.family.nu.x2) /
            std::sqrt(cfg.family.lambda.x1 * cfg.family.lambda.x2);
        const double a0 = 0.99 / std::sqrt(1.0 + big_a);
        const double kappa =
            a0 * std::sqrt(2.0 * std::min(cfg.family.lambda.x1, cfg.family.lambda.x2));
        derived["kappa"] = kappa;
        const LevelRates lr = level_rates(cfg.family, n);

        auto csv = detail::open_csv(
            e, "crossing_scaling.csv",
            "eps,n_up,up_mean,up_ci,bound,n_down,down_mean,down_ci,episodes,escaped,"
            "escape_freq,escape_ci,insufficient");
        auto rec_csv = detail::open_csv(
            e, "crossing_records.csv",
            "eps,replication,k,gamma_prev,gamma_down,gamma_up,up_duration,down_duration,"
            "escaped");
        std::vector<double> eps_ok, up_means, up_ses, down_means, down_ses, esc_freqs, esc_ses;
        bool bound_ok = true, enough = true, origin_ok = true;
        for (std::size_t ei = 0; ei < cfg.eps_list.size(); ++ei) {
            const double eps = cfg.eps_list[ei];
            if (!(eps * std::sqrt(static_cast<double>(n)) > 1.0))
                throw std::invalid_argument("crossings: need eps > n^{-1/2}");
            const std::size_t R = static_cast<std::size_t>(cfg.replications);
            std::vector<std::vector<CrossingRecord>> recs(R);
            std::vector<double> origin_in_down(R);
            parallel_for(R, opts.jobs, [&](std::size_t r) {
                const std::uint32_t rep = static_cast<std::uint32_t>(ei * R + r);
                LatticeCrossingReducer red(n, eps, c, cfg.r_escape);
                struct V {
                    LatticeCrossingReducer* red;
                    void on_hold(double a, double b, LatticePoint x) { red->on_hold(a, b, x); }
                    void on_fire(double, LatticePoint, Clock, Jump, LatticePoint) {}
                    void on_finish(double S, LatticePoint) { red->finish(S); }
                } v{&red};
                simulate_visit(lr, cfg.x0_lattice, cfg.S, cfg.seed, rep,
                               Construction::MarkedClocks, v);
                recs[r] = red.records();
                origin_in_down[r] = red.max_origin_time_in_downcrossing();
            });
            const CrossingSummary s = crossing_stats(recs);
            for (std::size_t r = 0; r < R; ++r) {
                for (const CrossingRecord& cr : recs[r]) {
                    rec_csv << fmt(eps) << ',' << r << ',' << cr.k << ',' << fmt(cr.gamma_prev)
                            << ',' << fmt(cr.gamma_down) << ','
                            << (cr.gamma_up ? fmt(*cr.gamma_up) : "") << ','
                            << (cr.up_duration ? fmt(*cr.up_duration) : "") << ','
                            << (cr.down_duration ? fmt(*cr.down_duration) : "") << ','
                            << (cr.escaped ? 1 : 0) << '\n';
                }
            }
            for (double o : origin_in_down) origin_ok = origin_ok && o == 0.0;
            const double bound = c * c / (kappa * kappa) * eps * eps;
            const bool ins = s.n_up < 30;
            csv << fmt(eps) << ',' << s.n_up << ',' << fmt(s.up_mean) << ',' << fmt(s.up_ci)
                << ',' << fmt(bound) << ',' << s.n_down << ',' << fmt(s.down_mean) << ','
                << fmt(s.down_ci) << ',' << s.n_down_total << ',' << s.n_escaped << ','
                << fmt(s.escape_freq) << ',' << fmt(s.escape_ci) << ',' << (ins ? 1 : 0)
                << '\n';
            enough = enough && !ins;
            bound_ok = bound_ok && s.up_mean <= bound;
            derived["per_eps"].push_back({{"eps", eps},
                                          {"n_up", s.n_up},
                                          {"up_mean", s.up_mean},
                                          {"bound", bound},
                                          {"episodes", s.n_down_total},
                                          {"escape_freq", s.escape_freq}});
            eps_ok.push_back(eps);
            up_means.push_back(s.up_mean);
            up_ses.push_back(s.up_ci / 1.959963984540054);
            if (s.n_down > 0) {
                down_means.push_back(s.down_mean);
                down_ses.push_back(s.down_ci / 1.959963984540054);
            }
            if (s.escape_freq > 0.0) {
                esc_freqs.push_back(s.escape_freq);
                esc_ses.push_back(s.escape_ci / 1.959963984540054);
            }
        }
        cl.check(enough, "every eps collected >= 30 upcrossings");
        cl.check(origin_ok, "origin occupation constant inside downcrossings");
        cl.check(bound_ok, "mean upcrossing duration <= c^2 kappa^-2 eps^2 for every eps");

        auto slopes = detail::open_csv(e, "slopes.csv", "quantity,slope,slope_se,r_squared");
        const SlopeFit up_fit = loglog_slope(eps_ok, up_means, up_ses);
        slopes << "upcrossing_duration," << fmt(up_fit.slope) << ',' << fmt(up_fit.slope_se)
               << ',' << fmt(up_fit.r_squared) << '\n';
        derived["upcrossing_slope"] = up_fit.slope;
        cl.check(up_fit.slope >= 1.7 && up_fit.slope <= 2.3,
                 "upcrossing-duration log-log slope " + fmt(up_fit.slope) + " in [1.7, 2.3]");
        if (down_means.size() == eps_ok.size()) {
            const SlopeFit down_fit = loglog_slope(eps_ok, down_means, down_ses);
            slopes << "downcrossing_duration," << fmt(down_fit.slope) << ','
                   << fmt(down_fit.slope_se) << ',' << fmt(down_fit.r_squared) << '\n';
            cl.note("downcrossing-duration slope " + fmt(down_fit.slope));
        }
        if (esc_freqs.size() == eps_ok.size()) {
            const SlopeFit esc_fit = loglog_slope(eps_ok, esc_freqs, esc_ses);
            slopes << "walk_escape_frequency," << fmt(esc_fit.slope) << ','
                   << fmt(esc_fit.slope_se) << ',' << fmt(esc_fit.r_squared) << '\n';
            cl.note("walk escape-frequency slope " + fmt(esc_fit.slope));
        }
    }

    if (cfg.escape) {
        const EscapeSection es = run_escape_section(e, opts, limit);
        auto csv = detail::open_csv(e, "escape_scaling.csv",
                                    "eps,replications,unresolved,escape_freq,escape_se");
        for (std::size_t i = 0; i < es.eps.size(); ++i) {
            csv << fmt(es.eps[i]) << ',' << es.reps[i] << ',' << es.unresolved[i] << ','
                << fmt(es.freq[i]) << ',' << fmt(es.freq_se[i]) << '\n';
        }
        derived["escape_slope"] = es.fit.slope;
        derived["escape_slope_se"] = es.fit.slope_se;
        derived["alpha_star"] = limit.alpha_star;
        cl.check(std::abs(es.fit.slope - limit.alpha_star) <= 0.15,
                 "stopped-RBM escape slope " + fmt(es.fit.slope) + " within 0.15 of alpha* = " +
                     fmt(limit.alpha_star));
    }

    detail::write_manifest(e, "crossings", derived);
    return {cl.ok ? 0 : 2, cl.out.str(), derived};
}

// ---------------------------------------------------------------------------
// corner

struct GirsanovBlock {
    std::vector<double> l;           // likelihood ratios under the symmetric law
    std::vector<std::array<double, 6>> log_factors;  // per driving clock
    std::vector<double> f_sym;       // functional under the symmetric law
    std::vector<double> f_direct;    // functional under the target law
    Estimate reweighted, direct;
};

GirsanovBlock girsanov_ball_agreement(const Effective& e, const RunOptions& opts,
                                      const RateFamily& target, std::int64_t n, double S,
                                      double ball_eps, std::size_t R,
                                      std::uint32_t rep_offset) {
    const ExperimentConfig& cfg = e.cfg;
    RateFamily sym = target;
    sym.hat_lambda = sym.hat_mu = sym.hat_nu = Vec2{};
    const LevelRates lr_sym = level_rates(sym, n);
    const LevelRates lr_tgt = level_rates(target, n);
    const double eps2n = ball_eps * ball_eps * static_cast<double>(n);

    GirsanovBlock blk;
    blk.l.resize(R);
    blk.log_factors.resize(R);
    blk.f_sym.resize(R);
    blk.f_direct.resize(R);

    struct BallCounter {
        double eps2n;
        Kahan ball;
        std::array<std::uint64_t, 6> counts{};
        void on_hold(double a, double b, LatticePoint x) {
            if (lattice_r2(x) < eps2n) ball.add(b - a);
        }
        void on_fire(double, LatticePoint, Clock c, Jump, LatticePoint) {
            ++counts[static_cast<int>(c)];
        }
        void on_finish(double, LatticePoint) {}
    };

    parallel_for(R, opts.jobs, [&](std::size_t r) {
        BallCounter v{eps2n, {}, {}};
        simulate_visit(lr_sym, cfg.x0_lattice, S, cfg.seed,
                       rep_offset + static_cast<std::uint32_t>(r), Construction::MarkedClocks,
                       v);
        double log_l = 0.0;
        const double nd = static_cast<double>(n);
        const double rn = std::sqrt(nd);
        const double base[6] = {target.lambda.x1, target.lambda.x2, target.mu.x1,
                                target.mu.x2,     target.mu.x1 + target.nu.x1,
                                target.mu.x2 + target.nu.x2};
        const double hat[6] = {target.hat_lambda.x1,
                               target.hat_lambda.x2,
                               target.hat_mu.x1,
                               target.hat_mu.x2,
                               target.hat_mu.x1 + target.hat_nu.x1,
                               target.hat_mu.x2 + target.hat_nu.x2};
        for (int cidx = 0; cidx < 6; ++cidx) {
            const double rs = nd * base[cidx];
            const double rt = rs + rn * hat[cidx];
            const double ratio = rt / rs;
            const double lf =
                std::log(ratio) * static_cast<double>(v.counts[cidx]) + rs * S * (1.0 - ratio);
            blk.log_factors[r][cidx] = lf;
            log_l += lf;
        }
        blk.l[r] = std::exp(log_l);
        blk.f_sym[r] = v.ball.s;

        BallCounter vd{eps2n, {}, {}};
        simulate_visit(lr_tgt, cfg.x0_lattice, S, cfg.seed,
                       rep_offset + 0x40000000u + static_cast<std::uint32_t>(r),
                       Construction::MarkedClocks, vd);
        blk.f_direct[r] = vd.ball.s;
    });
    blk.reweighted = reweighted_expectation(blk.l, blk.f_sym);
    blk.direct = sample_mean(blk.f_direct);
    return blk;
}

RunResult run_corner_impl(const Effective& e, const RunOptions& opts) {
    const ExperimentConfig& cfg = e.cfg;
    CheckList cl;
    auto ball_csv = detail::open_csv(e, "corner_ball.csv", "n,eps,mean,ci95,replications");
    auto bnd_csv = detail::open_csv(e, "corner_boundary.csv", "n,mean,ci95,replications");

    struct BallBoundary {
        std::vector<double> eps2n;
        std::vector<Kahan> ball;
        Kahan boundary;
        void on_hold(double a, double b, LatticePoint x) {
            const double r2 = lattice_r2(x);
            const double dt = b - a;
            for (std::size_t i = 0; i < eps2n.size(); ++i)
                if (r2 < eps2n[i]) ball[i].add(dt);
            if (x[0] == 0 || x[1] == 0) boundary.add(dt);
        }
        void on_fire(double, LatticePoint, Clock, Jump, LatticePoint) {}
        void on_finish(double, LatticePoint) {}
    };

    const std::size_t R = static_cast<std::size_t>(cfg.replications);
    const std::size_t ne = cfg.eps_list.size();
    std::vector<std::vector<MeanCI>> ball_stats(cfg.n_list.size());
    std::vector<MeanCI> bnd_stats(cfg.n_list.size());
    for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        const std::int64_t n = cfg.n_list[ni];
        const LevelRates lr = level_rates(cfg.family, n);
        std::vector<std::vector<double>> ball(ne, std::vector<double>(R));
        std::vector<double> boundary(R);
        parallel_for(R, opts.jobs, [&](std::size_t r) {
            BallBoundary v;
            v.eps2n.resize(ne);
            v.ball.resize(ne);
            for (std::size_t i = 0; i < ne; ++i)
                v.eps2n[i] = cfg.eps_list[i] * cfg.eps_list[i] * static_cast<double>(n);
            simulate_visit(lr, cfg.x0_lattice, cfg.S, cfg.seed,
                           static_cast<std::uint32_t>(ni * R + r), Construction::MarkedClocks,
                           v);
            for (std::size_t i = 0; i < ne; ++i) ball[i][r] = v.ball[i].s;
            boundary[r] = v.boundary.s;
        });
        ball_stats[ni].resize(ne);
        for (std::size_t i = 0; i < ne; ++i) {
            ball_stats[ni][i] = mean_ci(ball[i]);
            ball_csv << n << ',' << fmt(cfg.eps_list[i]) << ',' << fmt(ball_stats[ni][i].mean)
                     << ',' << fmt(ball_stats[ni][i].half_width) << ',' << R << '\n';
        }
        bnd_stats[ni] = mean_ci(boundary);
        bnd_csv << n << ',' << fmt(bnd_stats[ni].mean) << ',' << fmt(bnd_stats[ni].half_width)
                << ',' << R << '\n';
    }

    // Trends: strictly decreasing ball time in eps at the largest n, strictly
    // decreasing boundary time in n; CIs of the extreme grid points disjoint.
    const auto& top = ball_stats.back();
    bool dec_eps = true;
    for (std::size_t i = 0; i + 1 < ne; ++i) dec_eps = dec_eps && top[i].mean > top[i + 1].mean;
    cl.check(dec_eps, "time in B_eps strictly decreasing in eps at n = " +
                          std::to_string(cfg.n_list.back()));
    if (ne >= 2) {
        const bool disjoint =
            top.front().mean - top.front().half_width > top.back().mean + top.back().half_width;
        cl.check(disjoint, "extreme-eps 95% CIs disjoint");
    }
    bool dec_n = true;
    for (std::size_t i = 0; i + 1 < bnd_stats.size(); ++i)
        dec_n = dec_n && bnd_stats[i].mean > bnd_stats[i + 1].mean;
    cl.check(dec_n, "boundary time T0+T1+T2 strictly decreasing in n");
    if (bnd_stats.size() >= 2) {
        const bool disjoint = bnd_stats.front().mean - bnd_stats.front().half_width >
                              bnd_stats.back().mean + bnd_stats.back().half_width;
        cl.check(disjoint, "extreme-n 95% CIs disjoint");
    }

    nlohmann::json derived;
    if (cfg.girsanov_target) {
        const GirsanovBlock blk =
            girsanov_ball_agreement(e, opts, *cfg.girsanov_target, cfg.n_list.back(), cfg.S,
                                    cfg.ball_eps, R, 0x20000000u);
        const double d = std::abs(blk.reweighted.value - blk.direct.value);
        const double se = std::sqrt(blk.reweighted.se * blk.reweighted.se +
                                    blk.direct.se * blk.direct.se);
        cl.check(d <= 3.0 * se, "reweighted vs direct ball-time estimates agree (|d| = " +
                                    fmt(d) + ", 3se = " + fmt(3.0 * se) + ")");
        derived["reweighted"] = blk.reweighted.value;
        derived["direct"] = blk.direct.value;
    }
    for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        derived["boundary_time"].push_back(
            {{"n", cfg.n_list[ni]}, {"mean", bnd_stats[ni].mean}, {"ci", bnd_stats[ni].half_width}});
        for (std::size_t i = 0; i < ne; ++i) {
            derived["ball_time"].push_back({{"n", cfg.n_list[ni]},
                                            {"eps", cfg.eps_list[i]},
                                            {"mean", ball_stats[ni][i].mean},
                                            {"ci", ball_stats[ni][i].half_width}});
        }
    }
    detail::write_manifest(e, "corner", derived);
    return {cl.ok ? 0 : 2, cl.out.str(), derived};
}

// ---------------------------------------------------------------------------
// convergence

struct StoppedCtmc {
    Vec2 at_t;
    double tau;
};

struct StoppedVisitor {
    double stop_r2n, t_mark;
    bool stopped = false;
    double tau = -1.0;
    LatticePoint frozen{};
    LatticePoint at{};
    bool have = false;
    void classify(double t0, LatticePoint x) {
        if (!stopped && lattice_r2(x) <= stop_r2n) {
            stopped = true;
            tau = t0;
            frozen = x;
        }
    }
    void on_hold(double t0, double t1, LatticePoint x) {
        classify(t0, x);
        if (!have && t_mark >= t0 && t_mark < t1) {
            at = stopped ? frozen : x;
            have = true;
        }
    }
    void on_fire(double, LatticePoint, Clock, Jump, LatticePoint) {}
    void on_finish(double S, LatticePoint x) {
        if (!have) {
            at = stopped ? frozen : x;
            have = true;
        }
        if (!stopped) tau = S;
    }
    bool done() const { return stopped && have; }
};

StoppedCtmc sample_ctmc_stopped(const LevelRates& lr, LatticePoint x0, double stop_radius,
                                double t_mark, double S, std::uint64_t seed,
                                std::uint32_t rep) {
    StoppedVisitor v;
    v.stop_r2n = stop_radius * stop_radius * static_cast<double>(lr.n);
    v.t_mark = t_mark;
    simulate_visit(lr, x0, S, seed, rep, Construction::MarkedClocks, v);
    const double inv = 1.0 / std::sqrt(static_cast<double>(lr.n));
    return {{inv * static_cast<double>(v.at[0]), inv * static_cast<double>(v.at[1])},
            v.tau < 0.0 ? S : std::min(v.tau, S)};
}

struct StoppedRbm {
    Vec2 at_t;
    double tau;
};

StoppedRbm sample_rbm_stopped(Vec2 x0, double eps, double c0, const LimitData& limit, double dt,
                              double S, double t_mark, std::uint64_t seed, std::uint32_t rep) {
    LambdaEpsEngine eng(PathKind::Linear, x0, eps, c0, limit.d1, limit.d2);
    Rng rng(seed, rep, kBmStream);
    const double sdt = std::sqrt(dt);
    const std::int64_t steps = static_cast<std::int64_t>(std::ceil(S / dt));
    Vec2 w = x0;
    Vec2 at{};
    bool have = false;
    for (std::int64_t i = 1; i <= steps && !(eng.absorbed() && have); ++i) {
        const double t = std::min(static_cast<double>(i) * dt, S);
        w += limit.b * dt +
             Vec2{limit.sigma.x1 * sdt * rng.normal(), limit.sigma.x2 * sdt * rng.normal()};
        eng.extend(t, w, [&](const GPiece& p) {
            if (!have && p.t1 >= t_mark && p.t0 <= t_mark) {
                const double len = p.t1 - p.t0;
                at = len > 0.0 ? p.a + (p.b - p.a) * ((t_mark - p.t0) / len) : p.b;
                have = true;
            }
        });
    }
    if (!have) at = eng.g();
    return {at, eng.absorbed() ? std::min(eng.absorption_time(), S) : S};
}

RunResult run_convergence_impl(const Effective& e, const RunOptions& opts) {
    const ExperimentConfig& cfg = e.cfg;
    CheckList cl;
    const LimitData limit = limit_data(cfg.family);
    const std::size_t R = static_cast<std::size_t>(cfg.replications);
    const double crit = ks_two_sample_critical(R, R, 0.01);
    auto csv = detail::open_csv(e, "convergence_ks.csv", "comparison,coordinate,ks,critical");

    // (a) self-convergence: marginals of the rescaled walk at t_marginal for
    // consecutive n, plus a same-law calibration at the largest n.
    std::vector<std::array<std::vector<double>, 2>> marg(cfg.n_list.size());
    for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        const std::int64_t n = cfg.n_list[ni];
        const LevelRates lr = level_rates(cfg.family, n);
        const double rn = std::sqrt(static_cast<double>(n));
        const LatticePoint x0{static_cast<std::int64_t>(std::llround(rn * cfg.x0.x1)),
                              static_cast<std::int64_t>(std::llround(rn * cfg.x0.x2))};
        marg[ni][0].resize(R);
        marg[ni][1].resize(R);
        parallel_for(R, opts.jobs, [&](std::size_t r) {
            struct V {
                double t_mark;
                LatticePoint at{};
                bool have = false;
                void on_hold(double t0, double t1, LatticePoint x) {
                    if (!have && t_mark >= t0 && t_mark < t1) {
                        at = x;
                        have = true;
                    }
                }
                void on_fire(double, LatticePoint, Clock, Jump, LatticePoint) {}
                void on_finish(double, LatticePoint x) {
                    if (!have) at = x;
                }
                bool done() const { return have; }
            } v{cfg.t_marginal};
            simulate_visit(lr, x0, cfg.t_marginal, cfg.seed,
                           static_cast<std::uint32_t>(ni * R + r), Construction::MarkedClocks,
                           v);
            const double inv = 1.0 / rn;
            marg[ni][0][r] = inv * static_cast<double>(v.at[0]);
            marg[ni][1][r] = inv * static_cast<double>(v.at[1]);
        });
    }
    for (std::size_t ni = 0; ni + 1 < cfg.n_list.size(); ++ni) {
        for (int coord = 0; coord < 2; ++coord) {
            const double ks = ks_two_sample(marg[ni][coord], marg[ni + 1][coord]);
            csv << "self_n" << cfg.n_list[ni] << "_n" << cfg.n_list[ni + 1] << ',' << (coord + 1)
                << ',' << fmt(ks) << ',' << fmt(crit) << '\n';
            cl.note("KS(Xhat_" + std::to_string(cfg.n_list[ni]) + ", Xhat_" +
                    std::to_string(cfg.n_list[ni + 1]) + ") coord " + std::to_string(coord + 1) +
                    " = " + fmt(ks));
        }
    }
    {
        // Null calibration: same law, fresh streams.
        const std::size_t ni = cfg.n_list.size() - 1;
        const std::int64_t n = cfg.n_list.back();
        const LevelRates lr = level_rates(cfg.family, n);
        const double rn = std::sqrt(static_cast<double>(n));
        const LatticePoint x0{static_cast<std::int64_t>(std::llround(rn * cfg.x0.x1)),
                              static_cast<std::int64_t>(std::llround(rn * cfg.x0.x2))};
        std::array<std::vector<double>, 2> again;
        again[0].resize(R);
        again[1].resize(R);
        parallel_for(R, opts.jobs, [&](std::size_t r) {
            struct V {
                double t_mark;
                LatticePoint at{};
                bool have = false;
                void on_hold(double t0, double t1, LatticePoint x) {
                    if (!have && t_mark >= t0 && t_mark < t1) {
                        at = x;
                        have = true;
                    }
                }
                void on_fire(double, LatticePoint, Clock, Jump, LatticePoint) {}
                void on_finish(double, LatticePoint x) {
                    if (!have) at = x;
                }
                bool done() const { return have; }
            } v{cfg.t_marginal};
            simulate_visit(lr, x0, cfg.t_marginal, mix64(cfg.seed ^ 0x5a5a5a5a),
                           static_cast<std::uint32_t>(r), Construction::MarkedClocks, v);
            const double inv = 1.0 / rn;
            again[0][r] = inv * static_cast<double>(v.at[0]);
            again[1][r] = inv * static_cast<double>(v.at[1]);
        });
        bool null_ok = true;
        for (int coord = 0; coord < 2; ++coord) {
            const double ks = ks_two_sample(marg[ni][coord], again[coord]);
            csv << "null_n" << n << ',' << (coord + 1) << ',' << fmt(ks) << ',' << fmt(crit)
                << '\n';
            null_ok = null_ok && ks < crit;
        }
        cl.check(null_ok, "same-law calibration below the 1% critical value");
    }

    nlohmann::json derived{{"ks_critical", crit}};
    // (b) stopped-process law: the rescaled walk stopped at B_{c0 eps} against
    // the reflection-map sample of the stopped limit process.
    {
        const double eps = cfg.eps_list.front();
        const std::int64_t n = cfg.n_list.back();
        const double rn = std::sqrt(static_cast<double>(n));
        if (!(eps * cfg.c0 >= 4.0 / rn))
            throw std::invalid_argument("convergence: need eps*c0 >= 4 n^{-1/2}");
        const LevelRates lr = level_rates(cfg.family, n);
        const LatticePoint x0{static_cast<std::int64_t>(std::llround(rn * cfg.x0.x1)),
                              static_cast<std::int64_t>(std::llround(rn * cfg.x0.x2))};
        const Vec2 x0_rbm{static_cast<double>(x0[0]) / rn, static_cast<double>(x0[1]) / rn};
        const double dt = cfg.dt_for(eps);

        std::array<std::vector<double>, 2> walk_marg, rbm_marg;
        std::vector<double> walk_tau(R), rbm_tau(R);
        for (int coord = 0; coord < 2; ++coord) {
            walk_marg[coord].resize(R);
            rbm_marg[coord].resize(R);
        }
        parallel_for(R, opts.jobs, [&](std::size_t r) {
            const StoppedCtmc sc =
                sample_ctmc_stopped(lr, x0, cfg.c0 * eps, cfg.t_marginal, cfg.S, cfg.seed,
                                    0x60000000u + static_cast<std::uint32_t>(r));
            walk_marg[0][r] = sc.at_t.x1;
            walk_marg[1][r] = sc.at_t.x2;
            walk_tau[r] = sc.tau;
            const StoppedRbm sr =
                sample_rbm_stopped(x0_rbm, eps, cfg.c0, limit, dt, cfg.S, cfg.t_marginal,
                                   cfg.seed, 0x70000000u + static_cast<std::uint32_t>(r));
            rbm_marg[0][r] = sr.at_t.x1;
            rbm_marg[1][r] = sr.at_t.x2;
            rbm_tau[r] = sr.tau;
        });
        bool ok = true;
        for (int coord = 0; coord < 2; ++coord) {
            const double ks = ks_two_sample(walk_marg[coord], rbm_marg[coord]);
            csv << "stopped_marginal," << (coord + 1) << ',' << fmt(ks) << ',' << fmt(crit)
                << '\n';
            derived["stopped_marginal_ks"].push_back(ks);
            ok = ok && ks < crit;
        }
        cl.check(ok, "stopped-marginal KS below the 1% critical value");
        const double ks_tau = ks_two_sample(walk_tau, rbm_tau);
        csv << "absorption_time,_," << fmt(ks_tau) << ',' << fmt(crit) << '\n';
        derived["absorption_time_ks"] = ks_tau;
        cl.check(ks_tau < crit, "absorption-time KS below the 1% critical value (" +
                                    fmt(ks_tau) + " < " + fmt(crit) + ")");
    }

    detail::write_manifest(e, "convergence", derived);
    return {cl.ok ? 0 : 2, cl.out.str(), derived};
}

// ---------------------------------------------------------------------------
// girsanov

RunResult run_girsanov_impl(const Effective& e, const RunOptions& opts) {
    const ExperimentConfig& cfg = e.cfg;
    if (!cfg.girsanov_target)
        throw std::invalid_argument("girsanov: config requires a girsanov.target section");
    const RateFamily& target = *cfg.girsanov_target;
    CheckList cl;
    const std::int64_t n = cfg.n_list.front();
    const std::size_t R = static_cast<std::size_t>(cfg.replications);
    const GirsanovBlock blk =
        girsanov_ball_agreement(e, opts, target, n, cfg.S, cfg.ball_eps, R, 0u);

    const BoundReport rep = verify_bound(blk.l, target, cfg.S);
    auto csv = detail::open_csv(
        e, "girsanov.csv",
        "rep,L,log_factor_A1,log_factor_A2,log_factor_D1,log_factor_D2,log_factor_B1,"
        "log_factor_B2,f_sym,f_direct");
    for (std::size_t r = 0; r < R; ++r) {
        csv << r << ',' << fmt(blk.l[r]);
        for (int c = 0; c < 6; ++c) csv << ',' << fmt(blk.log_factors[r][c]);
        csv << ',' << fmt(blk.f_sym[r]) << ',' << fmt(blk.f_direct[r]) << '\n';
    }
    cl.check(rep.mean_within_3se, "E[L] = " + fmt(rep.mean_l) + " within 3 SE (" +
                                      fmt(3.0 * rep.se_l) + ") of 1");
    cl.check(rep.second_moment_ok,
             "E[L^2] = " + fmt(rep.mean_l2) + " <= analytic bound " + fmt(rep.bound));
    const double d = std::abs(blk.reweighted.value - blk.direct.value);
    const double se =
        std::sqrt(blk.reweighted.se * blk.reweighted.se + blk.direct.se * blk.direct.se);
    cl.check(d <= 3.0 * se, "reweighted ball time " + fmt(blk.reweighted.value) +
                                " vs direct " + fmt(blk.direct.value) + " within 3 SE");
    const nlohmann::json derived{{"mean_l", rep.mean_l},
                                 {"se_l", rep.se_l},
                                 {"mean_l2", rep.mean_l2},
                                 {"bound", rep.bound},
                                 {"reweighted", blk.reweighted.value},
                                 {"direct", blk.direct.value}};
    detail::write_manifest(e, "girsanov", derived);
    return {cl.ok ? 0 : 2, cl.out.str(), derived};
}

// ---------------------------------------------------------------------------
// submartingale

RunResult run_submartingale_impl(const Effective& e, const RunOptions& opts) {
    const ExperimentConfig& cfg = e.cfg;
    CheckList cl;
    const LimitData limit = limit_data(cfg.family);
    const ProductCutoff f(cfg.cutoff_a1, cfg.cutoff_a2, cfg.cutoff_s);

    // Face condition d^(i) . grad f >= 0, checked numerically on face grids.
    {
        double worst = 0.0;
        for (int k = 1; k <= 2000; ++k) {
            const double y = 5.0 * static_cast<double>(k) / 2000.0;
            worst = std::min(worst, limit.d1.dot(f.gradient({0.0, y})));
            worst = std::min(worst, limit.d2.dot(f.gradient({y, 0.0})));
        }
        if (worst < -1e-9)
            throw std::invalid_argument(
                "submartingale: test function violates the face condition");
        cl.check(true, "face condition d(i).grad f >= 0 on both faces");
    }

    const std::int64_t n = cfg.n_list.back();
    const LevelRates lr = level_rates(cfg.family, n);
    const std::size_t R = static_cast<std::size_t>(cfg.replications);
    const Vec2 sig2{limit.sigma.x1 * limit.sigma.x1, limit.sigma.x2 * limit.sigma.x2};

    struct TestFn {
        std::function<double(Vec2)> value;
        std::function<Vec2(Vec2)> gradient;
        std::function<Vec2(Vec2)> hessian_diag;
    };

    struct SubmartVisitor {
        double t1, t2;
        const TestFn* f;
        Vec2 b, sig2;
        double inv;
        Kahan lf_int, x1_int;
        Vec2 x_t1{}, x_t2{};
        bool have1 = false, have2 = false;

        Vec2 xh(LatticePoint x) const {
            return {inv * static_cast<double>(x[0]), inv * static_cast<double>(x[1])};
        }
        double lf(Vec2 p) const {
            const Vec2 g = f->gradient(p);
            const Vec2 hd = f->hessian_diag(p);
            return 0.5 * (sig2.x1 * hd.x1 + sig2.x2 * hd.x2) + b.dot(g);
        }
        void on_hold(double a, double bto, LatticePoint x) {
            const Vec2 p = xh(x);
            {
                const double lo = a, hi = std::min(bto, t1);
                if (hi > lo) x1_int.add(p.x1 * (hi - lo));
            }
            if (!have1 && t1 >= a && t1 < bto) {
                x_t1 = p;
                have1 = true;
            }
            if (!have2 && t2 >= a && t2 < bto) {
                x_t2 = p;
                have2 = true;
            }
            const double lo = std::max(a, t1), hi = std::min(bto, t2);
            if (hi > lo) lf_int.add(lf(p) * (hi - lo));
        }
        void on_fire(double, LatticePoint, Clock, Jump, LatticePoint) {}
        void on_finish(double, LatticePoint x) {
            if (!have1) x_t1 = xh(x);
            if (!have2) x_t2 = xh(x);
        }
    };

    const TestFn cutoff_fn{[&](Vec2 p) { return f.value(p); },
                           [&](Vec2 p) { return f.gradient(p); },
                           [&](Vec2 p) { return f.hessian_diag(p); }};

    std::vector<double> dm(R), w_radius(R), w_avg(R);
    parallel_for(R, opts.jobs, [&](std::size_t r) {
        SubmartVisitor v{cfg.t1, cfg.t2, &cutoff_fn, limit.b, sig2,
                         1.0 / std::sqrt(static_cast<double>(n))};
        simulate_visit(lr, cfg.x0_lattice, cfg.t2, cfg.seed, static_cast<std::uint32_t>(r),
                       Construction::MarkedClocks, v);
        dm[r] = cutoff_fn.value(v.x_t2) - cutoff_fn.value(v.x_t1) - v.lf_int.s;
        const double rad = v.x_t1.norm();
        w_radius[r] = 1.0 / (1.0 + std::exp(-(rad - 0.5) / 0.2));
        const double avg = v.x1_int.s / cfg.t1;
        w_avg[r] = 1.0 / (1.0 + std::exp(-(avg - 0.25) / 0.2));
    });

    nlohmann::json derived;
    auto csv = detail::open_csv(e, "submartingale.csv", "weight,estimate,se,pass");
    auto test_weight = [&](const char* name, const std::vector<double>* w) {
        std::vector<double> prod(R);
        for (std::size_t r = 0; r < R; ++r) prod[r] = (w ? (*w)[r] : 1.0) * dm[r];
        const Estimate est = sample_mean(prod);
        const bool pass = est.value >= -3.0 * est.se;
        csv << name << ',' << fmt(est.value) << ',' << fmt(est.se) << ',' << (pass ? 1 : 0)
            << '\n';
        derived[name] = {{"estimate", est.value}, {"se", est.se}};
        cl.check(pass, std::string("weight ") + name + ": estimate " + fmt(est.value) +
                           " >= -3 SE (" + fmt(-3.0 * est.se) + ")");
    };
    test_weight("constant", nullptr);
    test_weight("radius_sigmoid", &w_radius);
    test_weight("avg_x1_sigmoid", &w_avg);

    // Constant f control: the same estimator pipeline must return exact zeros.
    {
        const TestFn const_fn{[](Vec2) { return 0.75; }, [](Vec2) { return Vec2{}; },
                              [](Vec2) { return Vec2{}; }};
        const std::size_t Rc = std::min<std::size_t>(R, 64);
        std::vector<double> dc(Rc);
        parallel_for(Rc, opts.jobs, [&](std::size_t r) {
            SubmartVisitor v{cfg.t1, cfg.t2, &const_fn, limit.b, sig2,
                             1.0 / std::sqrt(static_cast<double>(n))};
            simulate_visit(lr, cfg.x0_lattice, cfg.t2, cfg.seed,
                           0x30000000u + static_cast<std::uint32_t>(r),
                           Construction::MarkedClocks, v);
            dc[r] = const_fn.value(v.x_t2) - const_fn.value(v.x_t1) - v.lf_int.s;
        });
        bool all_zero = true;
        for (double v : dc) all_zero = all_zero && v == 0.0;
        const Estimate est = sample_mean(dc);
        cl.check(all_zero && std::abs(est.value) <= 3.0 * est.se,
                 "constant f: M(t2) - M(t1) identically zero");
    }

    derived["n"] = n;
    detail::write_manifest(e, "submartingale", derived);
    return {cl.ok ? 0 : 2, cl.out.str(), derived};
}

}  // namespace

RunResult run_identities(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    return run_identities_impl(e, opts);
}
RunResult run_crossing_scaling(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    return run_crossing_scaling_impl(e, opts);
}
RunResult run_corner(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    return run_corner_impl(e, opts);
}
RunResult run_convergence(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    return run_convergence_impl(e, opts);
}
RunResult run_girsanov(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    return run_girsanov_impl(e, opts);
}
RunResult run_submartingale(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto e = detail::resolve(cfg, opts);
    return run_submartingale_impl(e, opts);
}

}  // namespace qprbm
