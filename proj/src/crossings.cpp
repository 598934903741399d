#include "qprbm/crossings.hpp"

#include <cmath>
#include <stdexcept>

namespace qprbm {

namespace {

// First time in [t0, t1] at which the linear segment p -> q satisfies
// ||x||^2 <= r2 (enter) or >= r2 (!enter).
std::optional<double> passage(double t0, double t1, Vec2 p, Vec2 q, double r2, bool enter) {
    const double f0 = p.norm2() - r2;
    if (enter ? f0 <= 0.0 : f0 >= 0.0) return t0;
    if (t1 == t0) return std::nullopt;
    const Vec2 v = (q - p) * (1.0 / (t1 - t0));
    const double c2 = v.norm2();
    if (c2 == 0.0) return std::nullopt;
    const double c1 = 2.0 * p.dot(v);
    const double disc = c1 * c1 - 4.0 * c2 * f0;
    double tau;
    if (enter) {
        if (disc < 0.0) return std::nullopt;
        tau = (-c1 - std::sqrt(disc)) / (2.0 * c2);
    } else {
        tau = (-c1 + std::sqrt(std::max(disc, 0.0))) / (2.0 * c2);
    }
    if (tau < 0.0 || tau > t1 - t0) return std::nullopt;
    return t0 + tau;
}

}  // namespace

std::vector<CrossingRecord> crossing_sequence(const CadlagPath& path, double eps, double c,
                                              double S, double r_escape) {
    if (!(c > 1.0)) throw std::invalid_argument("crossing_sequence: need c > 1");
    if (!(eps > 0.0)) throw std::invalid_argument("crossing_sequence: need eps > 0");
    if (!(S >= 0.0 && S <= path.horizon))
        throw std::invalid_argument("crossing_sequence: S outside [0, horizon]");
    const double eps2 = eps * eps;
    const double ceps2 = c * eps * c * eps;
    const double resc2 = r_escape * r_escape;

    std::vector<CrossingRecord> out;
    bool waiting_down = true;
    double gamma_prev = 0.0;
    double from = 0.0;
    std::int64_t k = 0;

    auto scan_from = [&](double r2, bool enter, double start) -> std::optional<double> {
        if (path.kind == PathKind::Step) {
            for (std::size_t i = path.index_at(start); i < path.t.size(); ++i) {
                if (path.t[i] > S) break;
                const double tt = std::max(path.t[i], start);
                const double f = path.x[i].norm2() - r2;
                if (enter ? f <= 0.0 : f >= 0.0) return tt;
            }
            return std::nullopt;
        }
        for (std::size_t i = path.index_at(start); i + 1 < path.t.size(); ++i) {
            const double t0 = std::max(path.t[i], start);
            if (t0 > S) break;
            const double t1 = std::min(path.t[i + 1], S);
            if (t1 < t0) break;
            const Vec2 p = t0 == path.t[i] ? path.x[i] : path.eval(t0);
            if (auto tt = passage(t0, t1, p, path.x[i + 1], r2, enter)) return tt;
        }
        // Single-point tail at S.
        const double f = path.eval(S).norm2() - r2;
        if (S >= start && (enter ? f <= 0.0 : f >= 0.0)) return S;
        return std::nullopt;
    };

    while (from <= S) {
        if (waiting_down) {
            auto gd = scan_from(eps2, true, from);
            if (!gd) break;
            CrossingRecord rec;
            rec.k = k;
            rec.gamma_prev = gamma_prev;
            rec.gamma_down = *gd;
            out.push_back(rec);
            waiting_down = false;
            from = *gd;
        } else {
            auto gu = scan_from(ceps2, false, from);
            if (!gu) break;
            auto& rec = out.back();
            rec.gamma_up = *gu;
            rec.up_duration = *gu - rec.gamma_down;
            gamma_prev = *gu;
            waiting_down = true;
            from = *gu;
            // Downcrossing episode: does the radius reach r_escape before eps?
            auto ge = scan_from(resc2, false, from);
            auto gd = scan_from(eps2, true, from);
            if (gd) {
                rec.down_duration = *gd - *gu;
                rec.escaped = ge && *ge < *gd;
            } else {
                rec.escaped = ge.has_value();
            }
            ++k;
        }
        // passage() may return `from` itself when the condition already
        // holds, which is the correct stopping time; alternation between the
        // two thresholds guarantees strict progress because c > 1.
    }
    return out;
}

double time_in_ball(const CadlagPath& path, double eps, double S) {
    if (!(eps > 0.0)) throw std::invalid_argument("time_in_ball: need eps > 0");
    if (!(S >= 0.0 && S <= path.horizon))
        throw std::invalid_argument("time_in_ball: S outside [0, horizon]");
    const double r2 = eps * eps;
    double total = 0.0;
    if (path.kind == PathKind::Step) {
        for (std::size_t i = 0; i < path.t.size(); ++i) {
            const double t0 = path.t[i];
            if (t0 >= S) break;
            const double t1 = i + 1 < path.t.size() ? std::min(path.t[i + 1], S) : S;
            if (path.x[i].norm2() < r2) total += t1 - t0;
        }
        return total;
    }
    for (std::size_t i = 0; i + 1 < path.t.size(); ++i) {
        const double t0 = path.t[i];
        if (t0 >= S) break;
        const double t1 = std::min(path.t[i + 1], S);
        if (t1 <= t0) continue;
        const Vec2 p = path.x[i];
        const Vec2 q = path.t[i + 1] <= S ? path.x[i + 1] : path.eval(S);
        // ||p + v tau||^2 < r2 on a sub-interval of [0, len].
        const double len = t1 - t0;
        const Vec2 v = (q - p) * (1.0 / len);
        const double c2 = v.norm2();
        const double c0 = p.norm2() - r2;
        if (c2 == 0.0) {
            if (c0 < 0.0) total += len;
            continue;
        }
        const double c1 = 2.0 * p.dot(v);
        const double disc = c1 * c1 - 4.0 * c2 * c0;
        if (disc <= 0.0) continue;  // never strictly inside
        const double sq = std::sqrt(disc);
        const double lo = std::max(0.0, (-c1 - sq) / (2.0 * c2));
        const double hi = std::min(len, (-c1 + sq) / (2.0 * c2));
        if (hi > lo) total += hi - lo;
    }
    return total;
}

namespace {

void accumulate_mean_ci(const std::vector<double>& xs, double z, double& mean, double& ci) {
    const std::size_t n = xs.size();
    if (n == 0) {
        mean = ci = 0.0;
        return;
    }
    double s = 0.0;
    for (double x : xs) s += x;
    mean = s / static_cast<double>(n);
    if (n < 2) {
        ci = 0.0;
        return;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(n - 1);
    ci = z * std::sqrt(var / static_cast<double>(n));
}

double z_for_level(double level) {
    if (level >= 0.99) return 2.5758293035489004;
    if (level >= 0.95) return 1.959963984540054;
    return 1.6448536269514722;
}

}  // namespace

CrossingSummary crossing_stats(const std::vector<std::vector<CrossingRecord>>& replications,
                               double level) {
    if (replications.empty()) throw std::invalid_argument("crossing_stats: empty input");
    if (replications.size() < 2)
        throw std::invalid_argument("crossing_stats: need at least 2 replications");
    std::vector<double> ups, downs;
    std::size_t n_down_total = 0, n_escaped = 0;
    for (const auto& rep : replications) {
        for (const auto& r : rep) {
            if (r.up_duration) ups.push_back(*r.up_duration);
            if (r.down_duration) downs.push_back(*r.down_duration);
            if (r.down_duration || r.escaped) {
                ++n_down_total;
                if (r.escaped) ++n_escaped;
            }
        }
    }
    CrossingSummary s;
    s.level = level;
    const double z = z_for_level(level);
    s.n_up = ups.size();
    accumulate_mean_ci(ups, z, s.up_mean, s.up_ci);
    s.n_down = downs.size();
    accumulate_mean_ci(downs, z, s.down_mean, s.down_ci);
    s.n_down_total = n_down_total;
    s.n_escaped = n_escaped;
    if (n_down_total > 0) {
        const double p = static_cast<double>(n_escaped) / static_cast<double>(n_down_total);
        s.escape_freq = p;
        s.escape_ci = z * std::sqrt(p * (1.0 - p) / static_cast<double>(n_down_total));
    }
    return s;
}

LatticeCrossingReducer::LatticeCrossingReducer(std::int64_t n, double eps, double c,
                                               double r_escape) {
    if (!(c > 1.0)) throw std::invalid_argument("LatticeCrossingReducer: need c > 1");
    const double nd = static_cast<double>(n);
    eps2n_ = eps * eps * nd;
    ceps2n_ = c * eps * c * eps * nd;
    resc2n_ = r_escape * r_escape * nd;
}

void LatticeCrossingReducer::on_hold(double t_from, double t_to, std::array<std::int64_t, 2> x) {
    const double r2 = static_cast<double>(x[0] * x[0] + x[1] * x[1]);
    if (waiting_down_) {
        if (tracking_down_) {
            // Inside the downcrossing episode of the latest closed upcrossing.
            if (x[0] == 0 && x[1] == 0) origin_in_down_ += t_to - t_from;
            if (r2 >= resc2n_) escaped_ = true;
        }
        if (r2 <= eps2n_) {
            if (tracking_down_) {
                auto& prev = records_.back();
                prev.down_duration = t_from - *prev.gamma_up;
                prev.escaped = escaped_;
                max_origin_in_down_ = std::max(max_origin_in_down_, origin_in_down_);
                tracking_down_ = false;
            }
            CrossingRecord rec;
            rec.k = k_;
            rec.gamma_prev = gamma_prev_;
            rec.gamma_down = t_from;
            records_.push_back(rec);
            waiting_down_ = false;
        }
    } else if (r2 >= ceps2n_) {
        auto& rec = records_.back();
        rec.gamma_up = t_from;
        rec.up_duration = t_from - rec.gamma_down;
        gamma_prev_ = t_from;
        ++k_;
        waiting_down_ = true;
        tracking_down_ = true;
        escaped_ = false;
        origin_in_down_ = 0.0;
    }
}

void LatticeCrossingReducer::finish(double S) {
    (void)S;
    // An episode truncated at the horizon still resolves {eta < tau} when the
    // escape radius was reached.
    if (tracking_down_ && escaped_ && !records_.empty()) records_.back().escaped = true;
}

}  // namespace qprbm
