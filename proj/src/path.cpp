#include "qprbm/path.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace qprbm {

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) {
    return (a.x1 - o.x1) * (b.x2 - o.x2) - (a.x2 - o.x2) * (b.x1 - o.x1);
}

// Convex hull (monotone chain), then rotating calipers. Small sets are done
// pairwise.
double diameter(std::vector<Vec2> pts) {
    if (pts.size() < 2) return 0.0;
    if (pts.size() <= 128) {
        double best = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                best = std::max(best, (pts[i] - pts[j]).norm2());
        return std::sqrt(best);
    }
    std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
        return a.x1 < b.x1 || (a.x1 == b.x1 && a.x2 < b.x2);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n < 2) return 0.0;
    std::vector<Vec2> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    const std::size_t h = hull.size();
    if (h == 1) return 0.0;
    if (h == 2) return dist(hull[0], hull[1]);
    double best = 0.0;
    std::size_t j = 1;
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t ni = (i + 1) % h;
        while (std::abs(cross(hull[i], hull[ni], hull[(j + 1) % h])) >
               std::abs(cross(hull[i], hull[ni], hull[j]))) {
            j = (j + 1) % h;
        }
        best = std::max({best, (hull[i] - hull[j]).norm2(), (hull[ni] - hull[j]).norm2()});
    }
    return std::sqrt(best);
}

}  // namespace

CadlagPath CadlagPath::constant(Vec2 value, double horizon) {
    CadlagPath p;
    p.kind = PathKind::Step;
    p.horizon = horizon;
    if (horizon > 0.0) {
        p.t = {0.0, horizon};
        p.x = {value, value};
    } else {
        p.t = {0.0};
        p.x = {value};
    }
    return p;
}

void CadlagPath::validate() const {
    if (t.empty() || t.size() != x.size())
        throw std::invalid_argument("CadlagPath: empty or mismatched breakpoint lists");
    if (t.front() != 0.0) throw std::invalid_argument("CadlagPath: breakpoints must start at 0");
    if (t.back() != horizon)
        throw std::invalid_argument("CadlagPath: breakpoints must end at the horizon");
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (!(t[k] > t[k - 1]))
            throw std::invalid_argument("CadlagPath: breakpoints must be strictly increasing");
    }
}

std::size_t CadlagPath::index_at(double time) const {
    auto it = std::upper_bound(t.begin(), t.end(), time);
    return static_cast<std::size_t>(it - t.begin()) - 1;
}

Vec2 CadlagPath::eval(double time) const {
    if (!(time >= 0.0 && time <= horizon))
        throw std::out_of_range("CadlagPath::eval: time outside [0, horizon]");
    const std::size_t k = index_at(time);
    if (kind == PathKind::Step || k + 1 == t.size() || time == t[k]) return x[k];
    const double w = (time - t[k]) / (t[k + 1] - t[k]);
    return x[k] + (x[k + 1] - x[k]) * w;
}

double osc(const CadlagPath& p, double s, double t) {
    if (!(0.0 <= s && s <= t && t <= p.horizon))
        throw std::invalid_argument("osc: malformed interval");
    std::vector<Vec2> pts;
    pts.push_back(p.eval(s));
    pts.push_back(p.eval(t));
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        if (p.t[k] > s && p.t[k] < t) pts.push_back(p.x[k]);
        if (p.kind == PathKind::Step && p.t[k] == t && k > 0) pts.push_back(p.x[k]);
    }
    return diameter(std::move(pts));
}

double modulus(const CadlagPath& p, double S, double delta) {
    if (!(0.0 <= delta && delta <= S && S <= p.horizon))
        throw std::invalid_argument("modulus: need 0 <= delta <= S <= horizon");
    if (delta == 0.0 && p.kind == PathKind::Linear) return 0.0;
    // Candidates: breakpoint pairs within delta, plus each breakpoint against
    // the evaluated window edges t_k +- delta. Exact for Step and Linear paths.
    std::vector<std::pair<double, Vec2>> pv;
    for (std::size_t k = 0; k < p.t.size() && p.t[k] <= S; ++k) pv.emplace_back(p.t[k], p.x[k]);
    if (pv.empty() || pv.back().first < S) pv.emplace_back(S, p.eval(S));
    double best = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        for (std::size_t j = i; j < pv.size(); ++j) {
            if (pv[j].first - pv[i].first > delta) break;
            best = std::max(best, (pv[i].second - pv[j].second).norm2());
        }
        const double lo = std::max(0.0, pv[i].first - delta);
        const double hi = std::min(S, pv[i].first + delta);
        best = std::max(best, (pv[i].second - p.eval(lo)).norm2());
        best = std::max(best, (pv[i].second - p.eval(hi)).norm2());
    }
    return std::sqrt(best);
}

double sup_norm(const CadlagPath& p, double S) {
    if (!(0.0 <= S && S <= p.horizon)) throw std::invalid_argument("sup_norm: S out of range");
    double best = p.eval(S).norm2();
    for (std::size_t k = 0; k < p.t.size() && p.t[k] <= S; ++k)
        best = std::max(best, p.x[k].norm2());
    return std::sqrt(best);
}

double total_variation(const CadlagPath& p, double t) {
    if (!(0.0 <= t && t <= p.horizon)) throw std::invalid_argument("total_variation: t out of range");
    double tv = 0.0;
    if (p.kind == PathKind::Step) {
        for (std::size_t k = 1; k < p.t.size() && p.t[k] <= t; ++k)
            tv += (p.x[k] - p.x[k - 1]).norm();
    } else {
        for (std::size_t k = 1; k < p.t.size() && p.t[k] <= t; ++k)
            tv += (p.x[k] - p.x[k - 1]).norm();
        const std::size_t m = p.index_at(t);
        if (m + 1 < p.t.size() && t > p.t[m]) tv += (p.eval(t) - p.x[m]).norm();
    }
    return tv;
}

void write_jsonl(const CadlagPath& p, std::ostream& os) {
    nlohmann::json header;
    header["kind"] = p.kind == PathKind::Step ? "step" : "linear";
    header["horizon"] = p.horizon;
    os << header.dump() << '\n';
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        nlohmann::json rec;
        rec["t"] = p.t[k];
        rec["x1"] = p.x[k].x1;
        rec["x2"] = p.x[k].x2;
        os << rec.dump() << '\n';
    }
}

CadlagPath read_path_jsonl(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("path jsonl: missing header");
    const auto header = nlohmann::json::parse(line);
    CadlagPath p;
    const std::string kind = header.at("kind").get<std::string>();
    if (kind == "step") {
        p.kind = PathKind::Step;
    } else if (kind == "linear") {
        p.kind = PathKind::Linear;
    } else {
        throw std::invalid_argument("path jsonl: unknown kind '" + kind + "'");
    }
    p.horizon = header.at("horizon").get<double>();
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto rec = nlohmann::json::parse(line);
        p.t.push_back(rec.at("t").get<double>());
        p.x.push_back({rec.at("x1").get<double>(), rec.at("x2").get<double>()});
    }
    p.validate();
    return p;
}

}  // namespace qprbm
