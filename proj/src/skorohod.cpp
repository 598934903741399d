#include "qprbm/skorohod.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "qprbm/lambda_eps.hpp"

namespace qprbm {

double ScalarPath::eval(double time) const {
    if (!(time >= 0.0 && time <= horizon))
        throw std::out_of_range("ScalarPath::eval: time outside [0, horizon]");
    auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    if (kind == PathKind::Step || k + 1 == t.size() || time == t[k]) return v[k];
    const double w = (time - t[k]) / (t[k + 1] - t[k]);
    return v[k] + (v[k + 1] - v[k]) * w;
}

ScalarReflection gamma_half_line(const ScalarPath& psi) {
    if (psi.t.empty() || psi.t.size() != psi.v.size())
        throw std::invalid_argument("gamma_half_line: malformed path");
    if (!(psi.v.front() >= 0.0))
        throw std::invalid_argument("gamma_half_line: psi(0) must be nonnegative");

    ScalarReflection out;
    out.phi.kind = out.eta.kind = psi.kind;
    out.phi.horizon = out.eta.horizon = psi.horizon;
    auto push = [&](double time, double p, double e) {
        out.phi.t.push_back(time);
        out.phi.v.push_back(p);
        out.eta.t.push_back(time);
        out.eta.v.push_back(e);
    };

    double ell = 0.0;
    if (psi.kind == PathKind::Step) {
        for (std::size_t k = 0; k < psi.t.size(); ++k) {
            ell = std::max(ell, -psi.v[k]);
            push(psi.t[k], psi.v[k] + ell, ell);
        }
        return out;
    }
    push(psi.t[0], psi.v[0], 0.0);
    for (std::size_t k = 1; k < psi.t.size(); ++k) {
        const double ta = psi.t[k - 1], tb = psi.t[k];
        const double va = psi.v[k - 1], vb = psi.v[k];
        if (vb < -ell) {
            if (va > -ell) {
                // Pushing resumes where psi meets its running minimum.
                const double ts = ta + (tb - ta) * ((-ell - va) / (vb - va));
                if (ts > ta && ts < tb) push(ts, 0.0, ell);
            }
            ell = -vb;
            push(tb, 0.0, ell);
        } else {
            push(tb, vb + ell, ell);
        }
    }
    return out;
}

PlanarReflection gamma_half_plane(Vec2 h, Axis axis, const CadlagPath& psi) {
    psi.validate();
    const int c = static_cast<int>(axis);
    if (!(h.comp(c) > 0.0))
        throw std::invalid_argument(
            "gamma_half_plane: direction must have a positive normal component");
    if (!(psi.x.front().comp(c) >= 0.0))
        throw std::invalid_argument("gamma_half_plane: path must start in the half plane");

    ScalarPath s;
    s.kind = psi.kind;
    s.horizon = psi.horizon;
    s.t = psi.t;
    s.v.reserve(psi.x.size());
    for (const Vec2& p : psi.x) s.v.push_back(p.comp(c));
    const ScalarReflection sr = gamma_half_line(s);

    // The scalar map may have inserted breakpoints; rebuild the planar paths
    // on its breakpoint list. eta = h * eta_c / h_c.
    const double ratio = h.comp(1 - c) / h.comp(c);
    PlanarReflection out;
    out.phi.kind = out.eta.kind = psi.kind;
    out.phi.horizon = out.eta.horizon = psi.horizon;
    out.phi.t = sr.phi.t;
    out.eta.t = sr.phi.t;
    out.phi.x.resize(sr.phi.t.size());
    out.eta.x.resize(sr.phi.t.size());
    for (std::size_t k = 0; k < sr.phi.t.size(); ++k) {
        const double e = sr.eta.v[k];
        const Vec2 base = psi.eval(sr.phi.t[k]);
        Vec2 eta_vec, phi_vec;
        eta_vec.set_comp(c, e);
        eta_vec.set_comp(1 - c, ratio * e);
        phi_vec.set_comp(c, sr.phi.v[k]);
        phi_vec.set_comp(1 - c, base.comp(1 - c) + ratio * e);
        out.eta.x[k] = eta_vec;
        out.phi.x[k] = phi_vec;
    }
    return out;
}

ReflectedPath lambda_eps(const CadlagPath& f, double eps, double c0, Vec2 d1, Vec2 d2,
                         std::int64_t switch_budget) {
    f.validate();
    LambdaEpsEngine eng(f.kind, f.x.front(), eps, c0, d1, d2, switch_budget);
    if (f.kind == PathKind::Step) {
        for (std::size_t k = 1; k < f.x.size(); ++k) {
            const double jump = (f.x[k] - f.x[k - 1]).norm();
            if (jump > eng.jump_bound())
                throw std::invalid_argument(
                    "lambda_eps: jump size exceeds c0*eps/4 precondition");
        }
    }

    ReflectedPath rp;
    rp.path.kind = rp.pushing.kind = f.kind;
    rp.path.horizon = rp.pushing.horizon = f.horizon;
    rp.path.t = {0.0};
    rp.path.x = {f.x.front()};
    rp.pushing.t = {0.0};
    rp.pushing.x = {Vec2{}};

    std::size_t seg = 1;  // current input segment [t[seg-1], t[seg]]
    auto f_at = [&](double tt) -> Vec2 {
        if (f.kind == PathKind::Step) return tt < f.t[seg] ? f.x[seg - 1] : f.x[seg];
        if (tt >= f.t[seg]) return f.x[seg];
        const double w = (tt - f.t[seg - 1]) / (f.t[seg] - f.t[seg - 1]);
        return f.x[seg - 1] + (f.x[seg] - f.x[seg - 1]) * w;
    };

    bool frozen = false;  // pushing no longer tracked after absorption
    Vec2 frozen_eta{};
    auto sink = [&](const GPiece& p) {
        const bool jump = p.t1 == p.t0;
        if (!jump && !(p.t1 > rp.path.t.back())) return;
        const Vec2 eta = frozen ? frozen_eta : p.b - f_at(p.t1);
        if (rp.path.t.back() == p.t1) {
            rp.path.x.back() = p.b;
            rp.pushing.x.back() = eta;
        } else {
            rp.path.t.push_back(p.t1);
            rp.path.x.push_back(p.b);
            rp.pushing.t.push_back(p.t1);
            rp.pushing.x.push_back(eta);
        }
        if (eng.absorbed() && !frozen) {
            frozen = true;
            // Freeze the pushing at its value as of the absorption instant.
            const double ta = eng.absorption_time();
            frozen_eta = rp.pushing.x.back();
            for (std::size_t i = rp.pushing.t.size(); i-- > 0;) {
                if (rp.pushing.t[i] == ta) {
                    frozen_eta = rp.pushing.x[i];
                    break;
                }
                if (rp.pushing.t[i] < ta) break;
            }
            if (rp.pushing.t.back() > ta) rp.pushing.x.back() = frozen_eta;
        }
    };

    for (seg = 1; seg < f.t.size(); ++seg) eng.extend(f.t[seg], f.x[seg], sink);
    if (rp.path.t.back() < f.horizon) {
        rp.path.t.push_back(f.horizon);
        rp.path.x.push_back(eng.g());
        rp.pushing.t.push_back(f.horizon);
        rp.pushing.x.push_back(frozen ? frozen_eta : eng.g() - f.x.back());
    }
    rp.switch_times = eng.switch_times();
    rp.faces = eng.faces();
    if (eng.absorbed()) {
        rp.absorption_time = eng.absorption_time();
        rp.absorption_point = eng.absorption_point();
    }
    return rp;
}

void write_jsonl(const ReflectedPath& rp, std::ostream& os) {
    nlohmann::json header;
    header["sections"] = {"path", "pushing", "trailer"};
    os << header.dump() << '\n';
    write_jsonl(rp.path, os);
    write_jsonl(rp.pushing, os);
    nlohmann::json trailer;
    trailer["switch_times"] = rp.switch_times;
    trailer["faces"] = rp.faces;
    if (rp.absorption_time) {
        trailer["absorption_time"] = *rp.absorption_time;
        trailer["absorption_point"] = {rp.absorption_point->x1, rp.absorption_point->x2};
    }
    os << trailer.dump() << '\n';
}

}  // namespace qprbm
