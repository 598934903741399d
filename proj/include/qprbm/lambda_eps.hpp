#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qprbm/path.hpp"
#include "qprbm/vec2.hpp"

namespace qprbm {

// One linear span of the reflected path g on [t0, t1]. A zero-length span
// (t0 == t1, a != b) marks a jump of a step path.
struct GPiece {
    double t0, t1;
    Vec2 a, b;
};

// Incremental engine for the alternating reflection/absorption construction.
// Input breakpoints are fed one at a time; the constrained path is emitted as
// exact linear spans, so consumers (hitting-time detectors, collectors) never
// see a discretization of g beyond the one of the input.
//
// Faces activate in strictly alternating order. Every activated map stays in
// the composition afterwards: the pushing of an earlier face resumes whenever
// its own input coordinate reaches a new running minimum.
class LambdaEpsEngine {
  public:
    LambdaEpsEngine(PathKind kind, Vec2 f0, double eps, double c0, Vec2 d1, Vec2 d2,
                    std::int64_t switch_budget = 1000000)
        : kind_(kind),
          r2_(c0 * eps * c0 * eps),
          jump_bound_(c0 * eps / 4.0),
          budget_(switch_budget),
          t_cur_(0.0),
          f_cur_(f0),
          g_cur_(f0) {
        if (!(eps > 0.0) || !(c0 > 0.0 && c0 < 1.0))
            throw std::invalid_argument("lambda_eps: need eps > 0 and c0 in (0,1)");
        if (!(d1.x1 > 0.0) || !(d2.x2 > 0.0))
            throw std::invalid_argument("lambda_eps: reflection directions must point into S");
        if (!(f0.x1 >= 0.0 && f0.x2 >= 0.0))
            throw std::invalid_argument("lambda_eps: f(0) must lie in the quarter plane");
        if (!(f0.norm2() > r2_))
            throw std::invalid_argument("lambda_eps: need ||f(0)|| > c0*eps");
        push_[0] = Vec2{1.0, d1.x2 / d1.x1};
        push_[1] = Vec2{d2.x1 / d2.x2, 1.0};
    }

    double jump_bound() const { return jump_bound_; }

    // Advance to time t. Linear kind: f moves linearly to `value`. Step kind:
    // f holds its previous value on [t_cur, t) and jumps to `value` at t.
    template <class Sink>
    void extend(double t, Vec2 value, Sink&& sink) {
        if (!(t >= t_cur_)) throw std::invalid_argument("lambda_eps: time must not decrease");
        if (absorbed_) {
            if (t > t_cur_) sink(GPiece{t_cur_, t, g_cur_, g_cur_});
            t_cur_ = t;
            f_cur_ = value;
            return;
        }
        if (kind_ == PathKind::Linear) {
            process_linear(t, value, sink);
        } else {
            if (t > t_cur_) {
                sink(GPiece{t_cur_, t, g_cur_, g_cur_});
                t_cur_ = t;
            }
            if (!(value == f_cur_)) process_jump(value, sink);
        }
    }

    bool absorbed() const { return absorbed_; }
    double absorption_time() const { return absorb_t_; }
    Vec2 absorption_point() const { return absorb_x_; }
    Vec2 g() const { return g_cur_; }
    Vec2 f() const { return f_cur_; }
    double time() const { return t_cur_; }
    const std::vector<double>& switch_times() const { return switch_times_; }
    const std::vector<int>& faces() const { return faces_; }

  private:
    static Vec2 lerp(const GPiece& p, double t) {
        if (p.t1 == p.t0 || t == p.t1) return p.b;
        const double w = (t - p.t0) / (p.t1 - p.t0);
        return p.a + (p.b - p.a) * w;
    }

    // Push one input piece through every layer, updating `ells` (scratch or
    // committed) and filling `out` with the resulting spans of g.
    void run_chain(const GPiece& in, std::vector<double>& ells, std::vector<GPiece>& out) {
        out.clear();
        out.push_back(in);
        for (std::size_t li = 0; li < axes_.size(); ++li) {
            const int c = axes_[li];
            const Vec2 q = push_[c];
            double ell = ells[li];
            buf_.clear();
            for (const GPiece& p : out) {
                const double ia = p.a.comp(c);
                const double ib = p.b.comp(c);
                if (std::min(ia, ib) >= -ell) {
                    buf_.push_back({p.t0, p.t1, p.a + q * ell, p.b + q * ell});
                    continue;
                }
                if (ib <= ia) {
                    // Decreasing into new minima: flat part, then the pushing
                    // tracks -coordinate and the output coordinate sits at 0.
                    double ts = p.t0;
                    Vec2 vs = p.a;
                    if (ia > -ell) {
                        ts = p.t0 + (p.t1 - p.t0) * ((-ell - ia) / (ib - ia));
                        vs = lerp(p, ts);
                        Vec2 end = vs + q * ell;
                        end.set_comp(c, 0.0);
                        buf_.push_back({p.t0, ts, p.a + q * ell, end});
                    }
                    Vec2 oa = vs + q * std::max(ell, -vs.comp(c));
                    oa.set_comp(c, 0.0);
                    Vec2 ob = p.b + q * (-ib);
                    ob.set_comp(c, 0.0);
                    buf_.push_back({ts, p.t1, oa, ob});
                    ell = -ib;
                } else {
                    // Starts below the running minimum (jump landing): the
                    // pushing catches up at t0 and stays constant.
                    Vec2 oa = p.a + q * (-ia);
                    oa.set_comp(c, 0.0);
                    Vec2 ob = p.b + q * (-ia);
                    ob.set_comp(c, ib - ia);
                    buf_.push_back({p.t0, p.t1, oa, ob});
                    ell = -ia;
                }
            }
            ells[li] = ell;
            out.swap(buf_);
        }
    }

    // Earliest absorption time within a span: inf { t : ||g(t)||^2 <= r2 }.
    static std::optional<double> first_ball_entry(const GPiece& p, double r2) {
        const double c0 = p.a.norm2() - r2;
        if (c0 <= 0.0) return p.t0;
        if (p.t1 == p.t0) return std::nullopt;
        const Vec2 b = (p.b - p.a) * (1.0 / (p.t1 - p.t0));
        const double c2 = b.norm2();
        if (c2 == 0.0) return std::nullopt;
        const double c1 = 2.0 * p.a.dot(b);
        const double disc = c1 * c1 - 4.0 * c2 * c0;
        if (disc < 0.0) return std::nullopt;
        const double tau = (-c1 - std::sqrt(disc)) / (2.0 * c2);
        if (tau < 0.0 || tau > p.t1 - p.t0) return std::nullopt;
        return p.t0 + tau;
    }

    // Earliest time the coordinate crosses strictly below zero.
    static std::optional<double> first_negative(const GPiece& p, int c) {
        const double va = p.a.comp(c);
        const double vb = p.b.comp(c);
        if (va < 0.0) return p.t0;
        if (vb >= 0.0) return std::nullopt;
        if (p.t1 == p.t0) return p.t0;
        return p.t0 + (p.t1 - p.t0) * (va / (va - vb));
    }

    struct Event {
        double t;
        int type;  // 0 = absorption, 1 = face exit
        int face;
    };

    std::optional<Event> scan(const std::vector<GPiece>& pieces) const {
        const int top = axes_.empty() ? -1 : axes_.back();
        for (const GPiece& p : pieces) {
            std::optional<Event> best;
            if (auto ta = first_ball_entry(p, r2_)) best = Event{*ta, 0, -1};
            for (int c = 0; c < 2; ++c) {
                if (c == top) continue;
                if (auto tf = first_negative(p, c)) {
                    // Absorption wins exact ties (eta_N <= gamma_N).
                    if (!best || *tf < best->t) best = Event{*tf, 1, c};
                }
            }
            if (best) return best;
        }
        return std::nullopt;
    }

    void activate(double t, int axis) {
        if (!axes_.empty() && axes_.back() == axis)
            throw std::runtime_error("lambda_eps: face indices failed to alternate");
        if (static_cast<std::int64_t>(switch_times_.size()) >= budget_)
            throw std::runtime_error("lambda_eps: switch budget exceeded");
        axes_.push_back(axis);
        ells_.push_back(0.0);
        switch_times_.push_back(t);
        faces_.push_back(axis + 1);
    }

    void absorb(double t, Vec2 x) {
        absorbed_ = true;
        absorb_t_ = t;
        absorb_x_ = x;
        g_cur_ = x;
    }

    template <class Sink>
    void emit(const std::vector<GPiece>& pieces, Sink&& sink) {
        for (const GPiece& p : pieces) {
            if (p.t1 > p.t0 || !(p.a == p.b)) sink(p);
            g_cur_ = p.b;
        }
    }

    template <class Sink>
    void process_linear(double t1, Vec2 fb, Sink&& sink) {
        double t0 = t_cur_;
        Vec2 fa = f_cur_;
        while (true) {
            const GPiece in{t0, t1, fa, fb};
            scratch_ = ells_;
            run_chain(in, scratch_, out_);
            const auto ev = scan(out_);
            if (!ev) {
                ells_.swap(scratch_);
                emit(out_, sink);
                t_cur_ = t1;
                f_cur_ = fb;
                return;
            }
            const double te = ev->t;
            Vec2 fe = lerp(in, te);
            if (te > t0) {
                run_chain(GPiece{t0, te, fa, fe}, ells_, out_);
                emit(out_, sink);
            }
            t_cur_ = te;
            f_cur_ = fe;
            if (ev->type == 0) {
                absorb(te, g_cur_);
                if (t1 > te) sink(GPiece{te, t1, g_cur_, g_cur_});
                t_cur_ = t1;
                f_cur_ = fb;
                return;
            }
            activate(te, ev->face);
            if (te >= t1) return;
            t0 = te;
            fa = fe;
        }
    }

    template <class Sink>
    void process_jump(Vec2 w, Sink&& sink) {
        const Vec2 g_pre = g_cur_;
        f_cur_ = w;
        // Apply the existing composition to the post-jump value.
        Vec2 v = w;
        for (std::size_t li = 0; li < axes_.size(); ++li) {
            const int c = axes_[li];
            const double ell = std::max(ells_[li], -v.comp(c));
            ells_[li] = ell;
            Vec2 nv = v + push_[c] * ell;
            nv.set_comp(c, std::max(0.0, v.comp(c) + ell));
            v = nv;
        }
        // Absorption takes priority; a fresh map may expose the ball or the
        // other face at the same instant, hence the loop.
        int guard = 0;
        while (true) {
            if (v.norm2() <= r2_) {
                sink(GPiece{t_cur_, t_cur_, g_pre, v});
                absorb(t_cur_, v);
                return;
            }
            const int top = axes_.empty() ? -1 : axes_.back();
            int neg = -1;
            if (top != 0 && v.x1 < 0.0) neg = 0;
            if (top != 1 && v.x2 < 0.0) neg = 1;
            if (neg < 0) break;
            activate(t_cur_, neg);
            ells_.back() = -v.comp(neg);
            Vec2 nv = v + push_[neg] * ells_.back();
            nv.set_comp(neg, 0.0);
            v = nv;
            if (++guard > 4)
                throw std::runtime_error("lambda_eps: jump reflection failed to settle");
        }
        sink(GPiece{t_cur_, t_cur_, g_pre, v});
        g_cur_ = v;
    }

    PathKind kind_;
    double r2_, jump_bound_;
    Vec2 push_[2];
    std::int64_t budget_;
    std::vector<int> axes_;
    std::vector<double> ells_;
    std::vector<double> scratch_;
    std::vector<GPiece> out_, buf_;
    std::vector<double> switch_times_;
    std::vector<int> faces_;
    double t_cur_;
    Vec2 f_cur_, g_cur_;
    bool absorbed_ = false;
    double absorb_t_ = 0.0;
    Vec2 absorb_x_;
};

}  // namespace qprbm
