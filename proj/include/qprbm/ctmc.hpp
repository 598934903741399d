#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "qprbm/geometry.hpp"
#include "qprbm/path.hpp"
#include "qprbm/rng.hpp"
#include "qprbm/vec2.hpp"

namespace qprbm {

enum class Construction {
    Thinning,      // Poisson random measures with uniform marks
    MarkedClocks,  // six independent Poisson clocks gated by the boundary
};

// Driving clocks. Thinning uses A1, A2 and the two D-measures (with marks);
// marked-clocks uses all six.
enum class Clock : std::uint8_t {
    A1 = 0,  // arrivals, coordinate 1
    A2 = 1,
    D1 = 2,  // interior service, coordinate 1
    D2 = 3,
    B1 = 4,  // boosted service (active on the opposite face)
    B2 = 5,
};

enum class Jump : std::int8_t {
    UpE1 = 0,
    DownE1 = 1,
    UpE2 = 2,
    DownE2 = 3,
    None = 4,  // clock fired while its indicator was off
};

struct Event {
    double t;
    Jump jump;
    Clock clock;
};

using LatticePoint = std::array<std::int64_t, 2>;

// Exact event log of one trajectory. `events` keeps every clock firing in
// time order, including gated-off firings (Jump::None) under marked-clocks
// and rejected marks under thinning, so compensator-level decompositions can
// be evaluated at every breakpoint.
struct PathRecord {
    std::int64_t n = 0;
    LatticePoint x0{};
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::uint32_t replication = 0;
    Construction construction = Construction::MarkedClocks;
    RateFamily family;
    LevelRates rates;
    std::vector<Event> events;
    std::array<std::uint64_t, 6> clock_counts{};

    LatticePoint state_at(double t) const;  // replays jumps
};

// Region of a lattice state: interior, F1 (x1 == 0 < x2), F2, or the origin.
enum class Region : std::uint8_t { Interior, F1, F2, Origin };
inline Region region_of(LatticePoint x) {
    if (x[0] > 0 && x[1] > 0) return Region::Interior;
    if (x[0] == 0 && x[1] > 0) return Region::F1;
    if (x[1] == 0 && x[0] > 0) return Region::F2;
    return Region::Origin;
}

// Streaming simulation. The visitor sees every holding interval and every
// clock firing:
//   v.on_hold(t_from, t_to, x)                        constant span
//   v.on_fire(t, x_before, clock, jump, x_after)      clock firing
//   v.on_finish(horizon, x_final)
// Per-clock randomness comes from streams keyed by (seed, replication, clock).
template <class Visitor>
void simulate_visit(const LevelRates& lr, LatticePoint x0, double S, std::uint64_t seed,
                    std::uint32_t replication, Construction construction, Visitor&& v);

PathRecord simulate(const RateFamily& params, std::int64_t n, LatticePoint x0, double S,
                    std::uint64_t seed, std::uint32_t replication = 0,
                    Construction construction = Construction::MarkedClocks);

// Diffusive rescaling: piecewise-constant path of n^{-1/2} X^n, values
// recomputed from the integer lattice states at every breakpoint.
CadlagPath rescale(const PathRecord& rec);

struct OccupationTimes {
    double t = 0.0;
    double t0 = 0.0;    // time at the origin
    double t1 = 0.0;    // time on F1
    double t2 = 0.0;    // time on F2
    double tint = 0.0;  // time in the interior
};

OccupationTimes occupation(const PathRecord& rec, double t);

// Exact semimartingale decomposition (hat processes) on the event
// breakpoints. xhat = yhat + rhat holds at every breakpoint.
struct Decomposition {
    std::vector<double> t;
    std::vector<Vec2> xhat, ahat, dhat, yhat, rhat;

    double max_reconstruction_residual() const;
};
Decomposition decompose(const PathRecord& rec);

// Variant built from the interior-service clock alone (marked-clocks only):
// xhat = yring + mring + rhat at every breakpoint.
struct RingDecomposition {
    std::vector<double> t;
    std::vector<Vec2> xhat, dring, mring, yring, rhat;

    double max_reconstruction_residual() const;
    // Quadratic variation of mring over [s, t] (sum of squared jumps).
    Vec2 mring_quadratic_variation(double s, double t) const;
};
RingDecomposition ring_decompose(const PathRecord& rec);

// Residual of the exact boundary-time identity
//   (1 - b1 - b2) T12(t) - (b1 + b2) T0(t) + h.Xbar(t) - h.Ybar(t) = 0,
// with b_i = mu_i^n/(mu_i^n + nu_i^n), h = (1/zeta_1, 1/zeta_2),
// zeta_i = (mu_i^n + nu_i^n)/n, Xbar = n^{-1/2} Xhat, Ybar = n^{-1/2} Yhat.
double boundary_identity_residual(const PathRecord& rec, double t);

// JSONL: header record, then one record per clock firing, then a trailer with
// the clock counts.
void write_jsonl(const PathRecord& rec, std::ostream& os);
PathRecord read_record_jsonl(std::istream& is);

// ---------------------------------------------------------------------------

namespace detail {

template <class Visitor>
void run_ctmc(const LevelRates& lr, LatticePoint x0, double S, std::uint64_t seed,
              std::uint32_t replication, Construction construction, Visitor& v) {
    const double env1 = lr.mu.x1 + lr.nu.x1;
    const double env2 = lr.mu.x2 + lr.nu.x2;
    // Clock rates; thinning drives the D-measures at their envelope rate and
    // thins with a uniform mark.
    double rate[6];
    int nclocks;
    if (construction == Construction::Thinning) {
        rate[0] = lr.lambda.x1;
        rate[1] = lr.lambda.x2;
        rate[2] = env1;
        rate[3] = env2;
        nclocks = 4;
    } else {
        rate[0] = lr.lambda.x1;
        rate[1] = lr.lambda.x2;
        rate[2] = lr.mu.x1;
        rate[3] = lr.mu.x2;
        rate[4] = env1;
        rate[5] = env2;
        nclocks = 6;
    }
    Rng rng[6] = {Rng(seed, replication, 0), Rng(seed, replication, 1),
                  Rng(seed, replication, 2), Rng(seed, replication, 3),
                  Rng(seed, replication, 4), Rng(seed, replication, 5)};

    LatticePoint x = x0;
    double t = 0.0;
    while (true) {
        // Fresh exponential per clock after every event (memorylessness).
        int win = 0;
        double hold = rng[0].exponential(rate[0]);
        for (int c = 1; c < nclocks; ++c) {
            const double h = rng[c].exponential(rate[c]);
            if (h < hold) {
                hold = h;
                win = c;
            }
        }
        const double tn = t + hold;
        if (tn > S) {
            v.on_hold(t, S, x);
            break;
        }
        v.on_hold(t, tn, x);
        t = tn;

        const Region reg = region_of(x);
        Jump jump = Jump::None;
        Clock clock;
        if (construction == Construction::Thinning) {
            clock = static_cast<Clock>(win);
            switch (win) {
                case 0: jump = Jump::UpE1; break;
                case 1: jump = Jump::UpE2; break;
                case 2: {
                    // Accept iff the mark falls under the state-dependent
                    // intensity of the D1 measure.
                    const double z = rng[2].uniform() * env1;
                    if ((reg == Region::Interior && z <= lr.mu.x1) || reg == Region::F2)
                        jump = Jump::DownE1;
                    break;
                }
                case 3: {
                    const double z = rng[3].uniform() * env2;
                    if ((reg == Region::Interior && z <= lr.mu.x2) || reg == Region::F1)
                        jump = Jump::DownE2;
                    break;
                }
            }
        } else {
            clock = static_cast<Clock>(win);
            switch (win) {
                case 0: jump = Jump::UpE1; break;
                case 1: jump = Jump::UpE2; break;
                case 2:
                    if (reg == Region::Interior) jump = Jump::DownE1;
                    break;
                case 3:
                    if (reg == Region::Interior) jump = Jump::DownE2;
                    break;
                case 4:
                    if (reg == Region::F2) jump = Jump::DownE1;
                    break;
                case 5:
                    if (reg == Region::F1) jump = Jump::DownE2;
                    break;
            }
        }
        const LatticePoint before = x;
        switch (jump) {
            case Jump::UpE1: ++x[0]; break;
            case Jump::DownE1: --x[0]; break;
            case Jump::UpE2: ++x[1]; break;
            case Jump::DownE2: --x[1]; break;
            case Jump::None: break;
        }
        v.on_fire(t, before, clock, jump, x);
        if constexpr (requires { v.done(); }) {
            if (v.done()) {
                v.on_finish(t, x);
                return;
            }
        }
    }
    v.on_finish(S, x);
}

}  // namespace detail

template <class Visitor>
void simulate_visit(const LevelRates& lr, LatticePoint x0, double S, std::uint64_t seed,
                    std::uint32_t replication, Construction construction, Visitor&& v) {
    if (!(S > 0.0)) throw std::invalid_argument("simulate: horizon must be positive");
    if (x0[0] < 0 || x0[1] < 0)
        throw std::invalid_argument("simulate: initial state must lie in Z_+^2");
    detail::run_ctmc(lr, x0, S, seed, replication, construction, v);
}

}  // namespace qprbm
