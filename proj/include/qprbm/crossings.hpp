#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qprbm/path.hpp"

namespace qprbm {

// One upcrossing/downcrossing episode of the path radius:
//   gamma_down = gamma_{2k}   (radius first <= eps after gamma_{2k-1}),
//   gamma_up   = gamma_{2k+1} (radius first >= c*eps after gamma_{2k}),
// and the downcrossing that follows, gamma_{2k+2} - gamma_{2k+1}.
struct CrossingRecord {
    std::int64_t k = 0;
    double gamma_prev = 0.0;  // gamma_{2k-1} (0 for k = 0)
    double gamma_down = 0.0;
    std::optional<double> gamma_up;
    std::optional<double> up_duration;
    std::optional<double> down_duration;
    bool escaped = false;  // downcrossing reached r_escape before eps
};

// Alternating first-passage times of ||path(t)|| to [0, eps] and [c*eps, inf),
// truncated at S; exact on segments and steps. Requires c > 1.
std::vector<CrossingRecord> crossing_sequence(const CadlagPath& path, double eps, double c,
                                              double S, double r_escape = 1.0);

// Lebesgue time with ||path(t)|| < eps over [0, S]; exact per segment/step.
double time_in_ball(const CadlagPath& path, double eps, double S);

struct CrossingSummary {
    std::size_t n_up = 0;
    double up_mean = 0.0, up_ci = 0.0;  // normal-approximation half width
    std::size_t n_down = 0;
    double down_mean = 0.0, down_ci = 0.0;
    std::size_t n_down_total = 0;  // downcrossings with known escape outcome
    std::size_t n_escaped = 0;
    double escape_freq = 0.0, escape_ci = 0.0;

    double level = 0.95;
};

// Pooled estimates over replications. Requires at least 2 replications.
CrossingSummary crossing_stats(const std::vector<std::vector<CrossingRecord>>& replications,
                               double level = 0.95);

// Streaming crossing detector over integer lattice states (exact radius
// comparisons via x1^2 + x2^2 against eps^2 * n). Feed holding intervals via
// on_hold; jumps change state at the interval ends.
class LatticeCrossingReducer {
  public:
    LatticeCrossingReducer(std::int64_t n, double eps, double c, double r_escape);

    void on_hold(double t_from, double t_to, std::array<std::int64_t, 2> x);
    void finish(double S);

    const std::vector<CrossingRecord>& records() const { return records_; }
    // Time the origin-occupation clock accumulated inside each downcrossing
    // (must stay zero: the walk cannot reach 0 without crossing eps).
    double max_origin_time_in_downcrossing() const { return max_origin_in_down_; }

  private:
    double eps2n_, ceps2n_, resc2n_;
    bool waiting_down_ = true;   // looking for radius <= eps
    bool tracking_down_ = false; // a downcrossing episode is open
    double gamma_prev_ = 0.0;
    std::int64_t k_ = 0;
    bool escaped_ = false;
    double origin_in_down_ = 0.0;
    double max_origin_in_down_ = 0.0;
    std::vector<CrossingRecord> records_;
};

}  // namespace qprbm
