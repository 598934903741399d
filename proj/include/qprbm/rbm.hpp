#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "qprbm/ctmc.hpp"
#include "qprbm/geometry.hpp"
#include "qprbm/path.hpp"
#include "qprbm/skorohod.hpp"
#include "qprbm/vec2.hpp"

namespace qprbm {

struct BMGrid {
    double dt = 1e-4;
    double horizon = 1.0;
    Vec2 b;      // drift
    Vec2 sigma;  // componentwise standard deviations

    std::int64_t steps() const;  // throws unless horizon/dt is integral
};

// Piecewise-linear sample of a (b, Sigma)-BM started at `start`.
CadlagPath bm_sample(const BMGrid& grid, Vec2 start, std::uint64_t seed,
                     std::uint32_t replication = 0);

// Lambda^eps applied to x0 + W for a fresh (b, Sigma)-BM W: samples the
// submartingale-problem process stopped on reaching the ball of radius
// c0*eps (equality in law for zero drift; used as the sampling definition
// when b != 0).
ReflectedPath rbm_quarter_stopped(Vec2 x0, double eps, double c0, const LimitData& limit,
                                  const BMGrid& grid, std::uint64_t seed,
                                  std::uint32_t replication = 0);

// Quadratic test function of the upcrossing bound (symmetric rate family):
//   Psi(x) = a0^2 - (x1^2/l1 + x2^2/l2 + 2 A x1 x2 (l1 l2)^{-1/2}),
//   a0 = eps (l1 ^ l2)^{-1/2},  A = (nu1 v nu2)(l1 l2)^{-1/2}.
double psi_value(Vec2 x, double eps, const RateFamily& params);

// Discrete generator of the rescaled walk applied to f at the lattice point
// x_int/sqrt(n) (forward/backward differences over the level rates).
double discrete_generator(const std::function<double(Vec2)>& f, LatticePoint x_int,
                          const LevelRates& rates);

// Which face angle attaches to the polar axis theta = 0 in the phase of Phi.
// The F2 convention makes the derivative along d*^(i) vanish on both faces.
enum class PhiPhase { FaceTheta2, FaceTheta1 };

// Harmonic test function Phi(y) = ||y||^{alpha*} cos(alpha* theta - phase),
// theta in [0, pi/2] the polar angle of y. Throws for y = 0.
double phi_value(Vec2 y, const LimitData& limit, PhiPhase phase = PhiPhase::FaceTheta2);

struct LemmaR1Constants {
    double c = 0.0;       // smallest c > 1 with kappa3 c^{a*} (s1 ^ s2)^{a*} >= 2
    double kappa2 = 0.0;  // cos(|theta*_1| v |theta*_2|)
    double kappa3 = 0.0;  // kappa2 (s1 v s2)^{-a*}
};
LemmaR1Constants lemma_r1_constants(const LimitData& limit);

struct HittingTimes {
    std::optional<double> tau;  // first entrance to the closed inner ball
    std::optional<double> eta;  // first exit from the open outer ball
};

// Exact first-passage times of the path radius; segment-circle intersections
// for piecewise-linear paths. inner < outer required.
HittingTimes hitting_times(const CadlagPath& path, double inner_radius, double outer_radius);

}  // namespace qprbm
