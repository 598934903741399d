#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qprbm/vec2.hpp"

namespace qprbm {

// Base rates and their first-order perturbations. At scaling level n the
// model runs with lambda_n = n*lambda + sqrt(n)*hat_lambda (and likewise for
// mu, nu), so the rescaled deviations are n-independent by construction.
struct RateFamily {
    Vec2 lambda;      // arrival rates
    Vec2 mu;          // interior service rates
    Vec2 nu;          // boundary boost rates
    Vec2 hat_lambda;  // perturbations
    Vec2 hat_mu;
    Vec2 hat_nu;

    bool symmetric() const {
        return hat_lambda == Vec2{} && hat_mu == Vec2{} && hat_nu == Vec2{};
    }
};

struct LevelRates {
    std::int64_t n = 0;
    Vec2 lambda;
    Vec2 mu;
    Vec2 nu;
};

// Data of the limiting reflected diffusion.
struct LimitData {
    Vec2 b;             // drift: b_i = hat_lambda_i - hat_mu_i
    Vec2 sigma;         // diagonal of Sigma: sigma_i = sqrt(2 mu_i)
    Vec2 d1, d2;        // reflection directions on F1, F2
    Vec2 theta;         // face angles of d^(i), positive toward the origin
    Vec2 theta_star;    // angles after the Sigma^{-1} transform
    double alpha_star = 0.0;
    Vec2 beta;          // beta_i = mu_i / (mu_i + nu_i)
    Vec2 h;             // (1/zeta_1, 1/zeta_2), zeta_i = mu_i + nu_i
};

enum class Regime {
    Srbm,               // alpha* < 1
    ExtendedSkorohod,   // alpha* = 1
    NonSemimartingale,  // 1 < alpha* < 2
};

const char* regime_name(Regime r);

// Checks positivity, heavy traffic (lambda_i == mu_i), and the regime
// condition nu1*nu2 > mu1*mu2. Returns the violated conditions; empty means
// the family is admissible for the non-semimartingale regime.
std::vector<std::string> validate(const RateFamily& p);

// Drift, diffusion, reflection directions, angles and alpha*. Throws
// std::invalid_argument with the diagnostic report when positivity or heavy
// traffic fail (the regime condition is not required here).
LimitData limit_data(const RateFamily& p);

// Classification of alpha*, exact with tolerance 1e-12 at the boundary.
// Throws std::invalid_argument outside (-2, 2).
Regime regime_of(double alpha_star);

// Level-n rates. Throws when a resulting rate is nonpositive.
LevelRates level_rates(const RateFamily& p, std::int64_t n);

// GPS with parallelization slowdown, phi1 + phi2 < 1. Arrivals are at
// critical load, lambda_i = phi_i * mu_ps_i; hat_lambda is free.
RateFamily gps_ps_to_base(Vec2 phi, Vec2 mu_ps, Vec2 hat_mu_ps, Vec2 hat_lambda = {});

// Coupled processor model: identity mapping of the service/boost rates.
RateFamily coupled_to_base(Vec2 lambda, Vec2 mu_cp, Vec2 nu_cp, Vec2 hat_lambda = {},
                           Vec2 hat_mu_cp = {}, Vec2 hat_nu_cp = {});

}  // namespace qprbm
