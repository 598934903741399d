#include "qprbm/geometry.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qprbm {

namespace {

constexpr double kHalfPi = 1.5707963267948966192313216916398;
constexpr double kAlphaBoundaryTol = 1e-12;

void check_positive(std::vector<std::string>& out, const char* name, Vec2 v) {
    for (int i = 0; i < 2; ++i) {
        if (!(v[i] > 0.0)) {
            std::ostringstream os;
            os << name << "_" << (i + 1) << " must be positive (got " << v[i] << ")";
            out.push_back(os.str());
        }
    }
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) {
        if (!s.empty()) s += "; ";
        s += e;
    }
    return s;
}

}  // namespace

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Srbm: return "SRBM";
        case Regime::ExtendedSkorohod: return "ExtendedSkorohod";
        case Regime::NonSemimartingale: return "NonSemimartingale";
    }
    return "?";
}

std::vector<std::string> validate(const RateFamily& p) {
    std::vector<std::string> out;
    check_positive(out, "lambda", p.lambda);
    check_positive(out, "mu", p.mu);
    check_positive(out, "nu", p.nu);
    for (int i = 0; i < 2; ++i) {
        if (p.lambda[i] != p.mu[i]) {
            std::ostringstream os;
            os << "heavy traffic lambda_" << (i + 1) << " = mu_" << (i + 1) << " fails ("
               << p.lambda[i] << " != " << p.mu[i] << ")";
            out.push_back(os.str());
        }
    }
    const double lhs = p.nu.x1 * p.nu.x2;
    const double rhs = p.mu.x1 * p.mu.x2;
    if (lhs == rhs) {
        out.push_back("nu_1*nu_2 > mu_1*mu_2 fails (boundary case alpha* = 1)");
    } else if (lhs < rhs) {
        out.push_back("nu_1*nu_2 > mu_1*mu_2 fails (semimartingale regime alpha* < 1)");
    }
    return out;
}

LimitData limit_data(const RateFamily& p) {
    // Positivity and heavy traffic are required; regime is reported, not
    // enforced, so alpha* <= 1 families remain representable.
    std::vector<std::string> basic;
    check_positive(basic, "lambda", p.lambda);
    check_positive(basic, "mu", p.mu);
    check_positive(basic, "nu", p.nu);
    for (int i = 0; i < 2; ++i) {
        if (p.lambda[i] != p.mu[i]) {
            std::ostringstream os;
            os << "heavy traffic lambda_" << (i + 1) << " = mu_" << (i + 1) << " fails";
            basic.push_back(os.str());
        }
    }
    if (!basic.empty()) throw std::invalid_argument("limit_data: " + join(basic));

    LimitData d;
    d.b = p.hat_lambda - p.hat_mu;
    d.sigma = {std::sqrt(2.0 * p.mu.x1), std::sqrt(2.0 * p.mu.x2)};
    // d^(i) = e^(i) - (nu_{i#}/mu_i) e^(i#)
    d.d1 = {1.0, -p.nu.x2 / p.mu.x1};
    d.d2 = {-p.nu.x1 / p.mu.x2, 1.0};
    // theta^(i) = angle between e^(i) and d^(i), positive toward the origin.
    // atan2(-d_{i#}, d_i) avoids cancellation near +-pi/2.
    d.theta = {std::atan2(-d.d1.x2, d.d1.x1), std::atan2(-d.d2.x1, d.d2.x2)};
    const Vec2 d1s{d.d1.x1 / d.sigma.x1, d.d1.x2 / d.sigma.x2};
    const Vec2 d2s{d.d2.x1 / d.sigma.x1, d.d2.x2 / d.sigma.x2};
    d.theta_star = {std::atan2(-d1s.x2, d1s.x1), std::atan2(-d2s.x1, d2s.x2)};
    d.alpha_star = (d.theta_star.x1 + d.theta_star.x2) / kHalfPi;
    d.beta = {p.mu.x1 / (p.mu.x1 + p.nu.x1), p.mu.x2 / (p.mu.x2 + p.nu.x2)};
    d.h = {1.0 / (p.mu.x1 + p.nu.x1), 1.0 / (p.mu.x2 + p.nu.x2)};
    return d;
}

Regime regime_of(double alpha_star) {
    if (!(alpha_star > -2.0 && alpha_star < 2.0)) {
        std::ostringstream os;
        os << "alpha* = " << alpha_star << " outside (-2, 2): inconsistent parameters";
        throw std::invalid_argument(os.str());
    }
    if (std::abs(alpha_star - 1.0) <= kAlphaBoundaryTol) return Regime::ExtendedSkorohod;
    return alpha_star < 1.0 ? Regime::Srbm : Regime::NonSemimartingale;
}

LevelRates level_rates(const RateFamily& p, std::int64_t n) {
    if (n <= 0) throw std::invalid_argument("level_rates: n must be positive");
    const double nd = static_cast<double>(n);
    const double rn = std::sqrt(nd);
    LevelRates lr;
    lr.n = n;
    lr.lambda = p.lambda * nd + p.hat_lambda * rn;
    lr.mu = p.mu * nd + p.hat_mu * rn;
    lr.nu = p.nu * nd + p.hat_nu * rn;
    for (int i = 0; i < 2; ++i) {
        if (!(lr.lambda[i] > 0.0) || !(lr.mu[i] > 0.0) || !(lr.nu[i] > 0.0)) {
            std::ostringstream os;
            os << "level_rates: nonpositive rate at n = " << n
               << " (perturbation too large for this n)";
            throw std::invalid_argument(os.str());
        }
    }
    return lr;
}

RateFamily gps_ps_to_base(Vec2 phi, Vec2 mu_ps, Vec2 hat_mu_ps, Vec2 hat_lambda) {
    if (!(phi.x1 > 0.0 && phi.x2 > 0.0)) {
        throw std::invalid_argument("gps_ps_to_base: proportions must be positive");
    }
    if (!(phi.x1 + phi.x2 < 1.0)) {
        throw std::invalid_argument(
            "gps_ps_to_base: phi_1 + phi_2 >= 1 (outside the slowdown regime)");
    }
    if (!(mu_ps.x1 > 0.0 && mu_ps.x2 > 0.0)) {
        throw std::invalid_argument("gps_ps_to_base: service rates must be positive");
    }
    RateFamily p;
    p.mu = {phi.x1 * mu_ps.x1, phi.x2 * mu_ps.x2};
    p.nu = {(1.0 - phi.x1) * mu_ps.x1, (1.0 - phi.x2) * mu_ps.x2};
    p.lambda = p.mu;  // critical load lambda_i = phi_i mu_ps_i
    p.hat_mu = {phi.x1 * hat_mu_ps.x1, phi.x2 * hat_mu_ps.x2};
    p.hat_nu = {(1.0 - phi.x1) * hat_mu_ps.x1, (1.0 - phi.x2) * hat_mu_ps.x2};
    p.hat_lambda = hat_lambda;
    return p;
}

RateFamily coupled_to_base(Vec2 lambda, Vec2 mu_cp, Vec2 nu_cp, Vec2 hat_lambda,
                           Vec2 hat_mu_cp, Vec2 hat_nu_cp) {
    RateFamily p;
    p.lambda = lambda;
    p.mu = mu_cp;
    p.nu = nu_cp;
    p.hat_lambda = hat_lambda;
    p.hat_mu = hat_mu_cp;
    p.hat_nu = hat_nu_cp;
    return p;
}

}  // namespace qprbm
