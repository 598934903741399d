#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qprbm/geometry.hpp"
#include "qprbm/vec2.hpp"

namespace qprbm {

// C^2 product-cutoff test function for the submartingale experiments:
//   f(x) = ramp((x1-a1)/s) * ramp((x2-a2)/s),
// with a quintic smoothstep ramp. f vanishes on [0,a1]x[0,a2] (a neighborhood
// of the origin in S) and d^(i) . grad f >= 0 on both faces.
class ProductCutoff {
  public:
    ProductCutoff(double a1, double a2, double s);

    double value(Vec2 x) const;
    Vec2 gradient(Vec2 x) const;
    Vec2 hessian_diag(Vec2 x) const;

    double a1() const { return a1_; }
    double a2() const { return a2_; }
    double smoothing() const { return s_; }

  private:
    double a1_, a2_, s_;
};

// Escape-probability scaling section (stopped RBM sampled through the
// alternating reflection map): one replication budget per epsilon.
struct EscapeConfig {
    std::vector<double> eps_list{0.1, 0.05, 0.025};
    std::vector<std::int64_t> replications{8000, 16000, 32000};
    double c = 2.0;              // start radius c * eps
    double x0_angle_deg = 45.0;  // polar angle of the start point
    double dt_factor = 1e-4;     // step dt = dt_factor * eps^2
};

struct ExperimentConfig {
    RateFamily family;
    std::string model_kind = "base";
    std::vector<std::int64_t> n_list{400, 1600, 6400};
    double S = 10.0;
    std::vector<double> eps_list{0.4, 0.2, 0.1};
    double c = 0.0;  // 0 = auto (lemma constants)
    double c0 = 0.5;
    std::int64_t replications = 2000;
    std::uint64_t seed = 20240229;
    double dt = 0.0;  // 0 = auto (1e-4 * eps^2)
    std::string out_dir;  // empty: QPRBM_OUT_DIR env or "out"
    std::string construction = "marked-clocks";
    std::array<std::int64_t, 2> x0_lattice{0, 0};
    Vec2 x0{1.0, 1.0};  // rescaled start for stopped-process experiments
    double t_marginal = 1.0;
    double r_escape = 1.0;
    double ball_eps = 0.5;
    // submartingale section
    double t1 = 1.0, t2 = 3.0;
    double cutoff_a1 = 0.15, cutoff_a2 = 0.15, cutoff_s = 0.3;
    std::optional<RateFamily> girsanov_target;
    std::optional<EscapeConfig> escape;

    nlohmann::json raw;  // as parsed, for the manifest

    double dt_for(double eps) const { return dt > 0.0 ? dt : 1e-4 * eps * eps; }
};

// Strict parser: unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j);

struct RunOptions {
    std::string out_dir;  // empty = config value
    std::optional<std::uint64_t> seed;
    int jobs = 0;  // <= 0: hardware concurrency
};

struct RunResult {
    int exit_code = 0;  // 0 pass, 2 assertion failure
    std::string summary;
    nlohmann::json details;  // machine-readable copy of the derived numbers
};

RunResult run_validate(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_simulate(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_identities(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_crossing_scaling(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_corner(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_convergence(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_girsanov(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_submartingale(const ExperimentConfig& cfg, const RunOptions& opts);

// Dispatch on the CLI subcommand. Throws std::invalid_argument for unknown
// subcommands or malformed configs (usage errors, exit code 1 at the CLI).
RunResult run_experiment(const std::string& subcommand, const nlohmann::json& config,
                         const RunOptions& opts);

// Deterministic worker pool over replication indices.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace qprbm
