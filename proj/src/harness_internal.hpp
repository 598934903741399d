#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "qprbm/harness.hpp"

namespace qprbm::detail {

struct Kahan {
    double s = 0.0, c = 0.0;
    void add(double v) {
        const double y = v - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
};

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Applies CLI overrides and creates the output directory.
struct Effective {
    ExperimentConfig cfg;
    std::string out_dir;
};

// Output directory precedence: --out flag, config "out_dir", QPRBM_OUT_DIR,
// then "out".
inline Effective resolve(const ExperimentConfig& cfg_in, const RunOptions& opts) {
    Effective e{cfg_in, {}};
    if (opts.seed) e.cfg.seed = *opts.seed;
    if (!opts.out_dir.empty()) {
        e.out_dir = opts.out_dir;
    } else if (!e.cfg.out_dir.empty()) {
        e.out_dir = e.cfg.out_dir;
    } else if (const char* env = std::getenv("QPRBM_OUT_DIR"); env && *env) {
        e.out_dir = env;
    } else {
        e.out_dir = "out";
    }
    std::filesystem::create_directories(e.out_dir);
    return e;
}

void write_manifest(const Effective& e, const std::string& subcommand,
                    const nlohmann::json& derived);

inline std::ofstream open_csv(const Effective& e, const std::string& name,
                              const std::string& header) {
    std::ofstream os(std::filesystem::path(e.out_dir) / name);
    os << header << '\n';
    return os;
}

}  // namespace qprbm::detail
