// Experiment runner for the quarter-plane heavy-traffic toolkit. All work
// happens behind the C API in libqprbm; this binary only parses arguments,
// loads the config document, and reports the result.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qprbm.h"

namespace {

int run_subcommand(const std::string& name, const std::string& config_path,
                   const std::string& out_dir, std::int64_t seed, int jobs) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot open config '" << config_path << "'\n";
        return 1;
    }
    std::stringstream buf;
    buf << in.rdbuf();

    int exit_code = 0;
    char* summary = nullptr;
    const qprbm_status st =
        qprbm_run(name.c_str(), buf.str().c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                  seed, jobs, &exit_code, &summary);
    if (summary) {
        std::cout << summary;
        qprbm_string_free(summary);
    }
    if (st == QPRBM_INVALID_ARGUMENT) {
        std::cerr << "error: " << qprbm_last_error() << "\n";
        return 1;
    }
    if (st != QPRBM_OK) {
        std::cerr << "error: " << qprbm_last_error() << "\n";
        return 2;
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quarter-plane random walk / reflected diffusion experiments"};
    app.require_subcommand(1);

    const std::vector<std::string> names = {"validate",    "simulate", "identities",
                                            "crossings",   "corner",   "convergence",
                                            "girsanov",    "submartingale"};
    struct Args {
        std::string config;
        std::string out;
        std::int64_t seed = -1;
        int jobs = 0;
    };
    std::vector<Args> args(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto* sub = app.add_subcommand(names[i]);
        sub->add_option("--config", args[i].config, "experiment config (JSON)")->required();
        sub->add_option("--out", args[i].out, "output directory (overrides config)");
        sub->add_option("--seed", args[i].seed, "seed override");
        sub->add_option("--jobs", args[i].jobs, "worker count (default: all cores)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage errors (unknown subcommand, missing --config, ...) exit 1;
        // --help exits 0.
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    for (std::size_t i = 0; i < names.size(); ++i) {
        if (app.get_subcommand(names[i])->parsed()) {
            return run_subcommand(names[i], args[i].config, args[i].out, args[i].seed,
                                  args[i].jobs);
        }
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
