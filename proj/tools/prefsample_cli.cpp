// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

// prefsample run|verify|costs --config <path> [--out <dir>] [--seeds 1,2,3] [--strategy pilaf,vanilla]
//
// Exit codes: 0 success, 1 failed assertion, 2 configuration error.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "prefsample/error.hpp"
#include "prefsample/experiment.hpp"
#include "prefsample/textio.hpp"

using namespace prefsample;

namespace {

struct CommonOptions {
    std::string config;
    std::string out;
    std::string seeds;
    std::string strategy;
};

void add_common(CLI::App* app, CommonOptions& opts) {
    app->add_option("--config", opts.config, "Run config file (INI)")->required()->check(CLI::ExistingFile);
    app->add_option("--out", opts.out, "Output directory (default: config, then $PREFSAMPLE_OUT)");
    app->add_option("--seeds", opts.seeds, "Seed list override, e.g. 1,2,3");
    app->add_option("--strategy", opts.strategy, "Comma separated strategy filter");
}

RunConfig resolve(const CommonOptions& opts) {
    RunConfig config = load_run_config(opts.config);
    RunOverrides ov;
    if (!opts.seeds.empty()) ov.seeds = parse_seed_list(opts.seeds);
    if (!opts.strategy.empty())
        for (const auto& s : split(opts.strategy, ','))
            if (!s.empty()) ov.strategies.push_back(s);
    if (!opts.out.empty()) {
        ov.output_dir = opts.out;
    } else if (config.output_dir.empty()) {
        const char* env = std::getenv("PREFSAMPLE_OUT");
        ov.output_dir = env && *env ? env : "prefsample_out";
    }
    return apply_overrides(std::move(config), ov);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Preference-pair sampling experiments and checks on tabular language models"};
    app.require_subcommand(1);

    CommonOptions run_opts, verify_opts, cost_opts;
    auto* run = app.add_subcommand("run", "Train every (strategy, seed) and write trajectory CSVs");
    add_common(run, run_opts);

    auto* verify = app.add_subcommand("verify", "Run the verification harnesses");
    std::string which = "all";
    verify->add_option("which", which, "alignment | density | asymptotics | all")
        ->check(CLI::IsMember({"alignment", "density", "asymptotics", "all"}));
    add_common(verify, verify_opts);

    auto* costs = app.add_subcommand("costs", "Measure per-pair sampling and annotation costs");
    add_common(costs, cost_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            const auto result = run_experiment(resolve(run_opts));
            write_summary_csv(std::cout, result.summary);
            std::cerr << "wrote " << result.files.size() << " files\n";
            return kExitOk;
        }
        if (*verify) return run_verify(resolve(verify_opts), parse_verify_which(which), std::cout);
        if (*costs) {
            print_cost_table(std::cout, cost_table(resolve(cost_opts)));
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitAssertion;
    }
    return kExitOk;
}
