// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "prefsample/config.hpp"

namespace prefsample {

// CSV column contracts.
inline constexpr const char* kTrajectoryHeader =
    "strategy,seed,step,expected_reward,kl,j,sampling_cost,annotation_cost";
inline constexpr const char* kSummaryHeader = "strategy,seed,reward,kl,j,sampling_cost,annotation_cost";

struct RunOverrides {
    std::optional<std::vector<std::uint64_t>> seeds;
    std::vector<std::string> strategies;  // keep only these kinds; empty keeps all
    std::optional<std::filesystem::path> output_dir;
};
// ConfigError when the filter leaves no strategy.
RunConfig apply_overrides(RunConfig config, const RunOverrides& overrides);

struct SummaryRow {
    std::string strategy;
    std::uint64_t seed = 0;
    double reward = 0.0;
    double kl = 0.0;
    double j = 0.0;
    std::int64_t sampling_cost = 0;
    std::int64_t annotation_cost = 0;
};

struct ExperimentResult {
    std::vector<SummaryRow> summary;  // config order: strategy-major, then seed
    std::vector<std::vector<TrajectoryRecord>> trajectories;
    std::vector<std::filesystem::path> files;
};

std::string trajectory_file_name(const std::string& strategy, std::uint64_t seed);
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

// One train() per (strategy, seed), run in parallel; writes
// traj_<strategy>_<seed>.csv per run and summary.csv into output_dir. Files
// written by a failed invocation are removed before the error propagates.
ExperimentResult run_experiment(const RunConfig& config);

enum class VerifyWhich { Alignment, Density, Asymptotics, All };
VerifyWhich parse_verify_which(std::string_view name);

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitConfig = 2;

// Runs the selected harnesses over config.verify, printing one line per check
// and writing verify_<harness>.csv into output_dir. Returns kExitOk,
// kExitAssertion on a failed hard assertion, or kExitConfig when an instance
// violates the alignment hypotheses (reward bound).
int run_verify(const RunConfig& config, VerifyWhich which, std::ostream& log);

struct CostRow {
    std::string strategy;
    double sampling_per_pair = 0.0;
    double annotation_per_pair = 0.0;
};

// Mean per-pair costs over config.cost_pairs simulated labeled pairs at theta0.
std::vector<CostRow> cost_table(const RunConfig& config);
void print_cost_table(std::ostream& out, const std::vector<CostRow>& rows);

}  // namespace prefsample
