// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prefsample/dpo.hpp"
#include "prefsample/reward.hpp"
#include "prefsample/sampling.hpp"
#include "prefsample/verify.hpp"

namespace prefsample {

// Minimal INI document: `[section]` headers, `key = value` lines, `#` or `;`
// comments. Every entry remembers its source line for diagnostics.
class IniDocument {
public:
    struct Entry {
        std::string value;
        std::size_t line = 0;
        bool used = false;
    };

    static IniDocument parse(const std::string& text, const std::string& origin);
    static IniDocument load(const std::filesystem::path& path);

    const std::string& origin() const { return origin_; }
    bool has(const std::string& section, const std::string& key) const;
    // Marks the entry as used; nullptr when absent.
    const Entry* find(const std::string& section, const std::string& key) const;
    // ConfigError for entries never looked up (typos, unknown keys).
    void require_all_used() const;
    [[noreturn]] void fail(const Entry& entry, const std::string& what) const;

private:
    std::string origin_;
    mutable std::map<std::string, std::map<std::string, Entry>> sections_;
};

enum class OracleSource { Realizable, Table };

struct InstanceConfig {
    VocabSpec vocab{3, 2};
    std::size_t num_prompts = 4;
    std::vector<double> prompt_weights;  // empty = uniform
    OracleSource oracle = OracleSource::Realizable;
    std::uint64_t instance_seed = 7;
    std::filesystem::path oracle_table;
    double reward_bound = 10.0;
    double ref_scale = 1.0;
    double star_scale = 1.0;
    double init_scale = 0.0;  // theta0 = ref + N(0, init_scale^2)
};

struct VerifyConfig {
    std::uint64_t seed = 2026;
    std::size_t instances = 50;
    InstanceSpec instance{VocabSpec{3, 2}, 3, 0.1, 1.0, 1.0, 0.5};
    double alignment_t = 0.1;
    std::optional<double> reward_bound;
    std::size_t asymptotics_n = 2000;
    std::size_t asymptotics_m = 100;
    std::size_t asymptotics_prompts = 1;
    double asymptotics_beta = 1.0;
    double asymptotics_ref_scale = 0.5;
    double asymptotics_star_scale = 0.5;
    StrategyKind asymptotics_strategy = StrategyKind::TPILAF;
};

struct RunConfig {
    InstanceConfig instance;
    TrainConfig train;
    std::vector<StrategySpec> strategies;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;
    std::size_t cost_pairs = 10000;
    VerifyConfig verify;

    void validate() const;
    PromptSpace prompt_space() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Comma or whitespace separated seed list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct Instance {
    std::shared_ptr<const ResponseSpace> space;
    LogitPolicy ref;
    LogitPolicy theta0;
    OracleReward oracle;
    PromptSpace prompts;
};

// Builds ref, theta0 and the oracle from stream kExperimentInstance under
// instance_seed (or reads the oracle table).
Instance build_instance(const RunConfig& config);

}  // namespace prefsample
