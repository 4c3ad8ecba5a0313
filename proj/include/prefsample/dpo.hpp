// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefsample/cost.hpp"
#include "prefsample/policy.hpp"
#include "prefsample/reward.hpp"
#include "prefsample/sampling.hpp"

namespace prefsample {

// Labeled pairs plus optional per-triple weights w(x_i); empty weights mean w = 1.
struct DpoBatch {
    std::vector<PreferenceTriple> triples;
    std::vector<double> weights;

    std::size_t size() const { return triples.size(); }
    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
    void validate() const;
};

// -(1/n) sum_i w_i log sigma(r_theta(x_i, y_w) - r_theta(x_i, y_l))
double empirical_loss(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const DpoBatch& batch);
// Exact gradient with respect to the full logit table, accumulated sparsely
// over the contexts each response passes through.
Vector loss_gradient(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const DpoBatch& batch);

// A fixed data-generating measure: the symmetrized pair density of a strategy
// at some sampling policy, and the loss weights w(x). Holding the measure
// fixed while theta varies is what the population loss and its derivatives
// are taken with respect to.
struct PairMeasure {
    StrategySpec strategy;
    PromptSpace prompts;
    std::vector<Matrix> mu_bar;  // per prompt, N x N
    WeightFn weights;            // w(x) in use and zbar at the sampling policy

    // UnsupportedStrategy unless has_closed_form_density(strategy).
    static PairMeasure build(const StrategySpec& strategy, const LogitPolicy& sampling_theta, const LogitPolicy& ref,
                             const PromptSpace& prompts);
};

// E_{x, (a,b)~mu_bar}[w(x) * BT cross-entropy of sigma(dr_theta) against sigma(dr*)].
double population_loss(const PairMeasure& measure, const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                       const OracleReward& oracle);
Vector population_loss_gradient(const PairMeasure& measure, const LogitPolicy& theta, const LogitPolicy& ref,
                                double beta, const OracleReward& oracle);
// The measure is built at theta itself.
Vector population_loss_gradient(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                const StrategySpec& strategy, const OracleReward& oracle, const PromptSpace& prompts);

enum class TrainMode { Iterative, Online };
enum class OptimizerKind { GradientDescent, Adam };

std::string_view train_mode_name(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

// Online: every step draws batch_size prompts from the prompt dataset,
//   generates and labels one pair each and takes one step on that batch;
//   rounds * steps_per_round steps in total.
// Iterative: every round generates and labels one pair per dataset prompt
//   with the current policy, then makes `epochs` passes over that data in
//   minibatches of batch_size; steps_per_round is not used.
// The prompt dataset (dataset_size draws from rho) is fixed per seed.
struct TrainConfig {
    double beta = 0.1;
    double step_size = 0.1;
    std::size_t steps_per_round = 100;
    std::size_t rounds = 1;
    std::size_t batch_size = 64;
    TrainMode mode = TrainMode::Online;
    std::uint64_t seed = 1;
    std::size_t epochs = 2;
    std::size_t eval_interval = 50;
    std::size_t dataset_size = 512;
    OptimizerKind optimizer = OptimizerKind::GradientDescent;

    void validate() const;
    std::size_t total_steps() const;
};

struct TrajectoryRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t step = 0;
    double expected_reward = 0.0;
    double kl = 0.0;
    double j_value = 0.0;
    std::int64_t sampling_cost = 0;
    std::int64_t annotation_cost = 0;
};

struct TrainResult {
    LogitPolicy policy;
    std::vector<TrajectoryRecord> trajectory;
    CostLedger ledger;
};

TrainResult train(const TrainConfig& config, const LogitPolicy& theta0, const LogitPolicy& ref,
                  const OracleReward& oracle, const PromptSpace& prompts, const StrategySpec& strategy);

}  // namespace prefsample
