// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefsample/cost.hpp"
#include "prefsample/policy.hpp"

namespace prefsample {

enum class StrategyKind { Vanilla, BestOfN, Hybrid, PILAF, TPILAF };

std::string_view strategy_name(StrategyKind kind);
// Accepts vanilla, bestofn (best-of-n, bon), hybrid, pilaf, tpilaf; case-insensitive.
StrategyKind parse_strategy_kind(std::string_view name);

struct StrategySpec {
    StrategyKind kind = StrategyKind::Vanilla;
    double beta = 0.1;
    std::size_t n_candidates = 8;  // BestOfN
    bool exact_partitions = true;  // TPILAF; false replaces Z+, Z- by 1 in p0 and w

    void validate() const;
    std::string name() const { return std::string(strategy_name(kind)); }
    bool operator==(const StrategySpec&) const = default;
};

struct PartitionValues {
    double z_plus = 1.0;
    double z_minus = 1.0;
    double p0 = 0.5;
    double zbar_contrib = 1.0;  // z_plus * z_minus
};

struct WeightFn {
    std::vector<double> w;
    double zbar = 2.0;
    std::vector<PartitionValues> partitions;

    double operator()(std::size_t prompt) const { return w[prompt]; }
    double sup_norm() const;
};

struct ResponsePair {
    std::size_t first;
    std::size_t second;
    bool operator==(const ResponsePair&) const = default;
};

// Z+ = sum_y pi(y) exp(r(y)), Z- = sum_y pi(y) exp(-r(y)) over the enumeration,
// evaluated as 1 + sum pi expm1(+-r) so that r = 0 gives exactly 1.
// NumericalError when |r| exceeds ~700.
PartitionValues compute_partitions(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt);
PartitionValues partitions_from_tables(std::span<const double> probs, std::span<const double> rewards);

// w(x) = (1 + Z+ Z-) / zbar with zbar = 1 + E_rho[Z+ Z-].
WeightFn compute_weights(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const PromptSpace& prompts);
// Weights the strategy's loss uses: compute_weights for exact T-PILAF, 1 otherwise.
// zbar is always the exact 1 + E_rho[Z+ Z-] at theta.
WeightFn strategy_weights(const StrategySpec& strategy, const LogitPolicy& theta, const LogitPolicy& ref,
                          const PromptSpace& prompts);

// softmax((1 + s beta) h_theta - s beta h_ref) at the context of `prefix`, s = +-1.
std::vector<double> pilaf_token_dist(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                     std::size_t prompt, std::span<const Token> prefix, int sign);
// Whole-table version of the token-wise rule, as a policy.
LogitPolicy pilaf_token_policy(const LogitPolicy& theta, const LogitPolicy& ref, double beta, int sign);

// Sequence-level pi+- = pi exp(+-r) / Z+- over the enumeration.
std::vector<double> tilted_response_probs(std::span<const double> probs, std::span<const double> rewards,
                                          const PartitionValues& parts, int sign);

ResponsePair sample_vanilla(const LogitPolicy& theta, std::size_t prompt, Rng& rng, CostLedger& ledger);
// n draws from pi ranked by the implicit reward; (best, worst) with ties to
// the lowest draw index, so theta = ref returns (first draw, first draw).
ResponsePair sample_best_of_n(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t n,
                              std::size_t prompt, Rng& rng, CostLedger& ledger);
ResponsePair sample_hybrid(const LogitPolicy& theta, const LogitPolicy& ref, std::size_t prompt, Rng& rng,
                           CostLedger& ledger);
ResponsePair sample_pilaf(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt,
                          Rng& rng, CostLedger& ledger);
ResponsePair sample_tpilaf(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt,
                           Rng& rng, const PartitionValues& parts, CostLedger& ledger);

// Strategy bound to fixed (theta, ref). Per-prompt sampling tables are built on
// first use and reused, so drawing many pairs at one theta is cheap. Each draw
// consumes the same random numbers as the corresponding free function.
class PairSampler {
public:
    PairSampler(StrategySpec strategy, const LogitPolicy& theta, const LogitPolicy& ref);

    ResponsePair draw(std::size_t prompt, Rng& rng, CostLedger& ledger);
    const StrategySpec& strategy() const { return strategy_; }

private:
    struct Tables {
        std::vector<double> pi;
        std::vector<double> pi_ref;     // Hybrid
        std::vector<double> rewards;    // BestOfN, TPILAF
        std::vector<double> first_alt;  // pi+ (TPILAF) or token-wise pi+ (PILAF)
        std::vector<double> second_alt;
        double p_alt = 0.0;
    };
    const Tables& tables(std::size_t prompt);

    StrategySpec strategy_;
    const LogitPolicy& theta_;
    const LogitPolicy& ref_;
    std::optional<LogitPolicy> token_plus_, token_minus_;
    std::vector<std::optional<Tables>> cache_;
};

// Exact ordered pair density mu(a, b | x) as an N x N matrix. BestOfN has no
// closed form here and throws UnsupportedStrategy.
Matrix pair_density(const StrategySpec& strategy, const LogitPolicy& theta, const LogitPolicy& ref,
                    std::size_t prompt);
Matrix symmetrize(const Matrix& mu);
double total_variation(const Matrix& p, const Matrix& q);

// Strategies whose population loss is available in closed form: Vanilla,
// Hybrid and T-PILAF with exact partitions.
bool has_closed_form_density(const StrategySpec& strategy);

}  // namespace prefsample
