// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/sampling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "prefsample/error.hpp"
#include "prefsample/reward.hpp"

namespace prefsample {

namespace {

constexpr double kMaxExponent = 700.0;

using Index = Eigen::Index;

ResponsePair draw_iid(std::span<const double> pi, Rng& rng) {
    const std::size_t a = rng.categorical(pi);
    const std::size_t b = rng.categorical(pi);
    return {a, b};
}

// Ties go to the lowest draw index, applied to max and min independently.
ResponsePair draw_best_of_n(std::span<const double> pi, std::span<const double> rewards, std::size_t n, Rng& rng) {
    std::size_t best = 0, worst = 0;
    double best_r = 0.0, worst_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = rng.categorical(pi);
        const double r = rewards[y];
        if (i == 0 || r > best_r) best = y, best_r = r;
        if (i == 0 || r < worst_r) worst = y, worst_r = r;
    }
    return {best, worst};
}

// With probability p_alt draw from (first_alt, second_alt), otherwise i.i.d. pi.
ResponsePair draw_mixture(std::span<const double> pi, std::span<const double> first_alt,
                          std::span<const double> second_alt, double p_alt, Rng& rng, CostLedger& ledger) {
    if (rng.bernoulli(p_alt)) {
        const std::size_t a = rng.categorical(first_alt);
        const std::size_t b = rng.categorical(second_alt);
        ledger.add_generation(2);
        ledger.add_generation(2);
        return {a, b};
    }
    ledger.add_generation();
    ledger.add_generation();
    return draw_iid(pi, rng);
}

Matrix outer(std::span<const double> a, std::span<const double> b) {
    Matrix m(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = a[i] * b[j];
    return m;
}

double mixing_probability(const StrategySpec& s, const PartitionValues& parts) {
    return s.exact_partitions ? parts.p0 : 0.5;
}

}  // namespace

std::string_view strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Vanilla: return "vanilla";
        case StrategyKind::BestOfN: return "bestofn";
        case StrategyKind::Hybrid: return "hybrid";
        case StrategyKind::PILAF: return "pilaf";
        case StrategyKind::TPILAF: return "tpilaf";
    }
    return "unknown";
}

StrategyKind parse_strategy_kind(std::string_view name) {
    std::string s;
    for (char c : name)
        if (c != '-' && c != '_') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "vanilla") return StrategyKind::Vanilla;
    if (s == "bestofn" || s == "bon") return StrategyKind::BestOfN;
    if (s == "hybrid") return StrategyKind::Hybrid;
    if (s == "pilaf") return StrategyKind::PILAF;
    if (s == "tpilaf") return StrategyKind::TPILAF;
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

void StrategySpec::validate() const {
    PREFSAMPLE_CHECK(std::isfinite(beta) && beta >= 0.0, ConfigError, "strategy beta must be finite and >= 0");
    PREFSAMPLE_CHECK(kind != StrategyKind::BestOfN || n_candidates >= 2, ConfigError, "best-of-n needs n >= 2");
}

double WeightFn::sup_norm() const {
    double m = 0.0;
    for (double v : w) m = std::max(m, std::abs(v));
    return m;
}

PartitionValues partitions_from_tables(std::span<const double> probs, std::span<const double> rewards) {
    double sp = 0.0, sm = 0.0, dp = 0.0, dm = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double r = rewards[i];
        PREFSAMPLE_CHECK(std::isfinite(r) && std::abs(r) <= kMaxExponent, NumericalError,
                         "implicit reward magnitude exceeds 700; partition sums overflow");
        sp += probs[i] * std::expm1(r);
        sm += probs[i] * std::expm1(-r);
        dp += probs[i] * std::exp(r);
        dm += probs[i] * std::exp(-r);
    }
    PartitionValues out;
    // 1 + sum pi expm1 is exact at r = 0 but cancels badly once most mass has r << 0.
    out.z_plus = 1.0 + sp >= 0.5 ? 1.0 + sp : dp;
    out.z_minus = 1.0 + sm >= 0.5 ? 1.0 + sm : dm;
    PREFSAMPLE_CHECK(std::isfinite(out.z_plus) && std::isfinite(out.z_minus) && out.z_plus > 0.0 && out.z_minus > 0.0,
                     NumericalError, "partition sums are not positive and finite");
    out.zbar_contrib = out.z_plus * out.z_minus;
    out.p0 = out.zbar_contrib / (1.0 + out.zbar_contrib);
    return out;
}

PartitionValues compute_partitions(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt) {
    const auto pi = response_probs(theta, prompt);
    const auto r = implicit_rewards(theta, ref, beta, prompt);
    return partitions_from_tables(pi, r);
}

WeightFn compute_weights(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const PromptSpace& prompts) {
    PREFSAMPLE_CHECK(prompts.size() == theta.num_prompts(), StructuralError, "prompt space size does not match policy");
    WeightFn out;
    out.partitions.reserve(prompts.size());
    double e = 0.0;
    for (std::size_t x = 0; x < prompts.size(); ++x) {
        out.partitions.push_back(compute_partitions(theta, ref, beta, x));
        e += prompts.weights[x] * out.partitions.back().zbar_contrib;
    }
    out.zbar = 1.0 + e;
    out.w.resize(prompts.size());
    for (std::size_t x = 0; x < prompts.size(); ++x) out.w[x] = (1.0 + out.partitions[x].zbar_contrib) / out.zbar;
    return out;
}

WeightFn strategy_weights(const StrategySpec& strategy, const LogitPolicy& theta, const LogitPolicy& ref,
                          const PromptSpace& prompts) {
    WeightFn out = compute_weights(theta, ref, strategy.beta, prompts);
    if (strategy.kind != StrategyKind::TPILAF || !strategy.exact_partitions) std::fill(out.w.begin(), out.w.end(), 1.0);
    return out;
}

LogitPolicy pilaf_token_policy(const LogitPolicy& theta, const LogitPolicy& ref, double beta, int sign) {
    require_same_layout(theta, ref);
    PREFSAMPLE_CHECK(sign == 1 || sign == -1, StructuralError, "sign must be +1 or -1");
    const double s = sign * beta;
    Vector mixed = (1.0 + s) * theta.params() - s * ref.params();
    return theta.with_params(std::move(mixed));
}

std::vector<double> pilaf_token_dist(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                     std::size_t prompt, std::span<const Token> prefix, int sign) {
    require_same_layout(theta, ref);
    PREFSAMPLE_CHECK(sign == 1 || sign == -1, StructuralError, "sign must be +1 or -1");
    const std::size_t ctx = theta.space().context_of(prefix);
    const auto h = theta.logits(prompt, ctx);
    const auto h_ref = ref.logits(prompt, ctx);
    const double s = sign * beta;
    std::vector<double> mixed(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) mixed[k] = (1.0 + s) * h[k] - s * h_ref[k];
    return softmax(mixed);
}

std::vector<double> tilted_response_probs(std::span<const double> probs, std::span<const double> rewards,
                                          const PartitionValues& parts, int sign) {
    PREFSAMPLE_CHECK(sign == 1 || sign == -1, StructuralError, "sign must be +1 or -1");
    const double z = sign > 0 ? parts.z_plus : parts.z_minus;
    std::vector<double> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * std::exp(sign * rewards[i]) / z;
    return out;
}

ResponsePair sample_vanilla(const LogitPolicy& theta, std::size_t prompt, Rng& rng, CostLedger& ledger) {
    PairSampler s({StrategyKind::Vanilla}, theta, theta);
    return s.draw(prompt, rng, ledger);
}

ResponsePair sample_best_of_n(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t n,
                              std::size_t prompt, Rng& rng, CostLedger& ledger) {
    PairSampler s({StrategyKind::BestOfN, beta, n}, theta, ref);
    return s.draw(prompt, rng, ledger);
}

ResponsePair sample_hybrid(const LogitPolicy& theta, const LogitPolicy& ref, std::size_t prompt, Rng& rng,
                           CostLedger& ledger) {
    PairSampler s({StrategyKind::Hybrid}, theta, ref);
    return s.draw(prompt, rng, ledger);
}

ResponsePair sample_pilaf(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt,
                          Rng& rng, CostLedger& ledger) {
    PairSampler s({StrategyKind::PILAF, beta}, theta, ref);
    return s.draw(prompt, rng, ledger);
}

ResponsePair sample_tpilaf(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt,
                           Rng& rng, const PartitionValues& parts, CostLedger& ledger) {
    const auto pi = response_probs(theta, prompt);
    const auto r = implicit_rewards(theta, ref, beta, prompt);
    const auto plus = tilted_response_probs(pi, r, parts, +1);
    const auto minus = tilted_response_probs(pi, r, parts, -1);
    return draw_mixture(pi, plus, minus, parts.p0, rng, ledger);
}

PairSampler::PairSampler(StrategySpec strategy, const LogitPolicy& theta, const LogitPolicy& ref)
    : strategy_(strategy), theta_(theta), ref_(ref), cache_(theta.num_prompts()) {
    strategy_.validate();
    require_same_layout(theta, ref);
    if (strategy_.kind == StrategyKind::PILAF) {
        token_plus_ = pilaf_token_policy(theta, ref, strategy_.beta, +1);
        token_minus_ = pilaf_token_policy(theta, ref, strategy_.beta, -1);
    }
}

const PairSampler::Tables& PairSampler::tables(std::size_t prompt) {
    PREFSAMPLE_CHECK(prompt < cache_.size(), StructuralError, "prompt index out of range");
    auto& slot = cache_[prompt];
    if (slot) return *slot;
    Tables t;
    t.pi = response_probs(theta_, prompt);
    switch (strategy_.kind) {
        case StrategyKind::Vanilla: break;
        case StrategyKind::Hybrid: t.pi_ref = response_probs(ref_, prompt); break;
        case StrategyKind::BestOfN: t.rewards = implicit_rewards(theta_, ref_, strategy_.beta, prompt); break;
        case StrategyKind::PILAF:
            t.first_alt = response_probs(*token_plus_, prompt);
            t.second_alt = response_probs(*token_minus_, prompt);
            t.p_alt = 0.5;
            break;
        case StrategyKind::TPILAF: {
            t.rewards = implicit_rewards(theta_, ref_, strategy_.beta, prompt);
            const auto parts = partitions_from_tables(t.pi, t.rewards);
            t.first_alt = tilted_response_probs(t.pi, t.rewards, parts, +1);
            t.second_alt = tilted_response_probs(t.pi, t.rewards, parts, -1);
            t.p_alt = mixing_probability(strategy_, parts);
            break;
        }
    }
    slot = std::move(t);
    return *slot;
}

ResponsePair PairSampler::draw(std::size_t prompt, Rng& rng, CostLedger& ledger) {
    const Tables& t = tables(prompt);
    switch (strategy_.kind) {
        case StrategyKind::Vanilla:
            ledger.add_generation(2);
            return draw_iid(t.pi, rng);
        case StrategyKind::Hybrid: {
            ledger.add_generation(2);
            const std::size_t a = rng.categorical(t.pi);
            const std::size_t b = rng.categorical(t.pi_ref);
            return {a, b};
        }
        case StrategyKind::BestOfN:
            ledger.add_generation(static_cast<std::int64_t>(strategy_.n_candidates));
            return draw_best_of_n(t.pi, t.rewards, strategy_.n_candidates, rng);
        case StrategyKind::PILAF:
        case StrategyKind::TPILAF:
            return draw_mixture(t.pi, t.first_alt, t.second_alt, t.p_alt, rng, ledger);
    }
    throw UnsupportedStrategy("unknown strategy");
}

bool has_closed_form_density(const StrategySpec& strategy) {
    switch (strategy.kind) {
        case StrategyKind::Vanilla:
        case StrategyKind::Hybrid: return true;
        case StrategyKind::TPILAF: return strategy.exact_partitions;
        default: return false;
    }
}

Matrix pair_density(const StrategySpec& strategy, const LogitPolicy& theta, const LogitPolicy& ref,
                    std::size_t prompt) {
    require_same_layout(theta, ref);
    const auto pi = response_probs(theta, prompt);
    switch (strategy.kind) {
        case StrategyKind::Vanilla: return outer(pi, pi);
        case StrategyKind::Hybrid: {
            const auto pr = response_probs(ref, prompt);
            return outer(pi, pr);
        }
        case StrategyKind::PILAF: {
            const auto plus = response_probs(pilaf_token_policy(theta, ref, strategy.beta, +1), prompt);
            const auto minus = response_probs(pilaf_token_policy(theta, ref, strategy.beta, -1), prompt);
            return 0.5 * outer(pi, pi) + 0.5 * outer(plus, minus);
        }
        case StrategyKind::TPILAF: {
            const auto r = implicit_rewards(theta, ref, strategy.beta, prompt);
            const auto parts = partitions_from_tables(pi, r);
            const auto plus = tilted_response_probs(pi, r, parts, +1);
            const auto minus = tilted_response_probs(pi, r, parts, -1);
            const double p = mixing_probability(strategy, parts);
            return (1.0 - p) * outer(pi, pi) + p * outer(plus, minus);
        }
        case StrategyKind::BestOfN: break;
    }
    throw UnsupportedStrategy("no closed-form pair density for strategy " + strategy.name());
}

Matrix symmetrize(const Matrix& mu) { return 0.5 * (mu + mu.transpose()); }

double total_variation(const Matrix& p, const Matrix& q) {
    PREFSAMPLE_CHECK(p.rows() == q.rows() && p.cols() == q.cols(), StructuralError, "distribution shapes differ");
    return 0.5 * (p - q).cwiseAbs().sum();
}

}  // namespace prefsample
