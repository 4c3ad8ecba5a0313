// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "prefsample/rng.hpp"
#include "prefsample/vocab.hpp"

namespace prefsample {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Fully tabular autoregressive policy: one logit vector per (prompt, context).
// The flat parameter vector is laid out prompt-major, then context, then token:
//   theta[(x * num_contexts + ctx) * vocab_size + token].
class LogitPolicy {
public:
    LogitPolicy(std::shared_ptr<const ResponseSpace> space, std::size_t num_prompts);
    LogitPolicy(std::shared_ptr<const ResponseSpace> space, std::size_t num_prompts, Vector params);

    // Independent N(0, scale^2) logits.
    static LogitPolicy gaussian(std::shared_ptr<const ResponseSpace> space, std::size_t num_prompts, double scale,
                                Rng& rng);

    const ResponseSpace& space() const { return *space_; }
    const std::shared_ptr<const ResponseSpace>& space_ptr() const { return space_; }
    const VocabSpec& vocab() const { return space_->vocab(); }
    std::size_t num_prompts() const { return num_prompts_; }
    std::size_t block_dim() const { return space_->num_contexts() * space_->vocab_size(); }
    std::size_t dim() const { return num_prompts_ * block_dim(); }
    std::size_t offset(std::size_t prompt, std::size_t ctx) const {
        return (prompt * space_->num_contexts() + ctx) * space_->vocab_size();
    }

    const Vector& params() const { return params_; }
    std::span<const double> logits(std::size_t prompt, std::size_t ctx) const {
        return {params_.data() + offset(prompt, ctx), space_->vocab_size()};
    }
    std::vector<double> next_token_probs(std::size_t prompt, std::size_t ctx) const;

    LogitPolicy with_params(Vector params) const { return {space_, num_prompts_, std::move(params)}; }
    bool same_layout(const LogitPolicy& other) const;

private:
    std::shared_ptr<const ResponseSpace> space_;
    std::size_t num_prompts_;
    Vector params_;
};

void require_same_layout(const LogitPolicy& a, const LogitPolicy& b);

double log_sum_exp(std::span<const double> logits);
// Max-subtracted softmax; `out` may alias nothing in `logits`.
void softmax(std::span<const double> logits, std::span<double> out);
std::vector<double> softmax(std::span<const double> logits);

// Sum over tokens of log softmax(context logits)[token].
double log_prob(const LogitPolicy& policy, std::size_t prompt, const TokenSeq& y);

// Exact log pi(y | x) for every response of the enumeration, in order.
std::vector<double> response_log_probs(const LogitPolicy& policy, std::size_t prompt);
std::vector<double> response_probs(const LogitPolicy& policy, std::size_t prompt);

// Row i is the gradient of log pi(y_i | x) with respect to the logit block of
// prompt x (block_dim entries); all other blocks are zero.
Matrix score_matrix(const LogitPolicy& policy, std::size_t prompt);

// Draws token by token; `next(ctx)` returns the next-token distribution.
template <class NextProbs>
std::size_t sample_autoregressive(const ResponseSpace& space, NextProbs&& next, Rng& rng) {
    std::size_t ctx = 0;
    for (;;) {
        const auto probs = next(ctx);
        const auto tok = static_cast<Token>(rng.categorical(probs));
        const auto tr = space.transition(ctx, tok);
        if (tr.terminal) return tr.index;
        ctx = tr.index;
    }
}

std::size_t sample_response_index(const LogitPolicy& policy, std::size_t prompt, Rng& rng);
TokenSeq sample_response(const LogitPolicy& policy, std::size_t prompt, Rng& rng);

// E_{x~rho} KL(p(.|x) || q(.|x)) by exact enumeration.
double kl_divergence(const LogitPolicy& p, const LogitPolicy& q, const PromptSpace& prompts);

// Softmax gauge: adding a constant to one context's logits leaves the policy
// unchanged. One gauge direction per (prompt, context).
std::size_t gauge_dimension(const LogitPolicy& layout);
std::size_t effective_dimension(const LogitPolicy& layout);
// Removes the per-context mean.
Vector project_off_gauge(const LogitPolicy& layout, const Vector& v);
// d x d_eff orthonormal basis of the non-gauge subspace (Helmert columns per context).
Matrix gauge_complement_basis(const LogitPolicy& layout);

}  // namespace prefsample
