// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prefsample/error.hpp"

namespace prefsample {

LogitPolicy::LogitPolicy(std::shared_ptr<const ResponseSpace> space, std::size_t num_prompts)
    : space_(std::move(space)), num_prompts_(num_prompts) {
    PREFSAMPLE_CHECK(space_ != nullptr, StructuralError, "policy needs a response space");
    PREFSAMPLE_CHECK(num_prompts_ >= 1, StructuralError, "policy needs at least one prompt");
    params_ = Vector::Zero(static_cast<Eigen::Index>(dim()));
}

LogitPolicy::LogitPolicy(std::shared_ptr<const ResponseSpace> space, std::size_t num_prompts, Vector params)
    : LogitPolicy(std::move(space), num_prompts) {
    PREFSAMPLE_CHECK(static_cast<std::size_t>(params.size()) == dim(), StructuralError,
                     "parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                         std::to_string(dim()));
    PREFSAMPLE_CHECK(params.allFinite(), NumericalError, "logits must be finite");
    params_ = std::move(params);
}

LogitPolicy LogitPolicy::gaussian(std::shared_ptr<const ResponseSpace> space, std::size_t num_prompts, double scale,
                                  Rng& rng) {
    LogitPolicy p(std::move(space), num_prompts);
    Vector theta(static_cast<Eigen::Index>(p.dim()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = scale * rng.standard_normal();
    return p.with_params(std::move(theta));
}

std::vector<double> LogitPolicy::next_token_probs(std::size_t prompt, std::size_t ctx) const {
    return softmax(logits(prompt, ctx));
}

bool LogitPolicy::same_layout(const LogitPolicy& other) const {
    return num_prompts_ == other.num_prompts_ && space_->vocab() == other.space_->vocab();
}

void require_same_layout(const LogitPolicy& a, const LogitPolicy& b) {
    PREFSAMPLE_CHECK(a.same_layout(b), StructuralError, "policies do not share a vocabulary and prompt count");
}

double log_sum_exp(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double v : logits) s += std::exp(v - m);
    return m + std::log(s);
}

void softmax(std::span<const double> logits, std::span<double> out) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        s += out[i];
    }
    for (auto& v : out) v /= s;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    softmax(logits, out);
    return out;
}

double log_prob(const LogitPolicy& policy, std::size_t prompt, const TokenSeq& y) {
    PREFSAMPLE_CHECK(prompt < policy.num_prompts(), StructuralError, "prompt index out of range");
    const auto& space = policy.space();
    const std::size_t idx = space.index_of(y);
    double lp = 0.0;
    for (const Step& s : space.steps(idx)) {
        const auto h = policy.logits(prompt, s.context);
        lp += h[s.token] - log_sum_exp(h);
    }
    return lp;
}

std::vector<double> response_log_probs(const LogitPolicy& policy, std::size_t prompt) {
    const auto& space = policy.space();
    const std::size_t v = space.vocab_size();
    std::vector<double> ctx_log_softmax(space.num_contexts() * v);
    for (std::size_t c = 0; c < space.num_contexts(); ++c) {
        const auto h = policy.logits(prompt, c);
        const double lse = log_sum_exp(h);
        for (std::size_t k = 0; k < v; ++k) ctx_log_softmax[c * v + k] = h[k] - lse;
    }
    std::vector<double> out(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) {
        double lp = 0.0;
        for (const Step& s : space.steps(i)) lp += ctx_log_softmax[s.context * v + s.token];
        out[i] = lp;
    }
    return out;
}

std::vector<double> response_probs(const LogitPolicy& policy, std::size_t prompt) {
    auto out = response_log_probs(policy, prompt);
    for (auto& v : out) v = std::exp(v);
    return out;
}

Matrix score_matrix(const LogitPolicy& policy, std::size_t prompt) {
    const auto& space = policy.space();
    const std::size_t v = space.vocab_size();
    std::vector<std::vector<double>> probs(space.num_contexts());
    for (std::size_t c = 0; c < space.num_contexts(); ++c) probs[c] = policy.next_token_probs(prompt, c);

    Matrix g = Matrix::Zero(static_cast<Eigen::Index>(space.size()), static_cast<Eigen::Index>(policy.block_dim()));
    for (std::size_t i = 0; i < space.size(); ++i) {
        for (const Step& s : space.steps(i)) {
            const auto base = static_cast<Eigen::Index>(s.context * v);
            for (std::size_t k = 0; k < v; ++k) g(static_cast<Eigen::Index>(i), base + static_cast<Eigen::Index>(k)) -= probs[s.context][k];
            g(static_cast<Eigen::Index>(i), base + static_cast<Eigen::Index>(s.token)) += 1.0;
        }
    }
    return g;
}

std::size_t sample_response_index(const LogitPolicy& policy, std::size_t prompt, Rng& rng) {
    std::vector<double> scratch(policy.space().vocab_size());
    return sample_autoregressive(
        policy.space(),
        [&](std::size_t ctx) -> std::span<const double> {
            softmax(policy.logits(prompt, ctx), scratch);
            return scratch;
        },
        rng);
}

TokenSeq sample_response(const LogitPolicy& policy, std::size_t prompt, Rng& rng) {
    return policy.space().response(sample_response_index(policy, prompt, rng));
}

double kl_divergence(const LogitPolicy& p, const LogitPolicy& q, const PromptSpace& prompts) {
    require_same_layout(p, q);
    PREFSAMPLE_CHECK(prompts.size() == p.num_prompts(), StructuralError, "prompt space size does not match policy");
    double total = 0.0;
    for (std::size_t x = 0; x < prompts.size(); ++x) {
        if (prompts.weights[x] == 0.0) continue;
        const auto lp = response_log_probs(p, x);
        const auto lq = response_log_probs(q, x);
        double kl = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) {
            if (lp[i] == -std::numeric_limits<double>::infinity()) continue;
            PREFSAMPLE_CHECK(std::isfinite(lq[i]), NumericalError, "KL divergence is infinite");
            kl += std::exp(lp[i]) * (lp[i] - lq[i]);
        }
        total += prompts.weights[x] * kl;
    }
    return total;
}

std::size_t gauge_dimension(const LogitPolicy& layout) {
    return layout.num_prompts() * layout.space().num_contexts();
}

std::size_t effective_dimension(const LogitPolicy& layout) {
    return layout.dim() - gauge_dimension(layout);
}

Vector project_off_gauge(const LogitPolicy& layout, const Vector& v) {
    PREFSAMPLE_CHECK(static_cast<std::size_t>(v.size()) == layout.dim(), StructuralError, "vector dimension mismatch");
    Vector out = v;
    const auto V = static_cast<Eigen::Index>(layout.space().vocab_size());
    for (Eigen::Index start = 0; start < out.size(); start += V) {
        out.segment(start, V).array() -= out.segment(start, V).mean();
    }
    return out;
}

Matrix gauge_complement_basis(const LogitPolicy& layout) {
    const auto V = static_cast<Eigen::Index>(layout.space().vocab_size());
    const auto blocks = static_cast<Eigen::Index>(gauge_dimension(layout));
    Matrix basis = Matrix::Zero(static_cast<Eigen::Index>(layout.dim()), blocks * (V - 1));
    for (Eigen::Index b = 0; b < blocks; ++b) {
        for (Eigen::Index j = 1; j < V; ++j) {
            // Helmert column j: (1,...,1,-j,0,...)/sqrt(j(j+1)).
            const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
            const Eigen::Index col = b * (V - 1) + (j - 1);
            for (Eigen::Index k = 0; k < j; ++k) basis(b * V + k, col) = 1.0 / norm;
            basis(b * V + j, col) = -static_cast<double>(j) / norm;
        }
    }
    return basis;
}

}  // namespace prefsample
