// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/vocab.hpp"

#include <cmath>
#include <sstream>

#include "prefsample/error.hpp"

namespace prefsample {

void VocabSpec::validate() const {
    PREFSAMPLE_CHECK(vocab_size >= 2, StructuralError, "vocab_size must be >= 2");
    PREFSAMPLE_CHECK(max_len >= 1, StructuralError, "max_len must be >= 1");
}

std::string TokenSeq::to_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) os << ' ';
        os << tokens[i];
    }
    return os.str();
}

void validate_response(const VocabSpec& vocab, const TokenSeq& y) {
    const auto n = y.tokens.size();
    PREFSAMPLE_CHECK(n >= 1 && n <= vocab.max_len, StructuralError,
                     "response length " + std::to_string(n) + " outside [1, " + std::to_string(vocab.max_len) + "]");
    for (std::size_t t = 0; t < n; ++t) {
        PREFSAMPLE_CHECK(y.tokens[t] < vocab.vocab_size, StructuralError,
                         "token " + std::to_string(y.tokens[t]) + " out of range");
        PREFSAMPLE_CHECK(y.tokens[t] != kEos || t + 1 == n, StructuralError, "token follows EOS");
    }
    PREFSAMPLE_CHECK(n == vocab.max_len || y.tokens.back() == kEos, StructuralError,
                     "response shorter than max_len must end in EOS");
}

std::size_t ResponseSpace::count_contexts(const VocabSpec& vocab) {
    std::size_t total = 0, layer = 1;
    for (std::size_t k = 0; k < vocab.max_len; ++k) {
        total += layer;
        layer *= vocab.vocab_size - 1;
    }
    return total;
}

std::size_t ResponseSpace::count(const VocabSpec& vocab) {
    std::size_t full = 1;
    for (std::size_t k = 0; k < vocab.max_len; ++k) full *= vocab.vocab_size - 1;
    return count_contexts(vocab) + full;
}

ResponseSpace::ResponseSpace(VocabSpec vocab) : vocab_(vocab) {
    vocab_.validate();
    const std::size_t n_ctx = count_contexts(vocab_);
    context_depth_.reserve(n_ctx);
    next_.resize(n_ctx * vocab_.vocab_size);
    responses_.reserve(count(vocab_));
    step_offsets_.push_back(0);
    std::vector<Token> prefix;
    std::vector<Step> path;
    context_depth_.push_back(0);
    build(0, prefix, path);
}

void ResponseSpace::build(std::size_t ctx, std::vector<Token>& prefix, std::vector<Step>& path) {
    const std::size_t depth = prefix.size();
    for (Token tok = 0; tok < vocab_.vocab_size; ++tok) {
        prefix.push_back(tok);
        path.push_back({ctx, tok});
        if (tok == kEos || depth + 1 == vocab_.max_len) {
            next_[ctx * vocab_.vocab_size + tok] = {true, responses_.size()};
            responses_.emplace_back(prefix);
            step_data_.insert(step_data_.end(), path.begin(), path.end());
            step_offsets_.push_back(step_data_.size());
        } else {
            const std::size_t child = context_depth_.size();
            context_depth_.push_back(depth + 1);
            next_[ctx * vocab_.vocab_size + tok] = {false, child};
            build(child, prefix, path);
        }
        prefix.pop_back();
        path.pop_back();
    }
}

std::span<const Step> ResponseSpace::steps(std::size_t i) const {
    return {step_data_.data() + step_offsets_[i], step_offsets_[i + 1] - step_offsets_[i]};
}

std::size_t ResponseSpace::index_of(const TokenSeq& y) const {
    validate_response(vocab_, y);
    std::size_t ctx = 0;
    for (Token tok : y.tokens) {
        const Transition tr = transition(ctx, tok);
        if (tr.terminal) return tr.index;
        ctx = tr.index;
    }
    throw StructuralError("response does not terminate");
}

std::size_t ResponseSpace::context_of(std::span<const Token> prefix) const {
    PREFSAMPLE_CHECK(prefix.size() < vocab_.max_len, StructuralError, "prefix is not shorter than max_len");
    std::size_t ctx = 0;
    for (Token tok : prefix) {
        PREFSAMPLE_CHECK(tok < vocab_.vocab_size && tok != kEos, StructuralError, "prefix token is EOS or out of range");
        ctx = transition(ctx, tok).index;
    }
    return ctx;
}

std::vector<TokenSeq> enumerate_responses(const VocabSpec& vocab) {
    return ResponseSpace(vocab).responses();
}

PromptSpace PromptSpace::uniform(std::size_t n) {
    PREFSAMPLE_CHECK(n >= 1, StructuralError, "prompt space must be nonempty");
    return PromptSpace{std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

void PromptSpace::validate() const {
    PREFSAMPLE_CHECK(!weights.empty(), StructuralError, "prompt space must be nonempty");
    double total = 0.0;
    for (double w : weights) {
        PREFSAMPLE_CHECK(w >= 0.0 && std::isfinite(w), StructuralError, "prompt weights must be nonnegative");
        total += w;
    }
    PREFSAMPLE_CHECK(std::abs(total - 1.0) <= 1e-12, StructuralError, "prompt weights must sum to 1");
}

}  // namespace prefsample
