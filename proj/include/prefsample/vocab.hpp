// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prefsample {

using Token = std::uint32_t;
inline constexpr Token kEos = 0;

struct VocabSpec {
    std::size_t vocab_size = 2;  // token 0 is EOS
    std::size_t max_len = 1;

    void validate() const;
    bool operator==(const VocabSpec&) const = default;
};

// A complete response. Shorter than max_len means it ends in EOS; nothing
// follows EOS.
struct TokenSeq {
    std::vector<Token> tokens;

    TokenSeq() = default;
    TokenSeq(std::initializer_list<Token> t) : tokens(t) {}
    explicit TokenSeq(std::vector<Token> t) : tokens(std::move(t)) {}

    std::size_t size() const { return tokens.size(); }
    std::string to_string() const;  // space separated token ids
    auto operator<=>(const TokenSeq&) const = default;
};

// Throws StructuralError when `y` is not a valid complete response.
void validate_response(const VocabSpec& vocab, const TokenSeq& y);

struct Step {
    std::size_t context;
    Token token;
};

// The finite response space of a VocabSpec, in lexicographic order, with
// the per-token contexts each response passes through. Contexts are the
// EOS-free prefixes of length < max_len, numbered in depth-first order
// (context 0 is the empty prefix).
class ResponseSpace {
public:
    explicit ResponseSpace(VocabSpec vocab);

    const VocabSpec& vocab() const { return vocab_; }
    std::size_t vocab_size() const { return vocab_.vocab_size; }
    std::size_t num_contexts() const { return context_depth_.size(); }
    std::size_t size() const { return responses_.size(); }

    const TokenSeq& response(std::size_t i) const { return responses_[i]; }
    const std::vector<TokenSeq>& responses() const { return responses_; }
    std::span<const Step> steps(std::size_t i) const;
    std::size_t context_depth(std::size_t ctx) const { return context_depth_[ctx]; }

    // Index of `y` in the lexicographic enumeration; StructuralError if invalid.
    std::size_t index_of(const TokenSeq& y) const;
    // Context id of an EOS-free prefix shorter than max_len; StructuralError otherwise.
    std::size_t context_of(std::span<const Token> prefix) const;

    // After emitting `token` in context `ctx`: either the next context or,
    // when the response terminates, the finished response index.
    struct Transition {
        bool terminal;
        std::size_t index;
    };
    Transition transition(std::size_t ctx, Token token) const { return next_[ctx * vocab_.vocab_size + token]; }

    // Closed form: sum_{k<T} (V-1)^k  EOS-terminated + (V-1)^T full length.
    static std::size_t count(const VocabSpec& vocab);
    static std::size_t count_contexts(const VocabSpec& vocab);

private:
    void build(std::size_t ctx, std::vector<Token>& prefix, std::vector<Step>& path);

    VocabSpec vocab_;
    std::vector<TokenSeq> responses_;
    std::vector<std::size_t> step_offsets_;
    std::vector<Step> step_data_;
    std::vector<std::size_t> context_depth_;
    std::vector<Transition> next_;
};

std::vector<TokenSeq> enumerate_responses(const VocabSpec& vocab);

// Prompt distribution rho over prompt ids 0..size()-1.
struct PromptSpace {
    std::vector<double> weights;

    static PromptSpace uniform(std::size_t n);
    std::size_t size() const { return weights.size(); }
    void validate() const;
};

}  // namespace prefsample
