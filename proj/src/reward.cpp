// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "prefsample/error.hpp"
#include "prefsample/mathutil.hpp"
#include "prefsample/textio.hpp"

namespace prefsample {

OracleReward::OracleReward(std::shared_ptr<const ResponseSpace> space, std::vector<std::vector<double>> table,
                           double bound)
    : space_(std::move(space)), table_(std::move(table)), bound_(bound) {
    PREFSAMPLE_CHECK(space_ != nullptr, StructuralError, "oracle needs a response space");
    PREFSAMPLE_CHECK(!table_.empty(), StructuralError, "oracle table has no prompts");
    PREFSAMPLE_CHECK(bound_ > 0.0, StructuralError, "reward bound must be positive");
    for (const auto& row : table_) {
        PREFSAMPLE_CHECK(row.size() == space_->size(), StructuralError, "oracle row does not cover the response space");
        for (double r : row) {
            PREFSAMPLE_CHECK(std::isfinite(r), NumericalError, "oracle reward is not finite");
            PREFSAMPLE_CHECK(std::abs(r) <= bound_, StructuralError,
                             "oracle reward " + format_double(r) + " exceeds bound " + format_double(bound_));
        }
    }
}

OracleReward OracleReward::from_table(std::shared_ptr<const ResponseSpace> space,
                                      std::vector<std::vector<double>> table, double bound) {
    return OracleReward(std::move(space), std::move(table), bound);
}

OracleReward OracleReward::realizable(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta,
                                      double bound) {
    require_same_layout(theta_star, ref);
    PREFSAMPLE_CHECK(beta > 0.0, StructuralError, "beta must be positive");
    std::vector<std::vector<double>> table;
    for (std::size_t x = 0; x < theta_star.num_prompts(); ++x) table.push_back(implicit_rewards(theta_star, ref, beta, x));
    OracleReward oracle(theta_star.space_ptr(), std::move(table), bound);
    oracle.theta_star_ = theta_star;
    oracle.beta_ = beta;
    return oracle;
}

double OracleReward::max_abs() const {
    double m = 0.0;
    for (const auto& row : table_)
        for (double r : row) m = std::max(m, std::abs(r));
    return m;
}

double OracleReward::operator()(std::size_t prompt, const TokenSeq& y) const {
    PREFSAMPLE_CHECK(prompt < table_.size(), StructuralError, "prompt index out of range");
    return table_[prompt][space_->index_of(y)];
}

const LogitPolicy& OracleReward::theta_star() const {
    PREFSAMPLE_CHECK(theta_star_.has_value(), StructuralError, "oracle is not realizable");
    return *theta_star_;
}

OracleReward OracleReward::with_bound(double bound) const {
    OracleReward out(space_, table_, bound);
    out.theta_star_ = theta_star_;
    out.beta_ = beta_;
    return out;
}

double implicit_reward(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt,
                       const TokenSeq& y) {
    require_same_layout(theta, ref);
    return beta * (log_prob(theta, prompt, y) - log_prob(ref, prompt, y));
}

std::vector<double> implicit_rewards(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                     std::size_t prompt) {
    require_same_layout(theta, ref);
    auto out = response_log_probs(theta, prompt);
    const auto lref = response_log_probs(ref, prompt);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = beta * (out[i] - lref[i]);
    return out;
}

double bt_probability(const OracleReward& oracle, std::size_t prompt, std::size_t ya, std::size_t yb) {
    return sigmoid(oracle(prompt, ya) - oracle(prompt, yb));
}

double bt_probability(const OracleReward& oracle, std::size_t prompt, const TokenSeq& ya, const TokenSeq& yb) {
    return sigmoid(oracle(prompt, ya) - oracle(prompt, yb));
}

PreferenceTriple label_pair(const OracleReward& oracle, std::size_t prompt, std::size_t ya, std::size_t yb, Rng& rng,
                            CostLedger& ledger) {
    ledger.add_labeled_pair();
    if (rng.bernoulli(bt_probability(oracle, prompt, ya, yb))) return {prompt, ya, yb};
    return {prompt, yb, ya};
}

OracleReward load_oracle_table(const std::filesystem::path& path, std::shared_ptr<const ResponseSpace> space,
                               std::size_t num_prompts, double bound) {
    std::ifstream in(path);
    PREFSAMPLE_CHECK(in.good(), ConfigError, "cannot open oracle table " + path.string());
    const double nan = std::nan("");
    std::vector<std::vector<double>> table(num_prompts, std::vector<double>(space->size(), nan));
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body(trim(std::string_view(line).substr(0, line.find('#'))));
        if (body.empty() || body.starts_with("prompt")) continue;
        const auto fields = split(body, ',');
        if (fields.size() != 3) fail("expected `prompt,tokens,reward`");
        std::uint64_t prompt = 0;
        if (!parse_u64(fields[0], prompt) || prompt >= num_prompts) fail("bad prompt id '" + fields[0] + "'");
        TokenSeq y;
        for (const auto& tok : split(fields[1], ' ')) {
            if (tok.empty()) continue;
            std::uint64_t t = 0;
            if (!parse_u64(tok, t)) fail("bad token '" + tok + "'");
            y.tokens.push_back(static_cast<Token>(t));
        }
        double r = 0.0;
        if (!parse_double(fields[2], r)) fail("bad reward '" + fields[2] + "'");
        std::size_t idx = 0;
        try {
            idx = space->index_of(y);
        } catch (const StructuralError& e) {
            fail(e.what());
        }
        if (!std::isnan(table[prompt][idx])) fail("duplicate entry for response [" + y.to_string() + "]");
        table[prompt][idx] = r;
    }
    for (std::size_t x = 0; x < num_prompts; ++x)
        for (std::size_t i = 0; i < space->size(); ++i)
            if (std::isnan(table[x][i]))
                throw ConfigError(path.string() + ": missing reward for prompt " + std::to_string(x) + " response [" +
                                  space->response(i).to_string() + "]");
    try {
        return OracleReward::from_table(std::move(space), std::move(table), bound);
    } catch (const StructuralError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_oracle_table(const std::filesystem::path& path, const OracleReward& oracle) {
    std::ofstream out(path);
    PREFSAMPLE_CHECK(out.good(), ConfigError, "cannot write oracle table " + path.string());
    out << "prompt,tokens,reward\n";
    for (std::size_t x = 0; x < oracle.num_prompts(); ++x)
        for (std::size_t i = 0; i < oracle.space().size(); ++i)
            out << x << ',' << oracle.space().response(i).to_string() << ',' << format_double(oracle(x, i)) << '\n';
}

}  // namespace prefsample
