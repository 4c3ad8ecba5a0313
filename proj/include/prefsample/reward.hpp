// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "prefsample/cost.hpp"
#include "prefsample/policy.hpp"

namespace prefsample {

// Oracle reward r*(x, y) tabulated over every prompt and response, with a
// declared sup-norm bound R. Realizable oracles remember the generating
// policy theta* (r* = beta log pi*/pi_ref).
class OracleReward {
public:
    static OracleReward from_table(std::shared_ptr<const ResponseSpace> space, std::vector<std::vector<double>> table,
                                   double bound);
    static OracleReward realizable(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta, double bound);

    std::size_t num_prompts() const { return table_.size(); }
    const ResponseSpace& space() const { return *space_; }
    double bound() const { return bound_; }
    double max_abs() const;

    double operator()(std::size_t prompt, std::size_t response) const { return table_[prompt][response]; }
    double operator()(std::size_t prompt, const TokenSeq& y) const;
    std::span<const double> rewards(std::size_t prompt) const { return table_[prompt]; }

    bool is_realizable() const { return theta_star_.has_value(); }
    const LogitPolicy& theta_star() const;
    double realizable_beta() const { return beta_; }

    // Same table, different declared bound; throws if the table violates it.
    OracleReward with_bound(double bound) const;

private:
    OracleReward(std::shared_ptr<const ResponseSpace> space, std::vector<std::vector<double>> table, double bound);

    std::shared_ptr<const ResponseSpace> space_;
    std::vector<std::vector<double>> table_;
    double bound_;
    std::optional<LogitPolicy> theta_star_;
    double beta_ = 0.0;
};

// Response ids are indices into the ResponseSpace enumeration.
struct PreferenceTriple {
    std::size_t prompt;
    std::size_t winner;
    std::size_t loser;
};

double implicit_reward(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt,
                       const TokenSeq& y);
// beta * (log pi_theta - log pi_ref) for every response of the enumeration.
std::vector<double> implicit_rewards(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                     std::size_t prompt);

double bt_probability(const OracleReward& oracle, std::size_t prompt, std::size_t ya, std::size_t yb);
double bt_probability(const OracleReward& oracle, std::size_t prompt, const TokenSeq& ya, const TokenSeq& yb);

// (x, ya, yb) with probability sigma(r*(ya) - r*(yb)), else (x, yb, ya).
// Charges one labeled pair to the ledger.
PreferenceTriple label_pair(const OracleReward& oracle, std::size_t prompt, std::size_t ya, std::size_t yb, Rng& rng,
                            CostLedger& ledger);

// Plain-text oracle tables: one `prompt,tokens,reward` line per response,
// tokens space separated, '#' comments and an optional header line.
OracleReward load_oracle_table(const std::filesystem::path& path, std::shared_ptr<const ResponseSpace> space,
                               std::size_t num_prompts, double bound);
void save_oracle_table(const std::filesystem::path& path, const OracleReward& oracle);

}  // namespace prefsample
