// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "prefsample/dpo.hpp"
#include "prefsample/policy.hpp"
#include "prefsample/reward.hpp"
#include "prefsample/sampling.hpp"

namespace prefsample {

struct ObjectiveReport {
    double expected_reward = 0.0;
    double kl = 0.0;
    double j_value = 0.0;  // expected_reward - beta * kl
    double beta = 0.0;
};

enum class CovarianceForm { Simplified, General };

struct CovarianceEstimate {
    Matrix sigma_star;
    CovarianceForm form = CovarianceForm::Simplified;
    // ||w||_inf times the pseudo-inverse of sigma_star on the non-gauge subspace.
    std::optional<Matrix> omega_bound;
};

// J = E_{x~rho, y~pi_theta}[r*] - beta KL(pi_theta || pi_ref), exactly.
ObjectiveReport evaluate_j(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const OracleReward& oracle,
                           const PromptSpace& prompts);

// (1/2beta) E_{a,b~pi}[(dr* - dr_theta)(grad r_theta(a) - grad r_theta(b))]
Vector grad_j(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const OracleReward& oracle,
              const PromptSpace& prompts);
// (1/beta) E_{y~pi}[(r* - r_theta) grad r_theta(y)]
Vector grad_j_single(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const OracleReward& oracle,
                     const PromptSpace& prompts);

// -(1/beta) sigma_star_simplified at theta*.
Matrix hess_j_at_star(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta, const PromptSpace& prompts);
// Same, after checking that the oracle is realized by theta_star.
Matrix hess_j_at_star(const OracleReward& oracle, const LogitPolicy& ref, const PromptSpace& prompts);

// E_x Cov_{y~pi*}[grad r*(x, y)], grad r* = beta grad log pi*.
CovarianceEstimate sigma_star_simplified(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta,
                                         const PromptSpace& prompts);

// E_{x,(a,b)~mu_bar}[w(x) sigma'(dr*) g g^T], g = grad r*(a) - grad r*(b),
// r* = r_{theta*}. The first form builds the measure at theta*.
CovarianceEstimate sigma_star_general(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta,
                                      const StrategySpec& strategy, const PromptSpace& prompts);
CovarianceEstimate sigma_star_general(const PairMeasure& measure, const LogitPolicy& theta_star,
                                      const LogitPolicy& ref, double beta);

// E_{x, a,b~pi_theta}[g g^T] with g = grad r_theta(a) - grad r_theta(b).
Matrix pair_gradient_second_moment(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                   const PromptSpace& prompts);

// Pseudo-inverse restricted to the non-gauge subspace of `layout`.
Matrix gauge_pseudo_inverse(const LogitPolicy& layout, const Matrix& m);
// Eigenvalues of B^T m B with B the non-gauge basis, ascending.
Vector non_gauge_eigenvalues(const LogitPolicy& layout, const Matrix& m);

// Whitespace-separated rows, shortest round-trip doubles.
void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

}  // namespace prefsample
