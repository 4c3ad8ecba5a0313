// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prefsample/dpo.hpp"
#include "prefsample/objective.hpp"

namespace prefsample {

// Random verification instance: ref ~ N(0, ref_scale^2) logits,
// theta* = ref + N(0, star_scale^2), theta = theta* + N(0, theta_scale^2),
// realizable oracle r* = r_{theta*}. Instance i of a sweep draws from stream
// kInstanceBase + i under `seed`.
struct InstanceSpec {
    VocabSpec vocab{3, 2};
    std::size_t num_prompts = 1;
    double beta = 0.1;
    double ref_scale = 1.0;
    double star_scale = 1.0;
    double theta_scale = 1.0;
};

struct VerifyInstance {
    std::shared_ptr<const ResponseSpace> space;
    LogitPolicy ref;
    LogitPolicy theta_star;
    LogitPolicy theta;
    PromptSpace prompts;
    double beta;
    OracleReward oracle;
};

VerifyInstance random_instance(const InstanceSpec& spec, std::uint64_t seed, std::uint64_t index);

struct AlignmentOptions {
    StrategyKind density = StrategyKind::TPILAF;  // Vanilla gives the negative control
    double t = 0.1;
    std::optional<double> reward_bound;  // R; defaults to the measured sup of |r*|, |r_theta|
    std::vector<double> sweep{0.2, 0.1, 0.05, 0.025};
};

struct AlignmentPoint {
    double t = 0.0;
    double residual = 0.0;       // ||grad L + (beta/zbar) grad J||
    double second_moment = 0.0;  // E_{x, a,b~pi_theta}[(dr* - dr_theta)^2]
    double g_bound = 0.0;        // max ||grad r_theta(x, y)||
    double r_max = 0.0;          // max |r*|, |r_theta|
    double zbar = 0.0;
};

struct AlignmentReport {
    double residual_norm = 0.0;
    double bound_value = 0.0;
    double g_bound = 0.0;
    double r_bound = 0.0;
    double zbar = 0.0;
    double quad_ratio = 0.0;  // residual(t) / residual(t/2)
    bool valid = true;        // false when |r| exceeds the configured R
    bool holds = true;        // residual <= bound
    std::string note;
    std::vector<AlignmentPoint> sweep;
    std::vector<double> sweep_ratios;  // residual(t_i) / residual(t_i / 2)
};

// Residual and bound ingredients at one parameter value; the density is
// built at theta itself (weights from compute_weights under T-PILAF, 1 under Vanilla).
AlignmentPoint alignment_point(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                               const OracleReward& oracle, const PromptSpace& prompts, StrategyKind density);

// Evaluates along theta_t = theta* + t (theta - theta*).
AlignmentReport check_alignment(const LogitPolicy& theta, const LogitPolicy& theta_star, const LogitPolicy& ref,
                                double beta, const PromptSpace& prompts, const AlignmentOptions& options = {});

// max_{a,b} |mu_bar / (pi pi) - [2 (1 + Z+ Z-) sigma'(dr_theta)]^-1| under T-PILAF.
double check_density_ratio(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt);

struct ReplicationOptions {
    std::size_t max_iterations = 100000;
    double grad_tol = 1e-7;
    std::optional<LogitPolicy> sampling_theta;  // defaults to theta*
};

struct ReplicationStudy {
    std::size_t n_samples = 0;
    std::size_t n_replications = 0;
    std::size_t dropped = 0;
    std::size_t d_eff = 0;
    std::vector<Vector> theta_hats;
    std::vector<double> value_gaps;   // n (J(theta*) - J(theta_hat))
    std::vector<double> grad_norms;   // ||grad L_hat(theta_hat)||
    std::vector<double> error_norms;  // gauge-projected ||theta_hat - theta*||
    std::vector<std::size_t> iterations;

    double mean_error_norm() const;
};

// m replications of n labeled pairs each, fitted by full-batch descent.
// Replication r uses stream kReplicationBase + r under `seed`; replications
// run in parallel and results are stored by index.
ReplicationStudy run_replication_study(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta,
                                       const StrategySpec& strategy, const PromptSpace& prompts, std::size_t n,
                                       std::size_t m, std::uint64_t seed, const ReplicationOptions& options = {});

// Minimizer of the weighted empirical loss from aggregated counts.
struct FitResult {
    Vector theta;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};
// counts[x](w, l): total weight of triples with that winner and loser, divided by n.
FitResult fit_counts(const std::vector<Matrix>& counts, const LogitPolicy& init, const LogitPolicy& ref, double beta,
                     std::size_t max_iterations, double grad_tol);
double count_loss(const std::vector<Matrix>& counts, const LogitPolicy& theta, const LogitPolicy& ref, double beta);
Vector count_loss_gradient(const std::vector<Matrix>& counts, const LogitPolicy& theta, const LogitPolicy& ref,
                           double beta);

// Largest eigenvalue of sigma^{1/2} C_hat sigma^{1/2} on the non-gauge subspace,
// with C_hat the sample covariance of sqrt(n)(theta_hat - theta*).
double covariance_domination(const ReplicationStudy& study, const LogitPolicy& theta_star, const Matrix& sigma_star);

struct TailRow {
    double eps = 0.0;
    double threshold = 0.0;       // (1 + eps) d_eff
    double empirical = 0.0;       // fraction of rescaled gaps above threshold
    double chi_square_tail = 0.0; // P(chi2_d > threshold)
    double closed_form = 0.0;     // exp(-(d/2)(eps - log(1 + eps)))
    double se = 0.0;              // sqrt(p (1 - p) / m) at p = chi_square_tail
    bool pass = false;            // empirical <= chi_square_tail + 3 se
};

struct TailReport {
    std::size_t d_eff = 0;
    double scale = 0.0;  // median(chi2_d) / median(gaps)
    std::vector<TailRow> rows;
    bool pass() const;
};

double chi_square_tail_bound(double eps, std::size_t d);
TailReport chi_square_tail_check(const ReplicationStudy& study, std::size_t d_eff,
                                 const std::vector<double>& eps = {0.5, 1.0, 2.0});

}  // namespace prefsample
