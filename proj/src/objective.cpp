// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/objective.hpp"

#include <fstream>

#include "prefsample/error.hpp"
#include "prefsample/kernels.hpp"
#include "prefsample/mathutil.hpp"
#include "prefsample/textio.hpp"

namespace prefsample {

namespace {

using Index = Eigen::Index;

void check_inputs(const LogitPolicy& theta, const LogitPolicy& ref, const PromptSpace& prompts) {
    require_same_layout(theta, ref);
    prompts.validate();
    PREFSAMPLE_CHECK(prompts.size() == theta.num_prompts(), StructuralError, "prompt space size does not match policy");
}

void check_oracle(const LogitPolicy& theta, const OracleReward& oracle) {
    PREFSAMPLE_CHECK(oracle.num_prompts() == theta.num_prompts() && oracle.space().vocab() == theta.vocab(),
                     StructuralError, "oracle does not match the policy layout");
}

Index at(std::size_t i) { return static_cast<Index>(i); }

// Block-diagonal assembly: per prompt, pair_outer_sum(C_x, S_x) with C_x from `coeff`.
template <class Coeff>
Matrix per_prompt_outer(const LogitPolicy& theta, const PromptSpace& prompts, Coeff&& coeff) {
    const auto d = at(theta.dim());
    const auto block = at(theta.block_dim());
    Matrix out = Matrix::Zero(d, d);
    for (std::size_t x = 0; x < prompts.size(); ++x) {
        if (prompts.weights[x] == 0.0) continue;
        const Matrix c = coeff(x);
        const auto off = at(theta.offset(x, 0));
        out.block(off, off, block, block) = kernels::pair_outer_sum(c, score_matrix(theta, x));
    }
    return out;
}

}  // namespace

ObjectiveReport evaluate_j(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const OracleReward& oracle,
                           const PromptSpace& prompts) {
    check_inputs(theta, ref, prompts);
    check_oracle(theta, oracle);
    ObjectiveReport rep;
    rep.beta = beta;
    for (std::size_t x = 0; x < prompts.size(); ++x) {
        const double rho = prompts.weights[x];
        if (rho == 0.0) continue;
        const auto lp = response_log_probs(theta, x);
        const auto lq = response_log_probs(ref, x);
        const auto rs = oracle.rewards(x);
        double er = 0.0, kl = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) {
            const double p = std::exp(lp[i]);
            er += p * rs[i];
            if (p > 0.0) kl += p * (lp[i] - lq[i]);
        }
        rep.expected_reward += rho * er;
        rep.kl += rho * kl;
    }
    rep.j_value = rep.expected_reward - beta * rep.kl;
    return rep;
}

Vector grad_j(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const OracleReward& oracle,
              const PromptSpace& prompts) {
    check_inputs(theta, ref, prompts);
    check_oracle(theta, oracle);
    Vector grad = Vector::Zero(at(theta.dim()));
    for (std::size_t x = 0; x < prompts.size(); ++x) {
        const double rho = prompts.weights[x];
        if (rho == 0.0) continue;
        const auto pi = response_probs(theta, x);
        const auto r = implicit_rewards(theta, ref, beta, x);
        const auto rs = oracle.rewards(x);
        // (1/2beta) * beta grad log pi leaves a factor 1/2.
        const Matrix c = kernels::fill_pairs(pi.size(), [&](std::size_t a, std::size_t b) {
            return 0.5 * rho * pi[a] * pi[b] * ((rs[a] - rs[b]) - (r[a] - r[b]));
        });
        grad.segment(at(theta.offset(x, 0)), at(theta.block_dim())) =
            kernels::pair_difference_sum(c, score_matrix(theta, x));
    }
    return grad;
}

Vector grad_j_single(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const OracleReward& oracle,
                     const PromptSpace& prompts) {
    check_inputs(theta, ref, prompts);
    check_oracle(theta, oracle);
    Vector grad = Vector::Zero(at(theta.dim()));
    for (std::size_t x = 0; x < prompts.size(); ++x) {
        const double rho = prompts.weights[x];
        if (rho == 0.0) continue;
        const auto pi = response_probs(theta, x);
        const auto r = implicit_rewards(theta, ref, beta, x);
        const auto rs = oracle.rewards(x);
        Vector v(at(pi.size()));
        for (std::size_t i = 0; i < pi.size(); ++i) v[at(i)] = rho * pi[i] * (rs[i] - r[i]);
        grad.segment(at(theta.offset(x, 0)), at(theta.block_dim())) =
            kernels::transpose_times(score_matrix(theta, x), v);
    }
    return grad;
}

CovarianceEstimate sigma_star_simplified(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta,
                                         const PromptSpace& prompts) {
    check_inputs(theta_star, ref, prompts);
    // Cov[X] = (1/2) E_{a,b iid}[(X_a - X_b)(X_a - X_b)^T]
    Matrix sigma = per_prompt_outer(theta_star, prompts, [&](std::size_t x) {
        const auto pi = response_probs(theta_star, x);
        const double s = 0.5 * prompts.weights[x] * beta * beta;
        return kernels::fill_pairs(pi.size(), [&](std::size_t a, std::size_t b) { return s * pi[a] * pi[b]; });
    });
    CovarianceEstimate est{std::move(sigma), CovarianceForm::Simplified, std::nullopt};
    est.omega_bound = gauge_pseudo_inverse(theta_star, est.sigma_star);
    return est;
}

Matrix hess_j_at_star(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta, const PromptSpace& prompts) {
    PREFSAMPLE_CHECK(beta > 0.0, StructuralError, "beta must be positive");
    return -sigma_star_simplified(theta_star, ref, beta, prompts).sigma_star / beta;
}

Matrix hess_j_at_star(const OracleReward& oracle, const LogitPolicy& ref, const PromptSpace& prompts) {
    PREFSAMPLE_CHECK(oracle.is_realizable(), StructuralError, "Hessian at the optimum needs a realizable oracle");
    return hess_j_at_star(oracle.theta_star(), ref, oracle.realizable_beta(), prompts);
}

CovarianceEstimate sigma_star_general(const PairMeasure& measure, const LogitPolicy& theta_star,
                                      const LogitPolicy& ref, double beta) {
    check_inputs(theta_star, ref, measure.prompts);
    Matrix sigma = per_prompt_outer(theta_star, measure.prompts, [&](std::size_t x) {
        const auto r = implicit_rewards(theta_star, ref, beta, x);
        const Matrix& mu = measure.mu_bar[x];
        const double s = measure.prompts.weights[x] * measure.weights.w[x] * beta * beta;
        return kernels::fill_pairs(r.size(), [&](std::size_t a, std::size_t b) {
            return s * mu(at(a), at(b)) * sigmoid_derivative(r[a] - r[b]);
        });
    });
    CovarianceEstimate est{std::move(sigma), CovarianceForm::General, std::nullopt};
    est.omega_bound = measure.weights.sup_norm() * gauge_pseudo_inverse(theta_star, est.sigma_star);
    return est;
}

CovarianceEstimate sigma_star_general(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta,
                                      const StrategySpec& strategy, const PromptSpace& prompts) {
    PREFSAMPLE_CHECK(strategy.beta == beta, StructuralError, "strategy beta must equal beta");
    return sigma_star_general(PairMeasure::build(strategy, theta_star, ref, prompts), theta_star, ref, beta);
}

Matrix pair_gradient_second_moment(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                   const PromptSpace& prompts) {
    check_inputs(theta, ref, prompts);
    return per_prompt_outer(theta, prompts, [&](std::size_t x) {
        const auto pi = response_probs(theta, x);
        const double s = prompts.weights[x] * beta * beta;
        return kernels::fill_pairs(pi.size(), [&](std::size_t a, std::size_t b) { return s * pi[a] * pi[b]; });
    });
}

Matrix gauge_pseudo_inverse(const LogitPolicy& layout, const Matrix& m) {
    const Matrix basis = gauge_complement_basis(layout);
    const Matrix reduced = basis.transpose() * (0.5 * (m + m.transpose())) * basis;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(reduced);
    const Vector& ev = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    Vector inv(ev.size());
    for (Index i = 0; i < ev.size(); ++i) inv[i] = std::abs(ev[i]) > cutoff ? 1.0 / ev[i] : 0.0;
    const Matrix& q = eig.eigenvectors();
    return basis * q * inv.asDiagonal() * q.transpose() * basis.transpose();
}

Vector non_gauge_eigenvalues(const LogitPolicy& layout, const Matrix& m) {
    const Matrix basis = gauge_complement_basis(layout);
    const Matrix reduced = basis.transpose() * (0.5 * (m + m.transpose())) * basis;
    return Eigen::SelfAdjointEigenSolver<Matrix>(reduced, Eigen::EigenvaluesOnly).eigenvalues();
}

void write_matrix(std::ostream& out, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ' ';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    PREFSAMPLE_CHECK(out.good(), ConfigError, "cannot write " + path.string());
    write_matrix(out, m);
}

}  // namespace prefsample
