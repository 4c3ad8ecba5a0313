// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/verify.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>

#include "prefsample/error.hpp"
#include "prefsample/kernels.hpp"
#include "prefsample/mathutil.hpp"

namespace prefsample {

namespace {

using Index = Eigen::Index;

constexpr double kUnbounded = std::numeric_limits<double>::max();

Index at(std::size_t i) { return static_cast<Index>(i); }

double median(std::vector<double> v) {
    PREFSAMPLE_CHECK(!v.empty(), NumericalError, "median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

VerifyInstance random_instance(const InstanceSpec& spec, std::uint64_t seed, std::uint64_t index) {
    PREFSAMPLE_CHECK(spec.beta > 0.0, StructuralError, "beta must be positive");
    Rng rng(seed, streams::kInstanceBase + index);
    auto space = std::make_shared<const ResponseSpace>(spec.vocab);
    LogitPolicy ref = LogitPolicy::gaussian(space, spec.num_prompts, spec.ref_scale, rng);
    const LogitPolicy d_star = LogitPolicy::gaussian(space, spec.num_prompts, spec.star_scale, rng);
    const LogitPolicy d_theta = LogitPolicy::gaussian(space, spec.num_prompts, spec.theta_scale, rng);
    LogitPolicy theta_star = ref.with_params(ref.params() + d_star.params());
    LogitPolicy theta = ref.with_params(theta_star.params() + d_theta.params());
    OracleReward oracle = OracleReward::realizable(theta_star, ref, spec.beta, kUnbounded);
    oracle = oracle.with_bound(std::max(oracle.max_abs(), std::numeric_limits<double>::min()));
    return {space, ref, theta_star, theta, PromptSpace::uniform(spec.num_prompts), spec.beta, std::move(oracle)};
}

AlignmentPoint alignment_point(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                               const OracleReward& oracle, const PromptSpace& prompts, StrategyKind density) {
    const StrategySpec strategy{density, beta};
    const PairMeasure measure = PairMeasure::build(strategy, theta, ref, prompts);
    const Vector gl = population_loss_gradient(measure, theta, ref, beta, oracle);
    const Vector gj = grad_j(theta, ref, beta, oracle, prompts);

    AlignmentPoint p;
    p.zbar = measure.weights.zbar;
    p.residual = (gl + (beta / p.zbar) * gj).norm();
    for (std::size_t x = 0; x < prompts.size(); ++x) {
        const auto pi = response_probs(theta, x);
        const auto r = implicit_rewards(theta, ref, beta, x);
        const auto rs = oracle.rewards(x);
        const Matrix s = score_matrix(theta, x);
        for (std::size_t y = 0; y < pi.size(); ++y) {
            p.g_bound = std::max(p.g_bound, beta * s.row(at(y)).norm());
            p.r_max = std::max({p.r_max, std::abs(r[y]), std::abs(rs[y])});
        }
        double m2 = 0.0;
        for (std::size_t a = 0; a < pi.size(); ++a)
            for (std::size_t b = 0; b < pi.size(); ++b) {
                const double e = (rs[a] - rs[b]) - (r[a] - r[b]);
                m2 += pi[a] * pi[b] * e * e;
            }
        p.second_moment += prompts.weights[x] * m2;
    }
    return p;
}

AlignmentReport check_alignment(const LogitPolicy& theta, const LogitPolicy& theta_star, const LogitPolicy& ref,
                                double beta, const PromptSpace& prompts, const AlignmentOptions& options) {
    require_same_layout(theta, theta_star);
    PREFSAMPLE_CHECK(options.t > 0.0, StructuralError, "perturbation size must be positive");
    const OracleReward oracle = OracleReward::realizable(theta_star, ref, beta, kUnbounded);
    std::map<double, AlignmentPoint> cache;
    auto point = [&](double t) -> const AlignmentPoint& {
        auto it = cache.find(t);
        if (it != cache.end()) return it->second;
        const LogitPolicy th = theta.with_params(theta_star.params() + t * (theta.params() - theta_star.params()));
        AlignmentPoint p = alignment_point(th, ref, beta, oracle, prompts, options.density);
        p.t = t;
        return cache.emplace(t, p).first->second;
    };

    AlignmentReport rep;
    const AlignmentPoint& p = point(options.t);
    const AlignmentPoint& half = point(options.t / 2);
    rep.residual_norm = p.residual;
    rep.g_bound = p.g_bound;
    rep.zbar = p.zbar;
    rep.quad_ratio = p.residual / half.residual;
    rep.r_bound = options.reward_bound.value_or(p.r_max);
    if (options.reward_bound && p.r_max > *options.reward_bound) {
        rep.valid = false;
        rep.note = "reward magnitude " + std::to_string(p.r_max) + " exceeds configured R " +
                   std::to_string(*options.reward_bound);
    }
    rep.bound_value = 0.1 * (1.0 + std::exp(2.0 * rep.r_bound)) * rep.g_bound / rep.zbar * p.second_moment;
    rep.holds = rep.residual_norm <= rep.bound_value;
    for (double t : options.sweep) {
        rep.sweep.push_back(point(t));
        rep.sweep_ratios.push_back(point(t).residual / point(t / 2).residual);
    }
    return rep;
}

double check_density_ratio(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt) {
    const Matrix mu = symmetrize(pair_density({StrategyKind::TPILAF, beta}, theta, ref, prompt));
    const auto pi = response_probs(theta, prompt);
    const auto r = implicit_rewards(theta, ref, beta, prompt);
    const PartitionValues parts = partitions_from_tables(pi, r);
    double dev = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a)
        for (std::size_t b = 0; b < pi.size(); ++b) {
            const double lhs = mu(at(a), at(b)) / (pi[a] * pi[b]);
            const double rhs = 1.0 / (2.0 * (1.0 + parts.zbar_contrib) * sigmoid_derivative(r[a] - r[b]));
            dev = std::max(dev, std::abs(lhs - rhs));
        }
    return dev;
}

double ReplicationStudy::mean_error_norm() const {
    PREFSAMPLE_CHECK(!error_norms.empty(), NumericalError, "study has no converged replications");
    return std::accumulate(error_norms.begin(), error_norms.end(), 0.0) / static_cast<double>(error_norms.size());
}

double count_loss(const std::vector<Matrix>& counts, const LogitPolicy& theta, const LogitPolicy& ref, double beta) {
    double total = 0.0;
    for (std::size_t x = 0; x < counts.size(); ++x) {
        const Matrix& k = counts[x];
        if (k.size() == 0) continue;
        const auto r = implicit_rewards(theta, ref, beta, x);
        for (Index a = 0; a < k.rows(); ++a)
            for (Index b = 0; b < k.cols(); ++b)
                if (k(a, b) != 0.0) total -= k(a, b) * log_sigmoid(r[a] - r[b]);
    }
    return total;
}

Vector count_loss_gradient(const std::vector<Matrix>& counts, const LogitPolicy& theta, const LogitPolicy& ref,
                           double beta) {
    Vector grad = Vector::Zero(at(theta.dim()));
    for (std::size_t x = 0; x < counts.size(); ++x) {
        const Matrix& k = counts[x];
        if (k.size() == 0) continue;
        const auto r = implicit_rewards(theta, ref, beta, x);
        const Matrix c = kernels::fill_pairs(r.size(), [&](std::size_t a, std::size_t b) {
            const double kab = k(at(a), at(b));
            return kab == 0.0 ? 0.0 : -kab * sigmoid(r[b] - r[a]);
        });
        grad.segment(at(theta.offset(x, 0)), at(theta.block_dim())) =
            beta * kernels::pair_difference_sum(c, score_matrix(theta, x));
    }
    return grad;
}

FitResult fit_counts(const std::vector<Matrix>& counts, const LogitPolicy& init, const LogitPolicy& ref, double beta,
                     std::size_t max_iterations, double grad_tol) {
    // Gradient descent with Barzilai-Borwein trial steps and a nonmonotone
    // Armijo backtracking test over the last 10 losses.
    constexpr double kArmijo = 1e-4;
    constexpr std::size_t kMemory = 10;
    FitResult out;
    Vector theta = init.params();
    double loss = count_loss(counts, init, ref, beta);
    Vector g = count_loss_gradient(counts, init, ref, beta);
    std::deque<double> history{loss};
    double alpha = 1.0 / std::max(1.0, g.norm());
    for (std::size_t it = 0;; ++it) {
        out.grad_norm = g.norm();
        out.iterations = it;
        if (out.grad_norm < grad_tol) {
            out.converged = true;
            break;
        }
        if (it == max_iterations) break;
        const double ref_loss = *std::max_element(history.begin(), history.end());
        const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(ref_loss);
        const double g2 = out.grad_norm * out.grad_norm;
        Vector next;
        double next_loss = 0.0;
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            next = theta - alpha * g;
            next_loss = count_loss(counts, init.with_params(next), ref, beta);
            if (std::isfinite(next_loss) && next_loss <= ref_loss - kArmijo * alpha * g2 + slack) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        const Vector g_next = count_loss_gradient(counts, init.with_params(next), ref, beta);
        const Vector s = next - theta, y = g_next - g;
        const double sy = s.dot(y);
        alpha = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : std::min(alpha * 2.0, 1e12);
        theta = std::move(next);
        g = g_next;
        loss = next_loss;
        history.push_back(loss);
        if (history.size() > kMemory) history.pop_front();
    }
    out.theta = std::move(theta);
    return out;
}

ReplicationStudy run_replication_study(const LogitPolicy& theta_star, const LogitPolicy& ref, double beta,
                                       const StrategySpec& strategy, const PromptSpace& prompts, std::size_t n,
                                       std::size_t m, std::uint64_t seed, const ReplicationOptions& options) {
    require_same_layout(theta_star, ref);
    prompts.validate();
    PREFSAMPLE_CHECK(strategy.beta == beta, StructuralError, "strategy beta must equal beta");
    PREFSAMPLE_CHECK(n >= 1 && m >= 1, StructuralError, "study needs n >= 1 and m >= 1");
    const OracleReward oracle = OracleReward::realizable(theta_star, ref, beta, kUnbounded);
    const LogitPolicy& sampling = options.sampling_theta ? *options.sampling_theta : theta_star;
    require_same_layout(sampling, ref);
    std::vector<double> w(prompts.size(), 1.0);
    if (strategy.kind == StrategyKind::TPILAF && strategy.exact_partitions)
        w = compute_weights(sampling, ref, beta, prompts).w;
    const double j_star = evaluate_j(theta_star, ref, beta, oracle, prompts).j_value;
    const auto N = at(theta_star.space().size());

    std::vector<std::optional<FitResult>> fits(m);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t r = 0; r < m; ++r) {
        Rng rng(seed, streams::kReplicationBase + r);
        CostLedger ledger;
        PairSampler sampler(strategy, sampling, ref);
        std::vector<Matrix> counts(prompts.size(), Matrix::Zero(N, N));
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t x = rng.categorical(prompts.weights);
            const auto pair = sampler.draw(x, rng, ledger);
            const auto t = label_pair(oracle, x, pair.first, pair.second, rng, ledger);
            counts[x](at(t.winner), at(t.loser)) += w[x] * inv_n;
        }
        fits[r] = fit_counts(counts, theta_star, ref, beta, options.max_iterations, options.grad_tol);
    }

    ReplicationStudy study;
    study.n_samples = n;
    study.n_replications = m;
    study.d_eff = effective_dimension(theta_star);
    for (const auto& f : fits) {
        if (!f->converged) {
            ++study.dropped;
            continue;
        }
        const LogitPolicy hat = theta_star.with_params(f->theta);
        study.theta_hats.push_back(f->theta);
        study.grad_norms.push_back(f->grad_norm);
        study.iterations.push_back(f->iterations);
        study.error_norms.push_back(project_off_gauge(theta_star, f->theta - theta_star.params()).norm());
        study.value_gaps.push_back(static_cast<double>(n) *
                                   (j_star - evaluate_j(hat, ref, beta, oracle, prompts).j_value));
    }
    return study;
}

double covariance_domination(const ReplicationStudy& study, const LogitPolicy& theta_star, const Matrix& sigma_star) {
    const std::size_t m = study.theta_hats.size();
    PREFSAMPLE_CHECK(m >= 2, NumericalError, "need at least two replications");
    const Matrix basis = gauge_complement_basis(theta_star);
    const double sn = std::sqrt(static_cast<double>(study.n_samples));
    Matrix z(basis.cols(), at(m));
    for (std::size_t r = 0; r < m; ++r)
        z.col(at(r)) = sn * basis.transpose() * (study.theta_hats[r] - theta_star.params());
    const Vector mean = z.rowwise().mean();
    z.colwise() -= mean;
    const Matrix c_hat = z * z.transpose() / static_cast<double>(m - 1);

    const Matrix s = basis.transpose() * (0.5 * (sigma_star + sigma_star.transpose())) * basis;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix half = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    const Matrix k = half * c_hat * half;
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (k + k.transpose()), Eigen::EigenvaluesOnly)
        .eigenvalues()
        .maxCoeff();
}

double chi_square_tail_bound(double eps, std::size_t d) {
    return std::exp(-0.5 * static_cast<double>(d) * (eps - std::log1p(eps)));
}

bool TailReport::pass() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const TailRow& r) { return r.pass; });
}

TailReport chi_square_tail_check(const ReplicationStudy& study, std::size_t d_eff, const std::vector<double>& eps) {
    PREFSAMPLE_CHECK(d_eff >= 1, StructuralError, "degrees of freedom must be >= 1");
    PREFSAMPLE_CHECK(!study.value_gaps.empty(), NumericalError, "study has no value gaps");
    const boost::math::chi_squared dist(static_cast<double>(d_eff));
    TailReport rep;
    rep.d_eff = d_eff;
    rep.scale = boost::math::median(dist) / median(study.value_gaps);
    const double m = static_cast<double>(study.value_gaps.size());
    for (double e : eps) {
        TailRow row;
        row.eps = e;
        row.threshold = (1.0 + e) * static_cast<double>(d_eff);
        const auto above = std::count_if(study.value_gaps.begin(), study.value_gaps.end(),
                                         [&](double g) { return rep.scale * g > row.threshold; });
        row.empirical = static_cast<double>(above) / m;
        row.chi_square_tail = boost::math::cdf(boost::math::complement(dist, row.threshold));
        row.closed_form = chi_square_tail_bound(e, d_eff);
        row.se = std::sqrt(row.chi_square_tail * (1.0 - row.chi_square_tail) / m);
        row.pass = std::isfinite(rep.scale) && rep.scale > 0.0 && row.empirical <= row.chi_square_tail + 3.0 * row.se;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace prefsample
