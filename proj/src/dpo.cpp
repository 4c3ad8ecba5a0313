// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/dpo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "prefsample/error.hpp"
#include "prefsample/kernels.hpp"
#include "prefsample/mathutil.hpp"
#include "prefsample/objective.hpp"

namespace prefsample {

namespace {

using Index = Eigen::Index;

double response_log_prob(const LogitPolicy& policy, std::size_t prompt, std::size_t response) {
    double lp = 0.0;
    for (const Step& s : policy.space().steps(response)) {
        const auto h = policy.logits(prompt, s.context);
        lp += h[s.token] - log_sum_exp(h);
    }
    return lp;
}

double implicit(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t prompt,
                std::size_t response) {
    return beta * (response_log_prob(theta, prompt, response) - response_log_prob(ref, prompt, response));
}

// grad += c * grad log pi(y | x)
void add_score(const LogitPolicy& theta, std::size_t prompt, std::size_t response, double c, Vector& grad,
               std::vector<double>& scratch) {
    for (const Step& s : theta.space().steps(response)) {
        softmax(theta.logits(prompt, s.context), scratch);
        const auto base = static_cast<Index>(theta.offset(prompt, s.context));
        for (std::size_t k = 0; k < scratch.size(); ++k) grad[base + static_cast<Index>(k)] -= c * scratch[k];
        grad[base + static_cast<Index>(s.token)] += c;
    }
}

void check_batch(const LogitPolicy& theta, const LogitPolicy& ref, const DpoBatch& batch) {
    require_same_layout(theta, ref);
    batch.validate();
    const std::size_t n = theta.space().size();
    for (const auto& t : batch.triples)
        PREFSAMPLE_CHECK(t.prompt < theta.num_prompts() && t.winner < n && t.loser < n, StructuralError,
                         "preference triple out of range");
}

void check_measure(const PairMeasure& m, const LogitPolicy& theta, const LogitPolicy& ref,
                   const OracleReward& oracle) {
    require_same_layout(theta, ref);
    PREFSAMPLE_CHECK(m.prompts.size() == theta.num_prompts() && oracle.num_prompts() == theta.num_prompts(),
                     StructuralError, "measure, oracle and policy disagree on the prompt count");
    PREFSAMPLE_CHECK(oracle.space().vocab() == theta.vocab(), StructuralError, "oracle vocabulary differs from policy");
}

std::string lower(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

}  // namespace

void DpoBatch::validate() const {
    PREFSAMPLE_CHECK(!triples.empty(), NumericalError, "empty preference batch");
    PREFSAMPLE_CHECK(weights.empty() || weights.size() == triples.size(), StructuralError,
                     "weights must match the number of triples");
    for (double w : weights) PREFSAMPLE_CHECK(w > 0.0 && std::isfinite(w), StructuralError, "weights must be positive");
}

double empirical_loss(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const DpoBatch& batch) {
    check_batch(theta, ref, batch);
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch.triples[i];
        const double m = implicit(theta, ref, beta, t.prompt, t.winner) - implicit(theta, ref, beta, t.prompt, t.loser);
        total -= batch.weight(i) * log_sigmoid(m);
    }
    const double loss = total / static_cast<double>(batch.size());
    PREFSAMPLE_CHECK(std::isfinite(loss), NumericalError, "loss is not finite");
    return loss;
}

Vector loss_gradient(const LogitPolicy& theta, const LogitPolicy& ref, double beta, const DpoBatch& batch) {
    check_batch(theta, ref, batch);
    Vector grad = Vector::Zero(static_cast<Index>(theta.dim()));
    std::vector<double> scratch(theta.space().vocab_size());
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch.triples[i];
        if (t.winner == t.loser) continue;
        const double m = implicit(theta, ref, beta, t.prompt, t.winner) - implicit(theta, ref, beta, t.prompt, t.loser);
        const double c = -batch.weight(i) * sigmoid(-m) * beta * inv_n;
        add_score(theta, t.prompt, t.winner, c, grad, scratch);
        add_score(theta, t.prompt, t.loser, -c, grad, scratch);
    }
    return grad;
}

PairMeasure PairMeasure::build(const StrategySpec& strategy, const LogitPolicy& sampling_theta,
                               const LogitPolicy& ref, const PromptSpace& prompts) {
    PREFSAMPLE_CHECK(has_closed_form_density(strategy), UnsupportedStrategy,
                     "no closed-form pair density for strategy " + strategy.name());
    prompts.validate();
    PairMeasure m;
    m.strategy = strategy;
    m.prompts = prompts;
    m.weights = strategy_weights(strategy, sampling_theta, ref, prompts);
    m.mu_bar.reserve(prompts.size());
    for (std::size_t x = 0; x < prompts.size(); ++x)
        m.mu_bar.push_back(symmetrize(pair_density(strategy, sampling_theta, ref, x)));
    return m;
}

double population_loss(const PairMeasure& measure, const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                       const OracleReward& oracle) {
    check_measure(measure, theta, ref, oracle);
    double total = 0.0;
    for (std::size_t x = 0; x < measure.prompts.size(); ++x) {
        const double rho = measure.prompts.weights[x];
        if (rho == 0.0) continue;
        const auto r = implicit_rewards(theta, ref, beta, x);
        const auto rs = oracle.rewards(x);
        const Matrix& mu = measure.mu_bar[x];
        double s = 0.0;
        for (Index a = 0; a < mu.rows(); ++a)
            for (Index b = 0; b < mu.cols(); ++b) {
                const double ds = rs[a] - rs[b], dt = r[a] - r[b];
                s += mu(a, b) * -(sigmoid(ds) * log_sigmoid(dt) + sigmoid(-ds) * log_sigmoid(-dt));
            }
        total += rho * measure.weights.w[x] * s;
    }
    return total;
}

Vector population_loss_gradient(const PairMeasure& measure, const LogitPolicy& theta, const LogitPolicy& ref,
                                double beta, const OracleReward& oracle) {
    check_measure(measure, theta, ref, oracle);
    Vector grad = Vector::Zero(static_cast<Index>(theta.dim()));
    const auto block = static_cast<Index>(theta.block_dim());
    for (std::size_t x = 0; x < measure.prompts.size(); ++x) {
        const double rho = measure.prompts.weights[x];
        if (rho == 0.0) continue;
        const auto r = implicit_rewards(theta, ref, beta, x);
        const auto rs = oracle.rewards(x);
        const Matrix& mu = measure.mu_bar[x];
        const double scale = -rho * measure.weights.w[x];
        const Matrix c = kernels::fill_pairs(r.size(), [&](std::size_t a, std::size_t b) {
            return scale * mu(static_cast<Index>(a), static_cast<Index>(b)) *
                   (sigmoid(rs[a] - rs[b]) - sigmoid(r[a] - r[b]));
        });
        grad.segment(static_cast<Index>(theta.offset(x, 0)), block) =
            beta * kernels::pair_difference_sum(c, score_matrix(theta, x));
    }
    return grad;
}

Vector population_loss_gradient(const LogitPolicy& theta, const LogitPolicy& ref, double beta,
                                const StrategySpec& strategy, const OracleReward& oracle, const PromptSpace& prompts) {
    PREFSAMPLE_CHECK(strategy.beta == beta, StructuralError, "strategy beta must equal the loss beta");
    return population_loss_gradient(PairMeasure::build(strategy, theta, ref, prompts), theta, ref, beta, oracle);
}

std::string_view train_mode_name(TrainMode mode) { return mode == TrainMode::Online ? "online" : "iterative"; }

TrainMode parse_train_mode(std::string_view name) {
    const auto s = lower(name);
    if (s == "online") return TrainMode::Online;
    if (s == "iterative") return TrainMode::Iterative;
    throw ConfigError("unknown train mode '" + std::string(name) + "'");
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "gd"; }

OptimizerKind parse_optimizer(std::string_view name) {
    const auto s = lower(name);
    if (s == "gd" || s == "sgd") return OptimizerKind::GradientDescent;
    if (s == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    PREFSAMPLE_CHECK(beta > 0.0 && std::isfinite(beta), ConfigError, "beta must be positive");
    PREFSAMPLE_CHECK(step_size > 0.0 && std::isfinite(step_size), ConfigError, "step_size must be positive");
    PREFSAMPLE_CHECK(batch_size >= 1, ConfigError, "batch_size must be >= 1");
    PREFSAMPLE_CHECK(eval_interval >= 1, ConfigError, "eval_interval must be >= 1");
    PREFSAMPLE_CHECK(dataset_size >= 1, ConfigError, "dataset_size must be >= 1");
    PREFSAMPLE_CHECK(mode == TrainMode::Online || epochs >= 1, ConfigError, "epochs must be >= 1");
}

std::size_t TrainConfig::total_steps() const {
    if (mode == TrainMode::Online) return rounds * steps_per_round;
    return rounds * epochs * ((dataset_size + batch_size - 1) / batch_size);
}

TrainResult train(const TrainConfig& config, const LogitPolicy& theta0, const LogitPolicy& ref,
                  const OracleReward& oracle, const PromptSpace& prompts, const StrategySpec& strategy) {
    config.validate();
    strategy.validate();
    prompts.validate();
    require_same_layout(theta0, ref);
    PREFSAMPLE_CHECK(strategy.beta == config.beta, ConfigError, "strategy beta must equal the training beta");
    PREFSAMPLE_CHECK(prompts.size() == theta0.num_prompts() && oracle.num_prompts() == theta0.num_prompts(),
                     StructuralError, "prompt count mismatch between policy, oracle and prompt space");

    TrainResult result{theta0, {}, {}};
    const std::size_t total = config.total_steps();
    if (total == 0) return result;

    Rng data_rng(config.seed, streams::kDataset);
    std::vector<std::size_t> dataset(config.dataset_size);
    for (auto& x : dataset) x = data_rng.categorical(prompts.weights);

    Rng rng(config.seed, streams::kRun);
    Vector theta = theta0.params();
    Vector m1 = Vector::Zero(theta.size()), m2 = Vector::Zero(theta.size());
    std::size_t step = 0;

    auto label = [&](const LogitPolicy& current, const std::vector<std::size_t>& xs) {
        PairSampler sampler(strategy, current, ref);
        std::vector<double> w;
        if (strategy.kind == StrategyKind::TPILAF && strategy.exact_partitions)
            w = compute_weights(current, ref, strategy.beta, prompts).w;
        DpoBatch batch;
        for (std::size_t x : xs) {
            const auto pair = sampler.draw(x, rng, result.ledger);
            batch.triples.push_back(label_pair(oracle, x, pair.first, pair.second, rng, result.ledger));
            if (!w.empty()) batch.weights.push_back(w[x]);
        }
        return batch;
    };

    auto apply = [&](const DpoBatch& batch) {
        const LogitPolicy current = theta0.with_params(theta);
        const Vector g = loss_gradient(current, ref, config.beta, batch);
        ++step;
        if (config.optimizer == OptimizerKind::GradientDescent) {
            theta -= config.step_size * g;
        } else {
            constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            m1 = b1 * m1 + (1.0 - b1) * g;
            m2 = b2 * m2 + (1.0 - b2) * g.cwiseProduct(g);
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
            theta.array() -= config.step_size * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
        }
        PREFSAMPLE_CHECK(theta.allFinite(), NumericalError, "parameters diverged");
        if (step % config.eval_interval == 0 || step == total) {
            const auto rep = evaluate_j(theta0.with_params(theta), ref, config.beta, oracle, prompts);
            result.trajectory.push_back({strategy.name(), config.seed, step, rep.expected_reward, rep.kl, rep.j_value,
                                         result.ledger.sampling, result.ledger.annotation});
        }
    };

    if (config.mode == TrainMode::Online) {
        std::vector<std::size_t> xs(config.batch_size);
        for (std::size_t s = 0; s < total; ++s) {
            for (auto& x : xs) x = dataset[rng.below(dataset.size())];
            apply(label(theta0.with_params(theta), xs));
        }
    } else {
        for (std::size_t round = 0; round < config.rounds; ++round) {
            const DpoBatch data = label(theta0.with_params(theta), dataset);
            for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
                for (std::size_t start = 0; start < data.size(); start += config.batch_size) {
                    const std::size_t end = std::min(data.size(), start + config.batch_size);
                    DpoBatch mb;
                    mb.triples.assign(data.triples.begin() + static_cast<std::ptrdiff_t>(start),
                                      data.triples.begin() + static_cast<std::ptrdiff_t>(end));
                    if (!data.weights.empty())
                        mb.weights.assign(data.weights.begin() + static_cast<std::ptrdiff_t>(start),
                                          data.weights.begin() + static_cast<std::ptrdiff_t>(end));
                    apply(mb);
                }
            }
        }
    }
    result.policy = theta0.with_params(theta);
    return result;
}

}  // namespace prefsample
