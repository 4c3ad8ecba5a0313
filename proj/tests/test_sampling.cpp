// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefsample/error.hpp"
#include "prefsample/sampling.hpp"
#include "test_util.hpp"

using namespace prefsample;
using namespace prefsample::testing;

namespace {

Matrix empirical_pairs(PairSampler& sampler, std::size_t prompt, std::size_t n, std::size_t draws,
                       std::uint64_t seed, CostLedger& ledger) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Rng rng(seed, 0);
    for (std::size_t i = 0; i < draws; ++i) {
        const auto p = sampler.draw(prompt, rng, ledger);
        m(static_cast<Eigen::Index>(p.first), static_cast<Eigen::Index>(p.second)) += 1.0 / static_cast<double>(draws);
    }
    return m;
}

Matrix outer_of(const std::vector<double>& a, const std::vector<double>& b) {
    Matrix m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i] * b[j];
    return m;
}

// Token-wise product of pilaf_token_dist along each response.
std::vector<double> token_wise_probs(const LogitPolicy& theta, const LogitPolicy& ref, double beta, std::size_t x,
                                     int sign) {
    const auto& space = theta.space();
    std::vector<double> out;
    for (const auto& y : space.responses()) {
        double p = 1.0;
        for (std::size_t k = 0; k < y.size(); ++k)
            p *= pilaf_token_dist(theta, ref, beta, x, std::span<const Token>(y.tokens.data(), k), sign)[y.tokens[k]];
        out.push_back(p);
    }
    return out;
}

struct Pair3 {
    std::shared_ptr<const ResponseSpace> space = make_space(3, 2);
    LogitPolicy ref = random_policy(space, 2, 1.0, 21);
    LogitPolicy theta = shifted(ref, random_policy(space, 2, 1.0, 22), 3.0);
};

}  // namespace

TEST_CASE("strategy names parse back") {
    for (auto k : {StrategyKind::Vanilla, StrategyKind::BestOfN, StrategyKind::Hybrid, StrategyKind::PILAF,
                   StrategyKind::TPILAF})
        CHECK(parse_strategy_kind(strategy_name(k)) == k);
    CHECK(parse_strategy_kind("Best-of-N") == StrategyKind::BestOfN);
    CHECK(parse_strategy_kind("T_PILAF") == StrategyKind::TPILAF);
    CHECK_THROWS_AS(parse_strategy_kind("greedy"), ConfigError);
    CHECK_THROWS_AS(StrategySpec({StrategyKind::BestOfN, 0.1, 1}).validate(), ConfigError);
    CHECK_THROWS_AS(StrategySpec({StrategyKind::PILAF, -0.1}).validate(), ConfigError);
}

TEST_CASE("vanilla sampling") {
    const auto space = make_space(2, 1);
    Vector det(2);
    det << 0.0, 1e6;
    const LogitPolicy point(space, 1, det);
    Rng rng(1, 0);
    CostLedger ledger;
    for (int i = 0; i < 10; ++i) CHECK(sample_vanilla(point, 0, rng, ledger) == ResponsePair{1, 1});
    CHECK(ledger == CostLedger{20, 0});

    const auto theta = random_policy(space, 1, 1.0, 3);
    PairSampler sampler({StrategyKind::Vanilla}, theta, theta);
    CostLedger l2;
    const Matrix emp = empirical_pairs(sampler, 0, 2, 100000, 4, l2);
    const auto pi = response_probs(theta, 0);
    CHECK(total_variation(emp, outer_of(pi, pi)) < 1e-2);
    CHECK(l2.sampling == 200000);
}

TEST_CASE("best-of-n cost and ties at the reference") {
    const auto space = make_space(3, 2);
    const auto ref = random_policy(space, 1, 1.0, 5);
    CostLedger ledger;
    Rng rng(6, 0), shadow(6, 0);
    const auto pi = response_probs(ref, 0);
    for (int i = 0; i < 50; ++i) {
        const auto pair = sample_best_of_n(ref, ref, 0.1, 8, 0, rng, ledger);
        const std::size_t first = shadow.categorical(pi);
        for (int k = 1; k < 8; ++k) shadow.categorical(pi);
        CHECK(pair == ResponsePair{first, first});
    }
    CHECK(ledger == CostLedger{400, 0});
    CostLedger four;
    sample_best_of_n(ref, ref, 0.1, 4, 0, rng, four);
    CHECK(four.sampling == 4);
}

TEST_CASE("best-of-n matches a sort of the drawn candidates") {
    const auto space = make_space(2, 1);
    const auto ref = random_policy(space, 1, 1.0, 7);
    const auto theta = random_policy(space, 1, 1.0, 8);
    const auto pi = response_probs(theta, 0);
    const auto r = implicit_rewards(theta, ref, 0.1, 0);
    Rng rng(9, 0), shadow(9, 0);
    CostLedger ledger;
    for (int trial = 0; trial < 200; ++trial) {
        const auto got = sample_best_of_n(theta, ref, 0.1, 5, 0, rng, ledger);
        std::vector<std::size_t> draws(5);
        for (auto& d : draws) d = shadow.categorical(pi);
        std::vector<std::size_t> order(5);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r[draws[a]] > r[draws[b]]; });
        const std::size_t best = draws[order.front()];
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r[draws[a]] < r[draws[b]]; });
        const std::size_t worst = draws[order.front()];
        CHECK(got == ResponsePair{best, worst});
    }
}

TEST_CASE("hybrid sampling") {
    Pair3 f;
    CHECK(total_variation(pair_density({StrategyKind::Hybrid}, f.ref, f.ref, 0),
                          pair_density({StrategyKind::Vanilla}, f.ref, f.ref, 0)) == 0.0);
    PairSampler sampler({StrategyKind::Hybrid}, f.theta, f.ref);
    CostLedger ledger;
    const Matrix emp = empirical_pairs(sampler, 1, f.space->size(), 100000, 10, ledger);
    CHECK(ledger == CostLedger{200000, 0});
    const Vector first = emp.rowwise().sum(), second = emp.colwise().sum().transpose();
    const auto pi = response_probs(f.theta, 1), pr = response_probs(f.ref, 1);
    double tv1 = 0.0, tv2 = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        tv1 += 0.5 * std::abs(first[static_cast<Eigen::Index>(i)] - pi[i]);
        tv2 += 0.5 * std::abs(second[static_cast<Eigen::Index>(i)] - pr[i]);
    }
    CHECK(tv1 < 1e-2);
    CHECK(tv2 < 1e-2);
}

TEST_CASE("token-wise pilaf distribution") {
    const auto space = make_space(2, 1);
    Vector h(2), h0(2);
    h << 0.0, 1.0;
    h0 << 0.0, 0.0;
    const LogitPolicy theta(space, 1, h), ref(space, 1, h0);
    const std::span<const Token> root;
    const auto plus = pilaf_token_dist(theta, ref, 0.1, 0, root, +1);
    const auto expect = softmax(std::vector<double>{0.0, 1.1});
    CHECK(plus[0] == doctest::Approx(expect[0]).epsilon(1e-15));
    CHECK(plus[1] == doctest::Approx(expect[1]).epsilon(1e-15));
    const auto minus = pilaf_token_dist(theta, ref, 0.1, 0, root, -1);
    CHECK(minus[1] == doctest::Approx(softmax(std::vector<double>{0.0, 0.9})[1]).epsilon(1e-15));

    Pair3 f;
    const std::vector<Token> prefix{2};
    const auto base = f.theta.next_token_probs(1, f.space->context_of(prefix));
    CHECK(pilaf_token_dist(f.theta, f.ref, 0.0, 1, prefix, +1) == base);
    for (int s : {+1, -1}) {
        const auto same = pilaf_token_dist(f.theta, f.theta, 0.3, 1, prefix, s);
        for (std::size_t k = 0; k < base.size(); ++k) CHECK(same[k] == doctest::Approx(base[k]).epsilon(1e-14));
    }
    // The whole-table policy agrees with the per-prefix rule.
    for (int s : {+1, -1}) {
        const auto table = response_probs(pilaf_token_policy(f.theta, f.ref, 0.1, s), 0);
        const auto walk = token_wise_probs(f.theta, f.ref, 0.1, 0, s);
        for (std::size_t i = 0; i < table.size(); ++i) CHECK(table[i] == doctest::Approx(walk[i]).epsilon(1e-13));
    }
}

TEST_CASE("pilaf sampling cost is three generations per pair") {
    Pair3 f;
    PairSampler sampler({StrategyKind::PILAF, 0.1}, f.theta, f.ref);
    Rng rng(12, 0);
    CostLedger ledger;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sampler.draw(0, rng, ledger);
    CHECK(std::abs(ledger.sampling / double(n) - 3.0) < 0.05);
    CHECK(ledger.annotation == 0);
}

TEST_CASE("pilaf at beta 0 is vanilla") {
    Pair3 f;
    for (std::size_t x = 0; x < 2; ++x)
        CHECK(total_variation(pair_density({StrategyKind::PILAF, 0.0}, f.theta, f.ref, x),
                              pair_density({StrategyKind::Vanilla}, f.theta, f.ref, x)) == 0.0);
}

TEST_CASE("pilaf joint pair frequencies match the token-wise mixture") {
    Pair3 f;
    const auto pi = response_probs(f.theta, 0);
    const Matrix oracle = 0.5 * outer_of(pi, pi) +
                          0.5 * outer_of(token_wise_probs(f.theta, f.ref, 0.1, 0, +1),
                                         token_wise_probs(f.theta, f.ref, 0.1, 0, -1));
    CHECK((pair_density({StrategyKind::PILAF, 0.1}, f.theta, f.ref, 0) - oracle).cwiseAbs().maxCoeff() < 1e-14);
    PairSampler sampler({StrategyKind::PILAF, 0.1}, f.theta, f.ref);
    CostLedger ledger;
    CHECK(total_variation(empirical_pairs(sampler, 0, f.space->size(), 1000000, 13, ledger), oracle) < 5e-3);
}

TEST_CASE("t-pilaf at the reference is vanilla") {
    Pair3 f;
    const auto parts = compute_partitions(f.ref, f.ref, 0.1, 0);
    CHECK(parts.z_plus == 1.0);
    CHECK(parts.z_minus == 1.0);
    CHECK(parts.p0 == 0.5);
    CHECK(total_variation(pair_density({StrategyKind::TPILAF, 0.1}, f.ref, f.ref, 0),
                          pair_density({StrategyKind::Vanilla}, f.ref, f.ref, 0)) == 0.0);
}

TEST_CASE("t-pilaf joint density") {
    Pair3 f;
    const auto pi = response_probs(f.theta, 1);
    const auto r = implicit_rewards(f.theta, f.ref, 0.1, 1);
    double zp = 0.0, zm = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) zp += pi[i] * std::exp(r[i]), zm += pi[i] * std::exp(-r[i]);
    std::vector<double> plus(pi.size()), minus(pi.size());
    for (std::size_t i = 0; i < pi.size(); ++i) plus[i] = pi[i] * std::exp(r[i]) / zp, minus[i] = pi[i] * std::exp(-r[i]) / zm;
    const double p0 = zp * zm / (1.0 + zp * zm);
    const Matrix oracle = (1.0 - p0) * outer_of(pi, pi) + p0 * outer_of(plus, minus);
    CHECK((pair_density({StrategyKind::TPILAF, 0.1}, f.theta, f.ref, 1) - oracle).cwiseAbs().maxCoeff() < 1e-13);

    PairSampler sampler({StrategyKind::TPILAF, 0.1}, f.theta, f.ref);
    CostLedger ledger;
    const Matrix emp = empirical_pairs(sampler, 1, f.space->size(), 1000000, 14, ledger);
    CHECK((emp - oracle).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(ledger.sampling / 1e6 == doctest::Approx(2.0 + 2.0 * p0).epsilon(5e-3));
}

TEST_CASE("free t-pilaf sampler consumes the same randomness as PairSampler") {
    Pair3 f;
    const auto parts = compute_partitions(f.theta, f.ref, 0.1, 0);
    PairSampler sampler({StrategyKind::TPILAF, 0.1}, f.theta, f.ref);
    Rng a(15, 0), b(15, 0);
    CostLedger la, lb;
    for (int i = 0; i < 200; ++i) CHECK(sample_tpilaf(f.theta, f.ref, 0.1, 0, a, parts, la) == sampler.draw(0, b, lb));
    CHECK(la == lb);
    PairSampler pilaf({StrategyKind::PILAF, 0.1}, f.theta, f.ref);
    Rng c(16, 0), d(16, 0);
    for (int i = 0; i < 200; ++i) CHECK(sample_pilaf(f.theta, f.ref, 0.1, 1, c, la) == pilaf.draw(1, d, lb));
}

TEST_CASE("partition functions") {
    const std::vector<double> one{1.0}, r{0.37};
    const auto single = partitions_from_tables(one, r);
    CHECK(single.z_plus == doctest::Approx(std::exp(0.37)).epsilon(1e-15));
    CHECK(single.z_minus == doctest::Approx(std::exp(-0.37)).epsilon(1e-15));
    CHECK(single.zbar_contrib == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(single.p0 == doctest::Approx(0.5).epsilon(1e-15));

    const auto space = make_space(3, 3);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto ref = random_policy(space, 1, 1.0, seed, 1);
        const auto theta = random_policy(space, 1, 2.0, seed, 2);
        const auto p = compute_partitions(theta, ref, 0.5, 0);
        const auto pi = response_probs(theta, 0);
        const auto rr = implicit_rewards(theta, ref, 0.5, 0);
        double zp = 0.0, zm = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i) zp += pi[i] * std::exp(rr[i]), zm += pi[i] * std::exp(-rr[i]);
        CHECK(p.z_plus == doctest::Approx(zp).epsilon(1e-12));
        CHECK(p.z_minus == doctest::Approx(zm).epsilon(1e-12));
        CHECK(p.zbar_contrib >= 1.0);
    }
    const std::vector<double> huge{800.0};
    CHECK_THROWS_AS(partitions_from_tables(one, huge), NumericalError);
}

TEST_CASE("weights") {
    Pair3 f;
    const auto at_ref = compute_weights(f.ref, f.ref, 0.1, PromptSpace::uniform(2));
    CHECK(at_ref.zbar == 2.0);
    for (double w : at_ref.w) CHECK(w == 1.0);

    const auto space1 = make_space(3, 2);
    const auto ref1 = random_policy(space1, 1, 1.0, 3), th1 = random_policy(space1, 1, 1.0, 4);
    CHECK(compute_weights(th1, ref1, 0.1, PromptSpace::uniform(1)).w[0] == doctest::Approx(1.0).epsilon(1e-15));

    // Prompt 0 at the reference (Z+Z- = 1); prompt 1 with pi = (1/2, 1/2) and
    // a reward gap d, so Z+Z- = 1 + (cosh d - 1)/2 = 3 when cosh d = 5.
    const double beta = 0.1, d = std::acosh(5.0);
    const auto space = make_space(2, 1);
    Vector ref_p(4), th_p(4);
    ref_p << 0.3, -0.2, 0.0, d / beta;
    th_p << 0.3, -0.2, 0.0, 0.0;
    const LogitPolicy ref(space, 2, ref_p), theta(space, 2, th_p);
    const auto w = compute_weights(theta, ref, beta, PromptSpace{{0.5, 0.5}});
    CHECK(w.partitions[0].zbar_contrib == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w.partitions[1].zbar_contrib == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(w.zbar == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(w.w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(w.w[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(w.sup_norm() == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

    const auto vanilla = strategy_weights({StrategyKind::Vanilla, beta}, theta, ref, PromptSpace{{0.5, 0.5}});
    CHECK(vanilla.w == std::vector<double>{1.0, 1.0});
    CHECK(vanilla.zbar == doctest::Approx(3.0).epsilon(1e-12));
    const auto approx = strategy_weights({StrategyKind::TPILAF, beta, 8, false}, theta, ref, PromptSpace{{0.5, 0.5}});
    CHECK(approx.w == std::vector<double>{1.0, 1.0});
    const auto exact = strategy_weights({StrategyKind::TPILAF, beta}, theta, ref, PromptSpace{{0.5, 0.5}});
    CHECK(exact.w[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("pair densities are distributions; best-of-n has none") {
    Pair3 f;
    for (auto k : {StrategyKind::Vanilla, StrategyKind::Hybrid, StrategyKind::PILAF, StrategyKind::TPILAF}) {
        const Matrix mu = pair_density({k, 0.1}, f.theta, f.ref, 0);
        CHECK(mu.sum() == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(mu.minCoeff() >= 0.0);
        CHECK((symmetrize(mu) - symmetrize(mu).transpose()).norm() == 0.0);
    }
    CHECK_THROWS_AS(pair_density({StrategyKind::BestOfN, 0.1}, f.theta, f.ref, 0), UnsupportedStrategy);
    CHECK(has_closed_form_density({StrategyKind::Vanilla}));
    CHECK(has_closed_form_density({StrategyKind::Hybrid}));
    CHECK(has_closed_form_density({StrategyKind::TPILAF}));
    CHECK_FALSE(has_closed_form_density({StrategyKind::TPILAF, 0.1, 8, false}));
    CHECK_FALSE(has_closed_form_density({StrategyKind::PILAF}));
    CHECK_FALSE(has_closed_form_density({StrategyKind::BestOfN}));
}
