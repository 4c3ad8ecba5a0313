// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

// Serial pair loops against the factored OpenMP kernels, on score matrices of
// real response spaces. Argument: vocab_size (max_len fixed at 3).

#include <benchmark/benchmark.h>

#include "prefsample/kernels.hpp"

using namespace prefsample;

namespace {

struct Fixture {
    Matrix coeff;
    Matrix scores;
};

Fixture make(std::size_t vocab) {
    auto space = std::make_shared<const ResponseSpace>(VocabSpec{vocab, 3});
    Rng rng(42, 0);
    const LogitPolicy policy = LogitPolicy::gaussian(space, 1, 1.0, rng);
    Fixture f;
    f.scores = score_matrix(policy, 0);
    const auto n = static_cast<Eigen::Index>(space->size());
    f.coeff = Matrix(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) f.coeff(a, b) = rng.uniform() - 0.5;
    return f;
}

void BM_DifferenceReference(benchmark::State& state) {
    const auto f = make(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::reference::pair_difference_sum(f.coeff, f.scores));
    state.counters["N"] = static_cast<double>(f.coeff.rows());
}

void BM_DifferenceParallel(benchmark::State& state) {
    const auto f = make(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::pair_difference_sum(f.coeff, f.scores));
    state.counters["N"] = static_cast<double>(f.coeff.rows());
    state.counters["threads"] = kernels::max_threads();
}

void BM_OuterReference(benchmark::State& state) {
    const auto f = make(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::reference::pair_outer_sum(f.coeff, f.scores));
    state.counters["N"] = static_cast<double>(f.coeff.rows());
}

void BM_OuterParallel(benchmark::State& state) {
    const auto f = make(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::pair_outer_sum(f.coeff, f.scores));
    state.counters["N"] = static_cast<double>(f.coeff.rows());
    state.counters["threads"] = kernels::max_threads();
}

}  // namespace

BENCHMARK(BM_DifferenceReference)->Arg(3)->Arg(4)->Arg(5);
BENCHMARK(BM_DifferenceParallel)->Arg(3)->Arg(4)->Arg(5);
BENCHMARK(BM_OuterReference)->Arg(3)->Arg(4)->Arg(5);
BENCHMARK(BM_OuterParallel)->Arg(3)->Arg(4)->Arg(5);

BENCHMARK_MAIN();
