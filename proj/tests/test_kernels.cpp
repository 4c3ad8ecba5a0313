// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <omp.h>

#include "prefsample/kernels.hpp"
#include "test_util.hpp"

using namespace prefsample;
using namespace prefsample::testing;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    Rng rng(seed, 3);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.standard_normal();
    return m;
}

}  // namespace

TEST_CASE("parallel pair kernels agree with the serial pair loops") {
    for (const auto& [v, t] : {std::pair<std::size_t, std::size_t>{2, 1}, {3, 2}, {4, 2}, {3, 3}}) {
        const auto space = make_space(v, t);
        const auto p = random_policy(space, 1, 1.0, v * 10 + t);
        const Matrix g = score_matrix(p, 0);
        const Matrix c = random_matrix(g.rows(), g.rows(), v + t);
        const Vector d_ref = kernels::reference::pair_difference_sum(c, g);
        const Matrix o_ref = kernels::reference::pair_outer_sum(c, g);
        CHECK((kernels::pair_difference_sum(c, g) - d_ref).norm() <= 1e-12 * std::max(1.0, d_ref.norm()));
        CHECK((kernels::pair_outer_sum(c, g) - o_ref).norm() <= 1e-12 * std::max(1.0, o_ref.norm()));
    }
}

TEST_CASE("pair_outer_sum is symmetric even for asymmetric coefficients") {
    const Matrix g = random_matrix(9, 5, 1);
    const Matrix c = random_matrix(9, 9, 2);
    const Matrix o = kernels::pair_outer_sum(c, g);
    CHECK((o - o.transpose()).norm() == 0.0);
}

TEST_CASE("fill_pairs evaluates every ordered pair") {
    const Matrix m = kernels::fill_pairs(6, [](std::size_t a, std::size_t b) { return 10.0 * a + b; });
    for (Eigen::Index a = 0; a < 6; ++a)
        for (Eigen::Index b = 0; b < 6; ++b) CHECK(m(a, b) == 10.0 * a + b);
}

TEST_CASE("dense products match eigen") {
    const Matrix a = random_matrix(17, 6, 3), b = random_matrix(17, 4, 4);
    const Vector w = random_matrix(17, 1, 5).col(0);
    CHECK((kernels::gram(a, b) - a.transpose() * b).norm() < 1e-12);
    CHECK((kernels::transpose_times(a, w) - a.transpose() * w).norm() < 1e-12);
}

TEST_CASE("results are bit-identical across thread counts") {
    const auto space = make_space(4, 3);
    const Matrix g = score_matrix(random_policy(space, 1, 1.0, 8), 0);
    const Matrix c = random_matrix(g.rows(), g.rows(), 9);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Vector d1 = kernels::pair_difference_sum(c, g);
    const Matrix o1 = kernels::pair_outer_sum(c, g);
    omp_set_num_threads(4);
    const Vector d4 = kernels::pair_difference_sum(c, g);
    const Matrix o4 = kernels::pair_outer_sum(c, g);
    omp_set_num_threads(saved);
    CHECK(d1 == d4);
    CHECK(o1 == o4);
}
