// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "prefsample/policy.hpp"

// Pair-enumeration kernels. Every exact population quantity in this library
// is a weighted sum over ordered response pairs (a, b) of either the
// difference of two per-response gradient rows or its outer product:
//
//   pair_difference_sum(C, G) = sum_{a,b} C(a,b) (G_a - G_b)
//   pair_outer_sum(C, G)      = sum_{a,b} C(a,b) (G_a - G_b)(G_a - G_b)^T
//
// The default implementations factor these through row/column sums and a
// graph Laplacian and run the loops under OpenMP. Each output entry is
// reduced by a single thread in a fixed order, so results are bit-identical
// for any thread count. The `reference` namespace keeps the literal O(N^2 D)
// and O(N^2 D^2) pair loops for testing and benchmarking.
namespace prefsample::kernels {

// C(a,b) = f(a,b); rows are filled in parallel.
Matrix fill_pairs(std::size_t n, const std::function<double(std::size_t, std::size_t)>& f);

Vector pair_difference_sum(const Matrix& coeff, const Matrix& rows);
Matrix pair_outer_sum(const Matrix& coeff, const Matrix& rows);

// Deterministic parallel dense products used by the reductions above.
Vector transpose_times(const Matrix& rows, const Vector& weights);  // rows^T weights
Matrix gram(const Matrix& left, const Matrix& right);              // left^T right

namespace reference {
Vector pair_difference_sum(const Matrix& coeff, const Matrix& rows);
Matrix pair_outer_sum(const Matrix& coeff, const Matrix& rows);
}  // namespace reference

int max_threads();

}  // namespace prefsample::kernels
