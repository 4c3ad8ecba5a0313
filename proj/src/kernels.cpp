// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#include "prefsample/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "prefsample/error.hpp"

namespace prefsample::kernels {

namespace {

using Index = Eigen::Index;

void check_shapes(const Matrix& coeff, const Matrix& rows) {
    PREFSAMPLE_CHECK(coeff.rows() == coeff.cols() && coeff.rows() == rows.rows(), StructuralError,
                     "pair kernel: coefficient matrix must be N x N with N = rows");
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

Matrix fill_pairs(std::size_t n, const std::function<double(std::size_t, std::size_t)>& f) {
    const auto N = static_cast<Index>(n);
    Matrix c(N, N);
#pragma omp parallel for schedule(static)
    for (Index a = 0; a < N; ++a)
        for (Index b = 0; b < N; ++b) c(a, b) = f(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    return c;
}

Vector transpose_times(const Matrix& rows, const Vector& weights) {
    const Index n = rows.rows(), d = rows.cols();
    Vector out(d);
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < d; ++j) {
        double acc = 0.0;
        for (Index a = 0; a < n; ++a) acc += weights[a] * rows(a, j);
        out[j] = acc;
    }
    return out;
}

Matrix gram(const Matrix& left, const Matrix& right) {
    const Index n = left.rows(), d1 = left.cols(), d2 = right.cols();
    Matrix out(d1, d2);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j) {
            double acc = 0.0;
            for (Index a = 0; a < n; ++a) acc += left(a, i) * right(a, j);
            out(i, j) = acc;
        }
    return out;
}

Vector pair_difference_sum(const Matrix& coeff, const Matrix& rows) {
    check_shapes(coeff, rows);
    const Index n = coeff.rows();
    // sum_{a,b} C(a,b)(G_a - G_b) = sum_a (rowsum_a - colsum_a) G_a
    Vector s(n);
#pragma omp parallel for schedule(static)
    for (Index a = 0; a < n; ++a) {
        double acc = 0.0;
        for (Index b = 0; b < n; ++b) acc += coeff(a, b) - coeff(b, a);
        s[a] = acc;
    }
    return transpose_times(rows, s);
}

Matrix pair_outer_sum(const Matrix& coeff, const Matrix& rows) {
    check_shapes(coeff, rows);
    const Index n = coeff.rows(), d = rows.cols();
    // With S = C + C^T the sum equals G^T (diag(S 1) - S) G.
    Matrix lap(n, n);
#pragma omp parallel for schedule(static)
    for (Index a = 0; a < n; ++a) {
        double deg = 0.0;
        for (Index b = 0; b < n; ++b) {
            const double s = coeff(a, b) + coeff(b, a);
            lap(a, b) = -s;
            deg += s;
        }
        lap(a, a) += deg;
    }
    Matrix lg(n, d);
#pragma omp parallel for schedule(static)
    for (Index a = 0; a < n; ++a)
        for (Index j = 0; j < d; ++j) {
            double acc = 0.0;
            for (Index b = 0; b < n; ++b) acc += lap(a, b) * rows(b, j);
            lg(a, j) = acc;
        }
    Matrix out = gram(rows, lg);
    // Symmetric by construction; remove rounding asymmetry.
    return 0.5 * (out + out.transpose());
}

namespace reference {

Vector pair_difference_sum(const Matrix& coeff, const Matrix& rows) {
    check_shapes(coeff, rows);
    Vector out = Vector::Zero(rows.cols());
    for (Index a = 0; a < coeff.rows(); ++a)
        for (Index b = 0; b < coeff.cols(); ++b) {
            const double c = coeff(a, b);
            if (c == 0.0) continue;
            out += c * (rows.row(a) - rows.row(b)).transpose();
        }
    return out;
}

Matrix pair_outer_sum(const Matrix& coeff, const Matrix& rows) {
    check_shapes(coeff, rows);
    Matrix out = Matrix::Zero(rows.cols(), rows.cols());
    for (Index a = 0; a < coeff.rows(); ++a)
        for (Index b = 0; b < coeff.cols(); ++b) {
            const double c = coeff(a, b);
            if (c == 0.0) continue;
            const Vector g = (rows.row(a) - rows.row(b)).transpose();
            out += c * g * g.transpose();
        }
    return out;
}

}  // namespace reference

}  // namespace prefsample::kernels
