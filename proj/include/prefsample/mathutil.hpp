// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace prefsample {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log sigma(z) without overflow for large |z|.
inline double log_sigmoid(double z) {
    if (z >= 0.0) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

// sigma'(z) = sigma(z) sigma(-z)
inline double sigmoid_derivative(double z) {
    return sigmoid(z) * sigmoid(-z);
}

}  // namespace prefsample
