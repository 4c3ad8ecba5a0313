// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace prefsample {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed token sequence, out-of-range token, mismatched vocabularies.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Overflow of partition sums, infinite divergences, empty batches.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Strategy whose pair density has no closed form (Best-of-N, token-wise PILAF).
class UnsupportedStrategy : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

#define PREFSAMPLE_CHECK(cond, ErrorType, msg)                                  \
    do {                                                                        \
        if (!(cond)) throw ErrorType(std::string(msg));                         \
    } while (0)

}  // namespace prefsample
