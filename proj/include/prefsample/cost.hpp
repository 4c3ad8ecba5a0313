// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace prefsample {

// Per-run accounting in forward generations and oracle reads.
//   sampling:   one full-sequence generation from one logit table = 1;
//               a generation that reads two tables (pi+/pi-) = 2.
//   annotation: the oracle reads both responses of a labeled pair = 2.
struct CostLedger {
    std::int64_t sampling = 0;
    std::int64_t annotation = 0;

    void add_generation(std::int64_t tables = 1) { sampling += tables; }
    void add_labeled_pair() { annotation += 2; }
    bool operator==(const CostLedger&) const = default;
};

}  // namespace prefsample
