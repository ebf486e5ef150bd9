// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// ROUGE-N with clipped n-gram counts: every reference n-gram is credited at
// most its reference multiplicity. No stemming or stopword removal.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dsum {

struct RougeScore {
  int n = 1;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class MultiRefMode { Best, Average };

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Best: the per-reference score with maximal F1 (first on ties).
// Average: arithmetic mean of precision and recall, F1 recomputed from the
// means. Throws std::invalid_argument on an empty reference list.
RougeScore rouge_multi(const std::vector<std::string>& candidate,
                       const std::vector<std::vector<std::string>>& references,
                       int n, MultiRefMode mode);

}  // namespace dsum
