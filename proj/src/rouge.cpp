// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#include "dsum/rouge.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace dsum {

namespace {

double f_measure(double p, double r) {
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

// n-gram multiset keyed by tokens joined with an unlikely separator byte
std::unordered_map<std::string, long> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, long> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  long cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [g, c] : cand) cand_total += c;
  for (const auto& [g, c] : ref) ref_total += c;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  RougeScore s;
  s.n = n;
  s.precision = cand_total > 0 ? static_cast<double>(overlap) / cand_total : 0.0;
  s.recall = ref_total > 0 ? static_cast<double>(overlap) / ref_total : 0.0;
  s.f1 = f_measure(s.precision, s.recall);
  return s;
}

RougeScore rouge_multi(const std::vector<std::string>& candidate,
                       const std::vector<std::vector<std::string>>& references,
                       int n, MultiRefMode mode) {
  if (references.empty())
    throw std::invalid_argument("rouge_multi: no references");
  if (mode == MultiRefMode::Best) {
    RougeScore best = rouge_n(candidate, references[0], n);
    for (std::size_t i = 1; i < references.size(); ++i) {
      const RougeScore s = rouge_n(candidate, references[i], n);
      if (s.f1 > best.f1) best = s;
    }
    return best;
  }
  double psum = 0.0, rsum = 0.0;
  for (const auto& ref : references) {
    const RougeScore s = rouge_n(candidate, ref, n);
    psum += s.precision;
    rsum += s.recall;
  }
  RougeScore s;
  s.n = n;
  s.precision = psum / static_cast<double>(references.size());
  s.recall = rsum / static_cast<double>(references.size());
  s.f1 = f_measure(s.precision, s.recall);
  return s;
}

}  // namespace dsum
