#pragma once

// Independent reference implementations: slow, obvious, and sharing no code
// with the library beyond the data types.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ckpk/core.hpp"

namespace ckpk::oracle {

/// CK share by direct recount.
inline std::optional<double> ck_recount(const std::vector<Label>& labels) {
  if (labels.empty()) return std::nullopt;
  std::size_t ck = 0;
  for (auto l : labels) {
    if (l == Label::CK) ++ck;
  }
  return static_cast<double>(ck) / static_cast<double>(labels.size()) * 100.0;
}

/// Enumerates every non-increasing split of n into k parts and keeps the one
/// whose parts differ by at most one: the earlier-absorbs-remainder layout.
inline std::vector<std::size_t> segments(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> found;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t left, std::size_t cap) {
    if (cur.size() == k) {
      if (left == 0) found.push_back(cur);
      return;
    }
    for (std::size_t p = 0; p <= std::min(left, cap); ++p) {
      cur.push_back(p);
      rec(left - p, p);
      cur.pop_back();
    }
  };
  rec(n, n);
  for (const auto& f : found) {
    if (f.front() - f.back() <= 1) return f;
  }
  return {};
}

inline std::size_t segment_index(std::size_t pos, const std::vector<std::size_t>& sizes) {
  std::size_t start = 0;
  for (std::size_t q = 0; q < sizes.size(); ++q) {
    if (pos < start + sizes[q]) return q;
    start += sizes[q];
  }
  return sizes.size();
}

/// Memoized recursive LCS over token sequences.
inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t r = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    memo[key] = r;
    return r;
  };
  return go(0, 0);
}

inline double rouge_l_f1(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  double l = static_cast<double>(lcs(cand, ref));
  if (l == 0.0) return 0.0;
  double p = l / static_cast<double>(cand.size());
  double r = l / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

}  // namespace ckpk::oracle
