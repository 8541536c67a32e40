#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "craft/error.hpp"

namespace craft {

namespace detail {

inline void validate(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant) {
  std::vector<bool> seen(ranking.size(), false);
  for (auto idx : ranking) {
    if (idx >= ranking.size() || seen[idx]) throw MetricError("ranking is not a permutation");
    seen[idx] = true;
  }
  if (relevant.empty()) throw MetricError("no relevant candidates");
  for (auto r : relevant) {
    if (r >= ranking.size()) throw MetricError("relevant index out of range");
  }
}

inline bool contains(std::span<const std::size_t> xs, std::size_t x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

}  // namespace detail

inline bool hit_at_1(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant) {
  detail::validate(ranking, relevant);
  return detail::contains(relevant, ranking.front());
}

// 1 / (1-based rank of the first relevant candidate).
inline double reciprocal_rank(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant) {
  detail::validate(ranking, relevant);
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (detail::contains(relevant, ranking[r])) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

// Binary gains, discount 1/log2(rank + 1), normalized by the ideal ordering.
inline double ndcg(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant) {
  detail::validate(ranking, relevant);
  std::vector<std::size_t> rel(relevant.begin(), relevant.end());
  std::sort(rel.begin(), rel.end());
  rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
  double dcg = 0.0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (detail::contains(rel, ranking[r])) dcg += 1.0 / std::log2(static_cast<double>(r + 2));
  }
  double ideal = 0.0;
  for (std::size_t r = 0; r < rel.size(); ++r) ideal += 1.0 / std::log2(static_cast<double>(r + 2));
  return dcg / ideal;
}

struct EpisodeScores {
  bool hit = false;
  double reciprocal_rank = 0.0;
  double ndcg = 0.0;

  friend bool operator==(const EpisodeScores&, const EpisodeScores&) = default;
};

inline EpisodeScores score_episode(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant) {
  return {hit_at_1(ranking, relevant), reciprocal_rank(ranking, relevant), ndcg(ranking, relevant)};
}

inline double accuracy_at_1(std::span<const EpisodeScores> results) {
  if (results.empty()) return 0.0;
  double hits = 0.0;
  for (const auto& r : results) hits += r.hit ? 1.0 : 0.0;
  return hits / static_cast<double>(results.size());
}

inline double mean_reciprocal_rank(std::span<const EpisodeScores> results) {
  if (results.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : results) s += r.reciprocal_rank;
  return s / static_cast<double>(results.size());
}

inline double mean_ndcg(std::span<const EpisodeScores> results) {
  if (results.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : results) s += r.ndcg;
  return s / static_cast<double>(results.size());
}

// Mean and standard error of the mean (sample standard deviation / sqrt(n)).
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return out;
}

}  // namespace craft
