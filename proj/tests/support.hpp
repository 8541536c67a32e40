#pragma once

// Shared test helpers and independent oracles. Oracles work on plain
// arrays / adjacency lists and never call the code under test.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "craft/craft.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(CRAFT_FIXTURE_DIR) / name; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("craft-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// E_j = -max_o phi_o * s_oj
inline std::vector<double> oracle_energy(const std::vector<double>& phi, const std::vector<std::vector<double>>& s) {
  std::vector<double> e(s.empty() ? 0 : s[0].size());
  for (std::size_t j = 0; j < e.size(); ++j) {
    double best = -INFINITY;
    for (std::size_t o = 0; o < phi.size(); ++o) best = std::max(best, phi[o] * s[o][j]);
    e[j] = -best;
  }
  return e;
}

// phi'_o = phi_o exp(lambda s_o,top) / sum
inline std::vector<double> oracle_rerank(const std::vector<double>& phi, const std::vector<std::vector<double>>& s,
                                         std::size_t top, double lambda) {
  std::vector<double> out(phi.size());
  double z = 0.0;
  for (std::size_t o = 0; o < phi.size(); ++o) z += phi[o] * std::exp(lambda * s[o][top]);
  for (std::size_t o = 0; o < phi.size(); ++o) out[o] = phi[o] * std::exp(lambda * s[o][top]) / z;
  return out;
}

inline std::size_t oracle_argmin(const std::vector<double>& e) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < e.size(); ++j) {
    if (e[j] < e[best]) best = j;
  }
  return best;
}

// Every simple path from `root` of length 1..depth over an undirected view
// of `edges`; returns the best product of clamp(w / max_w) per end node.
struct OracleEdge {
  std::string a, b;
  double w;
};

inline std::map<std::string, double> oracle_best_paths(const std::string& root, const std::vector<OracleEdge>& edges,
                                                       int depth) {
  double max_w = 0.0;
  for (const auto& e : edges) max_w = std::max(max_w, e.w);
  std::map<std::string, std::vector<std::pair<std::string, double>>> adj;
  for (const auto& e : edges) {
    const double f = std::clamp(e.w / max_w, 1e-12, 1.0);
    adj[e.a].push_back({e.b, f});
    adj[e.b].push_back({e.a, f});
  }
  std::map<std::string, double> best;
  std::set<std::string> on{root};
  std::function<void(const std::string&, double, int)> dfs = [&](const std::string& at, double score, int hops) {
    if (hops > 0) best[at] = std::max(best[at], score);
    if (hops == depth) return;
    for (const auto& [next, f] : adj[at]) {
      if (on.contains(next)) continue;
      on.insert(next);
      dfs(next, score * f, hops + 1);
      on.erase(next);
    }
  };
  dfs(root, 1.0, 0);
  return best;
}

// Count of all simple paths root -> target of length <= depth.
inline std::size_t oracle_path_count(const std::string& root, const std::string& target,
                                      const std::vector<OracleEdge>& edges, int depth) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::size_t count = 0;
  std::set<std::string> on{root};
  std::function<void(const std::string&, int)> dfs = [&](const std::string& at, int hops) {
    if (at == target && hops > 0) {
      ++count;
      return;
    }
    if (hops == depth) return;
    for (const auto& next : adj[at]) {
      if (on.contains(next)) continue;
      on.insert(next);
      dfs(next, hops + 1);
      on.erase(next);
    }
  };
  dfs(root, 0);
  return count;
}

// Binary-gain DCG / ideal DCG, discount 1/log2(rank + 1), ranks 1-based.
inline double oracle_ndcg(const std::vector<int>& gains_in_rank_order) {
  double dcg = 0.0, ideal = 0.0;
  auto sorted = gains_in_rank_order;
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    dcg += gains_in_rank_order[r] / std::log2(r + 2.0);
    ideal += sorted[r] / std::log2(r + 2.0);
  }
  return dcg / ideal;
}

// Random small grounding instance as plain arrays plus library views.
struct Instance {
  std::vector<double> phi;
  std::vector<std::vector<double>> s;
  craft::PriorSet prior;
  craft::SimMatrix matrix;
};

inline Instance random_instance(craft::Rng& rng, std::size_t max_objects = 8, std::size_t max_candidates = 6) {
  Instance in;
  const auto n_obj = 1 + rng.below(max_objects);
  const auto n_cand = 1 + rng.below(max_candidates);
  std::vector<double> raw(n_obj);
  double z = 0.0;
  for (auto& r : raw) {
    r = 0.01 + rng.uniform();
    z += r;
  }
  std::vector<craft::PriorEntry> entries;
  for (std::size_t o = 0; o < n_obj; ++o) {
    in.phi.push_back(raw[o] / z);
    entries.push_back({"/c/en/obj" + std::to_string(o), raw[o], 1.0});
  }
  in.prior = craft::PriorSet::from_raw("/c/en/verb", entries, craft::PriorProvenance::conceptnet);
  // Library normalization may differ in the last ulp; use its values as phi.
  for (std::size_t o = 0; o < n_obj; ++o) in.phi[o] = in.prior.find("/c/en/obj" + std::to_string(o))->score;
  for (std::size_t o = 0; o < n_obj; ++o) in.matrix.objects.push_back("/c/en/obj" + std::to_string(o));
  for (std::size_t j = 0; j < n_cand; ++j) in.matrix.candidates.push_back("img" + std::to_string(j));
  in.s.assign(n_obj, std::vector<double>(n_cand));
  for (std::size_t o = 0; o < n_obj; ++o) {
    for (std::size_t j = 0; j < n_cand; ++j) {
      in.s[o][j] = 2.0 * rng.uniform() - 1.0;
      in.matrix.values.push_back(in.s[o][j]);
    }
  }
  return in;
}

}  // namespace testing_support
