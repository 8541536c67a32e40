#pragma once

// Built-in oracle checks for `craft selftest`. Each check compares library
// output against a direct, independent computation on generated fixtures.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "craft/craft.hpp"

namespace craft::selftest {

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Random instance with plain arrays as the ground truth.
struct Instance {
  std::vector<double> phi;             // objects
  std::vector<std::vector<double>> s;  // objects x candidates
  PriorSet prior;
  SimMatrix matrix;
};

inline Instance random_instance(Rng& rng) {
  Instance in;
  const auto n_obj = 1 + rng.below(8);
  const auto n_cand = 1 + rng.below(6);
  std::vector<PriorEntry> raw;
  for (std::size_t o = 0; o < n_obj; ++o) raw.push_back({"/c/en/o" + std::to_string(o), 0.05 + rng.uniform(), 1.0});
  in.prior = PriorSet::from_raw("/c/en/v", raw, PriorProvenance::conceptnet);
  for (std::size_t o = 0; o < n_obj; ++o) in.matrix.objects.push_back("/c/en/o" + std::to_string(o));
  for (std::size_t j = 0; j < n_cand; ++j) in.matrix.candidates.push_back("img" + std::to_string(j));
  in.s.assign(n_obj, std::vector<double>(n_cand));
  for (std::size_t o = 0; o < n_obj; ++o) {
    for (std::size_t j = 0; j < n_cand; ++j) {
      in.s[o][j] = 2.0 * rng.uniform() - 1.0;
      in.matrix.values.push_back(in.s[o][j]);
    }
  }
  for (std::size_t o = 0; o < n_obj; ++o) in.phi.push_back(in.prior.find(in.matrix.objects[o])->score);
  return in;
}

inline CheckResult check_formulas(std::size_t instances) {
  Rng rng(20240601);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const auto in = random_instance(rng);
    const auto energies = grounding_energy(in.prior, in.matrix);
    for (std::size_t j = 0; j < in.matrix.cols(); ++j) {
      double best = -INFINITY;
      for (std::size_t o = 0; o < in.phi.size(); ++o) best = std::max(best, in.phi[o] * in.s[o][j]);
      worst = std::max(worst, std::abs(energies[j] - (-best)));
    }
    const double lambda = 3.0 * rng.uniform();
    const auto top = rng.below(in.matrix.cols());
    const auto next = rerank_step(in.prior, in.matrix, top, lambda);
    double z = 0.0;
    for (std::size_t o = 0; o < in.phi.size(); ++o) z += in.phi[o] * std::exp(lambda * in.s[o][top]);
    for (std::size_t o = 0; o < in.phi.size(); ++o) {
      const double expect = in.phi[o] * std::exp(lambda * in.s[o][top]) / z;
      worst = std::max(worst, std::abs(next.find(in.matrix.objects[o])->score - expect));
    }
  }
  return {"energy and re-weighting match direct evaluation", worst <= 1e-12, "max abs error " + format_double(worst)};
}

// Exhaustive simple-path search over a random ego graph.
inline CheckResult check_paths(std::size_t graphs) {
  Rng rng(77);
  std::size_t mismatches = 0;
  const std::vector<std::string> rels = {"UsedFor", "CapableOf", "RelatedTo", "AtLocation"};
  for (std::size_t g = 0; g < graphs; ++g) {
    GraphBuilder b;
    const auto n = 3 + rng.below(5);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(i == 0 ? "/c/en/act" : "/c/en/thing" + std::to_string(i));
    b.node(ids[0], Pos::verb);
    for (std::size_t i = 1; i < n; ++i) b.node(ids[i], Pos::noun);
    const auto m = n + rng.below(2 * n);
    for (std::size_t e = 0; e < m; ++e) {
      const auto a = rng.below(n), c = rng.below(n);
      if (a == c) continue;
      b.edge(ids[a], rels[rng.below(rels.size())], ids[c], 0.25 + 3.0 * rng.uniform());
    }
    const auto graph = b.build();
    const int depth = 1 + static_cast<int>(rng.below(3));
    const auto ego = extract_ego_subgraph(graph, ids[0], depth);

    double max_w = 0.0;
    for (const auto& e : ego.edges) max_w = std::max(max_w, e.weight);
    std::map<std::string, std::vector<std::pair<std::string, double>>> adj;
    for (const auto& e : ego.edges) {
      const double f = std::clamp(e.weight / max_w, kScoreFloor, 1.0);
      adj[e.src].push_back({e.dst, f});
      adj[e.dst].push_back({e.src, f});
    }
    std::map<std::string, double> best;
    std::set<std::string> on_path{ego.root};
    std::function<void(const std::string&, double, int)> dfs = [&](const std::string& at, double score, int hops) {
      if (hops > 0) best[at] = std::max(best[at], score);
      if (hops == ego.depth) return;
      for (const auto& [next, f] : adj[at]) {
        if (on_path.contains(next)) continue;
        on_path.insert(next);
        dfs(next, score * f, hops + 1);
        on_path.erase(next);
      }
    };
    dfs(ego.root, 1.0, 0);

    for (const auto& ev : collect_evidence(ego)) {
      if (std::abs(ev.best_path.normalized_score - best[ev.object]) > 1e-12) ++mismatches;
    }
  }
  return {"best path scores match exhaustive search", mismatches == 0, std::to_string(mismatches) + " mismatches"};
}

inline CheckResult check_metrics() {
  const std::vector<std::size_t> r1 = {1, 0, 2, 3, 4};
  const std::vector<std::size_t> rel1 = {0};
  const std::vector<std::size_t> r2 = {0, 1, 2, 3, 4};
  const std::vector<std::size_t> rel2 = {0, 2};
  const double mrr = reciprocal_rank(r1, rel1);
  const double nd1 = ndcg(r1, rel1);
  const double nd2 = ndcg(r2, rel2);
  const bool ok = std::abs(mrr - 0.5) < 1e-15 && std::abs(nd1 - 1.0 / std::log2(3.0)) < 1e-15 &&
                  std::abs(nd2 - 1.5 / (1.0 + 1.0 / std::log2(3.0))) < 1e-15;
  return {"metrics match hand-computed values", ok, "mrr=" + format_double(mrr) + " ndcg=" + format_double(nd2)};
}

inline CheckResult check_oracle_world() {
  auto labels = std::make_shared<LabelTable>(generate_labels({.verbs = 10, .categories = 40, .affording_per_verb = 5,
                                                              .images_per_category = 2, .seed = 3}));
  auto provider = std::make_shared<StoreProvider>(identity_world(*labels, 32, 5), "identity");
  const ObjectOracleBackend oracle(labels, provider);
  const auto report = run_benchmark(*labels, oracle, {.n = 5, .n_pos = 1, .episodes_per_verb = 10, .base_seed = 9});
  const double acc = report.aggregate.accuracy_at_1.mean;
  return {"object oracle is perfect in the identity world", acc == 1.0 && report.failures.empty(),
          "accuracy@1=" + format_double(acc)};
}

inline CheckResult check_chance() {
  auto labels = generate_labels({.verbs = 20, .categories = 60, .affording_per_verb = 6, .images_per_category = 1, .seed = 4});
  const RandomBackend random;
  const auto report = run_benchmark(labels, random, {.n = 5, .n_pos = 1, .episodes_per_verb = 100, .base_seed = 11});
  const auto& acc = report.aggregate.accuracy_at_1;
  return {"random backend sits at 1/n", std::abs(acc.mean - 0.2) <= 3.0 * acc.stderr_,
          "accuracy@1=" + format_double(acc.mean) + " stderr=" + format_double(acc.stderr_)};
}

inline int run(std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::function<CheckResult()>> checks = {
      [] { return check_formulas(1000); }, [] { return check_paths(300); }, check_metrics, check_oracle_world, check_chance};
  bool all = true;
  for (const auto& c : checks) {
    CheckResult r;
    try {
      r = c();
    } catch (const std::exception& ex) {
      r = {"(check threw)", false, ex.what()};
    }
    all = all && r.ok;
    out << (r.ok ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  out << (all ? "selftest passed" : "selftest FAILED") << " in " << ms << " ms\n";
  return all ? 0 : 2;
}

}  // namespace craft::selftest
