#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/affordance_graph.hpp"
#include "craft/concept.hpp"
#include "craft/error.hpp"

namespace craft {

// Smallest admissible score anywhere on the simplex and smallest path factor.
inline constexpr double kScoreFloor = 1e-12;

// ---------------------------------------------------------------------------
// reasoning paths

enum class Direction { forward, backward };  // forward: walked src -> dst

inline std::string_view to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

inline Direction direction_from_string(std::string_view s) {
  return s == "backward" ? Direction::backward : Direction::forward;
}

struct PathStep {
  std::string node;  // node reached by this step
  std::string relation;
  Direction direction = Direction::forward;
  double weight = 0.0;  // raw edge weight

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct ReasoningPath {
  std::string root;
  std::vector<PathStep> steps;
  double normalized_score = 0.0;

  std::size_t hops() const noexcept { return steps.size(); }
  const std::string& object() const { return steps.empty() ? root : steps.back().node; }
  double max_edge_weight() const {
    double w = 0.0;
    for (const auto& s : steps) w = std::max(w, s.weight);
    return w;
  }

  friend bool operator==(const ReasoningPath&, const ReasoningPath&) = default;
};

struct PathOptions {
  std::size_t max_paths = 64;
  // Per-relation multiplier on edge weight before max-normalization.
  std::map<std::string, double, std::less<>> relation_weight;

  double multiplier(std::string_view rel) const {
    const auto it = relation_weight.find(rel);
    return it == relation_weight.end() ? 1.0 : it->second;
  }
};

namespace detail {

struct Adjacent {
  std::string neighbor;
  const AffordanceEdge* edge;
  Direction direction;
  double factor;
};

struct EgoIndex {
  std::unordered_map<std::string, std::vector<Adjacent>> adjacency;

  EgoIndex(const EgoSubgraph& ego, const PathOptions& opts) {
    double max_weight = 0.0;
    for (const auto& e : ego.edges) max_weight = std::max(max_weight, e.weight * opts.multiplier(e.rel));
    for (const auto& e : ego.edges) {
      // Factor in (0, 1]; an all-zero ego makes every edge equally strong.
      const double f = max_weight > 0.0
                           ? std::clamp(e.weight * opts.multiplier(e.rel) / max_weight, kScoreFloor, 1.0)
                           : 1.0;
      adjacency[e.src].push_back({e.dst, &e, Direction::forward, f});
      if (e.src != e.dst) adjacency[e.dst].push_back({e.src, &e, Direction::backward, f});
    }
  }

  const std::vector<Adjacent>& around(const std::string& id) const {
    static const std::vector<Adjacent> none;
    const auto it = adjacency.find(id);
    return it == adjacency.end() ? none : it->second;
  }

  // Undirected hop distance from `target` to every node that can reach it.
  std::unordered_map<std::string, int> distances_to(const std::string& target, int limit) const {
    std::unordered_map<std::string, int> dist{{target, 0}};
    std::vector<std::string> frontier{target};
    for (int d = 1; d <= limit && !frontier.empty(); ++d) {
      std::vector<std::string> next;
      for (const auto& id : frontier) {
        for (const auto& a : around(id)) {
          if (dist.try_emplace(a.neighbor, d).second) next.push_back(a.neighbor);
        }
      }
      frontier = std::move(next);
    }
    return dist;
  }
};

inline bool steps_less(const std::vector<PathStep>& a, const std::vector<PathStep>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                      [](const PathStep& x, const PathStep& y) {
                                        return std::tie(x.node, x.relation, x.direction) <
                                               std::tie(y.node, y.relation, y.direction);
                                      });
}

// Path ranking: higher score, then fewer hops, then lexicographic steps.
inline bool path_better(const ReasoningPath& a, const ReasoningPath& b) {
  if (a.normalized_score != b.normalized_score) return a.normalized_score > b.normalized_score;
  if (a.hops() != b.hops()) return a.hops() < b.hops();
  return steps_less(a.steps, b.steps);
}

}  // namespace detail

// Simple walks root -> object of at most ego.depth hops, best first.
//
// Extending a walk multiplies its score by a factor <= 1 and lengthens it, so
// a best-first search pops complete walks in exactly the final order.
inline std::vector<ReasoningPath> enumerate_paths(const EgoSubgraph& ego, std::string_view object,
                                                  const PathOptions& opts = {}) {
  std::vector<ReasoningPath> out;
  const std::string target(object);
  if (opts.max_paths == 0 || !ego.contains(target) || target == ego.root) return out;

  const detail::EgoIndex index(ego, opts);
  const auto dist = index.distances_to(target, ego.depth);
  if (!dist.contains(ego.root)) return out;

  const auto worse = [](const ReasoningPath& a, const ReasoningPath& b) { return detail::path_better(b, a); };
  std::priority_queue<ReasoningPath, std::vector<ReasoningPath>, decltype(worse)> queue(worse);
  queue.push(ReasoningPath{ego.root, {}, 1.0});

  while (!queue.empty() && out.size() < opts.max_paths) {
    ReasoningPath path = queue.top();
    queue.pop();
    if (path.object() == target) {
      out.push_back(std::move(path));
      continue;
    }
    const auto remaining = ego.depth - static_cast<int>(path.hops()) - 1;
    for (const auto& a : index.around(path.object())) {
      const auto d = dist.find(a.neighbor);
      if (d == dist.end() || d->second > remaining) continue;
      if (a.neighbor == path.root) continue;
      const bool seen = std::any_of(path.steps.begin(), path.steps.end(),
                                    [&](const PathStep& s) { return s.node == a.neighbor; });
      if (seen) continue;
      ReasoningPath next = path;
      next.steps.push_back({a.neighbor, a.edge->rel, a.direction, a.edge->weight});
      next.normalized_score = path.normalized_score * a.factor;
      queue.push(std::move(next));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// prior sets

enum class PriorProvenance { conceptnet, llm };

inline std::string_view to_string(PriorProvenance p) { return p == PriorProvenance::llm ? "LLM" : "ConceptNet"; }

struct PriorEntry {
  std::string object;
  double score = 0.0;
  // Strongest raw edge weight on the object's best path (graph priors only).
  double edge_weight = 0.0;

  friend bool operator==(const PriorEntry&, const PriorEntry&) = default;
};

// Maps positive raw scores onto the simplex, clamping at kScoreFloor.
inline std::vector<double> to_simplex(std::span<const double> raw) {
  if (raw.empty()) throw NumericError("cannot normalize an empty score vector");
  double sum = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x) || x < 0.0) throw NumericError("prior scores must be finite and non-negative");
    sum += x;
  }
  if (!(sum > 0.0)) throw NumericError("prior scores sum to zero");
  std::vector<double> out(raw.begin(), raw.end());
  bool clamped = false;
  for (auto& x : out) {
    x /= sum;
    if (x < kScoreFloor) {
      x = kScoreFloor;
      clamped = true;
    }
  }
  if (clamped) {
    double s2 = 0.0;
    for (double x : out) s2 += x;
    for (auto& x : out) x /= s2;
  }
  return out;
}

struct PriorSet {
  std::string verb;
  std::vector<PriorEntry> entries;  // descending score, ties by object id
  PriorProvenance provenance = PriorProvenance::conceptnet;
  int iteration = 0;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }

  std::vector<std::string> objects() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.object);
    return out;
  }

  const PriorEntry* find(std::string_view object) const {
    for (const auto& e : entries) {
      if (e.object == object) return &e;
    }
    return nullptr;
  }

  // Normalizes `raw` (entry.score holds the raw value) and sorts.
  static PriorSet from_raw(std::string verb, std::vector<PriorEntry> raw, PriorProvenance provenance,
                           int iteration = 0) {
    std::vector<double> scores;
    scores.reserve(raw.size());
    for (const auto& e : raw) scores.push_back(e.score);
    const auto normalized = to_simplex(scores);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i].score = normalized[i];
    PriorSet p{std::move(verb), std::move(raw), provenance, iteration};
    p.sort();
    return p;
  }

  void sort() {
    std::sort(entries.begin(), entries.end(), [](const PriorEntry& a, const PriorEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.object < b.object;
    });
  }

  friend bool operator==(const PriorSet&, const PriorSet&) = default;
};

// ---------------------------------------------------------------------------
// graph priors

struct CandidateEvidence {
  std::string object;
  ReasoningPath best_path;
};

// Best path per candidate; candidates without a path inside the ego are dropped.
inline std::vector<CandidateEvidence> collect_evidence(const EgoSubgraph& ego, const PathOptions& opts = {}) {
  PathOptions best_only = opts;
  best_only.max_paths = 1;
  std::vector<CandidateEvidence> out;
  for (const auto& c : ego.candidate_ids) {
    auto paths = enumerate_paths(ego, c, best_only);
    if (!paths.empty()) out.push_back({c, std::move(paths.front())});
  }
  return out;
}

// phi(o, v): max over paths of the product of max-normalized edge weights,
// normalized to the simplex.
inline PriorSet score_prior(const EgoSubgraph& ego, const PathOptions& opts = {}) {
  const auto evidence = collect_evidence(ego, opts);
  if (evidence.empty()) throw EmptyPriorError(ego.root);
  std::vector<PriorEntry> raw;
  raw.reserve(evidence.size());
  for (const auto& ev : evidence) {
    raw.push_back({ev.object, ev.best_path.normalized_score, ev.best_path.max_edge_weight()});
  }
  return PriorSet::from_raw(ego.root, std::move(raw), PriorProvenance::conceptnet, 0);
}

// ---------------------------------------------------------------------------
// verb similarity and top-k selection

class VerbSimilarity {
 public:
  virtual ~VerbSimilarity() = default;
  virtual std::optional<double> similarity(std::string_view verb, std::string_view concept_id) const = 0;
  virtual double floor_value() const { return -1.0; }
};

// Fixture-backed table keyed by (verb id, concept id), both normalized.
class TableVerbSimilarity final : public VerbSimilarity {
 public:
  TableVerbSimilarity() = default;

  TableVerbSimilarity& set(std::string_view verb, std::string_view concept_id, double score) {
    table_[{normalize_concept_id(verb), normalize_concept_id(concept_id)}] = score;
    return *this;
  }

  std::optional<double> similarity(std::string_view verb, std::string_view concept_id) const override {
    const auto it = table_.find({normalize_concept_id(verb), normalize_concept_id(concept_id)});
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::pair<std::string, std::string>, double> table_;
};

struct SelectReport {
  std::size_t similarity_misses = 0;
  std::vector<std::string> ranked;  // full two-stage order before truncation
};

// Two-stage sort: strongest edge weight on the best path, then similarity to
// the verb (misses take the provider's floor). The first k survive and are
// renormalized.
inline PriorSet select_top_k(const PriorSet& p, std::size_t k, const VerbSimilarity& sim,
                             SelectReport* report = nullptr) {
  if (k < 1) throw ConfigError("top-k must be >= 1");
  struct Keyed {
    const PriorEntry* entry;
    double sim;
  };
  std::vector<Keyed> keyed;
  std::size_t misses = 0;
  for (const auto& e : p.entries) {
    auto s = sim.similarity(p.verb, e.object);
    if (!s) ++misses;
    keyed.push_back({&e, s.value_or(sim.floor_value())});
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.entry->edge_weight != b.entry->edge_weight) return a.entry->edge_weight > b.entry->edge_weight;
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.entry->object < b.entry->object;
  });
  if (report) {
    report->similarity_misses = misses;
    report->ranked.clear();
    for (const auto& x : keyed) report->ranked.push_back(x.entry->object);
  }
  keyed.resize(std::min(k, keyed.size()));
  std::vector<PriorEntry> kept;
  for (const auto& x : keyed) kept.push_back(*x.entry);
  return PriorSet::from_raw(p.verb, std::move(kept), p.provenance, p.iteration);
}

// ---------------------------------------------------------------------------
// LLM priors
//
// Wire contract: request {"verb", "k", "prompt_template_id"}; response
// {"objects": [string, ...]}.

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the raw response payload for a serialized request.
  virtual std::string request(const std::string& request_json) const = 0;
};

enum class LlmWeighting { rank_reciprocal, uniform };

inline PriorSet llm_prior(std::string_view verb, const LlmClient& client, std::size_t k,
                          LlmWeighting weighting = LlmWeighting::rank_reciprocal,
                          std::string_view prompt_template_id = "objects-v1") {
  if (k < 1) throw ConfigError("llm k must be >= 1");
  const auto verb_id = normalize_concept_id(verb);
  const nlohmann::json req = {
      {"verb", concept_label(verb_id)}, {"k", k}, {"prompt_template_id", std::string(prompt_template_id)}};
  const auto payload = client.request(req.dump());

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& ex) {
    throw LlmPriorError(std::string("response is not JSON: ") + ex.what(), payload);
  }
  if (!doc.is_object() || !doc.contains("objects") || !doc["objects"].is_array()) {
    throw LlmPriorError("response lacks an 'objects' array", payload);
  }

  std::vector<std::string> objects;
  for (const auto& item : doc["objects"]) {
    if (!item.is_string()) throw LlmPriorError("non-string entry in 'objects'", payload);
    auto id = normalize_concept_id(item.get<std::string>());
    if (concept_term(id).empty()) continue;
    if (std::find(objects.begin(), objects.end(), id) != objects.end()) continue;
    objects.push_back(std::move(id));
    if (objects.size() == k) break;
  }
  if (objects.empty()) throw LlmPriorError("empty object list", payload);

  std::vector<PriorEntry> raw;
  for (std::size_t r = 0; r < objects.size(); ++r) {
    const double w = weighting == LlmWeighting::uniform ? 1.0 : 1.0 / static_cast<double>(r + 1);
    raw.push_back({objects[r], w, 0.0});
  }
  return PriorSet::from_raw(verb_id, std::move(raw), PriorProvenance::llm, 0);
}

// ---------------------------------------------------------------------------
// audit dump: verb <TAB> object <TAB> score <TAB> provenance

inline void write_prior_dump(std::ostream& out, const PriorSet& p) {
  for (const auto& e : p.entries) {
    out << p.verb << '\t' << e.object << '\t' << format_double(e.score) << '\t' << to_string(p.provenance) << '\n';
  }
}

}  // namespace craft
