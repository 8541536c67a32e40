#pragma once

#include <algorithm>
#include <tuple>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/affordance_graph.hpp"
#include "craft/error.hpp"
#include "craft/priors.hpp"

namespace craft {

enum class Verdict { relevant, irrelevant, unknown };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::relevant: return "relevant";
    case Verdict::irrelevant: return "irrelevant";
    default: return "unknown";
  }
}

inline Verdict verdict_from_string(std::string_view s) {
  if (s == "relevant") return Verdict::relevant;
  if (s == "irrelevant") return Verdict::irrelevant;
  if (s == "unknown") return Verdict::unknown;
  throw FormatError("unknown verdict '" + std::string(s) + "'");
}

struct ReasoningTrace {
  std::string verb;
  std::string object;
  ReasoningPath path;
  double score = 0.0;  // == path.normalized_score
  Verdict verdict_hint = Verdict::unknown;

  friend bool operator==(const ReasoningTrace&, const ReasoningTrace&) = default;
};

// Up to `max_paths` best paths for `object`, best first.
inline std::vector<ReasoningTrace> extract_traces(const EgoSubgraph& ego, std::string_view object,
                                                  std::size_t max_paths, const PathOptions& opts = {}) {
  const auto id = normalize_concept_id(object);
  if (std::find(ego.candidate_ids.begin(), ego.candidate_ids.end(), id) == ego.candidate_ids.end()) {
    throw TraceError("'" + id + "' is not a candidate of " + ego.root);
  }
  PathOptions o = opts;
  o.max_paths = max_paths;
  std::vector<ReasoningTrace> out;
  for (auto& p : enumerate_paths(ego, id, o)) {
    const double score = p.normalized_score;
    out.push_back({ego.root, id, std::move(p), score, Verdict::unknown});
  }
  if (out.empty()) throw TraceError("'" + id + "' has no path from " + ego.root);
  return out;
}

// Highest-scoring path; ties go to fewer hops, then lexicographic steps.
inline ReasoningTrace extract_trace(const EgoSubgraph& ego, std::string_view object, const PathOptions& opts = {}) {
  return extract_traces(ego, object, 1, opts).front();
}

// ---------------------------------------------------------------------------
// ego-graph render

enum class EgoRole { root, candidate, intermediate };

inline std::string_view to_string(EgoRole r) {
  switch (r) {
    case EgoRole::root: return "root";
    case EgoRole::candidate: return "candidate";
    default: return "intermediate";
  }
}

struct RenderNode {
  std::string id;
  std::string label;
  EgoRole role = EgoRole::intermediate;
};

struct RenderEdge {
  std::string src;
  std::string relation;
  std::string dst;
};

struct EgoGraphRender {
  std::vector<RenderNode> nodes;  // sorted by id
  std::vector<RenderEdge> edges;  // sorted by (src, relation, dst)
};

// Candidates are the objects that survive into the prior.
inline EgoGraphRender make_render(const EgoSubgraph& ego, const PriorSet& survivors) {
  std::set<std::string, std::less<>> cands;
  for (const auto& e : survivors.entries) {
    if (!ego.contains(e.object)) throw TraceError("prior object '" + e.object + "' is outside the ego graph");
    cands.insert(e.object);
  }
  EgoGraphRender r;
  for (const auto& n : ego.nodes) {
    const auto role = n.id == ego.root ? EgoRole::root : cands.contains(n.id) ? EgoRole::candidate : EgoRole::intermediate;
    r.nodes.push_back({n.id, n.label, role});
  }
  for (const auto& e : ego.edges) r.edges.push_back({e.src, e.rel, e.dst});
  return r;
}

struct DotPalette {
  std::map<EgoRole, std::string> fill = {
      {EgoRole::root, "#f5d742"}, {EgoRole::candidate, "#e8554e"}, {EgoRole::intermediate, "#5b8fd9"}};
};

namespace detail {

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

inline std::string export_ego_dot(const EgoGraphRender& r, const DotPalette& palette = {}) {
  std::vector<RenderNode> nodes = r.nodes;
  std::sort(nodes.begin(), nodes.end(), [](const RenderNode& a, const RenderNode& b) { return a.id < b.id; });
  std::vector<RenderEdge> edges = r.edges;
  std::sort(edges.begin(), edges.end(), [](const RenderEdge& a, const RenderEdge& b) {
    return std::tie(a.src, a.relation, a.dst) < std::tie(b.src, b.relation, b.dst);
  });

  std::ostringstream out;
  out << "digraph ego {\n";
  out << "  graph [rankdir=LR];\n";
  out << "  node [shape=ellipse, style=filled];\n";
  for (const auto& n : nodes) {
    out << "  " << detail::dot_quote(n.id) << " [label=" << detail::dot_quote(n.label)
        << ", class=" << detail::dot_quote(to_string(n.role));
    if (const auto it = palette.fill.find(n.role); it != palette.fill.end()) {
      out << ", fillcolor=" << detail::dot_quote(it->second);
    }
    out << "];\n";
  }
  for (const auto& e : edges) {
    out << "  " << detail::dot_quote(e.src) << " -> " << detail::dot_quote(e.dst)
        << " [label=" << detail::dot_quote(e.relation) << "];\n";
  }
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON

inline constexpr std::string_view kTraceSchema = "craft.traces/1";

inline nlohmann::json trace_to_json(const ReasoningTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.path.steps) {
    steps.push_back({{"node", s.node}, {"relation", s.relation}, {"direction", to_string(s.direction)}, {"weight", s.weight}});
  }
  return {{"verb", t.verb},
          {"object", t.object},
          {"score", t.score},
          {"verdict_hint", to_string(t.verdict_hint)},
          {"path", {{"root", t.path.root}, {"normalized_score", t.path.normalized_score}, {"steps", steps}}}};
}

inline std::string export_traces_json(const std::vector<ReasoningTrace>& traces, std::string_view config_hash = {}) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : traces) arr.push_back(trace_to_json(t));
  nlohmann::json doc = {{"schema", kTraceSchema}, {"tool_version", kToolVersion}, {"traces", arr}};
  if (!config_hash.empty()) doc["config_hash"] = std::string(config_hash);
  return doc.dump(2) + "\n";
}

inline std::vector<ReasoningTrace> read_traces_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("trace document is not JSON: ") + ex.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != kTraceSchema) throw FormatError("unsupported trace schema");
  std::vector<ReasoningTrace> out;
  try {
    for (const auto& j : doc.at("traces")) {
      ReasoningTrace t;
      t.verb = j.at("verb").get<std::string>();
      t.object = j.at("object").get<std::string>();
      t.score = j.at("score").get<double>();
      t.verdict_hint = verdict_from_string(j.at("verdict_hint").get<std::string>());
      const auto& p = j.at("path");
      t.path.root = p.at("root").get<std::string>();
      t.path.normalized_score = p.at("normalized_score").get<double>();
      for (const auto& s : p.at("steps")) {
        t.path.steps.push_back({s.at("node").get<std::string>(), s.at("relation").get<std::string>(),
                                direction_from_string(s.at("direction").get<std::string>()), s.at("weight").get<double>()});
      }
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed trace document: ") + ex.what());
  }
  return out;
}

}  // namespace craft
