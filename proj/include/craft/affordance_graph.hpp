#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "craft/concept.hpp"
#include "craft/error.hpp"
#include "craft/util.hpp"

namespace craft {

using RelationSet = std::set<std::string, std::less<>>;

// Relations accepted at ingestion. Antonym is ingested so that it can be
// opted into at extraction time.
inline RelationSet default_ingest_relations() {
  return {"AtLocation", "Antonym",  "CapableOf", "HasA",       "HasSubevent",
          "IsA",        "PartOf",   "ReceivesAction", "RelatedTo", "UsedFor"};
}

// Relations followed during ego-subgraph extraction.
inline RelationSet default_whitelist() {
  return {"UsedFor", "CapableOf", "RelatedTo", "HasSubevent", "AtLocation", "ReceivesAction"};
}

inline std::string relation_name(std::string_view uri) {
  auto s = trim(uri);
  if (starts_with(s, "/r/")) s = s.substr(3);
  return std::string(s);
}

struct AffordanceEdge {
  std::string src;
  std::string rel;
  std::string dst;
  double weight = 1.0;

  friend bool operator==(const AffordanceEdge&, const AffordanceEdge&) = default;
};

inline bool edge_key_less(const AffordanceEdge& a, const AffordanceEdge& b) {
  return std::tie(a.src, a.rel, a.dst) < std::tie(b.src, b.rel, b.dst);
}

struct IngestConfig {
  std::string language = "en";
  RelationSet relations = default_ingest_relations();

  std::string hash() const {
    Fnv1a h;
    h.field("ingest").field(language);
    for (const auto& r : relations) h.field(r);
    return hex64(h.value());
  }
};

struct MalformedRow {
  std::size_t line = 0;
  std::string reason;
};

struct IngestReport {
  std::size_t lines_read = 0;
  std::size_t accepted = 0;
  std::size_t filtered_language = 0;
  std::size_t filtered_relation = 0;
  std::size_t duplicates = 0;
  std::vector<MalformedRow> malformed;
};

// Immutable once built. Nodes and edges are kept sorted by id / (src, rel, dst).
class AffordanceGraph {
 public:
  AffordanceGraph() = default;

  AffordanceGraph(std::vector<ConceptNode> nodes, std::vector<AffordanceEdge> edges,
                  std::string config_hash = {})
      : config_hash_(std::move(config_hash)) {
    for (auto& n : nodes) {
      const auto id = n.id;
      nodes_.insert_or_assign(id, std::move(n));
    }
    std::sort(edges.begin(), edges.end(), edge_key_less);
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!edge_key_less(edges[i - 1], edges[i])) {
        throw FormatError("duplicate edge " + edges[i].src + " " + edges[i].rel + " " + edges[i].dst);
      }
    }
    for (const auto& e : edges) {
      if (!nodes_.contains(e.src) || !nodes_.contains(e.dst)) {
        throw FormatError("edge endpoint missing from node set: " + e.src + " -> " + e.dst);
      }
      if (!(e.weight >= 0.0)) throw FormatError("negative edge weight on " + e.src + " -> " + e.dst);
    }
    edges_ = std::move(edges);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      out_[edges_[i].src].push_back(i);
      in_[edges_[i].dst].push_back(i);
    }
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::string& config_hash() const noexcept { return config_hash_; }

  const std::map<std::string, ConceptNode, std::less<>>& nodes() const noexcept { return nodes_; }
  const std::vector<AffordanceEdge>& edges() const noexcept { return edges_; }

  const ConceptNode* find(std::string_view id) const {
    const auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
  }
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::span<const std::size_t> out_edges(const std::string& id) const { return lookup(out_, id); }
  std::span<const std::size_t> in_edges(const std::string& id) const { return lookup(in_, id); }

  std::vector<std::string> node_ids() const {
    std::vector<std::string> ids;
    ids.reserve(nodes_.size());
    for (const auto& [id, _] : nodes_) ids.push_back(id);
    return ids;
  }

 private:
  static std::span<const std::size_t> lookup(
      const std::unordered_map<std::string, std::vector<std::size_t>>& index, const std::string& id) {
    const auto it = index.find(id);
    if (it == index.end()) return {};
    return it->second;
  }

  std::map<std::string, ConceptNode, std::less<>> nodes_;
  std::vector<AffordanceEdge> edges_;
  std::unordered_map<std::string, std::vector<std::size_t>> out_;
  std::unordered_map<std::string, std::vector<std::size_t>> in_;
  std::string config_hash_;
};

// Accumulates nodes and edges; duplicate triples keep the max weight.
class GraphBuilder {
 public:
  // Returns false when the triple was already present.
  bool add_edge(const ConceptRef& src, std::string rel, const ConceptRef& dst, double weight) {
    touch(src);
    touch(dst);
    auto key = std::make_tuple(src.id(), std::move(rel), dst.id());
    auto [it, inserted] = edges_.try_emplace(std::move(key), weight);
    if (!inserted) it->second = std::max(it->second, weight);
    return inserted;
  }

  // Convenience for hand-built graphs: ids are normalized, pos given explicitly.
  GraphBuilder& node(std::string_view id, Pos pos) {
    auto ref = parse_concept(id);
    ref.pos = pos;
    touch(ref);
    return *this;
  }
  GraphBuilder& edge(std::string_view src, std::string rel, std::string_view dst, double weight) {
    add_edge(parse_concept(src), std::move(rel), parse_concept(dst), weight);
    return *this;
  }

  std::size_t edge_count() const noexcept { return edges_.size(); }

  AffordanceGraph build(std::string config_hash = {}) const {
    std::vector<ConceptNode> nodes;
    nodes.reserve(nodes_.size());
    for (const auto& [id, pos] : nodes_) nodes.push_back({id, concept_label(id), pos});
    std::vector<AffordanceEdge> edges;
    edges.reserve(edges_.size());
    for (const auto& [key, w] : edges_) {
      edges.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), w});
    }
    return AffordanceGraph(std::move(nodes), std::move(edges), std::move(config_hash));
  }

 private:
  // A noun tag wins over any other; otherwise the first known tag sticks.
  void touch(const ConceptRef& ref) {
    auto [it, inserted] = nodes_.try_emplace(ref.id(), ref.pos);
    if (inserted) return;
    if (ref.pos == Pos::unknown) return;
    if (it->second == Pos::unknown || ref.pos == Pos::noun) it->second = ref.pos;
  }

  std::map<std::string, Pos> nodes_;
  std::map<std::tuple<std::string, std::string, std::string>, double> edges_;
};

// Reads `relation_uri <TAB> start_uri <TAB> end_uri <TAB> weight` rows.
// Malformed rows are recorded and skipped; an empty result throws.
inline AffordanceGraph ingest_assertions(std::istream& in, const IngestConfig& cfg, IngestReport& report) {
  GraphBuilder builder;
  std::string line;
  std::size_t lineno = 0;
  const auto bad = [&](std::string reason) { report.malformed.push_back({lineno, std::move(reason)}); };

  while (std::getline(in, line)) {
    ++lineno;
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    ++report.lines_read;

    const auto cols = split(stripped, '\t');
    if (cols.size() != 4) {
      bad("expected 4 tab-separated columns, got " + std::to_string(cols.size()));
      continue;
    }
    const auto rel_uri = trim(cols[0]);
    const auto start_uri = trim(cols[1]);
    const auto end_uri = trim(cols[2]);
    if (!starts_with(rel_uri, "/r/") || rel_uri.size() <= 3) {
      bad("relation must be a /r/ URI");
      continue;
    }
    if (!starts_with(start_uri, "/c/") || !starts_with(end_uri, "/c/")) {
      bad("concepts must be /c/ URIs");
      continue;
    }
    const auto weight = parse_double(cols[3]);
    if (!weight || !std::isfinite(*weight) || *weight < 0.0) {
      bad("weight must be a finite non-negative number");
      continue;
    }
    const auto src = parse_concept(start_uri);
    const auto dst = parse_concept(end_uri);
    if (src.term.empty() || dst.term.empty() || src.language.empty() || dst.language.empty()) {
      bad("concept URI lacks language or term");
      continue;
    }
    if (src.language != cfg.language || dst.language != cfg.language) {
      ++report.filtered_language;
      continue;
    }
    auto rel = relation_name(rel_uri);
    if (!cfg.relations.contains(rel)) {
      ++report.filtered_relation;
      continue;
    }
    ++report.accepted;
    if (!builder.add_edge(src, std::move(rel), dst, *weight)) ++report.duplicates;
  }

  if (builder.edge_count() == 0) {
    throw EmptyGraphError("no assertion survived the language/relation filters (" +
                          std::to_string(report.lines_read) + " rows read)");
  }
  return builder.build(cfg.hash());
}

// ---------------------------------------------------------------------------
// snapshot: line-delimited text, tab-separated fields.
//
//   CRAFTGRAPH <version>
//   config <hash>
//   nodes <N>
//   N <id> <pos> <label>        (N lines)
//   edges <M>
//   E <src> <rel> <dst> <weight> (M lines)

inline constexpr int kGraphSnapshotVersion = 1;

inline void write_snapshot(std::ostream& out, const AffordanceGraph& g) {
  out << "CRAFTGRAPH\t" << kGraphSnapshotVersion << '\n';
  out << "config\t" << g.config_hash() << '\n';
  out << "nodes\t" << g.node_count() << '\n';
  for (const auto& [id, n] : g.nodes()) out << "N\t" << id << '\t' << to_string(n.pos) << '\t' << n.label << '\n';
  out << "edges\t" << g.edge_count() << '\n';
  for (const auto& e : g.edges()) {
    out << "E\t" << e.src << '\t' << e.rel << '\t' << e.dst << '\t' << format_double(e.weight) << '\n';
  }
}

inline std::string snapshot_string(const AffordanceGraph& g) {
  std::ostringstream os;
  write_snapshot(os, g);
  return os.str();
}

inline AffordanceGraph read_snapshot(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  const auto next = [&]() -> std::vector<std::string_view> {
    if (!std::getline(in, line)) throw FormatError("graph snapshot truncated at line " + std::to_string(lineno));
    ++lineno;
    return split(line, '\t');
  };
  const auto count = [&](const std::vector<std::string_view>& f, std::string_view tag) {
    if (f.size() != 2 || f[0] != tag) throw FormatError("expected '" + std::string(tag) + "' header");
    const auto n = parse_int<std::size_t>(f[1]);
    if (!n) throw FormatError("bad count on '" + std::string(tag) + "' header");
    return *n;
  };

  auto f = next();
  if (f.size() != 2 || f[0] != "CRAFTGRAPH") throw FormatError("not a graph snapshot");
  if (parse_int<int>(f[1]) != kGraphSnapshotVersion) throw FormatError("unsupported snapshot version");
  f = next();
  if (f.size() != 2 || f[0] != "config") throw FormatError("expected 'config' header");
  std::string hash(f[1]);

  std::vector<ConceptNode> nodes(count(next(), "nodes"));
  for (auto& n : nodes) {
    f = next();
    if (f.size() != 4 || f[0] != "N") throw FormatError("bad node record at line " + std::to_string(lineno));
    n = {std::string(f[1]), std::string(f[3]), pos_from_string(f[2])};
  }
  std::vector<AffordanceEdge> edges(count(next(), "edges"));
  for (auto& e : edges) {
    f = next();
    if (f.size() != 5 || f[0] != "E") throw FormatError("bad edge record at line " + std::to_string(lineno));
    const auto w = parse_double(f[4]);
    if (!w) throw FormatError("bad edge weight at line " + std::to_string(lineno));
    e = {std::string(f[1]), std::string(f[2]), std::string(f[3]), *w};
  }
  return AffordanceGraph(std::move(nodes), std::move(edges), std::move(hash));
}

// ---------------------------------------------------------------------------
// ego subgraphs

struct ObjectHeuristic {
  // Applied to pos=unknown labels only.
  std::vector<std::string> non_object_suffixes = {"ing"};
  std::size_t max_tokens = 3;
};

struct EgoSubgraph {
  std::string root;
  int depth = 1;
  std::vector<ConceptNode> nodes;       // sorted by id
  std::vector<AffordanceEdge> edges;    // sorted by (src, rel, dst)
  std::vector<std::string> candidate_ids;

  const ConceptNode* find(std::string_view id) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                                     [](const ConceptNode& n, std::string_view key) { return n.id < key; });
    return it != nodes.end() && it->id == id ? &*it : nullptr;
  }
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::vector<std::string> node_ids() const {
    std::vector<std::string> ids;
    for (const auto& n : nodes) ids.push_back(n.id);
    return ids;
  }
};

inline bool is_object_like(const ConceptNode& node, const ObjectHeuristic& rules) {
  if (token_count(node.label) > rules.max_tokens) return false;
  switch (node.pos) {
    case Pos::noun: return true;
    case Pos::unknown: break;
    default: return false;
  }
  for (const auto& raw : rules.non_object_suffixes) {
    std::string_view suffix = raw;
    if (starts_with(suffix, "-")) suffix.remove_prefix(1);
    if (!suffix.empty() && ends_with(node.label, suffix)) return false;
  }
  return true;
}

inline std::vector<std::string> filter_object_candidates(const EgoSubgraph& ego, const ObjectHeuristic& rules = {}) {
  std::vector<std::string> out;
  for (const auto& n : ego.nodes) {
    if (n.id != ego.root && is_object_like(n, rules)) out.push_back(n.id);
  }
  return out;  // nodes are already id-sorted
}

// Breadth-first closure of `verb` over whitelisted relations, following edges
// in both directions, up to `depth` hops. The subgraph keeps every
// whitelisted parent edge whose endpoints both survive.
inline EgoSubgraph extract_ego_subgraph(const AffordanceGraph& g, std::string_view verb, int depth,
                                        const RelationSet& whitelist = default_whitelist(),
                                        const ObjectHeuristic& rules = {}) {
  if (depth < 1) throw ConfigError("ego depth must be >= 1");
  const auto root = normalize_concept_id(verb);
  if (!g.contains(root)) {
    const auto ids = g.node_ids();
    throw MissingVerbError(root, nearest_keys(root, ids));
  }

  std::set<std::string> visited{root};
  std::vector<std::string> frontier{root};
  for (int hop = 0; hop < depth && !frontier.empty(); ++hop) {
    std::set<std::string> next;
    for (const auto& id : frontier) {
      for (auto i : g.out_edges(id)) {
        const auto& e = g.edges()[i];
        if (whitelist.contains(e.rel) && !visited.contains(e.dst)) next.insert(e.dst);
      }
      for (auto i : g.in_edges(id)) {
        const auto& e = g.edges()[i];
        if (whitelist.contains(e.rel) && !visited.contains(e.src)) next.insert(e.src);
      }
    }
    visited.insert(next.begin(), next.end());
    frontier.assign(next.begin(), next.end());
  }

  EgoSubgraph ego;
  ego.root = root;
  ego.depth = depth;
  for (const auto& id : visited) ego.nodes.push_back(*g.find(id));
  for (const auto& id : visited) {
    for (auto i : g.out_edges(id)) {
      const auto& e = g.edges()[i];
      if (whitelist.contains(e.rel) && visited.contains(e.dst)) ego.edges.push_back(e);
    }
  }
  std::sort(ego.edges.begin(), ego.edges.end(), edge_key_less);
  ego.candidate_ids = filter_object_candidates(ego, rules);
  return ego;
}

}  // namespace craft
