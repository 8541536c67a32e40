#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "craft/affordance_graph.hpp"
#include "support.hpp"

using namespace craft;
using testing_support::fixture;

namespace {

AffordanceGraph ingest_text(const std::string& text, IngestReport& report, IngestConfig cfg = {}) {
  std::istringstream in(text);
  return ingest_assertions(in, cfg, report);
}

AffordanceGraph chain() {
  GraphBuilder b;
  b.edge("/c/en/saw/n", "UsedFor", "/c/en/cut/v", 2.0);
  b.edge("/c/en/saw/n", "RelatedTo", "/c/en/cleaver/n", 1.0);
  return b.build();
}

}  // namespace

TEST(Ingest, SingleRow) {
  IngestReport r;
  const auto g = ingest_text("/r/UsedFor\t/c/en/knife/n\t/c/en/cut\t4.0\n", r);
  EXPECT_EQ(g.node_ids().size(), 2u);
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.edges()[0].weight, 4.0);
  EXPECT_EQ(g.find("/c/en/knife")->pos, Pos::noun);
}

TEST(Ingest, DuplicateKeepsMaxWeight) {
  IngestReport r;
  const auto g = ingest_text(
      "/r/UsedFor\t/c/en/knife/n\t/c/en/cut\t4.0\n"
      "/r/UsedFor\t/c/en/knife/n\t/c/en/cut\t2.0\n",
      r);
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.edges()[0].weight, 4.0);
  EXPECT_EQ(r.duplicates, 1u);
}

TEST(Ingest, FixtureFileCounts) {
  std::ifstream in(fixture("assertions.tsv"));
  IngestReport r;
  const auto g = ingest_assertions(in, {}, r);
  EXPECT_EQ(r.lines_read, 10u);
  EXPECT_EQ(g.edges().size(), 7u);
  EXPECT_EQ(r.filtered_language, 2u);
  ASSERT_EQ(r.malformed.size(), 1u);
  EXPECT_EQ(r.malformed[0].line, 11u);  // header comment is line 1
}

TEST(Ingest, MalformedReasons) {
  IngestReport r;
  ingest_text(
      "UsedFor\t/c/en/a\t/c/en/b\t1\n"
      "/r/UsedFor\ten/a\t/c/en/b\t1\n"
      "/r/UsedFor\t/c/en/a\t/c/en/b\tNaN\n"
      "/r/UsedFor\t/c/en/a\t/c/en/b\t-1\n"
      "/r/UsedFor\t/c/en/a\t/c/en/b\t1\n",
      r);
  EXPECT_EQ(r.malformed.size(), 4u);
  EXPECT_EQ(r.accepted, 1u);
}

TEST(Ingest, EmptyAfterFilteringThrows) {
  IngestReport r;
  EXPECT_THROW(ingest_text("/r/UsedFor\t/c/fr/a\t/c/fr/b\t1\n", r), EmptyGraphError);
  EXPECT_THROW(ingest_text("/r/Synonym\t/c/en/a\t/c/en/b\t1\n", r), EmptyGraphError);
}

TEST(Ingest, PosMergeNounWins) {
  GraphBuilder b;
  b.edge("/c/en/cut/v", "UsedFor", "/c/en/saw/v", 1.0);
  b.edge("/c/en/saw/n", "RelatedTo", "/c/en/cleaver", 1.0);
  b.edge("/c/en/saw", "RelatedTo", "/c/en/blade/a", 1.0);
  const auto g = b.build();
  EXPECT_EQ(g.find("/c/en/saw")->pos, Pos::noun);
  EXPECT_EQ(g.find("/c/en/cleaver")->pos, Pos::unknown);
  EXPECT_EQ(g.find("/c/en/cut")->pos, Pos::verb);
}

TEST(Snapshot, RoundTrip) {
  std::ifstream in(fixture("assertions.tsv"));
  IngestReport r;
  const auto g = ingest_assertions(in, {}, r);
  const auto text = snapshot_string(g);
  std::istringstream back(text);
  const auto g2 = read_snapshot(back);
  EXPECT_EQ(snapshot_string(g2), text);
  EXPECT_EQ(g2.config_hash(), g.config_hash());
  EXPECT_EQ(g2.edges(), g.edges());
}

TEST(Snapshot, RejectsGarbage) {
  std::istringstream bad("NOTAGRAPH\n");
  EXPECT_THROW(read_snapshot(bad), Error);
}

TEST(Ego, HopCountDefinition) {
  const auto g = chain();
  const RelationSet both{"UsedFor", "RelatedTo"};
  EXPECT_EQ(extract_ego_subgraph(g, "cut", 2, both).nodes.size(), 3u);
  const auto one = extract_ego_subgraph(g, "cut", 1, both);
  EXPECT_EQ(one.node_ids(), (std::vector<std::string>{"/c/en/cut", "/c/en/saw"}));
}

TEST(Ego, RelationFilter) {
  const auto g = chain();
  for (int d = 1; d <= 4; ++d) {
    EXPECT_EQ(extract_ego_subgraph(g, "cut", d, {"UsedFor"}).node_ids(),
              (std::vector<std::string>{"/c/en/cut", "/c/en/saw"}));
  }
}

TEST(Ego, AntonymOnlyNodeAbsent) {
  GraphBuilder b;
  b.edge("/c/en/knife/n", "UsedFor", "/c/en/cut/v", 4);
  b.edge("/c/en/scissors/n", "UsedFor", "/c/en/cut/v", 3);
  b.edge("/c/en/cut/v", "HasSubevent", "/c/en/slice/v", 1);
  b.edge("/c/en/knife/n", "AtLocation", "/c/en/kitchen/n", 2);
  b.edge("/c/en/saw/n", "CapableOf", "/c/en/cut/v", 2);
  b.edge("/c/en/saw/n", "RelatedTo", "/c/en/blade/n", 1);
  b.edge("/c/en/cut/v", "Antonym", "/c/en/join/v", 1);
  b.edge("/c/en/join/v", "IsA", "/c/en/glue/n", 1);
  const auto g = b.build();
  EXPECT_EQ(g.node_ids().size(), 9u);
  const auto ego = extract_ego_subgraph(g, "cut", 3);
  EXPECT_FALSE(ego.contains("/c/en/join"));
  EXPECT_FALSE(ego.contains("/c/en/glue"));
  EXPECT_TRUE(ego.contains("/c/en/blade"));
  for (const auto& e : ego.edges) EXPECT_NE(e.rel, "Antonym");
}

TEST(Ego, MissingVerbSuggestsNeighbours) {
  const auto g = chain();
  try {
    extract_ego_subgraph(g, "cutt", 1);
    FAIL() << "expected MissingVerbError";
  } catch (const MissingVerbError& e) {
    ASSERT_FALSE(e.suggestions().empty());
    EXPECT_EQ(e.suggestions().front(), "/c/en/cut");
  }
  EXPECT_THROW(extract_ego_subgraph(g, "cut", 0), ConfigError);
}

TEST(Candidates, ObjectHeuristic) {
  GraphBuilder b;
  b.edge("/c/en/knife/n", "UsedFor", "/c/en/cut/v", 4);
  b.edge("/c/en/cut/v", "RelatedTo", "/c/en/use/v", 1);
  b.edge("/c/en/serving", "RelatedTo", "/c/en/cut/v", 1);
  b.edge("/c/en/bread", "RelatedTo", "/c/en/cut/v", 1);
  b.edge("/c/en/very_long_kitchen_utensil_name/n", "RelatedTo", "/c/en/cut/v", 1);
  const auto ego = extract_ego_subgraph(b.build(), "cut", 1);
  EXPECT_EQ(ego.candidate_ids, (std::vector<std::string>{"/c/en/bread", "/c/en/knife"}));

  GraphBuilder verbs_only;
  verbs_only.edge("/c/en/cut/v", "RelatedTo", "/c/en/use/v", 1);
  EXPECT_TRUE(extract_ego_subgraph(verbs_only.build(), "cut", 2).candidate_ids.empty());
}

// Ego growth: more depth or a larger whitelist never removes nodes or edges.
TEST(Ego, MonotoneInDepthAndWhitelist) {
  Rng rng(31);
  const std::vector<std::string> rels = {"UsedFor", "CapableOf", "RelatedTo", "AtLocation", "IsA", "Antonym"};
  for (int trial = 0; trial < 200; ++trial) {
    GraphBuilder b;
    const auto n = 4 + rng.below(10);
    for (std::size_t e = 0; e < 2 * n; ++e) {
      const auto a = rng.below(n), c = rng.below(n);
      if (a == c) continue;
      b.edge("/c/en/n" + std::to_string(a), rels[rng.below(rels.size())], "/c/en/n" + std::to_string(c), 1.0 + rng.below(4));
    }
    b.node("/c/en/n0", Pos::verb);
    const auto g = b.build();
    RelationSet small{"UsedFor", "RelatedTo"};
    RelationSet large = small;
    large.insert("CapableOf");
    large.insert("IsA");
    for (int d = 1; d <= 3; ++d) {
      const auto a = extract_ego_subgraph(g, "/c/en/n0", d, small);
      const auto deeper = extract_ego_subgraph(g, "/c/en/n0", d + 1, small);
      const auto wider = extract_ego_subgraph(g, "/c/en/n0", d, large);
      for (const auto& node : a.nodes) {
        ASSERT_TRUE(deeper.contains(node.id));
        ASSERT_TRUE(wider.contains(node.id));
      }
      for (const auto& e : a.edges) {
        ASSERT_NE(std::find(deeper.edges.begin(), deeper.edges.end(), e), deeper.edges.end());
        ASSERT_NE(std::find(wider.edges.begin(), wider.edges.end(), e), wider.edges.end());
      }
    }
  }
}
