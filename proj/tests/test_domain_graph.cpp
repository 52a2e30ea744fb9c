#include <gtest/gtest.h>

#include <algorithm>
#include <json.hpp>
#include <thread>

#include "kcrec/domain_graph.hpp"
#include "kcrec/error.hpp"
#include "oracles.hpp"

// after Eigen: httplib pulls in resolver headers that define `_res`
#include <httplib.h>

using namespace kcrec;

namespace {

const KcId A = kc(0), B = kc(1), C = kc(2), D = kc(3);

Resource resource_of(std::vector<std::vector<KcId>> segments) {
  std::vector<KcVector> segs;
  for (const auto& s : segments) {
    KcVector v;
    for (KcId k : s) v.set(k, 0.5);
    segs.push_back(v);
  }
  return make_resource("r", std::move(segs));
}

KcGraph chain(std::size_t n) {
  KcGraph g;
  for (std::size_t i = 0; i + 1 < n; ++i) g.add_edge(kc(i), kc(i + 1));
  return g;
}

}  // namespace

TEST(KcGraph, RejectsSelfLoopsAndZeroWeights) {
  KcGraph g;
  EXPECT_THROW(g.add_edge(A, A), Error);
  EXPECT_THROW(g.add_edge(A, B, 0), Error);
  g.add_edge(A, B, 2);
  EXPECT_TRUE(g.contains(A) && g.contains(B));
  EXPECT_EQ(g.weight(A, B), 2u);
  EXPECT_EQ(g.weight(B, A), 0u);
}

TEST(BuildResourceGraph, Examples) {
  const auto g = build_resource_graph(resource_of({{A}, {B}, {A, C}}));
  const std::map<KcGraph::Edge, std::uint64_t> want{{{A, B}, 1}, {{A, C}, 1}, {{B, A}, 1}, {{B, C}, 1}};
  EXPECT_EQ(g.edges(), want);

  EXPECT_TRUE(build_resource_graph(resource_of({{A, B, C}})).edges().empty());
  EXPECT_EQ(build_resource_graph(resource_of({{A, B, C}})).nodes().size(), 3u);

  const auto g2 = build_resource_graph(resource_of({{A}, {B}, {A}, {B}}));
  const std::map<KcGraph::Edge, std::uint64_t> want2{{{A, B}, 3}, {{B, A}, 1}};
  EXPECT_EQ(g2.edges(), want2);
}

TEST(BuildResourceGraph, MatchesPairEnumeration) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 300; ++i) {
    const auto r = oracle::random_resource(rng, 6, 4, 8);
    const auto g = build_resource_graph(r);
    EXPECT_EQ(g.edges(), oracle::pair_counts(r));
    for (const auto& [e, w] : g.edges()) {
      EXPECT_NE(e.first, e.second);
      EXPECT_TRUE(g.contains(e.first) && g.contains(e.second));
    }
  }
}

TEST(MergeGraphs, Examples) {
  KcGraph g1, g2;
  g1.add_edge(A, B, 2);
  g2.add_edge(A, B, 3);
  const std::vector<KcGraph> both{g1, g2};
  EXPECT_EQ(merge_graphs(both).weight(A, B), 5u);
  EXPECT_TRUE(merge_graphs({}).empty());

  KcGraph g3;
  g3.add_edge(C, D, 4);
  g3.add_node(kc(9));
  const std::vector<KcGraph> disjoint{g1, g3};
  const auto m = merge_graphs(disjoint);
  EXPECT_EQ(m.nodes(), (std::set<KcId>{A, B, C, D, kc(9)}));
  EXPECT_EQ(m.weight(A, B), 2u);
  EXPECT_EQ(m.weight(C, D), 4u);
  EXPECT_EQ(m.edges().size(), 2u);
}

TEST(MergeGraphs, AssociativeAndCommutative) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto a = oracle::random_graph(rng, 6), b = oracle::random_graph(rng, 6), c = oracle::random_graph(rng, 6);
    const std::vector<KcGraph> ab{a, b}, ba{b, a}, bc{b, c};
    const std::vector<KcGraph> ab_c{merge_graphs(ab), c}, a_bc{a, merge_graphs(bc)};
    EXPECT_EQ(merge_graphs(ab), merge_graphs(ba));
    EXPECT_EQ(merge_graphs(ab_c), merge_graphs(a_bc));
  }
}

TEST(BuildCorpusGraph, IsMergeOfResourceGraphs) {
  const auto index = generate_synthetic_corpus({20, 10, 4, 3, 0.5}, 2);
  std::vector<KcGraph> parts;
  for (const auto& r : index.resources()) parts.push_back(build_resource_graph(r));
  EXPECT_EQ(build_corpus_graph(index), merge_graphs(parts));
}

TEST(HierarchicalLevels, ClosedForms) {
  const auto s = hierarchical_levels(chain(3));
  EXPECT_NEAR(s.at(A), -1.0, 1e-12);
  EXPECT_NEAR(s.at(B), 0.0, 1e-12);
  EXPECT_NEAR(s.at(C), 1.0, 1e-12);

  KcGraph cycle;
  cycle.add_edge(A, B, 2);
  cycle.add_edge(B, A, 2);
  const auto sc = hierarchical_levels(cycle);
  EXPECT_NEAR(sc.at(A), 0.0, 1e-12);
  EXPECT_NEAR(sc.at(B), 0.0, 1e-12);

  KcGraph iso;
  iso.add_node(D);
  EXPECT_EQ(hierarchical_levels(iso).at(D), 0.0);

  EXPECT_THROW(hierarchical_levels(KcGraph{}), Error);
}

TEST(HierarchicalLevels, ComponentsAreCenteredSeparately) {
  KcGraph g = chain(2);
  g.add_edge(kc(5), kc(6));
  g.add_edge(kc(6), kc(7));
  const auto s = hierarchical_levels(g);
  EXPECT_NEAR(s.at(A) + s.at(B), 0.0, 1e-12);
  EXPECT_NEAR(s.at(B) - s.at(A), 1.0, 1e-12);
  EXPECT_NEAR(s.at(kc(5)) + s.at(kc(6)) + s.at(kc(7)), 0.0, 1e-12);
}

TEST(HierarchicalLevels, NoSingleNodePerturbationImproves) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 50; ++i) {
    const auto g = oracle::random_graph(rng, 12);
    auto s = hierarchical_levels(g);
    const double base = oracle::level_residual(g, s);
    for (auto& [id, level] : s) {
      for (double d : {-0.01, 0.01}) {
        level += d;
        EXPECT_GE(oracle::level_residual(g, s), base - 1e-12);
        level -= d;
      }
    }
  }
}

TEST(InfluenceCentrality, Examples) {
  KcGraph star;
  for (int i = 1; i <= 3; ++i) star.add_edge(A, kc(i));
  const auto c = influence_centrality(star);
  EXPECT_DOUBLE_EQ(c.at(A), 1.0);
  for (int i = 1; i <= 3; ++i) EXPECT_DOUBLE_EQ(c.at(kc(i)), 0.0);

  KcGraph single;
  single.add_node(A);
  EXPECT_DOUBLE_EQ(influence_centrality(single).at(A), 0.0);

  KcGraph pair;
  pair.add_edge(A, B, 4);
  pair.add_edge(B, A, 1);
  const auto p = influence_centrality(pair);
  EXPECT_DOUBLE_EQ(p.at(A), 1.0);
  EXPECT_DOUBLE_EQ(p.at(B), 0.25);

  EXPECT_TRUE(influence_centrality(KcGraph{}).empty());
}

TEST(InfluenceCentrality, KatzScoresStayInUnitRange) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto g = oracle::random_graph(rng, 10);
    for (const auto& [id, v] : influence_centrality(g, CentralityMethod::katz)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(PruneAround, Examples) {
  const auto c3 = chain(3);
  const auto v = prune_around(c3, B, {1, 3, 0.0});
  ASSERT_EQ(v.nodes.size(), 3u);
  EXPECT_EQ(v.edges.size(), 2u);

  KcGraph g = chain(4);
  g.add_node(kc(9));
  const auto iso = prune_around(g, kc(9), {});
  ASSERT_EQ(iso.nodes.size(), 1u);
  EXPECT_EQ(iso.nodes[0].id, kc(9));
  EXPECT_TRUE(iso.edges.empty());

  const auto whole = prune_around(g, A, {10, 20, 0.0});
  EXPECT_EQ(whole.nodes.size(), 4u);

  EXPECT_THROW(prune_around(g, kc(50), {}), Error);
}

TEST(PruneAround, RadiusCapAndCentralityFilter) {
  const auto g = chain(6);
  const auto r1 = prune_around(g, kc(0), {1, 12, 0.0});
  EXPECT_EQ(r1.nodes.size(), 2u);
  const auto capped = prune_around(g, kc(2), {5, 3, 0.0});
  ASSERT_EQ(capped.nodes.size(), 3u);
  // every node except the sink has centrality 1; ties go to the smaller ids
  EXPECT_EQ(capped.nodes[0].id, kc(0));
  EXPECT_EQ(capped.nodes[1].id, kc(1));
  EXPECT_EQ(capped.nodes[2].id, kc(2));
  // the sink has centrality 0 but the focus is exempt from the filter
  const auto sink = prune_around(g, kc(5), {5, 12, 0.5});
  EXPECT_EQ(sink.nodes.size(), 6u);
  const auto filtered = prune_around(g, kc(0), {5, 12, 0.5});
  EXPECT_EQ(filtered.nodes.size(), 5u);
}

TEST(PruneAround, InvariantToEdgeInsertionOrder) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 20; ++i) {
    const auto g = oracle::random_graph(rng, 12);
    std::vector<std::pair<KcGraph::Edge, std::uint64_t>> edges(g.edges().begin(), g.edges().end());
    std::shuffle(edges.begin(), edges.end(), rng);
    KcGraph h;
    for (KcId n : g.nodes()) h.add_node(n);
    for (const auto& [e, w] : edges) h.add_edge(e.first, e.second, w);
    const KcId focus = *g.nodes().begin();
    const auto a = prune_around(g, focus, {2, 5, 0.0});
    const auto b = prune_around(h, focus, {2, 5, 0.0});
    EXPECT_LE(a.nodes.size(), 5u);
    ASSERT_EQ(a.nodes.size(), b.nodes.size());
    for (std::size_t k = 0; k < a.nodes.size(); ++k) {
      EXPECT_EQ(a.nodes[k].id, b.nodes[k].id);
      EXPECT_EQ(a.nodes[k].level, b.nodes[k].level);
    }
    ASSERT_EQ(a.edges.size(), b.edges.size());
  }
}

TEST(Relations, ClosedSetOfFour) {
  for (auto l : {RelationLabel::is_prerequisite, RelationLabel::is_application, RelationLabel::is_similar,
                 RelationLabel::is_field}) {
    EXPECT_EQ(parse_relation(relation_name(l)), l);
  }
  EXPECT_EQ(relation_name(RelationLabel::is_field), "is_field");
  EXPECT_FALSE(parse_relation("is_part_of"));
}

namespace {

PrunedView view_with_levels(std::vector<std::pair<KcId, double>> levels, std::vector<KcGraph::Edge> edges) {
  PrunedView v;
  v.focus = A;
  for (auto [id, l] : levels) v.nodes.push_back({id, l, 0.0});
  for (auto [s, d] : edges) v.edges.push_back({s, d, 1, std::nullopt});
  return v;
}

}  // namespace

TEST(HeuristicLabeler, RuleTable) {
  const KcUniverse u({"a", "b", "c", "d"});
  // gaps relative to focus A at level 0: B -0.5, C +0.7, D +0.2
  auto v = view_with_levels({{A, 0.0}, {B, -0.5}, {C, 0.7}, {D, 0.2}}, {{B, A}, {A, C}, {D, A}, {B, C}});
  HeuristicLabeler h;
  const auto out = label_relations(v, u, h);
  EXPECT_EQ(out.edges[0].label, RelationLabel::is_prerequisite);
  EXPECT_EQ(out.edges[1].label, RelationLabel::is_application);
  EXPECT_EQ(out.edges[2].label, RelationLabel::is_similar);
  EXPECT_FALSE(out.edges[3].label);
  EXPECT_FALSE(out.heuristic_labeled);

  HeuristicLabeler wide(1.0);
  const auto w = label_relations(v, u, wide);
  EXPECT_EQ(w.edges[0].label, RelationLabel::is_similar);
  EXPECT_EQ(w.edges[1].label, RelationLabel::is_similar);
}

namespace {

struct ThrowingLabeler : RelationLabeler {
  std::vector<RelationLabel> label(const PrunedView&, const KcUniverse&, std::span<const LabeledEdge>) override {
    throw Error("boom");
  }
};

struct ShortLabeler : RelationLabeler {
  std::vector<RelationLabel> label(const PrunedView&, const KcUniverse&, std::span<const LabeledEdge>) override {
    return {RelationLabel::is_field};
  }
};

struct FieldLabeler : RelationLabeler {
  std::vector<RelationLabel> label(const PrunedView&, const KcUniverse&, std::span<const LabeledEdge> e) override {
    return std::vector<RelationLabel>(e.size(), RelationLabel::is_field);
  }
};

class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/label", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/label"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(LabelRelations, FallsBackOnFailure) {
  const KcUniverse u({"a", "b", "c", "d"});
  auto v = view_with_levels({{A, 0.0}, {B, -1.0}}, {{B, A}});
  ThrowingLabeler t;
  const auto a = label_relations(v, u, t);
  EXPECT_TRUE(a.heuristic_labeled);
  EXPECT_EQ(a.edges[0].label, RelationLabel::is_prerequisite);
  auto two = view_with_levels({{A, 0.0}, {B, -1.0}, {C, 0.0}}, {{B, A}, {A, C}});
  ShortLabeler s;
  EXPECT_TRUE(label_relations(two, u, s).heuristic_labeled);
  FieldLabeler f;
  const auto ok = label_relations(two, u, f);
  EXPECT_FALSE(ok.heuristic_labeled);
  EXPECT_EQ(ok.edges[1].label, RelationLabel::is_field);
}

TEST(HttpRelationLabeler, RoundTripsThroughLocalServer) {
  nlohmann::json seen;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    nlohmann::json out;
    out["labels"] = nlohmann::json::array();
    for (std::size_t i = 0; i < seen["edges"].size(); ++i) out["labels"].push_back(i == 0 ? "is_field" : "is_similar");
    res.set_content(out.dump(), "application/json");
  });
  const KcUniverse u({"Algebra", "Groups", "Rings", "d"});
  auto v = view_with_levels({{A, 0.0}, {B, -1.0}, {C, 0.0}}, {{B, A}, {A, C}});
  HttpRelationLabeler labeler(server.url(), 5.0);
  const auto out = label_relations(v, u, labeler);
  EXPECT_FALSE(out.heuristic_labeled);
  EXPECT_EQ(out.edges[0].label, RelationLabel::is_field);
  EXPECT_EQ(out.edges[1].label, RelationLabel::is_similar);
  EXPECT_EQ(seen["focus"], "Algebra");
  EXPECT_EQ(seen["edges"][0]["src"], "Groups");
  EXPECT_EQ(seen["edges"][1]["dst"], "Rings");
}

TEST(HttpRelationLabeler, BadResponsesTriggerFallback) {
  const KcUniverse u({"a", "b", "c", "d"});
  auto v = view_with_levels({{A, 0.0}, {B, -1.0}}, {{B, A}});
  {
    LocalServer server([](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"labels": ["is_cousin"]})", "application/json");
    });
    HttpRelationLabeler labeler(server.url(), 5.0);
    EXPECT_TRUE(label_relations(v, u, labeler).heuristic_labeled);
  }
  {
    LocalServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    HttpRelationLabeler labeler(server.url(), 5.0);
    EXPECT_TRUE(label_relations(v, u, labeler).heuristic_labeled);
  }
  {
    LocalServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("not json", "text/plain"); });
    HttpRelationLabeler labeler(server.url(), 5.0);
    EXPECT_TRUE(label_relations(v, u, labeler).heuristic_labeled);
  }
  HttpRelationLabeler unreachable("http://127.0.0.1:1/label", 0.5);
  const auto out = label_relations(v, u, unreachable);
  EXPECT_TRUE(out.heuristic_labeled);
  EXPECT_EQ(out.edges[0].label, RelationLabel::is_prerequisite);
}

TEST(ToDot, DeterministicRendering) {
  const KcUniverse u({"Algebra", "Calc \"I\"", "Topology"});
  const auto g = chain(3);
  HeuristicLabeler h;
  const auto v = label_relations(prune_around(g, B, {}), u, h);
  EXPECT_EQ(to_dot(v, u),
            "digraph kc_graph {\n"
            "  n0 [label=\"Algebra (level=-1.00)\"];\n"
            "  n1 [label=\"Calc \\\"I\\\" (level=0.00)\", style=filled, fillcolor=navy, fontcolor=white];\n"
            "  n2 [label=\"Topology (level=1.00)\"];\n"
            "  n0 -> n1 [weight=1, label=\"is_prerequisite\"];\n"
            "  n1 -> n2 [weight=1, label=\"is_application\"];\n"
            "}\n");
}
