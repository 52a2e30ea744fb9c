#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kcrec/content.hpp"
#include "kcrec/kc_space.hpp"

namespace kcrec {

/// Weighted digraph over KC ids. Edge weights count how often the source KC
/// was followed by the destination KC. Self-loops are rejected.
class KcGraph {
 public:
  using Edge = std::pair<KcId, KcId>;

  void add_node(KcId id) { nodes_.insert(id); }
  /// Adds `weight` to edge src->dst, creating both endpoints as needed.
  void add_edge(KcId src, KcId dst, std::uint64_t weight = 1);

  const std::set<KcId>& nodes() const { return nodes_; }
  const std::map<Edge, std::uint64_t>& edges() const { return edges_; }
  bool contains(KcId id) const { return nodes_.count(id) != 0; }
  bool empty() const { return nodes_.empty(); }
  std::uint64_t weight(KcId src, KcId dst) const;

  bool operator==(const KcGraph& other) const = default;

 private:
  std::set<KcId> nodes_;
  std::map<Edge, std::uint64_t> edges_;
};

/// Links every KC of segment i to every other KC of each later segment j > i.
KcGraph build_resource_graph(const Resource& resource);

/// Node union with additive edge weights.
KcGraph merge_graphs(std::span<const KcGraph> graphs);

/// Merged graph of every resource in the index.
KcGraph build_corpus_graph(const ContentIndex& index);

/// Levels s minimising sum_w w_ab (s_b - s_a - 1)^2, each weakly connected
/// component shifted to mean zero. Throws on an empty graph.
std::map<KcId, double> hierarchical_levels(const KcGraph& g);

enum class CentralityMethod { out_degree, katz };

/// Influence scores in [0, 1]. `out_degree` is weighted out-degree over the
/// graph maximum. `katz` accumulates attenuated out-walks (damping 0.5 on the
/// row-stochastic-bounded adjacency) before the same normalisation.
std::map<KcId, double> influence_centrality(const KcGraph& g,
                                            CentralityMethod method = CentralityMethod::out_degree);

enum class RelationLabel { is_prerequisite, is_application, is_similar, is_field };

std::string_view relation_name(RelationLabel label);
std::optional<RelationLabel> parse_relation(std::string_view name);

struct PrunedNode {
  KcId id;
  double level = 0.0;
  double centrality = 0.0;
};

struct LabeledEdge {
  KcId src;
  KcId dst;
  std::uint64_t weight = 0;
  std::optional<RelationLabel> label;
};

struct PrunedView {
  KcId focus{};
  std::vector<PrunedNode> nodes;   // sorted by id
  std::vector<LabeledEdge> edges;  // sorted by (src, dst)
  bool heuristic_labeled = false;

  const PrunedNode& node(KcId id) const;
};

struct PruneParams {
  std::size_t radius = 2;
  std::size_t max_nodes = 12;
  double min_centrality = 0.0;
  CentralityMethod centrality = CentralityMethod::out_degree;
};

/// Keeps the focus plus the (max_nodes - 1) most central nodes within
/// `radius` undirected hops, after dropping nodes under `min_centrality`.
/// Ties go to the smaller id. Levels and centrality come from the full graph.
PrunedView prune_around(const KcGraph& g, KcId focus, const PruneParams& params);

/// Produces one label per requested edge, in order. Implementations may throw.
class RelationLabeler {
 public:
  virtual ~RelationLabeler() = default;
  virtual std::vector<RelationLabel> label(const PrunedView& view, const KcUniverse& universe,
                                           std::span<const LabeledEdge> edges) = 0;
};

/// Level-gap rule on the non-focus endpoint u of a focus edge:
/// level(u) <= level(focus) - threshold gives is_prerequisite,
/// level(u) >= level(focus) + threshold gives is_application, otherwise
/// is_similar. Never emits is_field.
class HeuristicLabeler final : public RelationLabeler {
 public:
  explicit HeuristicLabeler(double threshold = 0.5) : threshold_(threshold) {}
  std::vector<RelationLabel> label(const PrunedView& view, const KcUniverse& universe,
                                   std::span<const LabeledEdge> edges) override;

 private:
  double threshold_;
};

/// Posts `{"focus": ..., "edges": [{"src": ..., "dst": ...}]}` to an HTTP
/// endpoint and expects `{"labels": [...]}` back in request order.
class HttpRelationLabeler final : public RelationLabeler {
 public:
  /// `url` looks like http://host:port/path.
  HttpRelationLabeler(std::string url, double timeout_seconds = 10.0);
  std::vector<RelationLabel> label(const PrunedView& view, const KcUniverse& universe,
                                   std::span<const LabeledEdge> edges) override;

 private:
  std::string base_;
  std::string path_;
  double timeout_seconds_;
};

/// Labels the focus-incident edges of `view`. If the labeler throws or
/// returns the wrong number of labels, the heuristic labeler is used instead
/// and the view is marked heuristic-labeled.
PrunedView label_relations(PrunedView view, const KcUniverse& universe, RelationLabeler& labeler,
                           double heuristic_threshold = 0.5);

/// Graphviz rendering with deterministic ordering by KC id.
std::string to_dot(const PrunedView& view, const KcUniverse& universe);

}  // namespace kcrec
