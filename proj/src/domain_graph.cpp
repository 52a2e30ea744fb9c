#include "kcrec/domain_graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

#include "kcrec/error.hpp"

namespace kcrec {

void KcGraph::add_edge(KcId src, KcId dst, std::uint64_t weight) {
  if (src == dst) throw Error("self-loops are not allowed in a KC graph");
  if (weight == 0) throw Error("edge weight must be positive");
  nodes_.insert(src);
  nodes_.insert(dst);
  edges_[{src, dst}] += weight;
}

std::uint64_t KcGraph::weight(KcId src, KcId dst) const {
  auto it = edges_.find({src, dst});
  return it == edges_.end() ? 0 : it->second;
}

KcGraph build_resource_graph(const Resource& resource) {
  KcGraph g;
  const auto& segs = resource.segments;
  for (const auto& seg : segs) {
    for (const auto& [k, w] : seg.annotations) g.add_node(k);
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (std::size_t j = i + 1; j < segs.size(); ++j) {
      for (const auto& [a, wa] : segs[i].annotations) {
        for (const auto& [b, wb] : segs[j].annotations) {
          if (a != b) g.add_edge(a, b);
        }
      }
    }
  }
  return g;
}

KcGraph merge_graphs(std::span<const KcGraph> graphs) {
  KcGraph out;
  for (const auto& g : graphs) {
    for (KcId n : g.nodes()) out.add_node(n);
    for (const auto& [e, w] : g.edges()) out.add_edge(e.first, e.second, w);
  }
  return out;
}

KcGraph build_corpus_graph(const ContentIndex& index) {
  std::vector<KcGraph> graphs;
  graphs.reserve(index.size());
  for (const auto& r : index.resources()) graphs.push_back(build_resource_graph(r));
  return merge_graphs(graphs);
}

namespace {

// Weakly connected components, each listed in ascending id order.
std::vector<std::vector<KcId>> weak_components(const KcGraph& g) {
  std::map<KcId, std::vector<KcId>> adj;
  for (KcId n : g.nodes()) adj[n];
  for (const auto& [e, w] : g.edges()) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  std::set<KcId> visited;
  std::vector<std::vector<KcId>> comps;
  for (KcId start : g.nodes()) {
    if (visited.count(start)) continue;
    std::vector<KcId> comp;
    std::deque<KcId> queue{start};
    visited.insert(start);
    while (!queue.empty()) {
      KcId n = queue.front();
      queue.pop_front();
      comp.push_back(n);
      for (KcId m : adj[n]) {
        if (visited.insert(m).second) queue.push_back(m);
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

}  // namespace

std::map<KcId, double> hierarchical_levels(const KcGraph& g) {
  if (g.empty()) throw Error("hierarchical levels need a non-empty graph");
  std::map<KcId, double> levels;
  for (const auto& comp : weak_components(g)) {
    const auto n = static_cast<Eigen::Index>(comp.size());
    if (n == 1) {
      levels[comp.front()] = 0.0;
      continue;
    }
    std::map<KcId, Eigen::Index> pos;
    for (Eigen::Index i = 0; i < n; ++i) pos[comp[static_cast<std::size_t>(i)]] = i;

    // Normal equations L s = v of the weighted residual, made nonsingular by
    // adding the all-ones matrix, which also pins the component mean to 0.
    Eigen::MatrixXd system = Eigen::MatrixXd::Ones(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (const auto& [e, w] : g.edges()) {
      auto a = pos.find(e.first);
      if (a == pos.end()) continue;
      const Eigen::Index i = a->second;
      const Eigen::Index j = pos.at(e.second);
      const double wd = static_cast<double>(w);
      system(i, i) += wd;
      system(j, j) += wd;
      system(i, j) -= wd;
      system(j, i) -= wd;
      rhs(i) -= wd;
      rhs(j) += wd;
    }
    Eigen::VectorXd s = system.ldlt().solve(rhs);
    s.array() -= s.mean();
    for (Eigen::Index i = 0; i < n; ++i) levels[comp[static_cast<std::size_t>(i)]] = s(i);
  }
  return levels;
}

std::map<KcId, double> influence_centrality(const KcGraph& g, CentralityMethod method) {
  std::map<KcId, double> score;
  if (g.empty()) return score;
  for (KcId n : g.nodes()) score[n] = 0.0;
  for (const auto& [e, w] : g.edges()) score[e.first] += static_cast<double>(w);

  if (method == CentralityMethod::katz) {
    const auto n = static_cast<Eigen::Index>(g.nodes().size());
    std::map<KcId, Eigen::Index> pos;
    Eigen::Index i = 0;
    for (KcId id : g.nodes()) pos[id] = i++;
    double max_out = 0.0;
    for (const auto& [id, s] : score) max_out = std::max(max_out, s);
    if (max_out > 0.0) {
      Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
      for (const auto& [e, w] : g.edges()) p(pos[e.first], pos[e.second]) = static_cast<double>(w) / max_out;
      constexpr double damping = 0.5;
      const Eigen::VectorXd direct = p * Eigen::VectorXd::Ones(n);
      const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - damping * p;
      const Eigen::VectorXd x = m.partialPivLu().solve(direct);
      for (const auto& [id, k] : pos) score[id] = x(k);
    }
  }

  double top = 0.0;
  for (const auto& [id, s] : score) top = std::max(top, s);
  if (top > 0.0) {
    for (auto& [id, s] : score) s /= top;
  }
  return score;
}

std::string_view relation_name(RelationLabel label) {
  switch (label) {
    case RelationLabel::is_prerequisite: return "is_prerequisite";
    case RelationLabel::is_application: return "is_application";
    case RelationLabel::is_similar: return "is_similar";
    case RelationLabel::is_field: return "is_field";
  }
  return "unknown";
}

std::optional<RelationLabel> parse_relation(std::string_view name) {
  for (auto l : {RelationLabel::is_prerequisite, RelationLabel::is_application, RelationLabel::is_similar,
                 RelationLabel::is_field}) {
    if (relation_name(l) == name) return l;
  }
  return std::nullopt;
}

const PrunedNode& PrunedView::node(KcId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const PrunedNode& n, KcId k) { return n.id < k; });
  if (it == nodes.end() || it->id != id) throw Error("node not in pruned view");
  return *it;
}

PrunedView prune_around(const KcGraph& g, KcId focus, const PruneParams& params) {
  if (!g.contains(focus)) throw Error("focus KC " + std::to_string(to_index(focus)) + " is not in the graph");
  if (params.max_nodes < 1) throw Error("max_nodes must be >= 1");

  std::map<KcId, std::set<KcId>> adj;
  for (const auto& [e, w] : g.edges()) {
    adj[e.first].insert(e.second);
    adj[e.second].insert(e.first);
  }
  std::map<KcId, std::size_t> hops{{focus, 0}};
  std::deque<KcId> queue{focus};
  while (!queue.empty()) {
    KcId n = queue.front();
    queue.pop_front();
    if (hops[n] >= params.radius) continue;
    for (KcId m : adj[n]) {
      if (hops.emplace(m, hops[n] + 1).second) queue.push_back(m);
    }
  }

  const auto centrality = influence_centrality(g, params.centrality);
  const auto levels = hierarchical_levels(g);

  std::vector<KcId> candidates;
  for (const auto& [id, h] : hops) {
    if (id != focus && centrality.at(id) >= params.min_centrality) candidates.push_back(id);
  }
  std::sort(candidates.begin(), candidates.end(), [&](KcId a, KcId b) {
    const double ca = centrality.at(a), cb = centrality.at(b);
    if (ca != cb) return ca > cb;
    return a < b;
  });
  if (candidates.size() > params.max_nodes - 1) candidates.resize(params.max_nodes - 1);
  candidates.push_back(focus);
  std::sort(candidates.begin(), candidates.end());

  PrunedView view;
  view.focus = focus;
  for (KcId id : candidates) view.nodes.push_back({id, levels.at(id), centrality.at(id)});
  const std::set<KcId> kept(candidates.begin(), candidates.end());
  for (const auto& [e, w] : g.edges()) {
    if (kept.count(e.first) && kept.count(e.second)) view.edges.push_back({e.first, e.second, w, std::nullopt});
  }
  return view;
}

std::vector<RelationLabel> HeuristicLabeler::label(const PrunedView& view, const KcUniverse&,
                                                   std::span<const LabeledEdge> edges) {
  const double focus_level = view.node(view.focus).level;
  std::vector<RelationLabel> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    const KcId other = e.src == view.focus ? e.dst : e.src;
    const double gap = view.node(other).level - focus_level;
    if (gap <= -threshold_) {
      out.push_back(RelationLabel::is_prerequisite);
    } else if (gap >= threshold_) {
      out.push_back(RelationLabel::is_application);
    } else {
      out.push_back(RelationLabel::is_similar);
    }
  }
  return out;
}

PrunedView label_relations(PrunedView view, const KcUniverse& universe, RelationLabeler& labeler,
                           double heuristic_threshold) {
  std::vector<LabeledEdge> incident;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < view.edges.size(); ++i) {
    auto& e = view.edges[i];
    e.label.reset();
    if (e.src == view.focus || e.dst == view.focus) {
      incident.push_back(e);
      where.push_back(i);
    }
  }
  std::vector<RelationLabel> labels;
  bool fallback = false;
  try {
    labels = labeler.label(view, universe, incident);
    fallback = labels.size() != incident.size();
  } catch (const std::exception&) {
    fallback = true;
  }
  if (fallback) {
    HeuristicLabeler heuristic(heuristic_threshold);
    labels = heuristic.label(view, universe, incident);
    view.heuristic_labeled = true;
  }
  for (std::size_t i = 0; i < where.size(); ++i) view.edges[where[i]].label = labels[i];
  return view;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string to_dot(const PrunedView& view, const KcUniverse& universe) {
  std::ostringstream out;
  out << "digraph kc_graph {\n";
  for (const auto& n : view.nodes) {
    char level[64];
    // avoid printing "-0.00" for tiny negative levels
    const double shown = std::abs(n.level) < 0.005 ? 0.0 : n.level;
    std::snprintf(level, sizeof(level), "%.2f", shown);
    out << "  n" << to_index(n.id) << " [label=\"" << dot_escape(universe.display_name(n.id)) << " (level=" << level
        << ")\"";
    if (n.id == view.focus) out << ", style=filled, fillcolor=navy, fontcolor=white";
    out << "];\n";
  }
  for (const auto& e : view.edges) {
    out << "  n" << to_index(e.src) << " -> n" << to_index(e.dst) << " [weight=" << e.weight;
    if (e.label) out << ", label=\"" << relation_name(*e.label) << "\"";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace kcrec
