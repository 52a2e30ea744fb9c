#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kcrec/content.hpp"
#include "kcrec/domain_graph.hpp"
#include "kcrec/error.hpp"
#include "kcrec/experiment.hpp"

namespace {

using namespace kcrec;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t jobs = 1;
};

std::optional<ExperimentConfig> maybe_config(const Globals& g) {
  if (!g.config) return std::nullopt;
  return load_experiment_config(*g.config);
}

ExperimentConfig require_config(const Globals& g, const std::string& command) {
  if (!g.config) throw UsageError(command + " needs --config");
  return load_experiment_config(*g.config);
}

std::filesystem::path out_dir(const Globals& g) {
  std::filesystem::path dir(*g.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

ContentIndex resolve_corpus(const Globals& g, const std::string& corpus_path) {
  if (!corpus_path.empty()) return load_corpus(corpus_path);
  if (auto cfg = maybe_config(g)) return load_experiment_corpus(*cfg);
  throw UsageError("no corpus: pass --corpus or --config");
}

CentralityMethod parse_centrality(const std::string& name) {
  if (name == "out_degree") return CentralityMethod::out_degree;
  if (name == "katz") return CentralityMethod::katz;
  throw UsageError("unknown centrality method '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-component recommender simulator", "kcrec"};
  app.fallthrough();
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Seed override");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Parallel training cells")->check(CLI::PositiveNumber);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus CSV");
  std::optional<std::size_t> n_resources, n_kcs, segments, kcs_per_segment;
  std::optional<double> locality;
  gen->add_option("--resources", n_resources, "Number of resources");
  gen->add_option("--kcs", n_kcs, "Universe size");
  gen->add_option("--segments", segments, "Segments per resource");
  gen->add_option("--kcs-per-segment", kcs_per_segment, "Annotations per segment");
  gen->add_option("--locality", locality, "Topic locality in [0, 1]");

  // build-graph
  auto* build = app.add_subcommand("build-graph", "Build the merged KC graph with levels and centrality");
  std::string corpus_path;
  std::string centrality = "out_degree";
  build->add_option("--corpus", corpus_path, "Corpus CSV");
  build->add_option("--centrality", centrality, "out_degree or katz");

  // prune
  auto* prune = app.add_subcommand("prune", "Emit the labelled graph around a focus KC as DOT");
  std::string focus;
  std::size_t radius = 2, max_nodes = 12;
  double min_centrality = 0.0;
  std::optional<std::string> labeler_url;
  std::optional<double> labeler_timeout, label_threshold;
  prune->add_option("--corpus", corpus_path, "Corpus CSV");
  prune->add_option("--focus", focus, "Focus KC label or id")->required();
  prune->add_option("--radius", radius, "Hop radius");
  prune->add_option("--max-nodes", max_nodes, "Maximum kept nodes")->check(CLI::PositiveNumber);
  prune->add_option("--min-centrality", min_centrality, "Centrality floor");
  prune->add_option("--centrality", centrality, "out_degree or katz");
  prune->add_option("--labeler-url", labeler_url, "HTTP relation labeler endpoint");
  prune->add_option("--labeler-timeout", labeler_timeout, "Labeler timeout in seconds");
  prune->add_option("--threshold", label_threshold, "Heuristic level-gap threshold");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train every (variant, run) cell of an experiment");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Compare a checkpoint's policy with a uniform-random policy");
  std::string checkpoint, variant;
  std::optional<std::size_t> episodes;
  eval->add_option("--checkpoint", checkpoint, "Agent checkpoint JSON")->required();
  eval->add_option("--variant", variant, "Observation variant the agent was trained on")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a switching-hybrid recommendation session");
  std::optional<std::size_t> steps, threshold;
  sim->add_option("--steps", steps, "Session length");
  sim->add_option("--switch-threshold", threshold, "Engagement events before switching");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      SyntheticCorpusSpec spec;
      std::uint64_t seed = 7;
      if (auto cfg = maybe_config(g)) {
        spec = cfg->synthetic;
        seed = cfg->corpus_seed;
      }
      if (n_resources) spec.n_resources = *n_resources;
      if (n_kcs) spec.n_kcs = *n_kcs;
      if (segments) spec.segments_per_resource = *segments;
      if (kcs_per_segment) spec.kcs_per_segment = *kcs_per_segment;
      if (locality) spec.topic_locality = *locality;
      if (g.seed) seed = *g.seed;
      const auto index = generate_synthetic_corpus(spec, seed);
      if (g.out) {
        save_corpus(index, out_dir(g) / "corpus.csv");
      } else {
        export_corpus(index, std::cout);
      }
    } else if (build->parsed()) {
      const auto index = resolve_corpus(g, corpus_path);
      const auto graph = build_corpus_graph(index);
      const auto& u = index.universe();
      std::ostringstream edges, nodes;
      edges << "src,dst,weight\n";
      for (const auto& [e, w] : graph.edges()) {
        edges << u.display_name(e.first) << ',' << u.display_name(e.second) << ',' << w << '\n';
      }
      nodes << "kc,level,centrality\n";
      if (!graph.empty()) {
        const auto levels = hierarchical_levels(graph);
        const auto cent = influence_centrality(graph, parse_centrality(centrality));
        for (KcId id : graph.nodes()) {
          nodes << u.display_name(id) << ',' << format_double(levels.at(id)) << ',' << format_double(cent.at(id))
                << '\n';
        }
      }
      if (g.out) {
        const auto dir = out_dir(g);
        write_text(dir / "graph_edges.csv", edges.str());
        write_text(dir / "graph_nodes.csv", nodes.str());
      } else {
        std::cout << edges.str();
      }
    } else if (prune->parsed()) {
      const auto cfg = maybe_config(g);
      const auto index = resolve_corpus(g, corpus_path);
      const auto graph = build_corpus_graph(index);
      LabelerSettings labeler = cfg ? cfg->labeler : LabelerSettings{};
      if (labeler_url) labeler.url = *labeler_url;
      if (labeler_timeout) labeler.timeout_seconds = *labeler_timeout;
      if (label_threshold) labeler.threshold = *label_threshold;

      PruneParams params{radius, max_nodes, min_centrality, parse_centrality(centrality)};
      auto view = prune_around(graph, index.universe().resolve(focus), params);
      if (labeler.url.empty()) {
        HeuristicLabeler heuristic(labeler.threshold);
        view = label_relations(std::move(view), index.universe(), heuristic, labeler.threshold);
      } else {
        HttpRelationLabeler http(labeler.url, labeler.timeout_seconds);
        view = label_relations(std::move(view), index.universe(), http, labeler.threshold);
        if (view.heuristic_labeled) std::cerr << "warning: relation labeler failed; used the level heuristic\n";
      }
      const std::string dot = to_dot(view, index.universe());
      std::cout << dot;
      if (g.out) write_text(out_dir(g) / "prune.dot", dot);
    } else if (train_cmd->parsed()) {
      auto cfg = require_config(g, "train");
      if (g.seed) cfg.base_seed = *g.seed;
      if (g.out) cfg.output_dir = *g.out;
      const auto result = run_experiment(cfg, g.jobs);
      std::cout << result.summary.dump(2) << '\n';
    } else if (eval->parsed()) {
      const auto cfg = require_config(g, "evaluate");
      std::ifstream in(checkpoint);
      if (!in) throw Error("cannot open checkpoint '" + checkpoint + "': file not found or unreadable");
      const auto agent = agent_from_json(nlohmann::json::parse(in));
      auto index = std::make_shared<const ContentIndex>(load_experiment_corpus(cfg));
      const auto env = make_env_config(cfg, index);
      const auto summary = evaluate_policy(agent, env, parse_variant(variant), episodes.value_or(cfg.evaluation_episodes),
                                           g.seed.value_or(cfg.base_seed));
      auto j = to_json(summary);
      j["variant"] = variant;
      j["checkpoint"] = checkpoint;
      std::cout << j.dump(2) << '\n';
      if (g.out) write_text(out_dir(g) / "evaluation.json", j.dump(2) + "\n");
    } else if (sim->parsed()) {
      const auto cfg = require_config(g, "simulate");
      auto index = std::make_shared<const ContentIndex>(load_experiment_corpus(cfg));
      const auto env = make_env_config(cfg, index);
      const auto rows = simulate_session(env, steps.value_or(cfg.session_steps), threshold.value_or(cfg.switch_threshold),
                                         g.seed.value_or(cfg.base_seed));
      std::ostringstream csv;
      write_session_csv(csv, rows);
      std::cout << csv.str();
      if (g.out) write_text(out_dir(g) / "session.csv", csv.str());
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
