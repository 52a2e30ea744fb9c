#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kcrec/content.hpp"
#include "kcrec/ddpg.hpp"
#include "kcrec/recommender.hpp"
#include "kcrec/sim_env.hpp"

namespace kcrec {

struct LabelerSettings {
  std::string url;  // empty: heuristic labeler only
  double timeout_seconds = 10.0;
  double threshold = 0.5;
};

struct ExperimentConfig {
  // corpus: either a CSV file or a synthetic spec
  std::optional<std::filesystem::path> corpus_path;
  SyntheticCorpusSpec synthetic{100, 20, 4, 3, 0.5};
  std::uint64_t corpus_seed = 7;

  std::vector<std::string> interests;  // labels or decimal ids
  EngagementParams gtks_params;
  EngagementParams aks_params;
  std::optional<SkillBelief> gtks_default;  // unset: the GTKS prior
  std::map<std::string, SkillBelief> gtks_per_kc;

  std::size_t max_steps = 100;
  OutcomeMode outcome_mode = OutcomeMode::sampled;
  TrainConfig train;

  std::vector<ObservationVariant> variants{ObservationVariant::aks_sample, ObservationVariant::aks_plus_prev_action,
                                           ObservationVariant::prev_action_only};
  std::size_t runs_per_variant = 5;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir = "out";

  std::size_t evaluation_episodes = 10;
  std::size_t session_steps = 40;
  std::size_t switch_threshold = 20;
  LabelerSettings labeler;

  void validate() const;
};

/// Parses the JSON schema documented in the README. Unknown keys are errors.
/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Corpus from the configured path, or the synthetic one.
ContentIndex load_experiment_corpus(const ExperimentConfig& cfg);
/// Simulator settings; every KC of the universe gets a GTKS starting belief.
EnvConfig make_env_config(const ExperimentConfig& cfg, std::shared_ptr<const ContentIndex> index);

/// base_seed + fnv1a64(variant name) + run, wrapping modulo 2^64.
std::uint64_t run_seed(std::uint64_t base_seed, ObservationVariant variant, std::size_t run);

struct EvaluationSummary {
  std::size_t episodes = 0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  double policy_mean_reward = 0.0;
  double random_mean_reward = 0.0;
};

/// Deterministic policy against a uniform-random one; episode e of both uses
/// the same environment seed. Throws if the agent does not fit the variant.
EvaluationSummary evaluate_policy(const DdpgAgent& agent, const EnvConfig& env, ObservationVariant variant,
                                  std::size_t episodes, std::uint64_t seed);
nlohmann::json to_json(const EvaluationSummary& s);

/// (policy - random) / |random|; infinite when random is exactly zero.
double relative_gain(double policy, double random);

void write_metrics_csv(std::ostream& out, ObservationVariant variant, std::size_t run,
                       const std::vector<StepMetrics>& metrics);

struct CellResult {
  ObservationVariant variant;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double final_cum_reward = 0.0;
  std::optional<EvaluationSummary> evaluation;
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;
};

struct ExperimentResult {
  std::vector<CellResult> cells;  // variant-major, then run
  nlohmann::json summary;
};

/// Trains every (variant, run) cell with at most `jobs` in flight and writes
/// metrics/<variant>_run<r>.csv, checkpoints/<variant>_run<r>.json and
/// summary.json under cfg.output_dir. Validates everything first.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1);

struct SessionRow {
  std::size_t step = 0;
  RecommendationMode mode = RecommendationMode::cold_start;
  std::string resource_id;
  double probability = 0.0;
  bool engaged = false;
  double interest_gain = 0.0;  // GTKS interest-mean change this step
};

/// Switching-hybrid session against the simulated learner. The AKS is the
/// session's learner model; the GTKS answers engagement.
std::vector<SessionRow> simulate_session(const EnvConfig& env, std::size_t steps, std::size_t switch_threshold,
                                         std::uint64_t seed);
void write_session_csv(std::ostream& out, const std::vector<SessionRow>& rows);

}  // namespace kcrec
