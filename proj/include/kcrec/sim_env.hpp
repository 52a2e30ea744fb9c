#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kcrec/content.hpp"
#include "kcrec/learner_model.hpp"

namespace kcrec {

enum class ObservationVariant { aks_sample, aks_plus_prev_action, prev_action_only };
enum class OutcomeMode { sampled, thresholded };

std::string_view variant_name(ObservationVariant v);
ObservationVariant parse_variant(std::string_view name);
std::string_view outcome_mode_name(OutcomeMode m);
OutcomeMode parse_outcome_mode(std::string_view name);

/// Observation length for a universe of K components.
std::size_t observation_dim(ObservationVariant v, std::size_t universe_size);

/// Simulated learner: the ground-truth state (GTKS) answers engagement, the
/// approximated state (AKS) is what the agent gets to see.
struct EnvConfig {
  std::shared_ptr<const ContentIndex> index;
  std::vector<KcId> interests;
  std::map<KcId, SkillBelief> gtks_init;  // KCs not listed start at gtks_params' prior
  EngagementParams gtks_params;
  EngagementParams aks_params;
  OutcomeMode outcome_mode = OutcomeMode::sampled;
  std::size_t max_steps = 100;
  std::uint64_t seed = 0;

  std::size_t universe_size() const { return index->universe().size(); }
  void validate() const;
};

struct EnvState {
  LearnerState gtks;
  LearnerState aks;
  std::size_t step = 0;
  std::optional<std::vector<double>> last_action;
  Rng rng;

  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool engaged = false;
  double probability = 0.0;
  std::string resource_id;
  /// Resource aggregate mapped back to action space (2x - 1).
  std::vector<double> resource_action;
  bool done = false;
};

/// Fresh episode seeded with `seed`: GTKS from gtks_init, AKS at its prior.
/// The first observation is built from an AKS sample for every variant; the
/// action slot of aks_plus_prev_action holds a copy of that sample.
std::pair<EnvState, std::vector<double>> reset(const EnvConfig& cfg, ObservationVariant variant, std::uint64_t seed);
std::pair<EnvState, std::vector<double>> reset(const EnvConfig& cfg, ObservationVariant variant);

/// Maps the action to a resource, simulates engagement on the GTKS, updates
/// both states with the same outcome and scores the GTKS interest gain.
StepResult step(const EnvConfig& cfg, EnvState& state, std::span<const double> action, ObservationVariant variant);

/// Sum over interest KCs of (mu_after - mu_before); knowledge gains are positive.
double interest_reward(const LearnerState& before, const LearnerState& after, std::span<const KcId> interests);

/// aks_sample -> AKS draw (K); aks_plus_prev_action -> [draw | last_action] (2K);
/// prev_action_only -> last_action (K). Throws when last_action is required but absent.
std::vector<double> observation(const LearnerState& aks, const KcUniverse& universe, ObservationVariant variant,
                                const std::optional<std::vector<double>>& last_action, Rng& rng);

nlohmann::json to_json(const LearnerState& state);
LearnerState learner_state_from_json(const nlohmann::json& j);

/// Checkpoint with keys {aks, gtks, last_action, rng_state, step, version}.
nlohmann::json to_json(const EnvState& state);
EnvState env_state_from_json(const nlohmann::json& j);

}  // namespace kcrec
