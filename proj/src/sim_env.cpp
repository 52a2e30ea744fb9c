#include "kcrec/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kcrec/error.hpp"
#include "kcrec/recommender.hpp"

namespace kcrec {

namespace {
constexpr int kCheckpointVersion = 1;
}

std::string_view variant_name(ObservationVariant v) {
  switch (v) {
    case ObservationVariant::aks_sample: return "aks_sample";
    case ObservationVariant::aks_plus_prev_action: return "aks_plus_prev_action";
    case ObservationVariant::prev_action_only: return "prev_action_only";
  }
  return "unknown";
}

ObservationVariant parse_variant(std::string_view name) {
  for (auto v : {ObservationVariant::aks_sample, ObservationVariant::aks_plus_prev_action,
                 ObservationVariant::prev_action_only}) {
    if (variant_name(v) == name) return v;
  }
  throw Error("unknown observation variant '" + std::string(name) + "'");
}

std::string_view outcome_mode_name(OutcomeMode m) {
  return m == OutcomeMode::sampled ? "sampled" : "thresholded";
}

OutcomeMode parse_outcome_mode(std::string_view name) {
  if (name == "sampled") return OutcomeMode::sampled;
  if (name == "thresholded") return OutcomeMode::thresholded;
  throw Error("unknown outcome mode '" + std::string(name) + "'");
}

std::size_t observation_dim(ObservationVariant v, std::size_t universe_size) {
  return v == ObservationVariant::aks_plus_prev_action ? 2 * universe_size : universe_size;
}

void EnvConfig::validate() const {
  if (!index || index->size() == 0) throw Error("environment needs a non-empty content index");
  if (interests.empty()) throw Error("environment needs at least one interest KC");
  for (KcId k : interests) {
    if (!index->universe().contains(k)) {
      throw Error("interest KC " + std::to_string(to_index(k)) + " outside the universe");
    }
    if (!gtks_init.count(k)) throw Error("gtks_init does not cover interest KC " + index->universe().display_name(k));
  }
  for (const auto& [k, b] : gtks_init) {
    if (!index->universe().contains(k)) throw Error("gtks_init KC outside the universe");
    if (!std::isfinite(b.mu) || !(b.sigma >= 0.0)) throw Error("gtks_init belief must be finite");
  }
  gtks_params.validate();
  aks_params.validate();
  if (max_steps < 1) throw Error("max_steps must be >= 1");
}

double interest_reward(const LearnerState& before, const LearnerState& after, std::span<const KcId> interests) {
  double r = 0.0;
  for (KcId k : interests) r += after.belief(k).mu - before.belief(k).mu;
  return r;
}

std::vector<double> observation(const LearnerState& aks, const KcUniverse& universe, ObservationVariant variant,
                                const std::optional<std::vector<double>>& last_action, Rng& rng) {
  const std::size_t k = universe.size();
  if (variant != ObservationVariant::aks_sample) {
    if (!last_action) throw Error("observation variant " + std::string(variant_name(variant)) + " needs the last action");
    if (last_action->size() != k) throw Error("last action has the wrong length");
  }
  switch (variant) {
    case ObservationVariant::aks_sample:
      return sample_kc_vector(aks, universe, rng);
    case ObservationVariant::aks_plus_prev_action: {
      auto obs = sample_kc_vector(aks, universe, rng);
      obs.insert(obs.end(), last_action->begin(), last_action->end());
      return obs;
    }
    case ObservationVariant::prev_action_only:
      return *last_action;
  }
  throw Error("unknown observation variant");
}

std::pair<EnvState, std::vector<double>> reset(const EnvConfig& cfg, ObservationVariant variant, std::uint64_t seed) {
  cfg.validate();
  EnvState state;
  state.gtks = LearnerState(cfg.gtks_params.prior());
  for (const auto& [k, b] : cfg.gtks_init) state.gtks.set(k, b);
  state.aks = LearnerState(cfg.aks_params.prior());
  state.step = 0;
  state.rng.seed(seed);

  auto sample = sample_kc_vector(state.aks, cfg.index->universe(), state.rng);
  if (variant == ObservationVariant::aks_plus_prev_action) {
    const std::vector<double> copy = sample;
    sample.insert(sample.end(), copy.begin(), copy.end());
  }
  return {std::move(state), std::move(sample)};
}

std::pair<EnvState, std::vector<double>> reset(const EnvConfig& cfg, ObservationVariant variant) {
  return reset(cfg, variant, cfg.seed);
}

StepResult step(const EnvConfig& cfg, EnvState& state, std::span<const double> action, ObservationVariant variant) {
  const auto& universe = cfg.index->universe();
  if (action.size() != universe.size()) {
    throw Error("action length " + std::to_string(action.size()) + " does not match universe size " +
                std::to_string(universe.size()));
  }
  if (state.step >= cfg.max_steps) throw Error("episode already finished");

  const KcVector coverage = shift_to_coverage(action);
  const Resource& resource = map_action_to_resource(coverage, *cfg.index);

  StepResult out;
  out.resource_id = resource.id;
  out.probability = predict_engagement(state.gtks, resource, cfg.gtks_params);
  if (cfg.outcome_mode == OutcomeMode::sampled) {
    std::bernoulli_distribution engaged(out.probability);
    out.engaged = engaged(state.rng);
  } else {
    out.engaged = out.probability >= 0.5;
  }
  const EngagementOutcome outcome{out.engaged, out.probability};

  LearnerState gtks_after = update_on_outcome(state.gtks, resource, outcome, cfg.gtks_params);
  out.reward = interest_reward(state.gtks, gtks_after, cfg.interests);
  state.gtks = std::move(gtks_after);
  state.aks = update_on_outcome(state.aks, resource, outcome, cfg.aks_params);
  state.last_action.emplace(action.begin(), action.end());
  ++state.step;

  out.observation = observation(state.aks, universe, variant, state.last_action, state.rng);
  out.resource_action = coverage_to_action(resource.aggregate, universe.size());
  out.done = state.step == cfg.max_steps;
  return out;
}

nlohmann::json to_json(const LearnerState& state) {
  nlohmann::json skills = nlohmann::json::array();
  for (const auto& [k, b] : state.skills()) {
    skills.push_back({{"kc", to_index(k)}, {"mu", b.mu}, {"sigma", b.sigma}});
  }
  return {{"engagement_count", state.engagement_count()},
          {"prior", {{"mu", state.prior().mu}, {"sigma", state.prior().sigma}}},
          {"skills", skills}};
}

LearnerState learner_state_from_json(const nlohmann::json& j) {
  LearnerState state({j.at("prior").at("mu").get<double>(), j.at("prior").at("sigma").get<double>()});
  for (const auto& s : j.at("skills")) {
    state.set(kc(s.at("kc").get<std::size_t>()), {s.at("mu").get<double>(), s.at("sigma").get<double>()});
  }
  state.set_engagement_count(j.at("engagement_count").get<std::uint64_t>());
  return state;
}

nlohmann::json to_json(const EnvState& state) {
  std::ostringstream rng;
  rng << state.rng;
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["step"] = state.step;
  j["gtks"] = to_json(state.gtks);
  j["aks"] = to_json(state.aks);
  j["last_action"] = state.last_action ? nlohmann::json(*state.last_action) : nlohmann::json(nullptr);
  j["rng_state"] = rng.str();
  return j;
}

EnvState env_state_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kCheckpointVersion) throw Error("unsupported environment checkpoint version");
  EnvState state;
  state.step = j.at("step").get<std::size_t>();
  state.gtks = learner_state_from_json(j.at("gtks"));
  state.aks = learner_state_from_json(j.at("aks"));
  if (!j.at("last_action").is_null()) state.last_action = j.at("last_action").get<std::vector<double>>();
  std::istringstream rng(j.at("rng_state").get<std::string>());
  rng >> state.rng;
  if (!rng) throw Error("corrupt rng_state in environment checkpoint");
  return state;
}

}  // namespace kcrec
