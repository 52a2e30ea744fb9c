#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kcrec/nn_core.hpp"
#include "kcrec/sim_env.hpp"

namespace kcrec {

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

/// Fixed-capacity FIFO experience pool.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t action_dim);

  /// Throws on a shape mismatch. Evicts the oldest transition when full.
  void push(Transition t);

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t insertions() const { return insertions_; }
  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;

  /// Uniform draw with replacement of `n` stored positions (oldest = 0).
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t obs_dim_;
  std::size_t action_dim_;
  std::vector<Transition> storage_;
  std::size_t head_ = 0;  // slot of the oldest element once full
  std::uint64_t insertions_ = 0;
};

struct AgentConfig {
  std::vector<std::size_t> hidden{128, 64};
  double gamma = 0.99;
  double noise_sigma = 0.1;
  std::size_t sync_period = 1000;
  AdamConfig actor_optimizer;
  AdamConfig critic_optimizer;

  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

struct TrainConfig {
  std::size_t total_steps = 50000;
  std::size_t batch_size = 64;
  std::size_t warmup_steps = 1000;
  std::size_t capacity = 100000;
  std::uint64_t seed = 0;
  /// Store the selected resource's KC vector (2x - 1) as the replayed action
  /// instead of the raw actor output.
  bool store_resource_action = true;
  AgentConfig agent;

  void validate() const;
};

/// Actor: obs -> hidden... -> K (relu, relu, tanh).
/// Critic: [obs | action] -> hidden... -> 1 (relu, relu, linear).
struct DdpgAgent {
  Mlp actor;
  Mlp critic;
  Mlp target_actor;
  Mlp target_critic;
  Adam actor_optimizer;
  Adam critic_optimizer;
  AgentConfig config;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::uint64_t global_step = 0;

  static DdpgAgent create(std::size_t obs_dim, std::size_t action_dim, const AgentConfig& config, Rng& rng);

  bool operator==(const DdpgAgent&) const = default;
};

/// Deterministic actor output, plus clipped N(0, noise_sigma^2) noise when exploring.
std::vector<double> act(const DdpgAgent& agent, std::span<const double> obs, Rng& rng, bool explore);

struct TrainStepStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

/// One critic step on the mean squared TD error against
/// y = r + gamma * Q'(s', mu'(s')) (y = r for terminal transitions), then one
/// actor step ascending mean Q(s, mu(s)). Throws "diverged" on a non-finite loss.
TrainStepStats train_step(DdpgAgent& agent, std::span<const Transition* const> batch);

/// TD targets for a batch, exposed for inspection.
std::vector<double> td_targets(const DdpgAgent& agent, std::span<const Transition* const> batch);

/// Hard-copies online networks into targets when global_step is a multiple
/// of the sync period.
void maybe_sync_targets(DdpgAgent& agent, std::uint64_t global_step);

nlohmann::json to_json(const DdpgAgent& agent);
DdpgAgent agent_from_json(const nlohmann::json& j);

/// Environment seen by the training loop.
struct EnvStep {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;      // episode ends here; the loop resets
  bool terminal = false;  // no bootstrapping past this transition
  bool engaged = false;
  std::string resource_id;
  std::vector<double> executed_action;  // empty means "the action as given"
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual EnvStep step(std::span<const double> action) = 0;
};

/// Episodic adapter over the simulated learner. Episode e is seeded with
/// cfg.seed for e = 0 and a derived seed afterwards.
class SimEnvironment final : public Environment {
 public:
  SimEnvironment(EnvConfig cfg, ObservationVariant variant);

  std::size_t observation_dim() const override;
  std::size_t action_dim() const override;
  std::vector<double> reset() override;
  EnvStep step(std::span<const double> action) override;

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  EnvConfig cfg_;
  ObservationVariant variant_;
  EnvState state_;
  std::uint64_t episode_ = 0;
};

struct StepMetrics {
  std::uint64_t step = 0;
  double reward = 0.0;
  double cum_reward = 0.0;
  bool engaged = false;
  std::string resource_id;
  std::optional<double> critic_loss;
  std::optional<double> actor_objective;
};

struct TrainResult {
  DdpgAgent agent;
  std::vector<StepMetrics> metrics;
};

/// Observe, act (uniform random during warmup), step, store, then one
/// train_step per environment step after warmup, then maybe sync targets.
TrainResult train(Environment& env, const TrainConfig& cfg);
TrainResult train(const EnvConfig& env_cfg, ObservationVariant variant, const TrainConfig& cfg);

}  // namespace kcrec
