#include "kcrec/ddpg.hpp"

#include <algorithm>
#include <cmath>

#include "kcrec/error.hpp"
#include "kcrec/seeding.hpp"

namespace kcrec {

namespace {
constexpr int kAgentCheckpointVersion = 1;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t action_dim)
    : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (capacity_ == 0) throw Error("replay capacity must be positive");
  storage_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (t.obs.size() != obs_dim_ || t.next_obs.size() != obs_dim_) throw Error("transition observation shape mismatch");
  if (t.action.size() != action_dim_) throw Error("transition action shape mismatch");
  ++insertions_;
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
    return;
  }
  storage_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= storage_.size()) throw Error("replay index out of range");
  return storage_[(head_ + i) % storage_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (storage_.empty()) throw Error("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(n, rng)) out.push_back(&at(i));
  return out;
}

void AgentConfig::validate() const {
  if (hidden.empty()) throw Error("agent needs at least one hidden layer");
  for (auto h : hidden) {
    if (h == 0) throw Error("hidden sizes must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("discount gamma must lie in [0, 1)");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("noise_sigma must be nonnegative");
  if (sync_period == 0) throw Error("sync_period must be positive");
}

void TrainConfig::validate() const {
  agent.validate();
  if (batch_size == 0) throw Error("batch_size must be positive");
  if (warmup_steps < batch_size) throw Error("warmup_steps must be >= batch_size");
  if (total_steps < warmup_steps) throw Error("total_steps must be >= warmup_steps");
  if (capacity < batch_size) throw Error("replay capacity must be >= batch_size");
}

DdpgAgent DdpgAgent::create(std::size_t obs_dim, std::size_t action_dim, const AgentConfig& config, Rng& rng) {
  config.validate();
  if (obs_dim == 0 || action_dim == 0) throw Error("agent dimensions must be positive");
  DdpgAgent a;
  a.config = config;
  a.obs_dim = obs_dim;
  a.action_dim = action_dim;

  std::vector<std::size_t> actor_dims{obs_dim};
  std::vector<std::size_t> critic_dims{obs_dim + action_dim};
  std::vector<Activation> actor_acts, critic_acts;
  for (auto h : config.hidden) {
    actor_dims.push_back(h);
    critic_dims.push_back(h);
    actor_acts.push_back(Activation::relu);
    critic_acts.push_back(Activation::relu);
  }
  actor_dims.push_back(action_dim);
  critic_dims.push_back(1);
  actor_acts.push_back(Activation::tanh);
  critic_acts.push_back(Activation::linear);

  a.actor = Mlp(actor_dims, actor_acts, rng);
  a.critic = Mlp(critic_dims, critic_acts, rng);
  a.target_actor = a.actor;
  a.target_critic = a.critic;
  a.actor_optimizer = Adam(a.actor, config.actor_optimizer);
  a.critic_optimizer = Adam(a.critic, config.critic_optimizer);
  return a;
}

std::vector<double> act(const DdpgAgent& agent, std::span<const double> obs, Rng& rng, bool explore) {
  if (obs.size() != agent.obs_dim) {
    throw Error("observation dimension " + std::to_string(obs.size()) + " does not match actor input " +
                std::to_string(agent.obs_dim));
  }
  auto action = predict(agent.actor, obs);
  if (explore) {
    std::normal_distribution<double> noise(0.0, agent.config.noise_sigma);
    for (double& a : action) a += noise(rng);
  }
  for (double& a : action) a = std::clamp(a, -1.0, 1.0);
  return action;
}

namespace {

struct Batch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd action;
  Eigen::RowVectorXd reward;
  Eigen::MatrixXd next_obs;
  Eigen::RowVectorXd not_terminal;
};

Batch gather(const DdpgAgent& agent, std::span<const Transition* const> batch) {
  if (batch.empty()) throw Error("training batch is empty");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto od = static_cast<Eigen::Index>(agent.obs_dim);
  const auto ad = static_cast<Eigen::Index>(agent.action_dim);
  Batch b{Eigen::MatrixXd(od, n), Eigen::MatrixXd(ad, n), Eigen::RowVectorXd(n), Eigen::MatrixXd(od, n),
          Eigen::RowVectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = *batch[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(t.obs.size()) != od || static_cast<Eigen::Index>(t.next_obs.size()) != od ||
        static_cast<Eigen::Index>(t.action.size()) != ad) {
      throw Error("transition shape does not match the agent");
    }
    b.obs.col(i) = Eigen::Map<const Eigen::VectorXd>(t.obs.data(), od);
    b.action.col(i) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), ad);
    b.next_obs.col(i) = Eigen::Map<const Eigen::VectorXd>(t.next_obs.data(), od);
    b.reward(i) = t.reward;
    b.not_terminal(i) = t.terminal ? 0.0 : 1.0;
  }
  return b;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Eigen::RowVectorXd targets(const DdpgAgent& agent, const Batch& b) {
  const Eigen::MatrixXd next_action = predict(agent.target_actor, b.next_obs);
  const Eigen::MatrixXd next_q = predict(agent.target_critic, stack(b.next_obs, next_action));
  return b.reward + agent.config.gamma * b.not_terminal.cwiseProduct(next_q.row(0));
}

}  // namespace

std::vector<double> td_targets(const DdpgAgent& agent, std::span<const Transition* const> batch) {
  const auto y = targets(agent, gather(agent, batch));
  return std::vector<double>(y.data(), y.data() + y.size());
}

TrainStepStats train_step(DdpgAgent& agent, std::span<const Transition* const> batch) {
  const Batch b = gather(agent, batch);
  const double n = static_cast<double>(batch.size());
  TrainStepStats stats;

  const Eigen::RowVectorXd y = targets(agent, b);
  const auto critic_pass = forward(agent.critic, stack(b.obs, b.action));
  const Eigen::RowVectorXd diff = critic_pass.output.row(0) - y;
  stats.critic_loss = diff.squaredNorm() / n;
  if (!std::isfinite(stats.critic_loss)) throw Error("diverged");
  const auto critic_grads = backward(agent.critic, critic_pass.cache, (2.0 / n) * diff);
  agent.critic_optimizer.step(agent.critic, critic_grads.params);

  const auto actor_pass = forward(agent.actor, b.obs);
  const auto q_pass = forward(agent.critic, stack(b.obs, actor_pass.output));
  stats.actor_objective = q_pass.output.mean();
  if (!std::isfinite(stats.actor_objective)) throw Error("diverged");
  // ascend Q by descending -Q
  const Eigen::MatrixXd grad_q = Eigen::MatrixXd::Constant(1, q_pass.output.cols(), -1.0 / n);
  const auto through_critic = backward(agent.critic, q_pass.cache, grad_q);
  const Eigen::MatrixXd grad_action =
      through_critic.grad_input.bottomRows(static_cast<Eigen::Index>(agent.action_dim));
  const auto actor_grads = backward(agent.actor, actor_pass.cache, grad_action);
  agent.actor_optimizer.step(agent.actor, actor_grads.params);
  return stats;
}

void maybe_sync_targets(DdpgAgent& agent, std::uint64_t global_step) {
  if (global_step % agent.config.sync_period != 0) return;
  clone_into(agent.actor, agent.target_actor);
  clone_into(agent.critic, agent.target_critic);
}

namespace {

nlohmann::json adam_config_json(const AdamConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

AdamConfig adam_config_from(const nlohmann::json& j) {
  return {j.at("learning_rate").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
          j.at("epsilon").get<double>()};
}

}  // namespace

nlohmann::json to_json(const DdpgAgent& agent) {
  nlohmann::json config = {{"obs_dim", agent.obs_dim},
                           {"action_dim", agent.action_dim},
                           {"hidden", agent.config.hidden},
                           {"gamma", agent.config.gamma},
                           {"noise_sigma", agent.config.noise_sigma},
                           {"sync_period", agent.config.sync_period},
                           {"actor_optimizer", adam_config_json(agent.config.actor_optimizer)},
                           {"critic_optimizer", adam_config_json(agent.config.critic_optimizer)}};
  return {{"version", kAgentCheckpointVersion},
          {"config", config},
          {"actor", to_json(agent.actor)},
          {"critic", to_json(agent.critic)},
          {"target_actor", to_json(agent.target_actor)},
          {"target_critic", to_json(agent.target_critic)},
          {"optim_state",
           {{"actor", agent.actor_optimizer.to_json()}, {"critic", agent.critic_optimizer.to_json()}}},
          {"global_step", agent.global_step}};
}

DdpgAgent agent_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kAgentCheckpointVersion) throw Error("unsupported agent checkpoint version");
  const auto& c = j.at("config");
  DdpgAgent a;
  a.obs_dim = c.at("obs_dim").get<std::size_t>();
  a.action_dim = c.at("action_dim").get<std::size_t>();
  a.config.hidden = c.at("hidden").get<std::vector<std::size_t>>();
  a.config.gamma = c.at("gamma").get<double>();
  a.config.noise_sigma = c.at("noise_sigma").get<double>();
  a.config.sync_period = c.at("sync_period").get<std::size_t>();
  a.config.actor_optimizer = adam_config_from(c.at("actor_optimizer"));
  a.config.critic_optimizer = adam_config_from(c.at("critic_optimizer"));
  a.config.validate();
  a.actor = mlp_from_json(j.at("actor"));
  a.critic = mlp_from_json(j.at("critic"));
  a.target_actor = mlp_from_json(j.at("target_actor"));
  a.target_critic = mlp_from_json(j.at("target_critic"));
  a.actor_optimizer = Adam::from_json(j.at("optim_state").at("actor"));
  a.critic_optimizer = Adam::from_json(j.at("optim_state").at("critic"));
  a.global_step = j.at("global_step").get<std::uint64_t>();
  if (a.actor.input_dim() != a.obs_dim || a.actor.output_dim() != a.action_dim ||
      a.critic.input_dim() != a.obs_dim + a.action_dim || a.critic.output_dim() != 1 ||
      !a.actor.same_architecture(a.target_actor) || !a.critic.same_architecture(a.target_critic)) {
    throw Error("agent checkpoint networks do not match its configuration");
  }
  return a;
}

SimEnvironment::SimEnvironment(EnvConfig cfg, ObservationVariant variant)
    : cfg_(std::move(cfg)), variant_(variant) {
  cfg_.validate();
}

std::size_t SimEnvironment::observation_dim() const { return kcrec::observation_dim(variant_, cfg_.universe_size()); }

std::size_t SimEnvironment::action_dim() const { return cfg_.universe_size(); }

std::vector<double> SimEnvironment::reset() {
  const std::uint64_t seed = episode_ == 0 ? cfg_.seed : derive_seed(cfg_.seed, episode_);
  ++episode_;
  auto [state, obs] = kcrec::reset(cfg_, variant_, seed);
  state_ = std::move(state);
  return obs;
}

EnvStep SimEnvironment::step(std::span<const double> action) {
  StepResult r = kcrec::step(cfg_, state_, action, variant_);
  EnvStep out;
  out.observation = std::move(r.observation);
  out.reward = r.reward;
  out.done = r.done;
  out.terminal = false;  // continuing task: episodes end by time limit only
  out.engaged = r.engaged;
  out.resource_id = std::move(r.resource_id);
  out.executed_action = std::move(r.resource_action);
  return out;
}

TrainResult train(Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x61676e74));  // agent stream
  TrainResult result{DdpgAgent::create(env.observation_dim(), env.action_dim(), cfg.agent, rng), {}};
  DdpgAgent& agent = result.agent;
  ReplayBuffer buffer(cfg.capacity, env.observation_dim(), env.action_dim());
  std::uniform_real_distribution<double> uniform_action(-1.0, 1.0);

  result.metrics.reserve(cfg.total_steps);
  std::vector<double> obs = env.reset();
  double cum_reward = 0.0;
  for (std::uint64_t step = 1; step <= cfg.total_steps; ++step) {
    std::vector<double> action;
    if (step <= cfg.warmup_steps) {
      action.resize(env.action_dim());
      for (double& a : action) a = uniform_action(rng);
    } else {
      action = act(agent, obs, rng, true);
    }

    EnvStep out = env.step(action);
    cum_reward += out.reward;
    StepMetrics m{step, out.reward, cum_reward, out.engaged, out.resource_id, std::nullopt, std::nullopt};

    std::vector<double> stored =
        cfg.store_resource_action && !out.executed_action.empty() ? out.executed_action : action;
    buffer.push({obs, std::move(stored), out.reward, out.observation, out.terminal});

    if (step > cfg.warmup_steps) {
      const auto batch = buffer.sample(cfg.batch_size, rng);
      const auto stats = train_step(agent, batch);
      m.critic_loss = stats.critic_loss;
      m.actor_objective = stats.actor_objective;
    }
    agent.global_step = step;
    maybe_sync_targets(agent, step);
    result.metrics.push_back(std::move(m));

    obs = out.done ? env.reset() : std::move(out.observation);
  }
  return result;
}

TrainResult train(const EnvConfig& env_cfg, ObservationVariant variant, const TrainConfig& cfg) {
  SimEnvironment env(env_cfg, variant);
  return train(env, cfg);
}

}  // namespace kcrec
