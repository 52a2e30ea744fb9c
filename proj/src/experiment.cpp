#include "kcrec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "kcrec/error.hpp"
#include "kcrec/seeding.hpp"

namespace kcrec {

namespace {

using nlohmann::json;

constexpr int kSummaryVersion = 1;

// Strict view of one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* take(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  Section object(const std::string& key) {
    const json* v = take(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, where(key));
  }

  void read(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw Error(where(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  template <std::unsigned_integral T>
  void read(const std::string& key, T& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) throw Error(where(key) + ": expected a nonnegative integer");
      out = v->get<T>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw Error(where(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw Error(where(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw Error(path_ + ": unknown key '" + key + "'");
    }
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

EngagementParams read_engagement(Section s) {
  EngagementParams p;
  s.read("beta", p.beta);
  s.read("gamma", p.gamma);
  s.read("tau", p.tau);
  s.read("prior_mu", p.prior_mu);
  s.read("prior_sigma", p.prior_sigma);
  s.finish();
  return p;
}

SkillBelief read_belief(Section s) {
  SkillBelief b;
  s.read("mu", b.mu);
  s.read("sigma", b.sigma);
  s.finish();
  return b;
}

AdamConfig read_adam(Section s) {
  AdamConfig a;
  s.read("learning_rate", a.learning_rate);
  s.read("beta1", a.beta1);
  s.read("beta2", a.beta2);
  s.read("epsilon", a.epsilon);
  s.finish();
  return a;
}

std::vector<std::string> read_strings(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(where + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw Error(where + ": expected an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string cell_name(ObservationVariant v, std::size_t run) {
  return std::string(variant_name(v)) + "_run" + std::to_string(run);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!corpus_path) {
    if (synthetic.n_resources == 0 || synthetic.n_kcs == 0) throw Error("synthetic corpus needs resources and KCs");
  }
  if (interests.empty()) throw Error("config needs at least one interest KC");
  gtks_params.validate();
  aks_params.validate();
  if (gtks_default && (!std::isfinite(gtks_default->mu) || !(gtks_default->sigma >= 0.0))) {
    throw Error("gtks_init.default must have a finite mu and nonnegative sigma");
  }
  if (max_steps < 1) throw Error("env.max_steps must be >= 1");
  train.validate();
  if (variants.empty()) throw Error("variants must not be empty");
  std::set<ObservationVariant> distinct(variants.begin(), variants.end());
  if (distinct.size() != variants.size()) throw Error("variants must not repeat");
  if (runs_per_variant < 1) throw Error("runs_per_variant must be >= 1");
  if (!(labeler.timeout_seconds > 0.0)) throw Error("labeler.timeout_seconds must be positive");
  if (!(labeler.threshold >= 0.0)) throw Error("labeler.threshold must be nonnegative");
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  Section root(j, "");

  {
    Section corpus = root.object("corpus");
    if (corpus.has("path") && corpus.has("synthetic")) throw Error("corpus: give either path or synthetic, not both");
    std::string path;
    corpus.read("path", path);
    if (!path.empty()) {
      std::filesystem::path p(path);
      cfg.corpus_path = p.is_relative() ? base_dir / p : p;
    }
    Section syn = corpus.object("synthetic");
    syn.read("n_resources", cfg.synthetic.n_resources);
    syn.read("n_kcs", cfg.synthetic.n_kcs);
    syn.read("segments_per_resource", cfg.synthetic.segments_per_resource);
    syn.read("kcs_per_segment", cfg.synthetic.kcs_per_segment);
    syn.read("topic_locality", cfg.synthetic.topic_locality);
    syn.finish();
    corpus.read("seed", cfg.corpus_seed);
    corpus.finish();
  }

  if (const json* v = root.take("interests")) cfg.interests = read_strings(*v, "interests");

  {
    Section learner = root.object("learner");
    cfg.gtks_params = read_engagement(learner.object("gtks"));
    cfg.aks_params = read_engagement(learner.object("aks"));
    learner.finish();
  }

  {
    Section init = root.object("gtks_init");
    if (init.has("default")) cfg.gtks_default = read_belief(init.object("default"));
    if (const json* per = init.take("per_kc")) {
      if (!per->is_object()) throw Error("gtks_init.per_kc: expected an object");
      for (const auto& [label, belief] : per->items()) {
        cfg.gtks_per_kc[label] = read_belief(Section(belief, "gtks_init.per_kc." + label));
      }
    }
    init.finish();
  }

  {
    Section env = root.object("env");
    env.read("max_steps", cfg.max_steps);
    std::string mode(outcome_mode_name(cfg.outcome_mode));
    env.read("outcome_mode", mode);
    cfg.outcome_mode = parse_outcome_mode(mode);
    env.finish();
  }

  {
    Section agent = root.object("agent");
    agent.read("total_steps", cfg.train.total_steps);
    agent.read("batch_size", cfg.train.batch_size);
    agent.read("warmup_steps", cfg.train.warmup_steps);
    agent.read("capacity", cfg.train.capacity);
    agent.read("store_resource_action", cfg.train.store_resource_action);
    if (const json* h = agent.take("hidden")) {
      if (!h->is_array()) throw Error("agent.hidden: expected an array of positive integers");
      cfg.train.agent.hidden.clear();
      for (const auto& v : *h) {
        if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) throw Error("agent.hidden: expected an array of positive integers");
        cfg.train.agent.hidden.push_back(v.get<std::size_t>());
      }
    }
    agent.read("gamma", cfg.train.agent.gamma);
    agent.read("noise_sigma", cfg.train.agent.noise_sigma);
    agent.read("sync_period", cfg.train.agent.sync_period);
    cfg.train.agent.actor_optimizer = read_adam(agent.object("actor_optimizer"));
    cfg.train.agent.critic_optimizer = read_adam(agent.object("critic_optimizer"));
    agent.finish();
  }

  if (const json* v = root.take("variants")) {
    cfg.variants.clear();
    for (const auto& name : read_strings(*v, "variants")) cfg.variants.push_back(parse_variant(name));
  }
  root.read("runs_per_variant", cfg.runs_per_variant);
  root.read("base_seed", cfg.base_seed);
  {
    std::string out;
    root.read("output_dir", out);
    if (!out.empty()) {
      std::filesystem::path p(out);
      cfg.output_dir = p.is_relative() ? base_dir / p : p;
    }
  }

  {
    Section eval = root.object("evaluation");
    eval.read("episodes", cfg.evaluation_episodes);
    eval.finish();
  }
  {
    Section session = root.object("session");
    session.read("steps", cfg.session_steps);
    session.read("switch_threshold", cfg.switch_threshold);
    session.finish();
  }
  {
    Section labeler = root.object("labeler");
    labeler.read("url", cfg.labeler.url);
    labeler.read("timeout_seconds", cfg.labeler.timeout_seconds);
    labeler.read("threshold", cfg.labeler.threshold);
    labeler.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path.string() + "': file not found or unreadable");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  // relative paths in the config are taken from the working directory
  return parse_experiment_config(j, {});
}

ContentIndex load_experiment_corpus(const ExperimentConfig& cfg) {
  if (cfg.corpus_path) return load_corpus(*cfg.corpus_path);
  return generate_synthetic_corpus(cfg.synthetic, cfg.corpus_seed);
}

EnvConfig make_env_config(const ExperimentConfig& cfg, std::shared_ptr<const ContentIndex> index) {
  EnvConfig env;
  env.index = std::move(index);
  const auto& universe = env.index->universe();
  for (const auto& label : cfg.interests) env.interests.push_back(universe.resolve(label));
  std::sort(env.interests.begin(), env.interests.end());
  env.interests.erase(std::unique(env.interests.begin(), env.interests.end()), env.interests.end());
  const SkillBelief start = cfg.gtks_default.value_or(cfg.gtks_params.prior());
  for (std::size_t k = 0; k < universe.size(); ++k) env.gtks_init[kc(k)] = start;
  for (const auto& [label, belief] : cfg.gtks_per_kc) env.gtks_init[universe.resolve(label)] = belief;
  env.gtks_params = cfg.gtks_params;
  env.aks_params = cfg.aks_params;
  env.outcome_mode = cfg.outcome_mode;
  env.max_steps = cfg.max_steps;
  env.seed = cfg.base_seed;
  env.validate();
  return env;
}

std::uint64_t run_seed(std::uint64_t base_seed, ObservationVariant variant, std::size_t run) {
  return base_seed + fnv1a64(variant_name(variant)) + static_cast<std::uint64_t>(run);
}

EvaluationSummary evaluate_policy(const DdpgAgent& agent, const EnvConfig& env, ObservationVariant variant,
                                  std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw Error("evaluation needs at least one episode");
  const std::size_t k = env.universe_size();
  if (agent.obs_dim != observation_dim(variant, k) || agent.action_dim != k) {
    throw Error("checkpoint expects observations of length " + std::to_string(agent.obs_dim) + " and actions of length " +
                std::to_string(agent.action_dim) + ", but variant " + std::string(variant_name(variant)) +
                " on this corpus needs " + std::to_string(observation_dim(variant, k)) + " and " + std::to_string(k));
  }
  Rng random_actions(derive_seed(seed, 0x72616e64));
  Rng unused(0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  double policy_total = 0.0, random_total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const std::uint64_t episode_seed = derive_seed(seed, e);
    {
      auto [state, obs] = reset(env, variant, episode_seed);
      for (std::size_t t = 0; t < env.max_steps; ++t) {
        const auto action = act(agent, obs, unused, false);
        auto r = step(env, state, action, variant);
        policy_total += r.reward;
        obs = std::move(r.observation);
      }
    }
    {
      auto [state, obs] = reset(env, variant, episode_seed);
      std::vector<double> action(k);
      for (std::size_t t = 0; t < env.max_steps; ++t) {
        for (double& a : action) a = uniform(random_actions);
        random_total += step(env, state, action, variant).reward;
      }
    }
  }
  EvaluationSummary s;
  s.episodes = episodes;
  s.steps = episodes * env.max_steps;
  s.seed = seed;
  s.policy_mean_reward = policy_total / static_cast<double>(s.steps);
  s.random_mean_reward = random_total / static_cast<double>(s.steps);
  return s;
}

nlohmann::json to_json(const EvaluationSummary& s) {
  json j = {{"episodes", s.episodes},
            {"steps", s.steps},
            {"seed", s.seed},
            {"policy_mean_reward", s.policy_mean_reward},
            {"random_mean_reward", s.random_mean_reward}};
  const double gain = relative_gain(s.policy_mean_reward, s.random_mean_reward);
  j["relative_gain"] = std::isfinite(gain) ? json(gain) : json(nullptr);
  return j;
}

double relative_gain(double policy, double random) {
  if (random == 0.0) {
    if (policy == 0.0) return 0.0;
    return policy > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return (policy - random) / std::abs(random);
}

void write_metrics_csv(std::ostream& out, ObservationVariant variant, std::size_t run,
                       const std::vector<StepMetrics>& metrics) {
  out << "variant,run_id,step,reward,cum_reward,engaged,resource_id,critic_loss,actor_objective\n";
  const std::string_view name = variant_name(variant);
  for (const auto& m : metrics) {
    out << name << ',' << run << ',' << m.step << ',' << format_double(m.reward) << ','
        << format_double(m.cum_reward) << ',' << (m.engaged ? 1 : 0) << ',' << m.resource_id << ',';
    if (m.critic_loss) out << format_double(*m.critic_loss);
    out << ',';
    if (m.actor_objective) out << format_double(*m.actor_objective);
    out << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs) {
  cfg.validate();
  if (jobs == 0) throw Error("jobs must be >= 1");
  auto index = std::make_shared<const ContentIndex>(load_experiment_corpus(cfg));
  const EnvConfig base_env = make_env_config(cfg, index);

  const auto metrics_dir = cfg.output_dir / "metrics";
  const auto checkpoint_dir = cfg.output_dir / "checkpoints";
  std::error_code ec;
  std::filesystem::create_directories(metrics_dir, ec);
  if (!ec) std::filesystem::create_directories(checkpoint_dir, ec);
  if (ec) throw Error("cannot create output directory '" + cfg.output_dir.string() + "': " + ec.message());
  {
    const auto probe = cfg.output_dir / ".write_probe";
    std::ofstream out(probe);
    if (!out) throw Error("output directory '" + cfg.output_dir.string() + "' is not writable");
    out.close();
    std::filesystem::remove(probe, ec);
  }

  ExperimentResult result;
  for (auto v : cfg.variants) {
    for (std::size_t r = 0; r < cfg.runs_per_variant; ++r) {
      CellResult cell;
      cell.variant = v;
      cell.run = r;
      cell.seed = run_seed(cfg.base_seed, v, r);
      cell.metrics_path = metrics_dir / (cell_name(v, r) + ".csv");
      cell.checkpoint_path = checkpoint_dir / (cell_name(v, r) + ".json");
      result.cells.push_back(std::move(cell));
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) return;
      {
        std::lock_guard lock(error_mutex);
        if (first_error) return;
      }
      CellResult& cell = result.cells[i];
      try {
        EnvConfig env = base_env;
        env.seed = cell.seed;
        TrainConfig train_cfg = cfg.train;
        train_cfg.seed = cell.seed;
        const TrainResult trained = train(env, cell.variant, train_cfg);
        cell.final_cum_reward = trained.metrics.empty() ? 0.0 : trained.metrics.back().cum_reward;

        std::ostringstream csv;
        write_metrics_csv(csv, cell.variant, cell.run, trained.metrics);
        write_file(cell.metrics_path, csv.str());
        write_file(cell.checkpoint_path, to_json(trained.agent).dump(1) + "\n");

        if (cfg.evaluation_episodes > 0) {
          cell.evaluation = evaluate_policy(trained.agent, env, cell.variant, cfg.evaluation_episodes,
                                            derive_seed(cell.seed, 0x6576616c));
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(jobs, result.cells.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  json per_variant = json::object();
  std::vector<std::pair<double, std::string>> order;
  for (auto v : cfg.variants) {
    std::vector<double> finals, gains;
    json eval_runs = json::array();
    for (const auto& c : result.cells) {
      if (c.variant != v) continue;
      finals.push_back(c.final_cum_reward);
      if (c.evaluation) {
        eval_runs.push_back(to_json(*c.evaluation));
        gains.push_back(relative_gain(c.evaluation->policy_mean_reward, c.evaluation->random_mean_reward));
      }
    }
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= static_cast<double>(finals.size());
    const double median = median_of(finals);
    json entry = {{"runs", finals.size()},
                  {"final_cum_reward",
                   {{"mean", mean},
                    {"median", median},
                    {"min", *std::min_element(finals.begin(), finals.end())},
                    {"max", *std::max_element(finals.begin(), finals.end())}}}};
    if (!gains.empty()) {
      const double g = median_of(gains);
      entry["evaluation"] = {{"runs", eval_runs},
                             {"median_relative_gain", std::isfinite(g) ? json(g) : json(nullptr)}};
    }
    per_variant[std::string(variant_name(v))] = entry;
    order.emplace_back(median, std::string(variant_name(v)));
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  json ordering = json::array();
  for (const auto& [m, name] : order) ordering.push_back(name);

  result.summary = {{"version", kSummaryVersion},
                    {"per_variant", per_variant},
                    {"ordering_by_median_final_cum_reward", ordering}};
  write_file(cfg.output_dir / "summary.json", result.summary.dump(2) + "\n");
  return result;
}

std::vector<SessionRow> simulate_session(const EnvConfig& env, std::size_t steps, std::size_t switch_threshold,
                                         std::uint64_t seed) {
  env.validate();
  if (steps > env.index->size()) {
    throw Error("session of " + std::to_string(steps) + " steps exceeds the " + std::to_string(env.index->size()) +
                " resources available");
  }
  LearnerState gtks(env.gtks_params.prior());
  for (const auto& [k, b] : env.gtks_init) gtks.set(k, b);
  SessionState session(LearnerState(env.aks_params.prior()), env.interests, switch_threshold);
  Rng rng(seed);

  std::vector<SessionRow> rows;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto [resource, mode] = switching_recommend(session, *env.index, env.aks_params);
    SessionRow row{t + 1, mode, resource->id, predict_engagement(gtks, *resource, env.gtks_params), false, 0.0};
    if (env.outcome_mode == OutcomeMode::sampled) {
      row.engaged = std::bernoulli_distribution(row.probability)(rng);
    } else {
      row.engaged = row.probability >= 0.5;
    }
    const EngagementOutcome outcome{row.engaged, row.probability};
    LearnerState next = update_on_outcome(gtks, *resource, outcome, env.gtks_params);
    row.interest_gain = interest_reward(gtks, next, env.interests);
    gtks = std::move(next);
    session.record(*resource, outcome, env.aks_params);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_session_csv(std::ostream& out, const std::vector<SessionRow>& rows) {
  out << "step,mode,resource_id,probability,engaged,interest_gain\n";
  for (const auto& r : rows) {
    out << r.step << ',' << mode_name(r.mode) << ',' << r.resource_id << ',' << format_double(r.probability) << ','
        << (r.engaged ? 1 : 0) << ',' << format_double(r.interest_gain) << '\n';
  }
}

}  // namespace kcrec
