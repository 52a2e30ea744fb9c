#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kcrec/error.hpp"
#include "kcrec/experiment.hpp"
#include "kcrec/seeding.hpp"

using namespace kcrec;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_config_json(const fs::path& out) {
  return {{"corpus", {{"synthetic", {{"n_resources", 20}, {"n_kcs", 6}, {"segments_per_resource", 3},
                                     {"kcs_per_segment", 2}, {"topic_locality", 0.5}}},
                      {"seed", 3}}},
          {"interests", {"kc01", "4"}},
          {"gtks_init", {{"default", {{"mu", 0.5}, {"sigma", 1.0}}}, {"per_kc", {{"kc01", {{"mu", 0.1}, {"sigma", 0.5}}}}}}},
          {"env", {{"max_steps", 25}}},
          {"agent", {{"total_steps", 150}, {"warmup_steps", 50}, {"batch_size", 16}, {"hidden", {16, 8}}}},
          {"variants", {"aks_sample", "prev_action_only"}},
          {"runs_per_variant", 2},
          {"base_seed", 11},
          {"output_dir", out.string()},
          {"evaluation", {{"episodes", 2}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string parse_error(const nlohmann::json& j) {
  try {
    parse_experiment_config(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kcrec_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(ExperimentConfig, DefaultsAndOverrides) {
  const auto cfg = parse_experiment_config(small_config_json("x"));
  EXPECT_EQ(cfg.synthetic.n_resources, 20u);
  EXPECT_EQ(cfg.corpus_seed, 3u);
  EXPECT_EQ(cfg.train.total_steps, 150u);
  EXPECT_EQ(cfg.train.capacity, 100000u);
  EXPECT_EQ(cfg.train.agent.gamma, 0.99);
  EXPECT_EQ(cfg.variants.size(), 2u);
  EXPECT_EQ(cfg.gtks_params.beta, 0.5);
  EXPECT_EQ(cfg.switch_threshold, 20u);

  const auto desk = load_experiment_config(fs::path(KCREC_SOURCE_DIR) / "configs" / "desk.json");
  EXPECT_EQ(desk.synthetic.n_kcs, 20u);
  EXPECT_EQ(desk.synthetic.n_resources, 100u);
  EXPECT_EQ(desk.train.total_steps, 10000u);
  EXPECT_EQ(desk.runs_per_variant, 5u);
  EXPECT_EQ(desk.variants.size(), 3u);
}

TEST(ExperimentConfig, StrictValidation) {
  auto j = small_config_json("x");
  j["agent"]["learning_rate"] = 0.1;
  EXPECT_EQ(parse_error(j), "agent: unknown key 'learning_rate'");
  j = small_config_json("x");
  j["colour"] = "blue";
  EXPECT_EQ(parse_error(j), ": unknown key 'colour'");
  j = small_config_json("x");
  j["runs_per_variant"] = -1;
  EXPECT_EQ(parse_error(j), "runs_per_variant: expected a nonnegative integer");
  j["runs_per_variant"] = 0;
  EXPECT_EQ(parse_error(j), "runs_per_variant must be >= 1");
  j = small_config_json("x");
  j["variants"] = nlohmann::json::array();
  EXPECT_EQ(parse_error(j), "variants must not be empty");
  j["variants"] = {"aks_only"};
  EXPECT_EQ(parse_error(j), "unknown observation variant 'aks_only'");
  j = small_config_json("x");
  j.erase("interests");
  EXPECT_EQ(parse_error(j), "config needs at least one interest KC");
  j = small_config_json("x");
  j["corpus"]["path"] = "c.csv";
  EXPECT_EQ(parse_error(j), "corpus: give either path or synthetic, not both");
  j = small_config_json("x");
  j["learner"]["gtks"]["beta"] = "big";
  EXPECT_EQ(parse_error(j), "learner.gtks.beta: expected a number");
  j = small_config_json("x");
  j["agent"]["warmup_steps"] = 8;
  EXPECT_EQ(parse_error(j), "warmup_steps must be >= batch_size");
}

TEST(ExperimentConfig, MissingFile) {
  try {
    load_experiment_config("definitely/missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("file not found"), std::string::npos);
  }
}

TEST(ExperimentConfig, EnvironmentResolution) {
  const auto cfg = parse_experiment_config(small_config_json("x"));
  auto index = std::make_shared<const ContentIndex>(load_experiment_corpus(cfg));
  const auto env = make_env_config(cfg, index);
  EXPECT_EQ(env.interests, (std::vector<KcId>{kc(1), kc(4)}));
  EXPECT_EQ(env.gtks_init.size(), 6u);
  EXPECT_EQ(env.gtks_init.at(kc(1)), (SkillBelief{0.1, 0.5}));
  EXPECT_EQ(env.gtks_init.at(kc(2)), (SkillBelief{0.5, 1.0}));
  EXPECT_EQ(env.max_steps, 25u);

  auto bad = cfg;
  bad.interests = {"kc99"};
  EXPECT_THROW(make_env_config(bad, index), Error);
}

TEST(RunSeed, BasePlusVariantHashPlusRun) {
  EXPECT_EQ(run_seed(10, ObservationVariant::aks_sample, 3), 13 + fnv1a64("aks_sample"));
  EXPECT_NE(run_seed(0, ObservationVariant::aks_sample, 0), run_seed(0, ObservationVariant::prev_action_only, 0));
}

TEST(RunExperiment, FilesRowsSummaryAndDeterminism) {
  const auto out1 = scratch("exp1"), out2 = scratch("exp2");
  auto cfg = parse_experiment_config(small_config_json(out1));
  const auto r1 = run_experiment(cfg, 1);
  cfg.output_dir = out2;
  const auto r2 = run_experiment(cfg, 3);

  ASSERT_EQ(r1.cells.size(), 4u);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < r1.cells.size(); ++i) {
    const auto& c = r1.cells[i];
    EXPECT_EQ(c.seed, run_seed(11, c.variant, c.run));
    ASSERT_TRUE(fs::exists(c.metrics_path));
    ASSERT_TRUE(fs::exists(c.checkpoint_path));
    const std::string csv = slurp(c.metrics_path);
    EXPECT_EQ(csv, slurp(r2.cells[i].metrics_path));
    EXPECT_EQ(slurp(c.checkpoint_path), slurp(r2.cells[i].checkpoint_path));
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "variant,run_id,step,reward,cum_reward,engaged,resource_id,critic_loss,actor_objective");
    std::uint64_t last_step = 0;
    while (std::getline(lines, line)) {
      ++rows;
      std::istringstream fields(line);
      std::string variant, run, step;
      std::getline(fields, variant, ',');
      std::getline(fields, run, ',');
      std::getline(fields, step, ',');
      EXPECT_EQ(variant, variant_name(c.variant));
      EXPECT_EQ(std::stoul(run), c.run);
      EXPECT_GT(std::stoull(step), last_step);
      last_step = std::stoull(step);
      if (last_step <= 50) EXPECT_TRUE(line.ends_with(",,"));
    }
    const auto agent = agent_from_json(nlohmann::json::parse(slurp(c.checkpoint_path)));
    EXPECT_EQ(agent.global_step, 150u);
  }
  EXPECT_EQ(rows, 2u * 2u * 150u);
  EXPECT_EQ(slurp(out1 / "summary.json"), slurp(out2 / "summary.json"));

  const auto& s = r1.summary;
  EXPECT_EQ(s["version"], 1);
  ASSERT_TRUE(s["per_variant"].contains("aks_sample"));
  const auto& entry = s["per_variant"]["aks_sample"];
  EXPECT_EQ(entry["runs"], 2);
  EXPECT_LE(entry["final_cum_reward"]["min"].get<double>(), entry["final_cum_reward"]["median"].get<double>());
  EXPECT_LE(entry["final_cum_reward"]["median"].get<double>(), entry["final_cum_reward"]["max"].get<double>());
  EXPECT_EQ(s["ordering_by_median_final_cum_reward"].size(), 2u);
  EXPECT_EQ(entry["evaluation"]["runs"].size(), 2u);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST(RunExperiment, UnwritableOutputFailsBeforeTraining) {
  const auto dir = scratch("blocked");
  fs::create_directories(dir);
  { std::ofstream(dir / "file") << "x"; }
  auto cfg = parse_experiment_config(small_config_json(dir / "file" / "sub"));
  EXPECT_THROW(run_experiment(cfg, 1), Error);
  fs::remove_all(dir);
}

TEST(EvaluatePolicy, ErrorsAndDeterminism) {
  const auto cfg = parse_experiment_config(small_config_json("x"));
  auto index = std::make_shared<const ContentIndex>(load_experiment_corpus(cfg));
  const auto env = make_env_config(cfg, index);
  Rng rng(1);
  AgentConfig ac;
  ac.hidden = {16, 8};
  const auto agent = DdpgAgent::create(6, 6, ac, rng);
  EXPECT_THROW(evaluate_policy(agent, env, ObservationVariant::aks_sample, 0, 1), Error);
  EXPECT_THROW(evaluate_policy(agent, env, ObservationVariant::aks_plus_prev_action, 2, 1), Error);
  const auto a = evaluate_policy(agent, env, ObservationVariant::aks_sample, 4, 9);
  const auto b = evaluate_policy(agent, env, ObservationVariant::aks_sample, 4, 9);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(a.steps, 100u);
  // an untrained actor lands in the same range as random play
  EXPECT_LT(std::abs(a.policy_mean_reward - a.random_mean_reward), 0.05);
}

TEST(RelativeGain, Definition) {
  EXPECT_DOUBLE_EQ(relative_gain(-0.008, -0.01), 0.2);
  EXPECT_DOUBLE_EQ(relative_gain(0.012, 0.01), 0.2);
  EXPECT_EQ(relative_gain(0.0, 0.0), 0.0);
  EXPECT_TRUE(std::isinf(relative_gain(0.1, 0.0)));
}

TEST(SimulateSession, SwitchesAtThresholdWithoutRepeats) {
  auto j = small_config_json("x");
  const auto cfg = parse_experiment_config(j);
  auto index = std::make_shared<const ContentIndex>(load_experiment_corpus(cfg));
  const auto env = make_env_config(cfg, index);
  const auto rows = simulate_session(env, 20, 7, 5);
  ASSERT_EQ(rows.size(), 20u);
  std::set<std::string> seen;
  for (const auto& r : rows) {
    EXPECT_EQ(r.mode, r.step <= 7 ? RecommendationMode::cold_start : RecommendationMode::engagement_model);
    EXPECT_TRUE(seen.insert(r.resource_id).second);
  }
  std::ostringstream a, b;
  write_session_csv(a, rows);
  write_session_csv(b, simulate_session(env, 20, 7, 5));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_THROW(simulate_session(env, 21, 7, 5), Error);
}
