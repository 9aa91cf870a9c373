#include <gtest/gtest.h>

#include "formlab/envs/experts.hpp"
#include "formlab/form/trainer.hpp"
#include "formlab/verify/lingauss_oracle.hpp"

namespace formlab::form {
namespace {

density::EffectModel tiny_model(int dim, std::uint64_t seed) {
  density::EffectModelConfig c;
  c.obs_dim = dim;
  c.hidden = 8;
  c.max_offset = 2;
  c.batch_size = 8;
  Rng rng(seed);
  density::EffectModel m = density::make_effect_model(c, rng);
  m.standardizer.update(Mat::Random(dim, 16));
  return m;
}

rl::RolloutPtr random_rollout(std::uint64_t seed, int D = 3, int T = 12) {
  auto t = std::make_shared<envs::Trajectory>();
  t->seed = seed;
  Rng rng(seed);
  t->observations.resize(D, T + 1);
  for (Eigen::Index i = 0; i < t->observations.size(); ++i) t->observations(i) = standard_normal(rng);
  t->actions = Mat::Zero(1, T);
  t->rewards = Vec::Zero(T);
  t->behavior_logp = Vec::Zero(T);
  return t;
}

TEST(Rewards, IdenticalModelsGiveExactlyZero) {
  const density::EffectModel m = tiny_model(3, 1);
  const density::EffectModel copy = m;
  for (const Vec& r : label_rewards({random_rollout(1), random_rollout(2)}, m, copy)) {
    EXPECT_EQ(r.size(), 12);
    EXPECT_EQ(r, Vec::Zero(12));
  }
}

TEST(Rewards, TransitionRewardIgnoresTheRestOfTheBatch) {
  const density::EffectModel d = tiny_model(3, 1), i = tiny_model(3, 2);
  const auto a = label_rewards({random_rollout(1), random_rollout(2)}, d, i);
  const auto b = label_rewards({random_rollout(1), random_rollout(3), random_rollout(4)}, d, i);
  EXPECT_EQ(a[0], b[0]);
  // Truncating the episode leaves the rewards of the kept transitions unchanged.
  const auto full = random_rollout(5);
  const Vec head = form_rewards(Mat(full->observations.leftCols(6)), d, i);
  EXPECT_EQ(head, form_rewards(full->observations, d, i).head(5));
}

TEST(Rewards, RhoIsTheSumOfLabels) {
  const density::EffectModel d = tiny_model(3, 1), i = tiny_model(3, 2);
  const auto r = random_rollout(6);
  const double rho = rho_form(r->observations, d, i);
  EXPECT_NEAR(rho, label_rewards({r}, d, i)[0].sum(), 1e-12);
  EXPECT_EQ(rho_form(r->observations, d, d), 0.0);
}

TEST(Rewards, ExpertTransitionsScorePositiveAgainstARandomPolicyModel) {
  const envs::EnvSpec s = envs::lingauss_spec();
  const Mat k = envs::lingauss_gain(s);
  // Demonstrator: exact expert conditional. Imitator: the uniform random
  // policy's conditional, moment-matched to a Gaussian (a ~ U[-1,1] has
  // variance 1/3).
  const auto demo = verify::linear_gaussian_effect(s, k, 0.0);
  const auto imit = verify::linear_gaussian_effect(s, Mat::Zero(2, 4), std::sqrt(1.0 / 3.0));
  const auto ds = envs::record_demos(s, envs::make_pool(0, 1, 0), envs::make_expert(s), 20, 3);
  double total = 0.0;
  long n = 0;
  for (const auto& t : ds.trajectories) {
    const Vec r = form_rewards(t.observations, demo, imit);
    total += r.sum();
    n += r.size();
  }
  EXPECT_GT(total / n, 0.0);
}

FormConfig tiny_form_config() {
  FormConfig c;
  c.env = envs::lingauss_spec();
  c.env.episode_length = 20;
  c.distractor = envs::make_pool(2, 1, 4);
  c.learner.policy.hidden = 8;
  c.learner.critic.hidden = 8;
  c.learner.batch_rollouts = 3;
  c.learner.mpo_states = 16;
  c.learner.mpo.action_samples = 4;
  c.learner.steps = 12;
  c.learner.initial_episodes = 3;
  c.learner.target_period = 5;
  c.imitator_warmup = 5;
  c.eval_episodes = 2;
  c.eval_interval = 6;
  c.seed = 11;
  return c;
}

density::EffectModel tiny_demo_model(const FormConfig& c) {
  auto ds = envs::record_demos(c.env, c.distractor, envs::make_expert(c.env), 6, 5);
  density::EffectModelConfig e;
  e.hidden = 8;
  e.max_offset = 2;
  e.batch_size = 8;
  e.steps = 20;
  e.eval_interval = 10;
  return train_demo_model(ds, e, 1);
}

TEST(FormTrain, RunsAndLogsEvaluations) {
  const FormConfig c = tiny_form_config();
  const density::EffectModel demo = tiny_demo_model(c);
  const FormResult r = form_train(c, demo);
  ASSERT_EQ(r.evals.size(), 3u);  // before training, step 6, step 12
  EXPECT_EQ(r.evals[0].step, 0);
  EXPECT_EQ(r.evals[2].step, 12);
  for (const auto& e : r.evals) {
    EXPECT_TRUE(std::isfinite(e.return_mean) && std::isfinite(e.demo_logp) && std::isfinite(e.imit_logp));
  }
  // Warmup plus one imitator update per learner step.
  EXPECT_EQ(r.imitator.standardizer.count(), c.imitator_warmup + c.learner.steps);
}

TEST(FormTrain, IsBitReproducible) {
  const FormConfig c = tiny_form_config();
  const density::EffectModel demo = tiny_demo_model(c);
  const FormResult a = form_train(c, demo), b = form_train(c, demo);
  ASSERT_EQ(a.evals.size(), b.evals.size());
  for (std::size_t i = 0; i < a.evals.size(); ++i) {
    EXPECT_EQ(a.evals[i].return_mean, b.evals[i].return_mean);
    EXPECT_EQ(a.evals[i].imit_logp, b.evals[i].imit_logp);
  }
  EXPECT_EQ(a.agent.policy.net.params(), b.agent.policy.net.params());
  EXPECT_EQ(effect_model_hash(a.imitator), effect_model_hash(b.imitator));
}

TEST(FormTrain, LeavesTheDemonstratorUntouched) {
  const FormConfig c = tiny_form_config();
  const density::EffectModel demo = tiny_demo_model(c);
  const std::uint64_t h = effect_model_hash(demo);
  form_train(c, demo);
  EXPECT_EQ(effect_model_hash(demo), h);
}

TEST(FormTrain, ZeroRewardControlLabelsZero) {
  FormConfig c = tiny_form_config();
  c.zero_reward_control = true;
  const density::EffectModel demo = tiny_demo_model(c);
  std::vector<double> means;
  form_train(c, demo, {}, [&](const rl::LearnerStats& s) { means.push_back(s.reward_mean); });
  ASSERT_EQ(means.size(), 12u);
  for (double m : means) EXPECT_EQ(m, 0.0);
}

TEST(FormTrain, UpdateOrderFlagChangesTheRun) {
  FormConfig c = tiny_form_config();
  const density::EffectModel demo = tiny_demo_model(c);
  const FormResult a = form_train(c, demo);
  c.imitator_before_policy = true;
  const FormResult b = form_train(c, demo);
  EXPECT_NE(a.agent.policy.net.params(), b.agent.policy.net.params());
}

TEST(FormTrain, PolicyStepDoesNotTouchEffectModels) {
  const FormConfig c = tiny_form_config();
  const density::EffectModel demo = tiny_demo_model(c);
  const density::EffectModel imit = tiny_model(demo.obs_dim(), 9);
  Rng rng(2);
  rl::Agent agent = rl::make_agent(demo.obs_dim(), c.env.action_dim, c.learner, rng);
  std::vector<rl::RolloutPtr> batch;
  rl::ActorSpec actors{c.env, c.distractor, 3};
  for (int i = 0; i < 3; ++i)
    batch.push_back(rl::act_episode(actors, std::make_shared<const rl::GaussianPolicy>(agent.policy), 0, i));
  const std::uint64_t hd = effect_model_hash(demo), hi = effect_model_hash(imit);
  const Vec before = agent.policy.net.params();
  rl::learner_step(agent, 0, batch, label_rewards(batch, demo, imit), c.learner, rng);
  EXPECT_NE(agent.policy.net.params(), before);
  EXPECT_EQ(effect_model_hash(demo), hd);
  EXPECT_EQ(effect_model_hash(imit), hi);
}

TEST(FormTrain, RejectsMismatchedDemonstrator) {
  FormConfig c = tiny_form_config();
  const density::EffectModel demo = tiny_demo_model(c);
  c.distractor = envs::make_pool(3, 1, 4);
  EXPECT_THROW(form_train(c, demo), StructuralError);
}

}  // namespace
}  // namespace formlab::form
