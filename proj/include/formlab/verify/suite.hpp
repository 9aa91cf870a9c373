#pragma once

#include <string>
#include <vector>

#include "formlab/baselines/gaifo.hpp"
#include "formlab/envs/dataset.hpp"
#include "formlab/envs/experts.hpp"
#include "formlab/verify/lingauss_oracle.hpp"
#include "formlab/verify/tiny_mdp.hpp"

namespace formlab::verify {

struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Policy-gradient identities on random enumerable MDPs.
inline std::vector<CheckResult> tiny_mdp_suite(int instances, std::uint64_t seed) {
  Rng rng = make_rng(seed, "tiny_mdp");
  double pathwise = 0.0, score = 0.0, vanishing = 0.0, integral = 0.0;
  for (int i = 0; i < instances; ++i) {
    const TinyMdp mdp = random_tiny_mdp(rng);
    Mat theta(mdp.states, mdp.actions);
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) = uniform(rng, -2.0, 2.0);
    Mat demo(mdp.states, mdp.states), imit(mdp.states, mdp.states);
    for (int s = 0; s < mdp.states; ++s) {
      demo.row(s) = random_distribution(mdp.states, rng).transpose();
      imit.row(s) = random_distribution(mdp.states, rng).transpose();
    }
    pathwise = std::max(pathwise, check_pathwise_identity(mdp, theta));
    const FormGradientCheck g = check_form_gradient(mdp, demo, imit, theta);
    score = std::max(score, g.score_residual);
    vanishing = std::max(vanishing, g.vanishing_residual);
    integral = std::max(integral, g.vanishing_integral);
  }
  return {{"pathwise_identity", pathwise, 1e-6, pathwise < 1e-6},
          {"form_score_gradient", score, 1e-6, score < 1e-6},
          {"self_model_gradient", vanishing, 1e-6, vanishing < 1e-6},
          {"vanishing_integral", integral, 1e-6, integral < 1e-6}};
}

/// E[rho_FORM] against the summed closed-form KL on lingauss, in standard
/// errors. The imitator is a scaled-down LQR controller with Gaussian noise
/// small enough never to clip.
inline CheckResult lingauss_kl_check(int episodes, std::uint64_t seed, KlConsistency* detail = nullptr) {
  const envs::EnvSpec spec = envs::lingauss_spec();
  const Mat k = envs::lingauss_gain(spec);
  const KlConsistency r = lingauss_kl_consistency(spec, k, 0.15 * k, 0.05, episodes, seed);
  if (detail) *detail = r;
  const double z = std::abs(r.mean_gap) / r.gap_stderr;
  return {"lingauss_rho_vs_kl_stderrs", z, 3.0, z < 3.0 && r.clipped_actions == 0};
}

struct PlantedFeatureDetail {
  long updates = 0;         // updates until the threshold was crossed (or the cap)
  double imitator_prob = 0.0;  // mean p(expert) on held-out imitator pairs
  double expert_prob = 0.0;
};

/// Two-frame discriminator on lingauss expert transitions. Both sides share
/// the same dynamics and policy; the imitator side carries one extra
/// coordinate fixed at 1 (0 for the expert). The check passes when the mean
/// expert probability on held-out imitator pairs falls below 0.05.
inline CheckResult planted_feature_check(int width, long max_updates, double beta_gp, std::uint64_t seed,
                                         PlantedFeatureDetail* detail = nullptr) {
  const envs::EnvSpec spec = envs::lingauss_spec();
  const envs::ActionFn expert = envs::make_expert(spec);
  auto plant = [&](std::uint64_t s, double value) {
    envs::DemoDataset ds = envs::record_demos(spec, envs::make_pool(0, 1, 0), expert, 20, s);
    for (auto& t : ds.trajectories) {
      Mat o(t.observations.rows() + 1, t.observations.cols());
      o.topRows(t.observations.rows()) = t.observations;
      o.bottomRows(1).setConstant(value);
      t.observations = std::move(o);
    }
    return ds;
  };
  const envs::DemoDataset exp_train = plant(derive_seed(seed, "expert"), 0.0);
  const envs::DemoDataset imit_train = plant(derive_seed(seed, "imitator"), 1.0);
  const envs::DemoDataset imit_test = plant(derive_seed(seed, "held_out"), 1.0);
  const envs::DemoDataset exp_test = plant(derive_seed(seed, "held_out_expert"), 0.0);
  auto ptrs = [](const envs::DemoDataset& d) {
    std::vector<const envs::Trajectory*> v;
    for (const auto& t : d.trajectories) v.push_back(&t);
    return v;
  };
  Rng rng = make_rng(seed, "discriminator");
  baselines::Discriminator disc = baselines::make_discriminator(spec.obs_dim + 1, width, true, true, rng);
  baselines::DiscriminatorTrainer trainer(disc, 1e-4, beta_gp);
  const Mat eval_imit = baselines::sample_inputs(disc, ptrs(imit_test), 1000, rng);
  const Mat eval_exp = baselines::sample_inputs(disc, ptrs(exp_test), 1000, rng);
  PlantedFeatureDetail d;
  for (long u = 1; u <= max_updates; ++u) {
    trainer.step(baselines::sample_inputs(disc, ptrs(exp_train), 256, rng),
                 baselines::sample_inputs(disc, ptrs(imit_train), 256, rng), rng);
    d.updates = u;
    if (u % 50 == 0 || u == max_updates) {
      d.imitator_prob = disc.expert_prob(eval_imit).mean();
      if (d.imitator_prob < 0.05) break;
    }
  }
  d.expert_prob = disc.expert_prob(eval_exp).mean();
  if (detail) *detail = d;
  return {"planted_feature_imitator_prob", d.imitator_prob, 0.05, d.imitator_prob < 0.05};
}

}  // namespace formlab::verify
