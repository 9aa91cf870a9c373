#pragma once

#include <functional>

#include "formlab/baselines/bc.hpp"
#include "formlab/density/gmm.hpp"
#include "formlab/density/standardizer.hpp"
#include "formlab/rl/learner.hpp"

namespace formlab::baselines {

/// Observation-only discriminator: Linear -> tanh encoder, then a decoder
/// Linear -> ELU -> Linear(1) producing the log-odds of "expert".
/// Two-frame mode feeds (x_{t-1}, x_t) instead of x_t.
struct Discriminator {
  nn::DenseNet encoder;
  nn::DenseNet decoder;
  density::Standardizer standardizer;
  bool standardize = true;
  bool two_frame = false;

  int frame_dim() const { return encoder.input_dim() / (two_frame ? 2 : 1); }
  int width() const { return encoder.output_dim(); }

  /// Raw inputs for the transitions prev -> next (columns).
  Mat inputs(const Mat& prev, const Mat& next) const {
    if (!two_frame) return next;
    Mat x(prev.rows() * 2, prev.cols());
    x.topRows(prev.rows()) = prev;
    x.bottomRows(prev.rows()) = next;
    return x;
  }

  Mat prepare(const Mat& raw) const { return standardize ? standardizer.standardize(raw) : raw; }

  Vec logits(const Mat& raw) const { return decoder.forward(encoder.forward(prepare(raw))).row(0).transpose(); }

  Vec expert_prob(const Mat& raw) const { return logits(raw).unaryExpr([](double l) { return density::sigmoid(l); }); }
};

inline Discriminator make_discriminator(int frame_dim, int hidden, bool two_frame, bool standardize, Rng& rng) {
  using nn::Activation;
  const int in = frame_dim * (two_frame ? 2 : 1);
  Discriminator d{nn::make_mlp(in, {hidden}, {Activation::tanh}),
                  nn::make_mlp(hidden, {hidden, 1}, {Activation::elu, Activation::identity}),
                  density::Standardizer(in),
                  standardize,
                  two_frame};
  d.encoder.init(rng);
  d.decoder.init(rng);
  return d;
}

/// Gradient of the scalar decoder output with respect to its input h.
inline Vec decoder_input_gradient(const nn::DenseNet& dec, const Vec& h) {
  const auto w1 = dec.weight(0);
  const Vec z = w1 * h + dec.bias(0);
  const Vec w2 = dec.weight(1).row(0).transpose();
  const Vec c = z.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); }).cwiseProduct(w2);
  return w1.transpose() * c;
}

struct GaifoLoss {
  double objective = 0.0;       // mean log p(expert|x_E) + mean log p(imitator|x_I) - penalty
  double classification = 0.0;  // the two log-likelihood terms
  double penalty = 0.0;          // beta_gp * mean ||grad decoder(h~)|| / width
  Vec grad_encoder;              // gradients of -objective
  Vec grad_decoder;
};

/// Classification loss plus a gradient penalty on the decoder evaluated at
/// h~ = u * enc(x_E) + (1 - u) * enc(x_I), u ~ U(0,1) per pair (`mix`).
/// The penalty does not propagate into the encoder. Inputs are prepared
/// (standardized) already.
inline GaifoLoss gaifo_loss(const Discriminator& d, const Mat& expert, const Mat& imit, double beta_gp, const Vec& mix) {
  require(expert.cols() == imit.cols() && expert.cols() > 0, "gaifo_loss needs equal, non-empty batches");
  require(mix.size() == expert.cols(), "gaifo_loss needs one mixing weight per pair");
  const Eigen::Index n = expert.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  GaifoLoss out;
  out.grad_encoder = Vec::Zero(d.encoder.num_params());
  out.grad_decoder = Vec::Zero(d.decoder.num_params());

  Mat both(expert.rows(), 2 * n);
  both.leftCols(n) = expert;
  both.rightCols(n) = imit;
  nn::DenseNet::Cache ec, dc;
  const Mat h = d.encoder.forward(both, &ec);
  const Mat l = d.decoder.forward(h, &dc);
  Mat dl(1, 2 * n);
  double cls = 0.0;
  for (Eigen::Index j = 0; j < 2 * n; ++j) {
    const double z = l(0, j);
    // log sigmoid(z) and log(1 - sigmoid(z)) in stable form.
    const double log_p = -std::log1p(std::exp(-std::abs(z))) + std::min(z, 0.0);
    const double log_q = log_p - z;
    const double s = density::sigmoid(z);
    if (j < n) {
      cls += log_p;
      dl(0, j) = (s - 1.0) * inv_n;
    } else {
      cls += log_q;
      dl(0, j) = s * inv_n;
    }
  }
  out.classification = cls * inv_n;
  const Mat dh = d.decoder.backward(dc, dl, out.grad_decoder);
  d.encoder.backward(ec, dh, out.grad_encoder);

  if (beta_gp > 0.0) {
    const int W = d.width();
    const auto w1 = d.decoder.weight(0);
    const Vec b1 = d.decoder.bias(0);
    const Vec w2 = d.decoder.weight(1).row(0).transpose();
    const double scale = beta_gp * inv_n / W;
    Mat g_w1 = Mat::Zero(W, W);
    Vec g_b1 = Vec::Zero(W), g_w2 = Vec::Zero(W);
    double pen = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec ht = mix(i) * h.col(i) + (1.0 - mix(i)) * h.col(n + i);
      const Vec z = w1 * ht + b1;
      const Vec e1 = z.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); });
      const Vec e2 = z.unaryExpr([](double v) { return v > 0 ? 0.0 : std::exp(v); });
      const Vec c = e1.cwiseProduct(w2);
      const Vec g = w1.transpose() * c;
      const double norm = g.norm();
      pen += norm;
      if (norm == 0.0) continue;
      const Vec u = g / norm;
      const Vec v = w1 * u;
      // ||W1^T (e'(z) * w2)|| with z = W1 h~ + b1.
      const Vec dz = v.cwiseProduct(e2).cwiseProduct(w2);
      g_w2 += scale * e1.cwiseProduct(v);
      g_w1 += scale * (c * u.transpose() + dz * ht.transpose());
      g_b1 += scale * dz;
    }
    out.penalty = beta_gp * pen * inv_n / W;
    const std::size_t o0 = d.decoder.param_offset(0), o1 = d.decoder.param_offset(1);
    Eigen::Map<Mat>(out.grad_decoder.data() + o0, W, W) += g_w1;
    out.grad_decoder.segment(static_cast<Eigen::Index>(o0) + W * W, W) += g_b1;
    out.grad_decoder.segment(static_cast<Eigen::Index>(o1), W) += g_w2;
  }
  out.objective = out.classification - out.penalty;
  return out;
}

/// r = log(1 + p(expert | x)), in (0, log 2).
inline double gaifo_reward(double expert_prob) { return std::log1p(expert_prob); }

struct GaifoConfig {
  rl::LearnerConfig learner;
  int hidden = 256;
  double learning_rate = 1e-4;
  double beta_gp = 0.0;  // 10 for GAIfO+GP
  bool two_frame = false;
  bool standardize = true;
  int batch_size = 256;  // transitions per side per discriminator update
  int eval_episodes = 10;
  long eval_interval = 5000;
};

struct GaifoEval {
  long step = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double disc_prob = 0.0;  // mean p(expert) on evaluation observations
};

/// Discriminator with its optimizer state.
class DiscriminatorTrainer {
 public:
  DiscriminatorTrainer(Discriminator& d, double lr, double beta_gp)
      : d_(&d), beta_gp_(beta_gp), enc_(nn::AdamConfig{.learning_rate = lr}), dec_(nn::AdamConfig{.learning_rate = lr}) {}

  /// One update on raw (unstandardized) inputs.
  GaifoLoss step(const Mat& expert_raw, const Mat& imit_raw, Rng& rng) {
    if (d_->standardize) {
      Mat both(expert_raw.rows(), expert_raw.cols() + imit_raw.cols());
      both << expert_raw, imit_raw;
      d_->standardizer.update(both);
    }
    Vec mix(expert_raw.cols());
    for (Eigen::Index i = 0; i < mix.size(); ++i) mix(i) = uniform(rng, 0.0, 1.0);
    GaifoLoss l = gaifo_loss(*d_, d_->prepare(expert_raw), d_->prepare(imit_raw), beta_gp_, mix);
    if (!std::isfinite(l.objective))
      throw NumericalError("discriminator loss is not finite at update " + std::to_string(steps_));
    enc_.step(d_->encoder.mutable_params(), l.grad_encoder);
    dec_.step(d_->decoder.mutable_params(), l.grad_decoder);
    ++steps_;
    return l;
  }
  long steps() const { return steps_; }

 private:
  Discriminator* d_;
  double beta_gp_;
  nn::AdamState enc_, dec_;
  long steps_ = 0;
};

/// Discriminator inputs for `count` uniformly drawn transitions.
inline Mat sample_inputs(const Discriminator& d, const std::vector<const envs::Trajectory*>& trajs, int count, Rng& rng) {
  require(!trajs.empty(), "no trajectories to sample from");
  std::uniform_int_distribution<std::size_t> pick(0, trajs.size() - 1);
  const Eigen::Index D = trajs.front()->observations.rows();
  Mat prev(D, count), next(D, count);
  for (int j = 0; j < count; ++j) {
    const envs::Trajectory& t = *trajs[pick(rng)];
    const int s = std::uniform_int_distribution<int>(0, t.length() - 1)(rng);
    prev.col(j) = t.observations.col(s);
    next.col(j) = t.observations.col(s + 1);
  }
  return d.inputs(prev, next);
}

/// Per-step rewards for one rollout; step t scores the observation it leads to.
inline Vec gaifo_rollout_rewards(const Discriminator& d, const envs::Trajectory& t) {
  const int T = t.length();
  const Vec p = d.expert_prob(d.inputs(t.observations.leftCols(T), t.observations.rightCols(T)));
  return p.unaryExpr([](double x) { return gaifo_reward(x); });
}

/// GAIfO(+GP): MPO on discriminator rewards, one discriminator update per
/// policy update, both fed from replay.
inline rl::Agent gaifo_train(const envs::EnvSpec& env, const envs::DistractorSpec& distractor,
                             const envs::DemoDataset& demos, const GaifoConfig& cfg, std::uint64_t seed,
                             const std::function<void(const GaifoEval&)>& on_eval = {},
                             Discriminator* disc_out = nullptr) {
  const int D = env.obs_dim + distractor.n;
  require(!demos.trajectories.empty() && demos.trajectories.front().observations.rows() == D,
          "demonstrations do not match the augmented observation");
  Rng init = make_rng(seed, "init");
  rl::Agent agent = rl::make_agent(D, env.action_dim, cfg.learner, init);
  Discriminator disc = make_discriminator(D, cfg.hidden, cfg.two_frame, cfg.standardize, init);
  DiscriminatorTrainer trainer(disc, cfg.learning_rate, cfg.beta_gp);
  Rng disc_rng = make_rng(seed, "discriminator");
  std::vector<const envs::Trajectory*> expert;
  for (const auto& t : demos.trajectories) expert.push_back(&t);

  auto update = [&](const std::vector<rl::RolloutPtr>& batch) {
    std::vector<const envs::Trajectory*> mine;
    for (const auto& r : batch) mine.push_back(r.get());
    const Mat e = sample_inputs(disc, expert, cfg.batch_size, disc_rng);
    const Mat i = sample_inputs(disc, mine, cfg.batch_size, disc_rng);
    trainer.step(e, i, disc_rng);
  };

  rl::LoopHooks hooks;
  hooks.warmup = [&](rl::ReplayBuffer& replay, Rng&) { update(replay.snapshot()); };
  hooks.label = [&](const std::vector<rl::RolloutPtr>& batch) {
    std::vector<Vec> out;
    for (const auto& r : batch) out.push_back(gaifo_rollout_rewards(disc, *r));
    return out;
  };
  hooks.after_update = [&](long, const std::vector<rl::RolloutPtr>& batch, Rng&) { update(batch); };
  const std::uint64_t eval_seed = derive_seed(seed, "eval");
  hooks.on_eval = [&](long step, const rl::Agent& a) {
    if (!on_eval) return;
    auto snap = std::make_shared<const rl::GaussianPolicy>(a.policy);
    const rl::EvalResult ev =
        rl::evaluate_policy(env, distractor, rl::as_action_fn(snap, false), cfg.eval_episodes, eval_seed);
    double p = 0.0;
    long n = 0;
    for (const auto& t : ev.episodes) {
      const Vec q = disc.expert_prob(disc.inputs(t.observations.leftCols(t.length()), t.observations.rightCols(t.length())));
      p += q.sum();
      n += q.size();
    }
    on_eval({step, ev.mean(), ev.stddev(), p / static_cast<double>(n)});
  };
  hooks.eval_interval = cfg.eval_interval;

  rl::ReplayBuffer replay(cfg.learner.replay_capacity);
  rl::ActorSpec actors{env, distractor, derive_seed(seed, "actors")};
  Rng learner_rng = make_rng(seed, "learner");
  rl::run_learner(agent, replay, actors, cfg.learner, hooks, learner_rng);
  if (disc_out) *disc_out = disc;
  return agent;
}

}  // namespace formlab::baselines
