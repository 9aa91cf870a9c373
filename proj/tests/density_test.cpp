#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "formlab/density/effect_model.hpp"
#include "support/finite_diff.hpp"

namespace formlab::density {
namespace {

GmmOutput random_gmm(Rng& rng, int dim) {
  GmmOutput g;
  g.logits = Vec(kMixtureComponents);
  g.means = Mat(dim, kMixtureComponents);
  g.raw_scales = Mat(dim, kMixtureComponents);
  for (int k = 0; k < kMixtureComponents; ++k) {
    g.logits(k) = uniform(rng, -2, 2);
    for (int i = 0; i < dim; ++i) {
      g.means(i, k) = uniform(rng, -2, 2);
      g.raw_scales(i, k) = uniform(rng, -3, 2);
    }
  }
  return g;
}

// Direct mixture sum in extended precision, no log-sum-exp.
long double naive_log_prob(const GmmOutput& g, const Vec& x) {
  long double norm = 0;
  for (int k = 0; k < g.components(); ++k) norm += std::exp(static_cast<long double>(g.logits(k)));
  long double total = 0;
  for (int k = 0; k < g.components(); ++k) {
    long double p = std::exp(static_cast<long double>(g.logits(k))) / norm;
    for (int i = 0; i < g.dim(); ++i) {
      const long double s = std::log1p(std::exp(static_cast<long double>(g.raw_scales(i, k)))) + 1e-4L;
      const long double z = (x(i) - static_cast<long double>(g.means(i, k))) / s;
      p *= std::exp(-0.5L * z * z) / (s * std::sqrt(2.0L * std::numbers::pi_v<long double>));
    }
    total += p;
  }
  return std::log(total);
}

EffectModelConfig small_config(int dim) {
  EffectModelConfig c;
  c.obs_dim = dim;
  c.hidden = 8;
  c.max_offset = 3;
  c.ar_weight = 0.5;
  c.l2_weight = 0.0;
  c.learning_rate = 1e-3;
  c.batch_size = 16;
  return c;
}

// Damped rotation with noise; a smooth stand-in for demonstration data.
Mat synthetic_trajectory(Rng& rng, int dim, int steps) {
  Mat x(dim, steps + 1);
  x.col(0) = Vec::Random(dim);
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < dim; ++i) {
      const double other = x((i + 1) % dim, t);
      x(i, t + 1) = 0.95 * x(i, t) + 0.2 * other + 0.05 * standard_normal(rng);
    }
  }
  return x;
}

TEST(Gmm, SingleComponentAtMeanIsNormalizer) {
  GmmOutput g;
  g.logits = Vec::Constant(4, -std::numeric_limits<double>::infinity());
  g.logits(0) = 0.0;
  g.means = Mat::Zero(2, 4);
  g.means.col(0) << 0.3, -0.7;
  // softplus(raw) + 1e-4 = 1
  g.raw_scales = Mat::Constant(2, 4, std::log(std::expm1(1.0 - kScaleBias)));
  Vec x(2);
  x << 0.3, -0.7;
  EXPECT_NEAR(gmm_log_prob(g, x), -std::log(2 * std::numbers::pi), 1e-12);
}

TEST(Gmm, IdenticalComponentsCollapseToOneGaussian) {
  Rng rng(1);
  GmmOutput g = random_gmm(rng, 3);
  g.logits.setZero();
  for (int k = 1; k < 4; ++k) {
    g.means.col(k) = g.means.col(0);
    g.raw_scales.col(k) = g.raw_scales.col(0);
  }
  Vec x = Vec::Random(3);
  double single = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double s = effective_scale(g.raw_scales(i, 0));
    const double z = (x(i) - g.means(i, 0)) / s;
    single += -0.5 * z * z - std::log(s) - 0.5 * std::log(2 * std::numbers::pi);
  }
  EXPECT_NEAR(gmm_log_prob(g, x), single, 1e-12);
}

TEST(Gmm, MatchesNaiveSummationOracle) {
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 1 + trial % 6;
    GmmOutput g = random_gmm(rng, dim);
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x(i) = uniform(rng, -3, 3);
    worst = std::max(worst, std::abs(gmm_log_prob(g, x) - static_cast<double>(naive_log_prob(g, x))));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Gmm, OneDimensionalDensityIntegratesToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    GmmOutput g = random_gmm(rng, 1);
    const Mat s = g.scales();
    double lo = 1e300, hi = -1e300, smin = 1e300;
    for (int k = 0; k < 4; ++k) {
      lo = std::min(lo, g.means(0, k) - 12 * s(0, k));
      hi = std::max(hi, g.means(0, k) + 12 * s(0, k));
      smin = std::min(smin, s(0, k));
    }
    const double h = smin / 50.0;
    const long n = static_cast<long>((hi - lo) / h) + 1;
    double mass = 0.0;
    Vec x(1);
    for (long i = 0; i <= n; ++i) {
      x(0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      mass += w * std::exp(gmm_log_prob(g, x));
    }
    mass *= (hi - lo) / static_cast<double>(n);
    EXPECT_NEAR(mass, 1.0, 1e-3);
  }
}

TEST(Gmm, EffectiveScaleNeverBelowFloor) {
  Rng rng(4);
  for (int i = 0; i < 100000; ++i) {
    const double raw = uniform(rng, -800, 50);
    EXPECT_GE(effective_scale(raw), kScaleBias);
  }
  EXPECT_GE(effective_scale(-std::numeric_limits<double>::max()), kScaleBias);
}

TEST(Gmm, HeadGradientMatchesFiniteDifferences) {
  Rng rng(5);
  std::mt19937_64 pick(6);
  for (int trial = 0; trial < 10; ++trial) {
    GmmOutput g = random_gmm(rng, 3);
    Vec head = g.to_head();
    Vec x = Vec::Random(3);
    Vec grad(head.size());
    gmm_log_prob_head(head, x, grad, true);
    Vec unused;
    auto loss = [&](const Vec& p) { return -gmm_log_prob_head(p, x, unused, false); };
    EXPECT_LT(testing::check_gradient(head, grad, 30, pick, loss).max_rel_error, 1e-4);
  }
}

TEST(EffectModel, ForwardIsDeterministic) {
  Rng rng(7);
  EffectModel m = make_effect_model(small_config(3), rng);
  Vec x = Vec::Random(3);
  const Vec a = m.forward(x, 1).to_head();
  const Vec b = m.forward(x, 1).to_head();
  EXPECT_EQ(a, b);
}

TEST(EffectModel, OffsetReachesTheHead) {
  Rng rng(8);
  EffectModel m = make_effect_model(small_config(3), rng);
  Vec x = Vec::Random(3);
  EXPECT_GT((m.forward(x, 1).to_head() - m.forward(x, 2).to_head()).norm(), 1e-6);
}

TEST(EffectModel, OffsetOutOfRangeIsStructuralError) {
  Rng rng(9);
  EffectModel m = make_effect_model(small_config(2), rng);
  EXPECT_THROW(m.forward(Vec::Zero(2), 0), StructuralError);
  EXPECT_THROW(m.forward(Vec::Zero(2), 4), StructuralError);
}

TEST(EffectModel, ZeroWeightsGiveTheHeadBias) {
  Rng rng(10);
  EffectModel m = make_effect_model(small_config(2), rng);
  m.net.encoder.mutable_params().setZero();
  m.net.decoder.mutable_params().setZero();
  Vec bias = Vec::Random(m.head_size());
  m.net.decoder.bias_mut(m.net.decoder.num_layers() - 1) = bias;
  for (int trial = 0; trial < 5; ++trial) EXPECT_EQ(m.forward(Vec::Random(2), 1 + trial % 3).to_head(), bias);
}

struct LossFixture {
  std::vector<Mat> trajs;
  std::vector<const Mat*> ptrs;
  EffectModel model;
  std::vector<EffectWindow> windows;
};

LossFixture make_fixture(EffectModelConfig cfg, std::uint64_t seed) {
  LossFixture f;
  Rng rng(seed);
  for (int i = 0; i < 3; ++i) f.trajs.push_back(synthetic_trajectory(rng, cfg.obs_dim, 20));
  for (auto& t : f.trajs) f.ptrs.push_back(&t);
  f.model = make_effect_model(cfg, rng);
  Mat all(cfg.obs_dim, 63);
  for (int i = 0; i < 3; ++i) all.middleCols(21 * i, 21) = f.trajs[static_cast<std::size_t>(i)];
  f.model.standardizer.update(all);
  f.windows = sample_windows(f.ptrs, cfg, 12, rng);
  return f;
}

TEST(EffectLoss, WithoutAutoregressiveTermIsPureOvershooting) {
  auto cfg = small_config(3);
  cfg.ar_weight = 0.0;
  auto f = make_fixture(cfg, 11);
  const EffectBatch batch = make_effect_batch(f.model, f.windows);
  const EffectLoss l = effect_loss(f.model, batch, Mat());
  double expected = 0.0;
  for (std::size_t j = 0; j < f.windows.size(); ++j)
    for (int d = 1; d <= cfg.max_offset; ++d)
      expected += gmm_log_prob(f.model.forward(Vec(batch.anchors.col(static_cast<Eigen::Index>(j))), d),
                               Vec(batch.targets[static_cast<std::size_t>(d - 1)].col(static_cast<Eigen::Index>(j))));
  expected /= static_cast<double>(f.windows.size() * cfg.max_offset);
  EXPECT_NEAR(l.loss, -expected, 1e-12);
  EXPECT_EQ(l.ar_ll, 0.0);
}

TEST(EffectLoss, SingleOffsetIsMeanNegativeNextStepLogLikelihood) {
  auto cfg = small_config(2);
  cfg.ar_weight = 0.0;
  cfg.max_offset = 1;
  auto f = make_fixture(cfg, 12);
  const EffectBatch batch = make_effect_batch(f.model, f.windows);
  const EffectLoss l = effect_loss(f.model, batch, Mat());
  double expected = 0.0;
  for (std::size_t j = 0; j < f.windows.size(); ++j) {
    const auto& w = f.windows[j];
    const Vec xs = f.model.standardizer.standardize(Vec(w.obs->col(w.t)));
    const Vec ys = f.model.standardizer.standardize(Vec(w.obs->col(w.t + 1)));
    expected -= gmm_log_prob(f.model.forward(xs, 1), ys);
  }
  EXPECT_NEAR(l.loss, expected / static_cast<double>(f.windows.size()), 1e-12);
}

TEST(EffectLoss, GradientsMatchFiniteDifferencesWithFrozenSample) {
  auto f = make_fixture(small_config(3), 13);
  Rng rng(14);
  std::mt19937_64 pick(15);
  const EffectBatch batch = make_effect_batch(f.model, f.windows);
  const Mat ar = draw_ar_inputs(f.model, batch, rng);
  const EffectLoss l = effect_loss(f.model, batch, ar);
  EffectModel probe = f.model;
  auto enc_loss = [&](const Vec& p) {
    probe.net.encoder.set_params(p);
    return effect_loss(probe, batch, ar).loss;
  };
  EXPECT_LT(testing::check_gradient(f.model.net.encoder.params(), l.grads.encoder, 100, pick, enc_loss).max_rel_error,
            1e-4);
  probe = f.model;
  auto dec_loss = [&](const Vec& p) {
    probe.net.decoder.set_params(p);
    return effect_loss(probe, batch, ar).loss;
  };
  EXPECT_LT(testing::check_gradient(f.model.net.decoder.params(), l.grads.decoder, 100, pick, dec_loss).max_rel_error,
            1e-4);
}

TEST(EffectLoss, ConstantSequenceApproachesScaleFloorBound) {
  auto cfg = small_config(2);
  cfg.ar_weight = 0.0;
  cfg.max_offset = 1;
  cfg.learning_rate = 1e-2;
  Mat c(2, 30);
  c.row(0).setConstant(0.4);
  c.row(1).setConstant(-1.3);
  std::vector<const Mat*> data{&c};
  Rng rng(16);
  EffectModel m = make_effect_model(cfg, rng);
  EffectTrainer trainer(m);
  EffectLoss last;
  double lr = cfg.learning_rate;
  for (int s = 0; s < 30000; ++s) {
    if (s > 0 && s % 2000 == 0) trainer.set_learning_rate(lr *= 0.6);
    last = trainer.step(sample_windows(data, cfg, cfg.batch_size, rng), rng);
  }
  const double bound_per_dim = -std::log(kScaleBias) - 0.5 * std::log(2 * std::numbers::pi);
  EXPECT_LE(last.overshoot_ll, 2 * bound_per_dim);
  EXPECT_GT(last.overshoot_ll, 2 * (bound_per_dim - 0.1));
}

TEST(Standardizer, ConstantStreamStandardizesToZero) {
  Standardizer s(3);
  Mat batch = Mat::Constant(3, 10, 2.5);
  for (int i = 0; i < 20; ++i) s.update(batch);
  EXPECT_EQ(s.standardize(Vec(Vec::Constant(3, 2.5))), Vec::Zero(3));
  EXPECT_GE(s.variance().minCoeff(), Standardizer::kVarianceFloor);
}

TEST(Standardizer, RoundTripIsIdentity) {
  Rng rng(17);
  Standardizer s(4);
  Mat batch(4, 32);
  for (Eigen::Index i = 0; i < batch.size(); ++i) batch(i) = 3.0 + 5.0 * standard_normal(rng);
  s.update(batch);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x = 10.0 * Vec::Random(4);
    EXPECT_LT((s.unstandardize(s.standardize(x)) - x).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Standardizer, StandardizeBeforeUpdateIsStructuralError) {
  Standardizer s(2);
  EXPECT_THROW(s.standardize(Vec(Vec::Zero(2))), StructuralError);
}

TEST(Standardizer, ConvergesOnUnitGaussianStream) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    Standardizer s(5);
    Mat batch(5, 64);
    for (int b = 0; b < 500; ++b) {
      for (Eigen::Index i = 0; i < batch.size(); ++i) batch(i) = standard_normal(rng);
      s.update(batch);
    }
    EXPECT_LT(s.mean().cwiseAbs().maxCoeff(), 0.1) << "seed " << seed;
    EXPECT_GT(s.stddev().minCoeff(), 0.8);
    EXPECT_LT(s.stddev().maxCoeff(), 1.2);
    EXPECT_EQ(s.count(), 500);
  }
}

TEST(Standardizer, FrozenIgnoresUpdates) {
  Standardizer s(1);
  s.update(Mat::Constant(1, 4, 1.0));
  s.freeze();
  s.update(Mat::Constant(1, 4, 100.0));
  EXPECT_EQ(s.mean()(0), 1.0);
}

EffectModel pinned_head_model(const GmmOutput& g, Rng& rng) {
  EffectModelConfig cfg = small_config(g.dim());
  EffectModel m = make_effect_model(cfg, rng);
  m.net.encoder.mutable_params().setZero();
  m.net.decoder.mutable_params().setZero();
  m.net.decoder.bias_mut(1) = g.to_head();
  return m;
}

TEST(SampleNext, FloorScaleSingleComponentStaysNearMean) {
  GmmOutput g;
  g.logits = Vec::Constant(4, -1e3);
  g.logits(2) = 0.0;
  g.means = Mat::Random(3, 4);
  g.raw_scales = Mat::Constant(3, 4, -60.0);
  Rng init(18);
  EffectModel m = pinned_head_model(g, init);
  Rng rng(19);
  for (int i = 0; i < 1000; ++i) {
    const Vec x = sample_next(m, Vec::Random(3), rng);
    EXPECT_LT((x - g.means.col(2)).cwiseAbs().maxCoeff(), 6 * kScaleBias);
  }
}

TEST(SampleNext, MonteCarloMeanMatchesMixtureMean) {
  Rng rng(20);
  GmmOutput g = random_gmm(rng, 2);
  EffectModel m = pinned_head_model(g, rng);
  const int n = 10000;
  Mat draws(2, n);
  for (int i = 0; i < n; ++i) draws.col(i) = sample_next(m, Vec::Zero(2), rng);
  const Vec w = g.mixture_weights();
  const Vec mean = g.mixture_mean();
  const Mat s = g.scales();
  for (int d = 0; d < 2; ++d) {
    double second = 0.0;
    for (int k = 0; k < 4; ++k) second += w(k) * (s(d, k) * s(d, k) + g.means(d, k) * g.means(d, k));
    const double se = std::sqrt((second - mean(d) * mean(d)) / n);
    EXPECT_LT(std::abs(draws.row(d).mean() - mean(d)), 3 * se) << "dim " << d;
  }
}

TEST(SampleNext, FixedSeedIsReproducible) {
  Rng init(21);
  EffectModel m = make_effect_model(small_config(3), init);
  Rng a(5), b(5);
  EXPECT_EQ(sample_next(m, Vec::Ones(3), a), sample_next(m, Vec::Ones(3), b));
}

TEST(Training, LikelihoodRisesOnASingleTrajectory) {
  Rng rng(22);
  Mat traj = synthetic_trajectory(rng, 3, 100);
  std::vector<const Mat*> data{&traj};
  auto cfg = small_config(3);
  cfg.hidden = 16;
  EffectModel m = make_effect_model(cfg, rng);
  EffectTrainer trainer(m);
  std::vector<double> curve;
  for (int s = 1; s <= 1000; ++s) {
    trainer.step(sample_windows(data, cfg, cfg.batch_size, rng), rng);
    if (s % 50 == 0) curve.push_back(mean_next_step_log_likelihood(m, data));
  }
  // Smoothed over windows of four evaluations.
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 4 <= curve.size(); i += 4)
    smooth.push_back((curve[i] + curve[i + 1] + curve[i + 2] + curve[i + 3]) / 4.0);
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_GE(smooth[i], smooth[i - 1]) << "window " << i;
}

TEST(Training, ImitatorUpdateSharesTheDemonstratorCodePath) {
  Rng data_rng(23);
  Mat traj = synthetic_trajectory(data_rng, 2, 40);
  std::vector<const Mat*> data{&traj};
  auto cfg = small_config(2);
  cfg.steps = 200;
  cfg.eval_interval = 0;

  Rng rng_a(99);
  EffectModel a = train_demonstrator(data, cfg, rng_a);

  Rng rng_b(99);
  EffectModel b = make_effect_model(cfg, rng_b);
  EffectTrainer trainer(b);
  for (long s = 0; s < cfg.steps; ++s) trainer.step(sample_windows(data, cfg, cfg.batch_size, rng_b), rng_b);

  EXPECT_EQ(a.net.encoder.params(), b.net.encoder.params());
  EXPECT_EQ(a.net.decoder.params(), b.net.decoder.params());
}

TEST(Training, ZeroLearningRateLeavesParametersUnchanged) {
  Rng rng(24);
  Mat traj = synthetic_trajectory(rng, 2, 30);
  std::vector<const Mat*> data{&traj};
  auto cfg = small_config(2);
  cfg.learning_rate = 0.0;
  cfg.l2_weight = 0.5;
  EffectModel m = make_effect_model(cfg, rng);
  const Vec enc = m.net.encoder.params(), dec = m.net.decoder.params();
  EffectTrainer trainer(m);
  trainer.step(sample_windows(data, cfg, cfg.batch_size, rng), rng);
  EXPECT_EQ(m.net.encoder.params(), enc);
  EXPECT_EQ(m.net.decoder.params(), dec);
}

TEST(Training, NonFiniteDataAbortsWithStep) {
  Mat traj = Mat::Ones(2, 20);
  traj(0, 7) = std::nan("");
  std::vector<const Mat*> data{&traj};
  auto cfg = small_config(2);
  cfg.steps = 50;
  cfg.eval_interval = 0;
  Rng rng(25);
  EXPECT_THROW(train_demonstrator(data, cfg, rng), NumericalError);
}

TEST(Checkpoint, EffectModelRoundTripIsByteIdentical) {
  auto f = make_fixture(small_config(3), 26);
  f.model.standardizer.freeze();
  std::stringstream ss;
  write_effect_model(ss, f.model);
  const std::string bytes = ss.str();
  EffectModel back = read_effect_model(ss);
  std::stringstream again;
  write_effect_model(again, back);
  EXPECT_EQ(again.str(), bytes);
  EXPECT_TRUE(back.standardizer.frozen());
  Vec x = Vec::Random(3), y = Vec::Random(3);
  EXPECT_EQ(back.log_prob(x, y), f.model.log_prob(x, y));
}

}  // namespace
}  // namespace formlab::density
