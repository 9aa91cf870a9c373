// Acceptance runner. One criterion per invocation (or "all"); prints one
// PASS/FAIL line per check and exits nonzero if any check fails.
//
//   formlab_acceptance <criterion|all|--list> [--work DIR] [--configs DIR] [--seeds K]

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

#include "formlab/harness/commands.hpp"
#include "formlab/verify/suite.hpp"
#include "support/finite_diff.hpp"

namespace {

using namespace formlab;
using namespace formlab::harness;

struct Line {
  std::string name;
  double value;
  double tolerance;
  bool passed;
  std::string detail;
};

struct Context {
  fs::path work;
  fs::path configs;
  int seeds = 3;
};

using Criterion = std::vector<Line> (*)(const Context&);

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

Line below(const std::string& name, double value, double tol, std::string detail = "") {
  return {name, value, tol, value < tol, std::move(detail)};
}

Line runtime(const std::string& name, const Timer& t, double limit) {
  return below(name + "/runtime_s", t.seconds(), limit);
}

// ---------------------------------------------------------------------------

std::vector<Line> identity_suite(const Context&) {
  Timer t;
  std::vector<Line> out;
  for (const auto& r : verify::tiny_mdp_suite(50, 2024))
    out.push_back({"identity/" + r.name, r.value, r.tolerance, r.passed, "max residual over 50 instances"});
  out.push_back(runtime("identity", t, 60));
  return out;
}

// ---------------------------------------------------------------------------

Mat synthetic_trajectory(Rng& rng, int dim, int steps) {
  Mat x(dim, steps + 1);
  x.col(0) = Vec::Random(dim);
  for (int t = 0; t < steps; ++t)
    for (int i = 0; i < dim; ++i)
      x(i, t + 1) = 0.95 * x(i, t) + 0.2 * x((i + 1) % dim, t) + 0.05 * standard_normal(rng);
  return x;
}

Line grad_line(const std::string& name, const testing::GradCheckResult& r) {
  return below("gradients/" + name, r.max_rel_error, 1e-4, std::to_string(r.checked) + " coordinates");
}

std::vector<Line> gradients(const Context&) {
  Timer t;
  std::vector<Line> out;
  Rng rng(31);
  std::mt19937_64 pick(32);
  constexpr int kCoords = 100;

  {
    density::EffectModelConfig c;
    c.obs_dim = 4;
    c.hidden = 16;
    c.max_offset = 3;
    c.ar_weight = 0.5;
    c.l2_weight = 0.0;
    c.batch_size = 16;
    density::EffectModel m = density::make_effect_model(c, rng);
    std::vector<Mat> data;
    for (int k = 0; k < 4; ++k) data.push_back(synthetic_trajectory(rng, 4, 30));
    std::vector<const Mat*> ptrs;
    for (const auto& d : data) ptrs.push_back(&d);
    for (const auto& d : data) m.standardizer.update(d);
    const density::EffectBatch batch = density::make_effect_batch(m, density::sample_windows(ptrs, c, 16, rng));
    const Mat ar = density::draw_ar_inputs(m, batch, rng);
    const density::EffectLoss l = density::effect_loss(m, batch, ar);
    density::EffectModel probe = m;
    out.push_back(grad_line("effect_model_encoder",
                            testing::check_gradient(m.net.encoder.params(), l.grads.encoder, kCoords, pick,
                                                    [&](const Vec& p) {
                                                      probe.net.encoder.set_params(p);
                                                      return density::effect_loss(probe, batch, ar).loss;
                                                    })));
    probe = m;
    out.push_back(grad_line("effect_model_decoder",
                            testing::check_gradient(m.net.decoder.params(), l.grads.decoder, kCoords, pick,
                                                    [&](const Vec& p) {
                                                      probe.net.decoder.set_params(p);
                                                      return density::effect_loss(probe, batch, ar).loss;
                                                    })));
  }
  {
    double worst = 0.0;
    int checked = 0;
    for (int trial = 0; trial < 4; ++trial) {
      density::GmmOutput g;
      g.logits = Vec::Random(density::kMixtureComponents) * 2.0;
      g.means = Mat::Random(3, density::kMixtureComponents) * 2.0;
      g.raw_scales = Mat::Random(3, density::kMixtureComponents) * 2.0;
      const Vec head = g.to_head(), x = Vec::Random(3);
      Vec grad(head.size()), unused;
      density::gmm_log_prob_head(head, x, grad, true);
      const auto r = testing::check_gradient(head, grad, kCoords / 4, pick, [&](const Vec& p) {
        return -density::gmm_log_prob_head(p, x, unused, false);
      });
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
    out.push_back(grad_line("gmm_head", {worst, checked}));
  }
  {
    const rl::GaussianPolicy p = rl::make_policy(4, 2, rl::PolicyConfig{16, 1, true}, rng);
    const Mat obs = Mat::Random(4, 8), acts = Mat::Random(2, 8);
    const Vec w = Vec::Random(8);
    Vec grad;
    p.log_prob_batch(obs, acts, &w, &grad);
    rl::GaussianPolicy probe = p;
    out.push_back(grad_line("policy", testing::check_gradient(p.net.params(), grad, kCoords, pick, [&](const Vec& v) {
                              probe.net.set_params(v);
                              return probe.log_prob_batch(obs, acts).dot(w);
                            })));
  }
  {
    const rl::Critic c = rl::make_critic(4, 2, rl::CriticConfig{.hidden = 16}, rng);
    const Mat obs = Mat::Random(4, 5), acts = Mat::Random(2, 8);
    const std::vector<int> idx{0, 1, 1, 3, 2, 4, 0, 2};
    const Vec w = Vec::Random(8);
    nn::ConcatNet::Cache cache;
    c.q(obs, idx, acts, &cache);
    nn::ConcatNet::Grads g;
    c.backward(cache, w, g);
    rl::Critic probe = c;
    out.push_back(grad_line("critic_encoder",
                            testing::check_gradient(c.net.encoder.params(), g.encoder, kCoords, pick, [&](const Vec& v) {
                              probe.net.encoder.set_params(v);
                              return probe.q(obs, idx, acts).dot(w);
                            })));
    probe = c;
    out.push_back(grad_line("critic_decoder",
                            testing::check_gradient(c.net.decoder.params(), g.decoder, kCoords, pick, [&](const Vec& v) {
                              probe.net.decoder.set_params(v);
                              return probe.q(obs, idx, acts).dot(w);
                            })));
  }
  for (bool two_frame : {false, true}) {
    const std::string tag = two_frame ? "discriminator_two_frame" : "discriminator";
    baselines::Discriminator d = baselines::make_discriminator(4, 16, two_frame, true, rng);
    d.standardizer.update(Mat::Random(d.frame_dim() * (two_frame ? 2 : 1), 32));
    const int in = d.encoder.input_dim();
    const Mat e = Mat::Random(in, 8), i = Mat::Random(in, 8);
    const Vec mix = (Vec::Random(8).array() * 0.5 + 0.5).matrix();
    const baselines::GaifoLoss l = baselines::gaifo_loss(d, e, i, 10.0, mix);
    baselines::Discriminator probe = d;
    // The penalty's interpolated code is held constant, so the encoder sees
    // only the classification terms.
    out.push_back(grad_line(tag + "_encoder", testing::check_gradient(d.encoder.params(), l.grad_encoder, kCoords, pick,
                                                                      [&](const Vec& v) {
                                                                        probe.encoder.set_params(v);
                                                                        return -baselines::gaifo_loss(probe, e, i, 10.0, mix)
                                                                                    .classification;
                                                                      })));
    probe = d;
    out.push_back(grad_line(tag + "_decoder", testing::check_gradient(d.decoder.params(), l.grad_decoder, kCoords, pick,
                                                                      [&](const Vec& v) {
                                                                        probe.decoder.set_params(v);
                                                                        return -baselines::gaifo_loss(probe, e, i, 10.0, mix)
                                                                                    .objective;
                                                                      })));
  }
  {
    const baselines::InverseModel m = baselines::make_inverse_model(4, 2, 16, rng);
    const Mat x = baselines::InverseModel::pair(Mat::Random(4, 8), Mat::Random(4, 8)), a = Mat::Random(2, 8);
    const Vec w = Vec::Random(8);
    Vec grad;
    m.net.log_prob_batch(x, a, &w, &grad);
    rl::GaussianPolicy probe = m.net;
    out.push_back(grad_line("inverse_model", testing::check_gradient(m.net.net.params(), grad, kCoords, pick,
                                                                     [&](const Vec& v) {
                                                                       probe.net.set_params(v);
                                                                       return probe.log_prob_batch(x, a).dot(w);
                                                                     })));
  }
  out.push_back(runtime("gradients", t, 120));
  return out;
}

// ---------------------------------------------------------------------------

density::GmmOutput random_gmm(Rng& rng, int dim) {
  density::GmmOutput g;
  g.logits = Vec(density::kMixtureComponents);
  g.means = Mat(dim, density::kMixtureComponents);
  g.raw_scales = Mat(dim, density::kMixtureComponents);
  for (int k = 0; k < density::kMixtureComponents; ++k) {
    g.logits(k) = uniform(rng, -2, 2);
    for (int i = 0; i < dim; ++i) {
      g.means(i, k) = uniform(rng, -2, 2);
      g.raw_scales(i, k) = uniform(rng, -3, 2);
    }
  }
  return g;
}

// Mixture density summed directly in extended precision.
long double naive_log_prob(const density::GmmOutput& g, const Vec& x) {
  long double norm = 0, total = 0;
  for (int k = 0; k < g.components(); ++k) norm += std::exp(static_cast<long double>(g.logits(k)));
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

std::vector<Line> density_soundness(const Context&) {
  Rng rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 1 + trial % 6;
    const density::GmmOutput g = random_gmm(rng, dim);
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x(i) = uniform(rng, -3, 3);
    worst = std::max(worst, std::abs(density::gmm_log_prob(g, x) - static_cast<double>(naive_log_prob(g, x))));
  }
  double mass_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const density::GmmOutput g = random_gmm(rng, 1);
    const Mat s = g.scales();
    double lo = 1e300, hi = -1e300, smin = 1e300;
    for (int k = 0; k < g.components(); ++k) {
      lo = std::min(lo, g.means(0, k) - 12 * s(0, k));
      hi = std::max(hi, g.means(0, k) + 12 * s(0, k));
      smin = std::min(smin, s(0, k));
    }
    const long n = static_cast<long>((hi - lo) / (smin / 50.0)) + 1;
    double mass = 0.0;
    Vec x(1);
    for (long i = 0; i <= n; ++i) {
      x(0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
      mass += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(density::gmm_log_prob(g, x));
    }
    mass *= (hi - lo) / static_cast<double>(n);
    mass_err = std::max(mass_err, std::abs(mass - 1.0));
  }
  return {below("density/log_prob_vs_naive_sum", worst, 1e-9, "1000 random mixtures"),
          below("density/integral_minus_one", mass_err, 1e-3, "20 random 1-D heads, trapezoid")};
}

// ---------------------------------------------------------------------------

std::vector<Line> rho_kl_consistency(const Context&) {
  Timer t;
  verify::KlConsistency d;
  const verify::CheckResult r = verify::lingauss_kl_check(2000, 51, &d);
  char buf[160];
  std::snprintf(buf, sizeof buf, "E[rho]=%.5f -sum KL=%.5f stderr=%.5f", d.mean_rho, -d.mean_kl_sum, d.gap_stderr);
  return {{"rho_kl/stderrs", r.value, r.tolerance, r.passed, buf}, runtime("rho_kl", t, 120)};
}

// ---------------------------------------------------------------------------

ExperimentConfig preset(const Context& ctx, const std::string& name, std::vector<std::string> overrides) {
  return load_config((ctx.configs / (name + ".cfg")).string(), overrides);
}

// record-demos, train-demo-model and imitate for one seed; returns the run root.
fs::path run_form_pipeline(const ExperimentConfig& c, std::ostream& log) {
  cmd_record_demos(c, true, log);
  cmd_train_demo_model(c, true, log);
  cmd_imitate(c, true, log);
  return c.output_dir;
}

std::vector<Line> end_to_end_lingauss(const Context& ctx) {
  std::vector<Line> out;
  for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(ctx.seeds); ++seed) {
    Timer t;
    const std::string tag = "end_to_end/lingauss_seed" + std::to_string(seed);
    const ExperimentConfig c = preset(ctx, "lingauss_desk", {"seed=" + std::to_string(seed), "method=form",
                                                             "output.dir=" + (ctx.work / tag).string()});
    run_form_pipeline(c, std::cerr);
    const auto policy = std::make_shared<const rl::GaussianPolicy>(
        read_policy((RunLayout{c.output_dir}.imitate_dir(Method::form) / "policy.ckpt").string()));
    const envs::EnvSpec spec = env_spec(c);
    const Mat gain = envs::lingauss_gain(spec);
    // The oracle compares raw states; the policy sees distractors only if N > 0.
    require(c.distractor_n == 0, "lingauss end-to-end preset must not use distractors");
    const double kl = verify::lingauss_closed_loop_kl(spec, gain, rl::as_action_fn(policy, false), 100,
                                                      derive_seed(seed, "acceptance_kl"));
    out.push_back(below(tag + "/closed_loop_kl", kl, 0.05, "mean per-step KL over 100 episodes"));
    out.push_back(runtime(tag, t, 900));
  }
  return out;
}

double last_return(const fs::path& metrics) {
  const auto rows = read_metrics(metrics.string());
  require(!rows.empty(), metrics.string() + " is empty");
  return rows.back().return_mean;
}

std::vector<Line> end_to_end_point_mass(const Context& ctx) {
  std::vector<Line> out;
  for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(ctx.seeds); ++seed) {
    Timer t;
    const std::string tag = "end_to_end/point_mass_seed" + std::to_string(seed);
    const std::vector<std::string> ov{"seed=" + std::to_string(seed), "output.dir=" + (ctx.work / tag).string()};
    std::vector<std::string> form_ov = ov, expert_ov = ov;
    form_ov.push_back("method=form");
    expert_ov.push_back("method=expert");
    const ExperimentConfig c = preset(ctx, "point_mass_desk", form_ov);
    const ExperimentConfig e = preset(ctx, "point_mass_desk", expert_ov);
    run_form_pipeline(c, std::cerr);
    cmd_evaluate(c, true, std::cerr);
    cmd_evaluate(e, true, std::cerr);
    const RunLayout l{c.output_dir};
    const double imit = last_return(l.evaluate_dir(Method::form) / "metrics.csv");
    const double expert = last_return(l.evaluate_dir(Method::expert) / "metrics.csv");
    char buf[120];
    std::snprintf(buf, sizeof buf, "imitator %.3f expert %.3f", imit, expert);
    out.push_back({tag + "/return_fraction", imit / expert, 0.8, imit >= 0.8 * expert, buf});
    out.push_back(runtime(tag, t, 900));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::map<long, std::vector<double>> sweep_returns(const fs::path& root, const std::string& method) {
  std::map<long, std::vector<double>> out;
  for (const auto& r : read_metrics((RunLayout{root}.sweep_dir() / "metrics.csv").string())) {
    require(!r.failed(), "sweep cell " + r.method + " M=" + std::to_string(r.m) + " failed");
    if (r.method == method) out[r.m].push_back(r.return_mean);
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<Line> pool_size_trend(const Context& ctx) {
  // 1000 distinct patterns need N >= 10; at N = 8 the full pool of 256 is
  // the largest feasible M.
  const long m_max = 256;
  const fs::path form_root = ctx.work / "pool_size_trend" / "form";
  const fs::path gaifo_root = ctx.work / "pool_size_trend" / "gaifo_gp";
  const std::vector<std::string> common{"distractor.N=8", "sweep.N=8", "sweep.seeds=" + std::to_string(ctx.seeds), "seed=0"};
  auto with = [&](std::vector<std::string> v, const fs::path& root) {
    v.insert(v.end(), common.begin(), common.end());
    v.push_back("output.dir=" + root.string());
    return v;
  };
  cmd_sweep(preset(ctx, "point_mass_desk",
                   with({"sweep.methods=form", "sweep.M=1,10,100," + std::to_string(m_max)}, form_root)),
            false, std::cerr);
  cmd_sweep(preset(ctx, "point_mass_desk", with({"sweep.methods=gaifo_gp", "sweep.M=1"}, gaifo_root)), false,
            std::cerr);
  auto form = sweep_returns(form_root, "form");
  auto gaifo = sweep_returns(gaifo_root, "gaifo_gp");
  const double f1 = mean(form[1]), f10 = mean(form[10]), fmax = mean(form[m_max]), g1 = mean(gaifo[1]);
  char buf[200];
  std::snprintf(buf, sizeof buf, "FORM M=1 %.3f M=10 %.3f M=100 %.3f M=%ld %.3f; GAIfO+GP M=1 %.3f", f1, f10,
                mean(form[100]), m_max, fmax, g1);
  return {{"pool_size/form_M10_minus_0.8_Mmax", f10 - 0.8 * fmax, 0.0, f10 >= 0.8 * fmax, buf},
          {"pool_size/form_minus_gaifo_gp_at_M1", f1 - g1, 0.0, f1 > g1, buf}};
}

// ---------------------------------------------------------------------------

std::vector<Line> retrace_property(const Context&) {
  Rng rng(61);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int L = 1 + static_cast<int>(rng() % 100);
    const double gamma = uniform(rng, 0.5, 0.999);
    const Vec r = Vec::Random(L), q = Vec::Random(L), lp = Vec::Random(L);
    Vec v(L + 1);
    v.head(L) = q;
    v(L) = uniform(rng, -5, 5);
    const Vec got = rl::retrace_targets(q, v, r, lp, lp, 1.0, gamma);
    for (int t = 0; t < L; ++t) {
      long double direct = 0, disc = 1;
      for (int k = t; k < L; ++k) {
        direct += disc * r(k);
        disc *= gamma;
      }
      direct += disc * v(L);
      worst = std::max(worst, static_cast<double>(std::abs(got(t) - direct)));
    }
  }
  return {below("retrace/on_policy_vs_n_step", worst, 1e-10, "100 random rollouts, lambda = 1")};
}

// ---------------------------------------------------------------------------

double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

// Two-sided Welch t-test.
double welch_p_value(const std::vector<double>& a, const std::vector<double>& b) {
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  if (va + vb == 0.0) return mean(a) == mean(b) ? 1.0 : 0.0;
  const double tstat = (mean(a) - mean(b)) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) /
                    (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(tstat)));
}

std::vector<Line> zero_reward_control(const Context& ctx) {
  std::vector<Line> out;
  const ExperimentConfig c =
      preset(ctx, "point_mass_desk", {"method=form", "output.dir=" + (ctx.work / "zero_reward").string()});
  cmd_record_demos(c, true, std::cerr);
  cmd_train_demo_model(c, true, std::cerr);
  const RunLayout l{c.output_dir};
  const envs::DemoDataset ds = load_demos(l, c);
  const density::EffectModel demo = load_effect_model(l.demo_model().string());

  // Identical models on real rollouts: every label is exactly zero.
  const density::EffectModel copy = demo;
  double max_label = 0.0;
  for (const auto& t : ds.trajectories)
    max_label = std::max(max_label, form::form_rewards(t.observations, demo, copy).cwiseAbs().maxCoeff());
  out.push_back({"zero_reward/identical_model_labels", max_label, 0.0, max_label == 0.0, "max |r_t| on the demos"});

  form::FormConfig fc = form_config(c, ds.distractor);
  fc.zero_reward_control = true;
  double max_batch_reward = 0.0;
  const form::FormResult r = form::form_train(fc, demo, {}, [&](const rl::LearnerStats& s) {
    max_batch_reward = std::max(max_batch_reward, std::abs(s.reward_mean));
  });
  out.push_back({"zero_reward/training_labels", max_batch_reward, 0.0, max_batch_reward == 0.0,
                 "max |batch mean reward| over training"});

  // Same initialization as form_train draws.
  Rng init_rng = make_rng(fc.seed, "init");
  const rl::Agent untrained = rl::make_agent(fc.env.obs_dim + fc.distractor.n, fc.env.action_dim, fc.learner, init_rng);
  const int episodes = 100;
  auto returns = [&](const rl::GaussianPolicy& p, const std::string& label) {
    const rl::EvalResult ev = rl::evaluate_policy(fc.env, ds.distractor,
                                                  rl::as_action_fn(std::make_shared<const rl::GaussianPolicy>(p), false),
                                                  episodes, derive_seed(fc.seed, label));
    std::vector<double> v;
    for (const auto& e : ev.episodes) v.push_back(e.task_return());
    return v;
  };
  const auto before = returns(untrained.policy, "zero_reward/untrained");
  const auto after = returns(r.agent.policy, "zero_reward/trained");
  const double p = welch_p_value(before, after);
  char buf[160];
  std::snprintf(buf, sizeof buf, "untrained %.4f trained %.4f over %d episodes each, %ld learner steps", mean(before),
                mean(after), episodes, fc.learner.steps);
  out.push_back({"zero_reward/welch_p_value", p, 0.01, p > 0.01, buf});
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Line> planted_feature(const Context&) {
  Timer t;
  verify::PlantedFeatureDetail d;
  const verify::CheckResult r = verify::planted_feature_check(256, 2000, 10.0, 71, &d);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%ld updates, expert-data prob %.3f", d.updates, d.expert_prob);
  return {{"planted_feature/imitator_prob", r.value, r.tolerance, r.passed, buf}};
}

// ---------------------------------------------------------------------------

// Every subcommand twice from scratch into separate roots; every CSV they
// leave behind must match byte for byte.
std::vector<Line> determinism(const Context& ctx) {
  std::vector<std::map<std::string, std::string>> files(2);
  for (int run = 0; run < 2; ++run) {
    const fs::path root = ctx.work / "determinism" / ("run" + std::to_string(run));
    fs::remove_all(root);
    auto cfg = [&](const std::string& method) {
      return preset(ctx, "smoke", {"method=" + method, "output.dir=" + root.string(), "expert.source=trained",
                                   "sweep.methods=form,gaifo_gp", "sweep.N=1,2", "sweep.M=1,2", "sweep.seeds=2"});
    };
    std::ostringstream log;
    cmd_train_expert(cfg("expert"), false, log);
    cmd_record_demos(cfg("form"), false, log);
    cmd_train_demo_model(cfg("form"), false, log);
    for (const char* m : {"form", "bc", "bco", "gaifo", "gaifo_gp"}) {
      cmd_imitate(cfg(m), false, log);
      cmd_evaluate(cfg(m), false, log);
    }
    cmd_evaluate(cfg("expert"), false, log);
    cmd_sweep(cfg("form"), false, log);
    cmd_verify(cfg("form"), false, log);
    cmd_plot(cfg("form"), false, log);
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && (e.path().extension() == ".csv" || e.path().extension() == ".svg"))
        files[run][fs::relative(e.path(), root).generic_string()] = read_text(e.path());
  }
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, text] : files[0]) {
    auto it = files[1].find(name);
    if (it == files[1].end() || it->second != text) {
      if (first.empty()) first = name;
      ++differing;
    }
  }
  differing += files[1].size() > files[0].size() ? files[1].size() - files[0].size() : 0;
  std::string detail = std::to_string(files[0].size()) + " csv/svg files compared";
  if (!first.empty()) detail += ", first mismatch " + first;
  return {{"determinism/differing_files", static_cast<double>(differing), 0.0, differing == 0 && files[0].size() > 20,
           detail}};
}

// ---------------------------------------------------------------------------

const std::vector<std::pair<std::string, Criterion>>& criteria() {
  static const std::vector<std::pair<std::string, Criterion>> all{
      {"identity_suite", identity_suite},
      {"gradients", gradients},
      {"density_soundness", density_soundness},
      {"rho_kl_consistency", rho_kl_consistency},
      {"end_to_end_lingauss", end_to_end_lingauss},
      {"end_to_end_point_mass", end_to_end_point_mass},
      {"pool_size_trend", pool_size_trend},
      {"retrace_property", retrace_property},
      {"zero_reward_control", zero_reward_control},
      {"planted_feature", planted_feature},
      {"determinism", determinism},
  };
  return all;
}

bool run(const std::string& name, Criterion fn, const Context& ctx) {
  std::vector<Line> lines;
  try {
    lines = fn(ctx);
  } catch (const std::exception& e) {
    lines.push_back({name, std::nan(""), std::nan(""), false, std::string("error: ") + e.what()});
  }
  bool ok = true;
  for (const auto& l : lines) {
    std::printf("%s %-52s value=%-12.6g tol=%-8.3g %s\n", l.passed ? "PASS" : "FAIL", l.name.c_str(), l.value,
                l.tolerance, l.detail.c_str());
    ok = ok && l.passed;
  }
  std::fflush(stdout);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx{fs::path("acceptance_runs"), fs::path(FORMLAB_CONFIG_DIR)};
  std::string which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) ctx.work = argv[++i];
    else if (a == "--configs" && i + 1 < argc) ctx.configs = argv[++i];
    else if (a == "--seeds" && i + 1 < argc) ctx.seeds = std::stoi(argv[++i]);
    else if (a == "--list") {
      for (const auto& [n, f] : criteria()) std::printf("%s\n", n.c_str());
      return 0;
    } else which = a;
  }
  if (which.empty()) {
    std::fprintf(stderr, "usage: formlab_acceptance <criterion|all|--list> [--work DIR] [--configs DIR] [--seeds K]\n");
    return 2;
  }
  fs::create_directories(ctx.work);
  bool ok = true, found = false;
  for (const auto& [n, f] : criteria())
    if (which == "all" || which == n) {
      found = true;
      ok = run(n, f, ctx) && ok;
    }
  if (!found) {
    std::fprintf(stderr, "unknown criterion '%s'\n", which.c_str());
    return 2;
  }
  return ok ? 0 : 1;
}
