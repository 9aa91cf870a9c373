#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "formlab/harness/config.hpp"
#include "formlab/harness/metrics.hpp"
#include "formlab/harness/plot.hpp"
#include "formlab/verify/suite.hpp"

namespace formlab::harness {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kMissingDependency = 3, kOutputExists = 4 };

class OutputExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Artifacts

inline void write_policy(const std::string& path, const rl::GaussianPolicy& p, long step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StructuralError("cannot write " + path);
  os << "FORMPOLICY v1 obs_dim=" << p.obs_dim << " action_dim=" << p.action_dim << " step=" << step << "\n";
  nn::write_net(os, p.net);
}

inline rl::GaussianPolicy read_policy(const std::string& path, long* step = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingDependency("missing policy checkpoint " + path);
  const std::string header = io::read_line(is);
  if (header.rfind("FORMPOLICY v1 ", 0) != 0) throw StructuralError(path + ": not a policy checkpoint");
  auto kv = nn::detail::parse_record(header.substr(14));
  rl::GaussianPolicy p{nn::read_net(is), std::stoi(kv.at("obs_dim")), std::stoi(kv.at("action_dim"))};
  require(p.net.input_dim() == p.obs_dim && p.net.output_dim() == 2 * p.action_dim,
          path + ": policy header disagrees with the network");
  if (step) *step = std::stol(kv.at("step"));
  return p;
}

inline void save_effect_model(const std::string& path, const density::EffectModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StructuralError("cannot write " + path);
  density::write_effect_model(os, m);
}

inline density::EffectModel load_effect_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingDependency("missing effect model checkpoint " + path + " (run train-demo-model first)");
  return density::read_effect_model(is);
}

/// Where each subcommand reads and writes, relative to output.dir.
struct RunLayout {
  fs::path root;
  fs::path expert_dir() const { return root / "expert"; }
  fs::path expert_policy() const { return expert_dir() / "policy.ckpt"; }
  fs::path demos_dir() const { return root / "demos"; }
  fs::path demos() const { return demos_dir() / "demos.bin"; }
  fs::path demo_model_dir() const { return root / "demo_model"; }
  fs::path demo_model() const { return demo_model_dir() / "model.ckpt"; }
  fs::path imitate_dir(Method m) const { return root / "imitate" / to_string(m); }
  fs::path evaluate_dir(Method m) const { return root / "evaluate" / to_string(m); }
  fs::path sweep_dir() const { return root / "sweep"; }
  fs::path verify_dir() const { return root / "verify"; }
  fs::path plots_dir() const { return root / "plots"; }
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StructuralError("cannot write " + path.string());
  os << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StructuralError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Creates an empty output directory holding the config echo. An existing
/// non-empty directory is an error unless `force`, which clears it.
inline void prepare_output(const fs::path& dir, const ExperimentConfig& cfg, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw OutputExists(dir.string() + " already exists (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  write_text(dir / "config.txt", "# metrics schema " + std::to_string(kMetricsSchemaVersion) + "\n" + config_echo(cfg));
}

inline envs::DemoDataset load_demos(const RunLayout& l, const ExperimentConfig& cfg) {
  if (!fs::exists(l.demos())) throw MissingDependency("missing demonstrations " + l.demos().string() + " (run record-demos first)");
  envs::DemoDataset ds = envs::load_dataset(l.demos().string());
  const envs::EnvSpec s = env_spec(cfg);
  if (ds.spec.kind != s.kind || ds.spec.episode_length != s.episode_length || ds.distractor.n != cfg.distractor_n ||
      ds.distractor.m != cfg.distractor_m)
    throw MissingDependency(l.demos().string() + " was recorded for a different env or distractor setting");
  return ds;
}

inline MetricsRow base_row(const ExperimentConfig& cfg, Method m) {
  MetricsRow r;
  r.method = to_string(m);
  r.env = cfg.env_name;
  r.n = cfg.distractor_n;
  r.m = cfg.distractor_m;
  r.seed = cfg.seed;
  return r;
}

inline envs::ActionFn scripted_or_trained_expert(const ExperimentConfig& cfg, const RunLayout& l) {
  const envs::EnvSpec s = env_spec(cfg);
  if (cfg.expert_source == "scripted") return envs::make_expert(s);
  if (!fs::exists(l.expert_policy()))
    throw MissingDependency("missing expert policy " + l.expert_policy().string() + " (run train-expert first)");
  auto p = std::make_shared<const rl::GaussianPolicy>(read_policy(l.expert_policy().string()));
  require(p->obs_dim == s.obs_dim, "expert policy was trained on a different observation size");
  // The expert acts on the raw observation; distractor dims are dropped.
  const int d = s.obs_dim;
  return [p, d](const Vec& obs, Rng&, double* logp) {
    if (logp) *logp = 0.0;
    return p->mean_action(obs.head(d));
  };
}

// ---------------------------------------------------------------------------
// Subcommands. Each writes into its own directory under output.dir.

/// MPO on the ground-truth task reward, without distractors.
inline void cmd_train_expert(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  const RunLayout l{cfg.output_dir};
  prepare_output(l.expert_dir(), cfg, force);
  const envs::EnvSpec env = env_spec(cfg);
  const envs::DistractorSpec none = envs::make_pool(0, 1, 0);
  const std::uint64_t seed = derive_seed(cfg.seed, "expert");
  rl::LearnerConfig lc = cfg.learner;
  lc.steps = cfg.expert_steps;
  Rng init = make_rng(seed, "init");
  rl::Agent agent = rl::make_agent(env.obs_dim, env.action_dim, lc, init);
  MetricsWriter metrics((l.expert_dir() / "metrics.csv").string());
  const Stopwatch clock(cfg.wall_clock);
  rl::LoopHooks hooks;
  hooks.label = [](const std::vector<rl::RolloutPtr>& batch) {
    std::vector<Vec> r;
    for (const auto& t : batch) r.push_back(t->rewards);
    return r;
  };
  const std::uint64_t eval_seed = derive_seed(seed, "eval");
  hooks.on_eval = [&](long step, const rl::Agent& a) {
    auto snap = std::make_shared<const rl::GaussianPolicy>(a.policy);
    const rl::EvalResult ev = rl::evaluate_policy(env, none, rl::as_action_fn(snap, false), cfg.eval_episodes, eval_seed);
    MetricsRow row = base_row(cfg, Method::expert);
    row.n = 0;
    row.m = 1;
    row.step = step;
    row.return_mean = ev.mean();
    row.return_std = ev.stddev();
    row.wall_s = clock.seconds();
    metrics.append(row);
    log << "train-expert step " << step << " return " << ev.mean() << "\n";
  };
  hooks.eval_interval = cfg.eval_interval;
  rl::ReplayBuffer replay(lc.replay_capacity);
  Rng rng = make_rng(seed, "learner");
  rl::run_learner(agent, replay, rl::ActorSpec{env, none, derive_seed(seed, "actors")}, lc, hooks, rng);
  write_policy(l.expert_policy().string(), agent.policy, lc.steps);
}

inline void cmd_record_demos(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  const RunLayout l{cfg.output_dir};
  const envs::ActionFn expert = scripted_or_trained_expert(cfg, l);
  prepare_output(l.demos_dir(), cfg, force);
  const envs::DemoDataset ds =
      envs::record_demos(env_spec(cfg), distractor_spec(cfg), expert, cfg.demo_count, derive_seed(cfg.seed, "demos"));
  envs::save_dataset(l.demos().string(), ds);
  double ret = 0.0;
  for (const auto& t : ds.trajectories) ret += t.task_return();
  log << "record-demos: " << ds.trajectories.size() << " trajectories, mean expert return "
      << ret / static_cast<double>(ds.trajectories.size()) << "\n";
}

inline void cmd_train_demo_model(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  const RunLayout l{cfg.output_dir};
  const envs::DemoDataset ds = load_demos(l, cfg);
  prepare_output(l.demo_model_dir(), cfg, force);
  std::ofstream curve(l.demo_model_dir() / "log.csv");
  curve << "step,train_loss,heldout_log_likelihood\n";
  density::EffectModelConfig ec = cfg.effect;
  ec.obs_dim = static_cast<int>(ds.trajectories.front().observations.rows());
  Rng rng = make_rng(cfg.seed, "demo_model");
  const density::EffectModel m =
      density::train_demonstrator(ds.observation_ptrs(), ec, rng, nullptr, [&](const density::EffectTrainLogEntry& e) {
        curve << e.step << ',' << format_value(e.train_loss) << ',' << format_value(e.heldout_log_likelihood) << '\n';
        curve.flush();
        log << "train-demo-model step " << e.step << " held-out ll " << e.heldout_log_likelihood << "\n";
      });
  save_effect_model(l.demo_model().string(), m);
}

/// One deterministic episode scored per step by both effect models.
inline void write_trace(const fs::path& path, const form::FormConfig& fc, const rl::GaussianPolicy& policy,
                        const density::EffectModel& demo, const density::EffectModel& imit, std::uint64_t seed) {
  auto snap = std::make_shared<const rl::GaussianPolicy>(policy);
  const envs::Trajectory t =
      envs::run_episode(fc.env, fc.distractor, envs::Phase::imitation, rl::as_action_fn(snap, false), seed);
  const form::TransitionScores s = form::score_transitions(t.observations, demo, imit);
  std::ofstream os(path);
  os << "t,demo_logp,imit_logp,task_reward\n";
  for (int i = 0; i < t.length(); ++i)
    os << i + 1 << ',' << format_value(s.demo(i)) << ',' << format_value(s.imit(i)) << ','
       << format_value(t.rewards(i)) << '\n';
}

inline Mat read_trace(const fs::path& path) {
  std::istringstream is(read_text(path));
  std::string line;
  std::getline(is, line);
  std::vector<std::array<double, 4>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 4> r{};
    std::istringstream ls(line);
    std::string f;
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(ls, f, ',')) throw StructuralError(path.string() + ": short trace row");
      r[static_cast<std::size_t>(k)] = parse_value(f);
    }
    rows.push_back(r);
  }
  Mat m(static_cast<Eigen::Index>(rows.size()), 4);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < 4; ++k) m(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return m;
}

inline void cmd_imitate(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  if (cfg.method == Method::expert) throw ConfigError("config", 0, "method", "imitate needs an imitation method");
  const RunLayout l{cfg.output_dir};
  const envs::DemoDataset ds = load_demos(l, cfg);
  density::EffectModel demo;
  if (cfg.method == Method::form) demo = load_effect_model(l.demo_model().string());
  const fs::path dir = l.imitate_dir(cfg.method);
  prepare_output(dir, cfg, force);
  MetricsWriter metrics((dir / "metrics.csv").string());
  const Stopwatch clock(cfg.wall_clock);
  const envs::EnvSpec env = env_spec(cfg);
  const std::uint64_t seed = derive_seed(cfg.seed, "imitate");
  auto emit = [&](MetricsRow row) {
    row.wall_s = clock.seconds();
    metrics.append(row);
    log << to_string(cfg.method) << " step " << row.step << " return " << row.return_mean << "\n";
  };
  auto eval_row = [&](long step, const rl::GaussianPolicy& p) {
    auto snap = std::make_shared<const rl::GaussianPolicy>(p);
    const rl::EvalResult ev = rl::evaluate_policy(env, ds.distractor, rl::as_action_fn(snap, false), cfg.eval_episodes,
                                                  derive_seed(seed, "eval"));
    MetricsRow row = base_row(cfg, cfg.method);
    row.step = step;
    row.return_mean = ev.mean();
    row.return_std = ev.stddev();
    return row;
  };

  switch (cfg.method) {
    case Method::form: {
      form::FormConfig fc = form_config(cfg, ds.distractor);
      const form::FormResult r = form::form_train(fc, demo, [&](const form::EvalRow& e) {
        MetricsRow row = base_row(cfg, cfg.method);
        row.step = e.step;
        row.return_mean = e.return_mean;
        row.return_std = e.return_std;
        row.demo_logp = e.demo_logp;
        row.imit_logp = e.imit_logp;
        emit(row);
      });
      write_policy((dir / "policy.ckpt").string(), r.agent.policy, fc.learner.steps);
      save_effect_model((dir / "imitator.ckpt").string(), r.imitator);
      write_trace(dir / "trace.csv", fc, r.agent.policy, demo, r.imitator, derive_seed(seed, "trace"));
      break;
    }
    case Method::bc: {
      const rl::GaussianPolicy p = baselines::bc_train(
          ds, cfg.bc, seed, [&](long step, const rl::GaussianPolicy& pol) { emit(eval_row(step, pol)); },
          cfg.eval_interval);
      write_policy((dir / "policy.ckpt").string(), p, cfg.bc.steps);
      break;
    }
    case Method::bco: {
      baselines::BcoConfig bc = cfg.bco;
      bc.eval_episodes = cfg.eval_episodes;
      const rl::GaussianPolicy p = baselines::bco_train(env, ds.distractor, ds, bc, seed, [&](const baselines::BcoEval& e) {
        MetricsRow row = base_row(cfg, cfg.method);
        row.step = e.iteration;
        row.return_mean = e.return_mean;
        row.return_std = e.return_std;
        emit(row);
      });
      write_policy((dir / "policy.ckpt").string(), p, bc.iterations);
      break;
    }
    case Method::gaifo:
    case Method::gaifo_gp: {
      const baselines::GaifoConfig gc = gaifo_config(cfg);
      const rl::Agent a = baselines::gaifo_train(env, ds.distractor, ds, gc, seed, [&](const baselines::GaifoEval& e) {
        MetricsRow row = base_row(cfg, cfg.method);
        row.step = e.step;
        row.return_mean = e.return_mean;
        row.return_std = e.return_std;
        row.disc_prob = e.disc_prob;
        emit(row);
      });
      write_policy((dir / "policy.ckpt").string(), a.policy, gc.learner.steps);
      break;
    }
    case Method::expert:
      break;
  }
}

/// Deterministic evaluation of a saved policy (or the expert), one row.
inline void cmd_evaluate(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  const RunLayout l{cfg.output_dir};
  const envs::EnvSpec env = env_spec(cfg);
  const envs::DistractorSpec pool = distractor_spec(cfg);
  MetricsRow row = base_row(cfg, cfg.method);
  envs::ActionFn act;
  std::shared_ptr<const rl::GaussianPolicy> policy;
  density::EffectModel demo, imit;
  if (cfg.method == Method::expert) {
    act = scripted_or_trained_expert(cfg, l);
  } else {
    const fs::path ckpt = l.imitate_dir(cfg.method) / "policy.ckpt";
    if (!fs::exists(ckpt)) throw MissingDependency("missing " + ckpt.string() + " (run imitate first)");
    policy = std::make_shared<const rl::GaussianPolicy>(read_policy(ckpt.string(), &row.step));
    act = rl::as_action_fn(policy, false);
    if (cfg.method == Method::form) {
      demo = load_effect_model(l.demo_model().string());
      imit = load_effect_model((l.imitate_dir(cfg.method) / "imitator.ckpt").string());
    }
  }
  const fs::path dir = l.evaluate_dir(cfg.method);
  prepare_output(dir, cfg, force);
  const Stopwatch clock(cfg.wall_clock);
  const rl::EvalResult ev = rl::evaluate_policy(env, pool, act, cfg.eval_episodes, derive_seed(cfg.seed, "evaluate"));
  row.return_mean = ev.mean();
  row.return_std = ev.stddev();
  if (cfg.method == Method::form) {
    double d = 0.0, i = 0.0;
    long n = 0;
    for (const auto& e : ev.episodes) {
      const form::TransitionScores s = form::score_transitions(e.observations, demo, imit);
      d += s.demo.sum();
      i += s.imit.sum();
      n += s.demo.size();
    }
    row.demo_logp = d / static_cast<double>(n);
    row.imit_logp = i / static_cast<double>(n);
  }
  row.wall_s = clock.seconds();
  MetricsWriter((dir / "metrics.csv").string()).append(row);
  log << "evaluate " << to_string(cfg.method) << ": return " << row.return_mean << " +- " << row.return_std << "\n";
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepCell {
  Method method;
  int n;
  long m;
  std::uint64_t seed;

  std::string name() const {
    return to_string(method) + "_N" + std::to_string(n) + "_M" + std::to_string(m) + "_seed" + std::to_string(seed);
  }
};

inline std::vector<SweepCell> sweep_cells(const ExperimentConfig& cfg) {
  std::vector<SweepCell> out;
  for (const auto& method : cfg.sweep_methods)
    for (long n : cfg.sweep_n)
      for (long m : cfg.sweep_m)
        for (long s = 0; s < cfg.sweep_seeds; ++s)
          out.push_back({method_from_string(method), static_cast<int>(n), m, cfg.seed + static_cast<std::uint64_t>(s)});
  return out;
}

inline ExperimentConfig cell_config(const ExperimentConfig& cfg, const SweepCell& c, const fs::path& dir) {
  ExperimentConfig x = cfg;
  x.method = c.method;
  x.distractor_n = c.n;
  x.distractor_m = c.m;
  x.seed = c.seed;
  x.output_dir = dir.string();
  return x;
}

/// Runs one cell start to finish in its own directory: fresh pool and
/// demonstrations, demonstrator model when needed, then imitation.
inline void run_cell(const ExperimentConfig& x, std::ostream& log) {
  validate(x, "sweep cell");
  cmd_record_demos(x, true, log);
  if (x.method == Method::form) cmd_train_demo_model(x, true, log);
  cmd_imitate(x, true, log);
}

/// Rewrites the sweep summary from the cell markers, in grid order.
inline void write_sweep_summary(const ExperimentConfig& cfg, const fs::path& root) {
  const fs::path tmp = root / "metrics.csv.tmp";
  fs::remove(tmp);
  {
    MetricsWriter w(tmp.string());
    for (const SweepCell& c : sweep_cells(cfg)) {
      const fs::path dir = root / "cells" / c.name();
      if (fs::exists(dir / "DONE")) {
        w.append(parse_row(trim(read_text(dir / "DONE"))));
      } else if (fs::exists(dir / "FAILED")) {
        MetricsRow r = base_row(cell_config(cfg, c, dir), c.method);
        r.step = -1;
        w.append(r);
      }
    }
  }
  fs::rename(tmp, root / "metrics.csv");
}

struct SweepReport {
  int ran = 0, skipped = 0, failed = 0;
};

/// Grid over (method, N, M, seed). Completed cells (DONE or FAILED marker)
/// are skipped, so rerunning an interrupted sweep resumes it. A sweep
/// directory created under a different config is refused unless `force`.
inline SweepReport cmd_sweep(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  const RunLayout l{cfg.output_dir};
  const fs::path root = l.sweep_dir();
  ExperimentConfig key = cfg;
  key.output_dir = "";
  const std::string echo = config_echo(key);
  if (fs::exists(root / "sweep.cfg")) {
    if (read_text(root / "sweep.cfg") != echo) {
      if (!force) throw OutputExists(root.string() + " holds a sweep with a different config (use --force)");
      fs::remove_all(root);
    }
  } else if (fs::exists(root) && !fs::is_empty(root)) {
    if (!force) throw OutputExists(root.string() + " already exists (use --force to overwrite)");
    fs::remove_all(root);
  }
  if (cfg.expert_source == "trained" && !fs::exists(l.expert_policy()))
    throw MissingDependency("missing expert policy " + l.expert_policy().string() + " (run train-expert first)");
  fs::create_directories(root / "cells");
  write_text(root / "sweep.cfg", echo);
  write_text(root / "config.txt", config_echo(cfg));

  SweepReport rep;
  for (const SweepCell& c : sweep_cells(cfg)) {
    const fs::path dir = root / "cells" / c.name();
    if (fs::exists(dir / "DONE") || fs::exists(dir / "FAILED")) {
      ++rep.skipped;
      continue;
    }
    fs::remove_all(dir);
    fs::create_directories(dir);
    const ExperimentConfig x = cell_config(cfg, c, dir);
    if (cfg.expert_source == "trained") {
      // Cells share the expert trained at the sweep's output.dir.
      fs::create_directories(RunLayout{dir}.expert_dir());
      fs::copy_file(l.expert_policy(), RunLayout{dir}.expert_policy());
    }
    log << "sweep cell " << c.name() << "\n";
    try {
      run_cell(x, log);
      const auto rows = read_metrics((RunLayout{dir}.imitate_dir(c.method) / "metrics.csv").string());
      if (rows.empty()) throw StructuralError("cell produced no evaluations");
      write_text(dir / "DONE", format_row(rows.back()) + "\n");
      ++rep.ran;
    } catch (const std::exception& e) {
      write_text(dir / "FAILED", std::string(e.what()) + "\n");
      log << "sweep cell " << c.name() << " failed: " << e.what() << "\n";
      ++rep.failed;
    }
    write_sweep_summary(cfg, root);
  }
  write_sweep_summary(cfg, root);
  return rep;
}

// ---------------------------------------------------------------------------
// Verify and plot

/// The verification suites that need no trained artifacts. Writes
/// verify/results.csv; returns false if any check fails.
inline bool cmd_verify(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  const RunLayout l{cfg.output_dir};
  prepare_output(l.verify_dir(), cfg, force);
  std::vector<verify::CheckResult> all = verify::tiny_mdp_suite(50, derive_seed(cfg.seed, "tiny_mdp"));
  all.push_back(verify::lingauss_kl_check(2000, derive_seed(cfg.seed, "lingauss_kl")));
  all.push_back(verify::planted_feature_check(256, 2000, 10.0, derive_seed(cfg.seed, "planted")));
  std::ofstream os(l.verify_dir() / "results.csv");
  os << "check,value,tolerance,passed\n";
  bool ok = true;
  for (const auto& r : all) {
    os << r.name << ',' << format_value(r.value) << ',' << format_value(r.tolerance) << ','
       << (r.passed ? "true" : "false") << '\n';
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " value=" << r.value << " tol=" << r.tolerance << "\n";
    ok = ok && r.passed;
  }
  return ok;
}

/// Pool-size plots for every sweep summary and a trace plot for every run
/// that left a trace.csv, all under output.dir. Returns the files written.
inline std::vector<fs::path> cmd_plot(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  const RunLayout l{cfg.output_dir};
  if (!fs::exists(l.root)) throw MissingDependency("output directory " + l.root.string() + " does not exist");
  std::vector<fs::path> sweeps, traces;
  for (const auto& e : fs::recursive_directory_iterator(l.root)) {
    if (!e.is_regular_file()) continue;
    if (e.path().filename() == "metrics.csv" && e.path().parent_path().filename() == "sweep") sweeps.push_back(e.path());
    if (e.path().filename() == "trace.csv") traces.push_back(e.path());
  }
  std::sort(sweeps.begin(), sweeps.end());
  std::sort(traces.begin(), traces.end());
  std::vector<std::pair<fs::path, std::string>> files;
  std::vector<std::string> warnings;
  for (const auto& s : sweeps)
    for (auto& [name, svg] : pool_size_plots(read_metrics(s.string()), &warnings)) files.push_back({name, svg});
  for (const auto& t : traces) {
    std::string rel = fs::relative(t.parent_path(), l.root).generic_string();
    std::replace(rel.begin(), rel.end(), '/', '_');
    const Mat m = read_trace(t);
    if (m.rows() == 0) {
      warnings.push_back(t.string() + " is empty");
      continue;
    }
    files.push_back({"trace_" + rel + ".svg", trace_plot(rel, m)});
  }
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  std::vector<fs::path> written;
  if (files.empty()) {
    log << "warning: nothing to plot under " << l.root.string() << "\n";
    return written;
  }
  prepare_output(l.plots_dir(), cfg, force);
  for (const auto& [name, svg] : files) {
    write_text(l.plots_dir() / name, svg);
    written.push_back(l.plots_dir() / name);
  }
  return written;
}

}  // namespace formlab::harness
