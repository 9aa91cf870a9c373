#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "formlab/baselines/bco.hpp"
#include "formlab/baselines/gaifo.hpp"
#include "formlab/form/trainer.hpp"

namespace formlab::harness {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

/// Parses `key = value` lines. `[section]` prefixes following keys with
/// "section."; `#` starts a comment outside double quotes.
inline std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') quoted = !quoted;
      if (raw[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    const std::string s = trim(raw.substr(0, cut));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ConfigError(source, line, "", "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, "", "expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line, "", "empty key");
    for (char c : key)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
        throw ConfigError(source, line, key, "keys may contain only letters, digits, '_' and '.'");
    if (!section.empty()) key = section + "." + key;
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!seen.insert(key).second) throw ConfigError(source, line, key, "duplicate key");
    out.push_back({key, value, line});
  }
  return out;
}

enum class Method { expert, form, bc, bco, gaifo, gaifo_gp };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::expert: return "expert";
    case Method::form: return "form";
    case Method::bc: return "bc";
    case Method::bco: return "bco";
    case Method::gaifo: return "gaifo";
    case Method::gaifo_gp: return "gaifo_gp";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::expert, Method::form, Method::bc, Method::bco, Method::gaifo, Method::gaifo_gp})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown method '" + s + "' (expert, form, bc, bco, gaifo, gaifo_gp)");
}

/// Everything a subcommand needs. Field names below are the config keys.
struct ExperimentConfig {
  Method method = Method::form;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  std::string env_name = "point_mass";
  int episode_length = 100;
  double noise_std = 0.01;

  int distractor_n = 0;
  long distractor_m = 1;

  long demo_count = 200;
  std::string expert_source = "scripted";  // scripted | trained
  long expert_steps = 20000;

  int eval_episodes = 10;
  long eval_interval = 5000;
  bool wall_clock = false;

  density::EffectModelConfig effect;
  rl::LearnerConfig learner;
  long imitator_warmup = 500;
  bool imitator_before_policy = false;
  bool zero_reward_control = false;

  baselines::BcConfig bc;
  baselines::BcoConfig bco;
  baselines::GaifoConfig gaifo;  // its learner block is taken from `learner`

  std::vector<std::string> sweep_methods{"form", "gaifo_gp"};
  std::vector<long> sweep_n{8, 16};
  std::vector<long> sweep_m{1, 10, 100, 1000};
  long sweep_seeds = 3;

  ExperimentConfig() {
    learner.steps = 200000;
    gaifo.beta_gp = 10.0;  // used by gaifo_gp; plain gaifo runs without the penalty
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& v) {
  T x{};
  const char* b = v.data();
  const char* e = b + v.size();
  auto r = std::from_chars(b, e, x);
  if (r.ec != std::errc() || r.ptr != e || v.empty())
    throw std::invalid_argument(std::string(std::is_floating_point_v<T> ? "expected a real number" : "expected an integer") +
                                ", got '" + v + "'");
  return x;
}

inline std::string format_real(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (cur.empty()) throw std::invalid_argument("empty list element in '" + v + "'");
    out.push_back(cur);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace detail

struct ConfigField {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

/// The key registry, bound to one config object. Order is the echo order.
inline std::vector<ConfigField> config_fields(ExperimentConfig& c) {
  using namespace detail;
  std::vector<ConfigField> f;
  auto integer = [&f](const std::string& k, auto& ref) {
    using T = std::remove_reference_t<decltype(ref)>;
    f.push_back({k, [&ref] { return std::to_string(ref); }, [&ref](const std::string& v) { ref = parse_number<T>(v); }});
  };
  auto real = [&f](const std::string& k, double& ref) {
    f.push_back({k, [&ref] { return format_real(ref); }, [&ref](const std::string& v) { ref = parse_number<double>(v); }});
  };
  auto boolean = [&f](const std::string& k, bool& ref) {
    f.push_back({k, [&ref] { return std::string(ref ? "true" : "false"); },
                 [&ref](const std::string& v) { ref = parse_bool(v); }});
  };
  auto text = [&f](const std::string& k, std::string& ref) {
    f.push_back({k, [&ref] { return ref; }, [&ref](const std::string& v) { ref = v; }});
  };

  f.push_back({"method", [&c] { return to_string(c.method); },
               [&c](const std::string& v) { c.method = method_from_string(v); }});
  integer("seed", c.seed);
  text("output.dir", c.output_dir);

  f.push_back({"env.name", [&c] { return c.env_name; },
               [&c](const std::string& v) {
                 envs::env_kind_from_string(v);
                 c.env_name = v;
               }});
  integer("env.T", c.episode_length);
  real("env.noise_std", c.noise_std);

  integer("distractor.N", c.distractor_n);
  integer("distractor.M", c.distractor_m);

  integer("demos.count", c.demo_count);
  f.push_back({"expert.source", [&c] { return c.expert_source; },
               [&c](const std::string& v) {
                 if (v != "scripted" && v != "trained") throw std::invalid_argument("expected scripted or trained");
                 c.expert_source = v;
               }});
  integer("expert.steps", c.expert_steps);

  integer("eval.episodes", c.eval_episodes);
  integer("eval.interval", c.eval_interval);
  boolean("metrics.wall_clock", c.wall_clock);

  integer("effect.hidden", c.effect.hidden);
  integer("effect.max_offset", c.effect.max_offset);
  real("effect.ar_weight", c.effect.ar_weight);
  real("effect.l2_weight", c.effect.l2_weight);
  real("effect.learning_rate", c.effect.learning_rate);
  integer("effect.batch_size", c.effect.batch_size);
  integer("effect.steps", c.effect.steps);
  integer("effect.eval_interval", c.effect.eval_interval);
  real("effect.holdout_fraction", c.effect.holdout_fraction);

  integer("form.imitator_warmup", c.imitator_warmup);
  boolean("form.imitator_before_policy", c.imitator_before_policy);
  boolean("form.zero_reward_control", c.zero_reward_control);

  integer("policy.hidden", c.learner.policy.hidden);
  integer("policy.elu_layers", c.learner.policy.elu_layers);
  boolean("policy.layer_norm", c.learner.policy.layer_norm);
  integer("critic.hidden", c.learner.critic.hidden);
  real("critic.learning_rate", c.learner.critic_lr);

  integer("mpo.action_samples", c.learner.mpo.action_samples);
  real("mpo.eps_temp", c.learner.mpo.eps_temp);
  real("mpo.eps_mean", c.learner.mpo.eps_mean);
  real("mpo.eps_scale", c.learner.mpo.eps_scale);
  real("mpo.dual_lr", c.learner.mpo.dual_lr);
  real("mpo.policy_lr", c.learner.mpo.policy_lr);
  real("mpo.init_temperature", c.learner.mpo.init_temperature);

  real("learner.gamma", c.learner.gamma);
  real("learner.retrace_lambda", c.learner.retrace_lambda);
  integer("learner.batch_rollouts", c.learner.batch_rollouts);
  integer("learner.mpo_states", c.learner.mpo_states);
  integer("learner.value_samples", c.learner.value_samples);
  integer("learner.target_period", c.learner.target_period);
  integer("learner.steps", c.learner.steps);
  integer("learner.initial_episodes", c.learner.initial_episodes);
  real("learner.episodes_per_step", c.learner.episodes_per_step);
  integer("learner.actors", c.learner.actors);
  integer("learner.replay_capacity", c.learner.replay_capacity);

  integer("bc.hidden", c.bc.hidden);
  real("bc.learning_rate", c.bc.learning_rate);
  integer("bc.batch_size", c.bc.batch_size);
  integer("bc.steps", c.bc.steps);

  integer("bco.hidden", c.bco.hidden);
  real("bco.learning_rate", c.bco.learning_rate);
  integer("bco.batch_size", c.bco.batch_size);
  integer("bco.iterations", c.bco.iterations);
  integer("bco.episodes_per_iteration", c.bco.episodes_per_iteration);
  integer("bco.inverse_steps", c.bco.inverse_steps);
  integer("bco.bc_steps", c.bco.bc_steps);

  integer("gaifo.hidden", c.gaifo.hidden);
  real("gaifo.learning_rate", c.gaifo.learning_rate);
  real("gaifo.beta_gp", c.gaifo.beta_gp);
  boolean("gaifo.two_frame", c.gaifo.two_frame);
  boolean("gaifo.standardize", c.gaifo.standardize);
  integer("gaifo.batch_size", c.gaifo.batch_size);

  f.push_back({"sweep.methods", [&c] { return nn::detail::join(c.sweep_methods, [](const std::string& s) { return s; }); },
               [&c](const std::string& v) {
                 auto items = split_list(v);
                 for (const auto& m : items) method_from_string(m);
                 c.sweep_methods = items;
               }});
  auto long_list = [&f](const std::string& k, std::vector<long>& ref) {
    f.push_back({k, [&ref] { return nn::detail::join(ref, [](long x) { return std::to_string(x); }); },
                 [&ref](const std::string& v) {
                   std::vector<long> out;
                   for (const auto& s : split_list(v)) out.push_back(parse_number<long>(s));
                   ref = out;
                 }});
  };
  long_list("sweep.N", c.sweep_n);
  long_list("sweep.M", c.sweep_m);
  integer("sweep.seeds", c.sweep_seeds);
  return f;
}

/// Semantic checks. Throws ConfigError naming the offending key.
inline void validate(const ExperimentConfig& c, const std::string& source = "config") {
  auto fail = [&](const std::string& key, const std::string& what) { throw ConfigError(source, 0, key, what); };
  if (c.episode_length < 2) fail("env.T", "must be >= 2");
  if (c.noise_std < 0) fail("env.noise_std", "must be >= 0");
  if (c.distractor_n < 0 || c.distractor_n > envs::kMaxDistractorDims) fail("distractor.N", "must be in [0, 63]");
  if (c.distractor_m < 1) fail("distractor.M", "must be >= 1");
  if (static_cast<std::uint64_t>(c.distractor_m) > (std::uint64_t{1} << c.distractor_n))
    fail("distractor.M", "pool size " + std::to_string(c.distractor_m) + " exceeds 2^N = " +
                             std::to_string(std::uint64_t{1} << c.distractor_n));
  if (c.demo_count < 1) fail("demos.count", "must be >= 1");
  if (c.eval_episodes < 1) fail("eval.episodes", "must be >= 1");
  if (c.eval_interval < 1) fail("eval.interval", "must be >= 1");
  if (c.learner.actors < 1) fail("learner.actors", "must be >= 1");
  if (c.learner.steps < 0) fail("learner.steps", "must be >= 0");
  if (c.sweep_seeds < 1) fail("sweep.seeds", "must be >= 1");
  for (long n : c.sweep_n)
    if (n < 0 || n > envs::kMaxDistractorDims) fail("sweep.N", "entries must be in [0, 63]");
  for (long m : c.sweep_m)
    if (m < 1) fail("sweep.M", "entries must be >= 1");
  if (c.effect.hidden < 1 || c.effect.batch_size < 1) fail("effect.hidden", "effect model sizes must be >= 1");
  if (c.effect.max_offset < 1) fail("effect.max_offset", "must be >= 1");
  try {
    c.learner.validate();
  } catch (const StructuralError& e) {
    fail("learner", e.what());
  }
}

/// Applies entries in order; unknown keys and unparsable values are errors.
inline void apply_entries(ExperimentConfig& c, const std::vector<ConfigEntry>& entries, const std::string& source) {
  auto fields = config_fields(c);
  for (const auto& e : entries) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const ConfigField& f) { return f.key == e.key; });
    if (it == fields.end()) throw ConfigError(source, e.line, e.key, "unknown key");
    try {
      it->set(e.value);
    } catch (const std::exception& ex) {
      throw ConfigError(source, e.line, e.key, ex.what());
    }
  }
}

/// `key = value` overrides from the command line.
inline std::vector<ConfigEntry> parse_overrides(const std::vector<std::string>& overrides) {
  std::vector<ConfigEntry> out;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set", 0, o, "expected key=value");
    out.push_back({trim(o.substr(0, eq)), trim(o.substr(eq + 1)), 0});
  }
  return out;
}

inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config",
                                     const std::vector<std::string>& overrides = {}) {
  ExperimentConfig c;
  apply_entries(c, parse_config_text(text, source), source);
  apply_entries(c, parse_overrides(overrides), "--set");
  validate(c, source);
  return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "", "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, overrides);
}

/// Canonical text: every key, one per line, in registry order. Parsing the
/// echo reproduces the config exactly.
inline std::string config_echo(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  std::string out = "# formlab config\n";
  for (const auto& f : config_fields(copy)) {
    std::string v = f.get();
    if (v.find('#') != std::string::npos || v.empty() || v != trim(v)) v = "\"" + v + "\"";
    out += f.key + " = " + v + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Builders for the library-level configs.

inline envs::EnvSpec env_spec(const ExperimentConfig& c) {
  envs::EnvSpec s = envs::make_spec(c.env_name);
  s.episode_length = c.episode_length;
  s.noise_std = c.noise_std;
  return s;
}

/// Demonstration-phase pool. Its seed is derived from the master seed and
/// the (N, M) cell so that every cell draws a fresh pool.
inline envs::DistractorSpec distractor_spec(const ExperimentConfig& c) {
  const std::uint64_t seed =
      derive_seed(c.seed, "pool/N" + std::to_string(c.distractor_n) + "/M" + std::to_string(c.distractor_m));
  return envs::make_pool(c.distractor_n, c.distractor_m, seed);
}

inline form::FormConfig form_config(const ExperimentConfig& c, const envs::DistractorSpec& d) {
  form::FormConfig f;
  f.env = env_spec(c);
  f.distractor = d;
  f.effect = c.effect;
  f.learner = c.learner;
  f.imitator_warmup = c.imitator_warmup;
  f.imitator_before_policy = c.imitator_before_policy;
  f.zero_reward_control = c.zero_reward_control;
  f.eval_episodes = c.eval_episodes;
  f.eval_interval = c.eval_interval;
  f.seed = derive_seed(c.seed, "imitate");
  return f;
}

inline baselines::GaifoConfig gaifo_config(const ExperimentConfig& c) {
  baselines::GaifoConfig g = c.gaifo;
  g.learner = c.learner;
  g.eval_episodes = c.eval_episodes;
  g.eval_interval = c.eval_interval;
  if (c.method == Method::gaifo) g.beta_gp = 0.0;
  return g;
}

}  // namespace formlab::harness
