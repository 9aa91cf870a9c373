#pragma once

#include <fstream>
#include <sstream>

#include "formlab/envs/rollout.hpp"
#include "formlab/nn/binary_io.hpp"
#include "formlab/nn/checkpoint.hpp"

namespace formlab::envs {

/// Expert demonstrations. Actions and task rewards are stored but consumed
/// only by behavioral cloning and by evaluation respectively.
struct DemoDataset {
  EnvSpec spec;
  DistractorSpec distractor;
  std::vector<Trajectory> trajectories;

  std::vector<const Mat*> observation_ptrs() const {
    std::vector<const Mat*> out;
    for (const auto& t : trajectories) out.push_back(&t.observations);
    return out;
  }
};

// File layout:
//   FORMDEMOS v1
//   env name=<name> obs_dim=<D> action_dim=<A> T=<T> noise_std=<s>
//   distractor N=<N> M=<M> seed=<seed>
//   pool <hex>,<hex>,...
//   count trajectories=<K>
// then per trajectory: int64 seed, int64 pattern id, and little-endian
// float32 blocks for observations ((D+N) x (T+1), column-major), actions
// (A x T) and task rewards (T).

inline void write_dataset(std::ostream& os, const DemoDataset& ds) {
  const EnvSpec& s = ds.spec;
  const DistractorSpec& d = ds.distractor;
  std::ostringstream noise;
  noise.precision(17);
  noise << s.noise_std;
  os << "FORMDEMOS v1\n";
  os << "env name=" << s.name() << " obs_dim=" << s.obs_dim << " action_dim=" << s.action_dim
     << " T=" << s.episode_length << " noise_std=" << noise.str() << "\n";
  os << "distractor N=" << d.n << " M=" << d.m << " seed=" << d.seed << "\n";
  os << "pool " << nn::detail::join(d.pool, [](std::uint64_t b) {
    std::ostringstream h;
    h << std::hex << b;
    return h.str();
  }) << "\n";
  os << "count trajectories=" << ds.trajectories.size() << "\n";
  const Eigen::Index rows = s.obs_dim + d.n;
  for (const auto& t : ds.trajectories) {
    require(t.observations.rows() == rows && t.observations.cols() == s.episode_length + 1,
            "dataset trajectory observation shape mismatch");
    require(t.actions.rows() == s.action_dim && t.actions.cols() == s.episode_length, "dataset action shape mismatch");
    require(t.rewards.size() == s.episode_length, "dataset reward length mismatch");
    io::write_u64_le(os, t.seed);
    io::write_u64_le(os, static_cast<std::uint64_t>(static_cast<std::int64_t>(t.pattern_id)));
    for (Eigen::Index i = 0; i < t.observations.size(); ++i) io::write_f32(os, static_cast<float>(t.observations(i)));
    for (Eigen::Index i = 0; i < t.actions.size(); ++i) io::write_f32(os, static_cast<float>(t.actions(i)));
    for (Eigen::Index i = 0; i < t.rewards.size(); ++i) io::write_f32(os, static_cast<float>(t.rewards(i)));
  }
}

inline DemoDataset read_dataset(std::istream& is) {
  if (io::read_line(is) != "FORMDEMOS v1") throw StructuralError("not a FORMDEMOS v1 dataset");
  auto section = [&](const std::string& name) {
    const std::string line = io::read_line(is);
    if (line.rfind(name + " ", 0) != 0 && line != name) throw StructuralError("dataset: expected '" + name + "' line");
    return line.size() > name.size() ? line.substr(name.size() + 1) : std::string();
  };
  DemoDataset ds;
  auto env = nn::detail::parse_record(section("env"));
  ds.spec = make_spec(env.at("name"));
  ds.spec.episode_length = std::stoi(env.at("T"));
  ds.spec.noise_std = std::stod(env.at("noise_std"));
  require(std::stoi(env.at("obs_dim")) == ds.spec.obs_dim && std::stoi(env.at("action_dim")) == ds.spec.action_dim,
          "dataset: env dimensions disagree with the named environment");
  auto dis = nn::detail::parse_record(section("distractor"));
  ds.distractor.n = std::stoi(dis.at("N"));
  ds.distractor.m = std::stol(dis.at("M"));
  ds.distractor.seed = std::stoull(dis.at("seed"));
  for (const auto& h : nn::detail::split(section("pool"), ',')) ds.distractor.pool.push_back(std::stoull(h, nullptr, 16));
  require(static_cast<long>(ds.distractor.pool.size()) == ds.distractor.m, "dataset: pool size disagrees with M");
  auto cnt = nn::detail::parse_record(section("count"));
  const long k = std::stol(cnt.at("trajectories"));
  const int T = ds.spec.episode_length;
  const int rows = ds.spec.obs_dim + ds.distractor.n;
  for (long i = 0; i < k; ++i) {
    Trajectory t;
    t.env = ds.spec.name();
    t.seed = io::read_u64_le(is);
    t.pattern_id = static_cast<long>(static_cast<std::int64_t>(io::read_u64_le(is)));
    if (t.pattern_id >= 0 && t.pattern_id < static_cast<long>(ds.distractor.pool.size()))
      t.pattern_bits = ds.distractor.pool[static_cast<std::size_t>(t.pattern_id)];
    t.observations.resize(rows, T + 1);
    t.actions.resize(ds.spec.action_dim, T);
    t.rewards.resize(T);
    for (Eigen::Index j = 0; j < t.observations.size(); ++j) t.observations(j) = io::read_f32(is);
    for (Eigen::Index j = 0; j < t.actions.size(); ++j) t.actions(j) = io::read_f32(is);
    for (Eigen::Index j = 0; j < t.rewards.size(); ++j) t.rewards(j) = io::read_f32(is);
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

inline void save_dataset(const std::string& path, const DemoDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StructuralError("cannot open '" + path + "' for writing");
  write_dataset(os, ds);
}

inline DemoDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingDependency("demo dataset '" + path + "' not found");
  return read_dataset(is);
}

/// Rolls out the expert for `count` episodes with per-episode seeds derived
/// from `seed`; patterns come from the demo-phase pool.
inline DemoDataset record_demos(const EnvSpec& spec, const DistractorSpec& distractor, const ActionFn& expert, long count,
                                std::uint64_t seed) {
  DemoDataset ds{spec, distractor, {}};
  for (long i = 0; i < count; ++i)
    ds.trajectories.push_back(
        run_episode(spec, distractor, Phase::demo, expert, derive_seed(seed, "demo/" + std::to_string(i))));
  return ds;
}

}  // namespace formlab::envs
