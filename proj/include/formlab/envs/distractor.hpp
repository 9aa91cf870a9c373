#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "formlab/common/error.hpp"
#include "formlab/common/rng.hpp"
#include "formlab/common/types.hpp"

namespace formlab::envs {

enum class Phase { demo, imitation };

/// Binary distractor patterns appended to observations. Patterns are stored
/// as bit masks (bit i = dimension i), so N is limited to 63.
struct DistractorSpec {
  int n = 0;
  long m = 1;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> pool;

  bool active() const { return n > 0; }
};

inline constexpr int kMaxDistractorDims = 63;

/// Draws M distinct patterns from {0,1}^N. Dense requests (more than half of
/// the pattern space) shuffle the full space instead of rejection sampling.
inline DistractorSpec make_pool(int n, long m, std::uint64_t seed) {
  require(n >= 0 && n <= kMaxDistractorDims, "distractor N must be in [0, 63]");
  require(m >= 1, "distractor pool size M must be >= 1");
  const std::uint64_t space = std::uint64_t{1} << n;
  if (static_cast<std::uint64_t>(m) > space)
    throw StructuralError("distractor pool size M=" + std::to_string(m) + " exceeds 2^N=" + std::to_string(space));
  DistractorSpec d{n, m, seed, {}};
  Rng rng = make_rng(seed, "distractor_pool");
  if (n == 0) {
    d.pool.push_back(0);
    return d;
  }
  if (static_cast<std::uint64_t>(m) * 2 > space) {
    std::vector<std::uint64_t> all(space);
    std::iota(all.begin(), all.end(), std::uint64_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    d.pool.assign(all.begin(), all.begin() + m);
    return d;
  }
  std::uniform_int_distribution<std::uint64_t> pick(0, space - 1);
  std::unordered_set<std::uint64_t> seen;
  while (static_cast<long>(d.pool.size()) < m) {
    const std::uint64_t b = pick(rng);
    if (seen.insert(b).second) d.pool.push_back(b);
  }
  return d;
}

inline Vec pattern_vector(std::uint64_t bits, int n) {
  Vec b(n);
  for (int i = 0; i < n; ++i) b(i) = static_cast<double>((bits >> i) & 1u);
  return b;
}

struct Pattern {
  std::uint64_t bits = 0;
  long pool_index = -1;  // -1 when drawn freely in the imitation phase
};

/// Demo phase: uniform over the pool. Imitation phase: uniform over {0,1}^N.
inline Pattern sample_pattern(const DistractorSpec& d, Phase phase, Rng& rng) {
  if (d.n == 0) return {0, phase == Phase::demo ? 0 : -1};
  if (phase == Phase::demo) {
    require(!d.pool.empty(), "distractor pool is empty");
    std::uniform_int_distribution<std::size_t> pick(0, d.pool.size() - 1);
    const std::size_t i = pick(rng);
    return {d.pool[i], static_cast<long>(i)};
  }
  std::uniform_int_distribution<std::uint64_t> pick(0, (std::uint64_t{1} << d.n) - 1);
  return {pick(rng), -1};
}

/// [x; b], environment dimensions first.
inline Vec augment(const Vec& x, const Vec& b) {
  Vec out(x.size() + b.size());
  out << x, b;
  return out;
}

}  // namespace formlab::envs
