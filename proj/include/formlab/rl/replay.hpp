#pragma once

#include <deque>
#include <memory>
#include <mutex>

#include "formlab/envs/rollout.hpp"

namespace formlab::rl {

using RolloutPtr = std::shared_ptr<const envs::Trajectory>;

/// FIFO store of complete rollouts. Rewards are not stored here; they are
/// computed when a batch is consumed. Safe for concurrent producers and a
/// single consumer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {
    require(capacity > 0, "replay capacity must be positive");
  }

  void push(RolloutPtr r) {
    require(r != nullptr, "cannot push a null rollout");
    std::lock_guard<std::mutex> lock(mu_);
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(r));
    ++pushed_;
  }

  /// Uniform with replacement.
  std::vector<RolloutPtr> sample(std::size_t n, Rng& rng) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (items_.empty()) throw StructuralError("sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<RolloutPtr> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(items_[pick(rng)]);
    return out;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }
  long total_pushed() const {
    std::lock_guard<std::mutex> lock(mu_);
    return pushed_;
  }
  std::vector<RolloutPtr> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return {items_.begin(), items_.end()};
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<RolloutPtr> items_;
  long pushed_ = 0;
};

}  // namespace formlab::rl
