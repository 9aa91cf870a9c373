#pragma once

#include "formlab/nn/concat_net.hpp"

namespace formlab::rl {

struct CriticConfig {
  int hidden = 256;
};

/// Q(x, a). Observation encoder (Linear -> LayerNorm -> tanh, Linear -> ELU);
/// tanh(a) is concatenated to the encoding, followed by
/// Linear -> LayerNorm -> tanh and a three-layer ELU MLP to a scalar.
struct Critic {
  nn::ConcatNet net;
  int obs_dim = 0;
  int action_dim = 0;

  /// Column j evaluates Q(obs(:, index[j]), actions(:, j)).
  Vec q(const Mat& obs, const std::vector<int>& index, const Mat& actions, nn::ConcatNet::Cache* cache = nullptr) const {
    require(actions.rows() == action_dim, "critic action dimension mismatch");
    const Mat squashed = actions.array().tanh().matrix();
    return net.forward(obs, index, squashed, cache).row(0).transpose();
  }

  Vec q(const Mat& obs, const Mat& actions, nn::ConcatNet::Cache* cache = nullptr) const {
    return q(obs, nn::identity_index(obs.cols()), actions, cache);
  }

  /// Accumulates parameter gradients for an upstream gradient on each Q value.
  void backward(const nn::ConcatNet::Cache& cache, const Vec& d_q, nn::ConcatNet::Grads& grads) const {
    net.backward(cache, Mat(d_q.transpose()), grads);
  }
};

inline Critic make_critic(int obs_dim, int action_dim, const CriticConfig& cfg, Rng& rng) {
  using nn::Activation;
  const int w = cfg.hidden;
  Critic c;
  c.obs_dim = obs_dim;
  c.action_dim = action_dim;
  c.net.encoder = nn::make_mlp(obs_dim, {w, w}, {Activation::tanh, Activation::elu}, {true, false});
  c.net.decoder = nn::make_mlp(w + action_dim, {w, w, w, 1},
                               {Activation::tanh, Activation::elu, Activation::elu, Activation::identity},
                               {true, false, false, false});
  c.net.init(rng);
  return c;
}

/// One Adam step on 0.5 * mean (Q(x, a) - target)^2. Returns the loss
/// before the step.
inline double critic_update(Critic& c, const Mat& obs, const Mat& actions, const Vec& targets, nn::ConcatAdam& opt) {
  require(targets.size() == obs.cols(), "critic_update: one target per state");
  nn::ConcatNet::Cache cache;
  const Vec q = c.q(obs, actions, &cache);
  const Vec err = q - targets;
  const double loss = 0.5 * err.squaredNorm() / static_cast<double>(err.size());
  if (!std::isfinite(loss)) throw NumericalError("critic loss is not finite");
  nn::ConcatNet::Grads g;
  c.backward(cache, err / static_cast<double>(err.size()), g);
  opt.step(c.net, g);
  return loss;
}

}  // namespace formlab::rl
