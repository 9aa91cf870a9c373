#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "formlab/common/error.hpp"
#include "formlab/common/rng.hpp"
#include "formlab/common/types.hpp"

namespace formlab::nn {

enum class Activation { identity, tanh, elu };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::elu: return "elu";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "elu") return Activation::elu;
  throw StructuralError("unknown activation '" + s + "'");
}

/// Variance floor used by every layer norm in the library. Columns whose
/// variance falls below it are scaled by 1/sqrt(floor), so constant inputs
/// normalize to zero.
inline constexpr double kLayerNormVarianceFloor = 1e-5;

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  bool layer_norm = false;

  bool operator==(const LayerSpec&) const = default;
};

/// Normalizes a single vector to zero mean and unit (population) variance.
inline Vec layer_norm(const Vec& x) {
  require(x.size() >= 2, "layer_norm needs at least two entries");
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  return (x.array() - mean) / std::sqrt(std::max(var, kLayerNormVarianceFloor));
}

namespace detail {
inline std::uint64_t next_net_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter++;
}

inline void apply_activation(Activation act, Mat& z) {
  switch (act) {
    case Activation::identity: break;
    case Activation::tanh: z = z.array().tanh(); break;
    case Activation::elu:
      z = z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
      break;
  }
}

// Derivative of the activation expressed through its output.
inline void scale_by_activation_grad(Activation act, const Mat& out, Mat& d) {
  switch (act) {
    case Activation::identity: break;
    case Activation::tanh: d.array() *= 1.0 - out.array().square(); break;
    case Activation::elu:
      d.array() *= out.unaryExpr([](double v) { return v > 0.0 ? 1.0 : v + 1.0; }).array();
      break;
  }
}
}  // namespace detail

/// Fully connected network stored as one flat parameter vector.
///
/// Per-layer layout inside the flat vector: weight (out x in, column-major),
/// bias (out), then gain (out) and shift (out) when the layer carries a
/// layer norm. Layer norm sits between the affine map and the activation.
/// Batches are matrices with one sample per column.
class DenseNet {
 public:
  struct LayerCache {
    Mat input;    // in x n
    Mat normed;   // out x n, normalized pre-activation (layer-norm layers only)
    Vec inv_std;  // n
    std::vector<bool> floored;
    Mat output;   // out x n, post-activation
  };

  struct Cache {
    std::uint64_t owner = 0;
    std::uint64_t generation = 0;
    std::vector<LayerCache> layers;
  };

  DenseNet() = default;

  explicit DenseNet(std::vector<LayerSpec> specs) : specs_(std::move(specs)), id_(detail::next_net_id()) {
    require(!specs_.empty(), "DenseNet needs at least one layer");
    std::size_t total = 0;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      const auto& s = specs_[l];
      require(s.in > 0 && s.out > 0, "DenseNet layer dims must be positive");
      if (l > 0) {
        require(specs_[l - 1].out == s.in,
                "DenseNet layer " + std::to_string(l) + " input " + std::to_string(s.in) +
                    " does not chain with previous output " + std::to_string(specs_[l - 1].out));
      }
      offsets_.push_back(total);
      total += static_cast<std::size_t>(s.out) * s.in + s.out + (s.layer_norm ? 2 * s.out : 0);
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(total));
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      if (specs_[l].layer_norm) ln_gain_mut(l).setOnes();
    }
  }

  DenseNet(const DenseNet& o) : specs_(o.specs_), offsets_(o.offsets_), params_(o.params_), id_(detail::next_net_id()) {}
  DenseNet& operator=(const DenseNet& o) {
    if (this != &o) {
      specs_ = o.specs_;
      offsets_ = o.offsets_;
      params_ = o.params_;
      id_ = detail::next_net_id();
      generation_ = 0;
    }
    return *this;
  }
  DenseNet(DenseNet&&) noexcept = default;
  DenseNet& operator=(DenseNet&&) noexcept = default;

  /// Glorot-uniform weights, zero biases, unit layer-norm gains.
  void init(Rng& rng) {
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      const double limit = std::sqrt(6.0 / (specs_[l].in + specs_[l].out));
      std::uniform_real_distribution<double> u(-limit, limit);
      auto w = weight_mut(l);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
      bias_mut(l).setZero();
      if (specs_[l].layer_norm) {
        ln_gain_mut(l).setOnes();
        ln_shift_mut(l).setZero();
      }
    }
    ++generation_;
  }

  int input_dim() const { return specs_.front().in; }
  int output_dim() const { return specs_.back().out; }
  std::size_t num_layers() const { return specs_.size(); }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  Eigen::Index num_params() const { return params_.size(); }
  /// Start of layer l (its weight block) in the flat parameter vector.
  std::size_t param_offset(std::size_t l) const { return offsets_[l]; }

  const Vec& params() const { return params_; }
  /// Mutable access invalidates outstanding caches.
  Vec& mutable_params() {
    ++generation_;
    return params_;
  }
  void set_params(const Vec& p) {
    require(p.size() == params_.size(), "set_params size mismatch");
    params_ = p;
    ++generation_;
  }

  Eigen::Map<const Mat> weight(std::size_t l) const {
    return {params_.data() + offsets_[l], specs_[l].out, specs_[l].in};
  }
  Eigen::Map<const Vec> bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + specs_[l].out * specs_[l].in, specs_[l].out};
  }
  Eigen::Map<const Vec> ln_gain(std::size_t l) const {
    return {params_.data() + offsets_[l] + specs_[l].out * (specs_[l].in + 1), specs_[l].out};
  }
  Eigen::Map<const Vec> ln_shift(std::size_t l) const {
    return {params_.data() + offsets_[l] + specs_[l].out * (specs_[l].in + 2), specs_[l].out};
  }
  Eigen::Map<Mat> weight_mut(std::size_t l) {
    ++generation_;
    return {params_.data() + offsets_[l], specs_[l].out, specs_[l].in};
  }
  Eigen::Map<Vec> bias_mut(std::size_t l) {
    ++generation_;
    return {params_.data() + offsets_[l] + specs_[l].out * specs_[l].in, specs_[l].out};
  }
  Eigen::Map<Vec> ln_gain_mut(std::size_t l) {
    ++generation_;
    return {params_.data() + offsets_[l] + specs_[l].out * (specs_[l].in + 1), specs_[l].out};
  }
  Eigen::Map<Vec> ln_shift_mut(std::size_t l) {
    ++generation_;
    return {params_.data() + offsets_[l] + specs_[l].out * (specs_[l].in + 2), specs_[l].out};
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    require(!specs_.empty(), "forward on an empty DenseNet");
    require(x.rows() == input_dim(), "DenseNet input has " + std::to_string(x.rows()) +
                                         " rows, expected " + std::to_string(input_dim()));
    if (cache) {
      cache->owner = id_;
      cache->generation = generation_;
      cache->layers.assign(specs_.size(), {});
    }
    Mat h = x;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      const auto& s = specs_[l];
      Mat z = weight(l) * h;
      z.colwise() += bias(l);
      if (cache) cache->layers[l].input = std::move(h);
      if (s.layer_norm) {
        const Eigen::Index n = z.cols();
        Vec inv_std(n);
        std::vector<bool> floored(static_cast<std::size_t>(n));
        for (Eigen::Index c = 0; c < n; ++c) {
          auto col = z.col(c);
          const double mean = col.mean();
          col.array() -= mean;
          const double var = col.squaredNorm() / static_cast<double>(s.out);
          floored[static_cast<std::size_t>(c)] = var < kLayerNormVarianceFloor;
          inv_std(c) = 1.0 / std::sqrt(std::max(var, kLayerNormVarianceFloor));
          col *= inv_std(c);
        }
        if (cache) {
          cache->layers[l].normed = z;
          cache->layers[l].inv_std = inv_std;
          cache->layers[l].floored = std::move(floored);
        }
        z = (z.array().colwise() * ln_gain(l).array()).matrix();
        z.colwise() += ln_shift(l);
      }
      detail::apply_activation(s.act, z);
      if (cache) cache->layers[l].output = z;
      h = std::move(z);
    }
    return h;
  }

  Vec forward(const Vec& x) const {
    Mat m = x;
    return forward(m, nullptr).col(0);
  }

  /// Reverse pass. Accumulates parameter gradients into `grad` (resized and
  /// zeroed when empty) and returns the gradient with respect to the input.
  Mat backward(const Cache& cache, const Mat& d_out, Vec& grad) const {
    if (cache.owner != id_ || cache.generation != generation_ || cache.layers.size() != specs_.size())
      throw StructuralError("DenseNet::backward called with a stale or foreign cache");
    if (grad.size() == 0) grad = Vec::Zero(params_.size());
    require(grad.size() == params_.size(), "gradient buffer size mismatch");
    require(d_out.rows() == output_dim() && d_out.cols() == cache.layers.back().output.cols(),
            "output gradient shape mismatch");
    Mat d = d_out;
    for (std::size_t li = specs_.size(); li-- > 0;) {
      const auto& s = specs_[li];
      const auto& lc = cache.layers[li];
      detail::scale_by_activation_grad(s.act, lc.output, d);
      const std::size_t off = offsets_[li];
      if (s.layer_norm) {
        Eigen::Map<Vec> g_gain(grad.data() + off + s.out * (s.in + 1), s.out);
        Eigen::Map<Vec> g_shift(grad.data() + off + s.out * (s.in + 2), s.out);
        g_gain += (d.array() * lc.normed.array()).rowwise().sum().matrix();
        g_shift += d.rowwise().sum();
        Mat dn = (d.array().colwise() * ln_gain(li).array()).matrix();
        const double m = static_cast<double>(s.out);
        for (Eigen::Index c = 0; c < d.cols(); ++c) {
          auto dc = dn.col(c);
          const double mean_d = dc.mean();
          if (lc.floored[static_cast<std::size_t>(c)]) {
            d.col(c) = (dc.array() - mean_d) * lc.inv_std(c);
          } else {
            const double proj = dc.dot(lc.normed.col(c)) / m;
            d.col(c) = (dc.array() - mean_d - lc.normed.col(c).array() * proj) * lc.inv_std(c);
          }
        }
      }
      Eigen::Map<Mat> g_w(grad.data() + off, s.out, s.in);
      Eigen::Map<Vec> g_b(grad.data() + off + s.out * s.in, s.out);
      g_w.noalias() += d * lc.input.transpose();
      g_b += d.rowwise().sum();
      Mat d_in = weight(li).transpose() * d;
      d = std::move(d_in);
    }
    return d;
  }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::size_t> offsets_;
  Vec params_;
  std::uint64_t id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Convenience builder: widths[i] is the output of layer i.
inline DenseNet make_mlp(int in, const std::vector<int>& widths, const std::vector<Activation>& acts,
                         const std::vector<bool>& layer_norm = {}) {
  require(widths.size() == acts.size(), "make_mlp: one activation per layer");
  std::vector<LayerSpec> specs;
  int prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    specs.push_back({prev, widths[i], acts[i], i < layer_norm.size() && layer_norm[i]});
    prev = widths[i];
  }
  return DenseNet(std::move(specs));
}

}  // namespace formlab::nn
