#pragma once

#include <vector>

#include "formlab/nn/adam.hpp"
#include "formlab/nn/dense_net.hpp"

namespace formlab::nn {

/// Encoder followed by a decoder whose input is the encoding concatenated
/// with per-sample side information (a one-hot offset, an action).
///
/// One encoder pass serves many decoder columns: column j of the decoder
/// input is [encoding(:, index[j]); extra(:, j)]. This keeps "20 actions per
/// state" style queries at one encoder evaluation per state.
struct ConcatNet {
  DenseNet encoder;
  DenseNet decoder;

  struct Cache {
    DenseNet::Cache enc;
    DenseNet::Cache dec;
    std::vector<int> index;
    Eigen::Index unique = 0;
  };

  struct Grads {
    Vec encoder;
    Vec decoder;
  };

  int extra_dim() const { return decoder.input_dim() - encoder.output_dim(); }

  void init(Rng& rng) {
    encoder.init(rng);
    decoder.init(rng);
  }

  Mat forward(const Mat& x, const std::vector<int>& index, const Mat& extra, Cache* cache = nullptr) const {
    require(extra.rows() == extra_dim(), "ConcatNet extra input has wrong row count");
    require(static_cast<Eigen::Index>(index.size()) == extra.cols(), "ConcatNet index/extra column mismatch");
    Mat enc = encoder.forward(x, cache ? &cache->enc : nullptr);
    const Eigen::Index w = enc.rows();
    Mat z(decoder.input_dim(), static_cast<Eigen::Index>(index.size()));
    for (std::size_t j = 0; j < index.size(); ++j) {
      require(index[j] >= 0 && index[j] < enc.cols(), "ConcatNet index out of range");
      z.col(static_cast<Eigen::Index>(j)).head(w) = enc.col(index[j]);
    }
    if (extra.rows() > 0) z.bottomRows(extra.rows()) = extra;
    if (cache) {
      cache->index = index;
      cache->unique = x.cols();
    }
    return decoder.forward(z, cache ? &cache->dec : nullptr);
  }

  /// Accumulates into `grads` and returns the gradient with respect to the
  /// decoder's extra input. When `d_input` is non-null the encoder input
  /// gradient is written there.
  Mat backward(const Cache& cache, const Mat& d_out, Grads& grads, Mat* d_input = nullptr) const {
    Mat dz = decoder.backward(cache.dec, d_out, grads.decoder);
    const Eigen::Index w = encoder.output_dim();
    Mat d_enc = Mat::Zero(w, cache.unique);
    for (std::size_t j = 0; j < cache.index.size(); ++j)
      d_enc.col(cache.index[j]) += dz.col(static_cast<Eigen::Index>(j)).head(w);
    Mat dx = encoder.backward(cache.enc, d_enc, grads.encoder);
    if (d_input) *d_input = std::move(dx);
    return dz.bottomRows(dz.rows() - w);
  }
};

/// One Adam state per half of a ConcatNet.
struct ConcatAdam {
  AdamState encoder;
  AdamState decoder;

  ConcatAdam() = default;
  explicit ConcatAdam(const AdamConfig& cfg) : encoder(cfg), decoder(cfg) {}

  void step(ConcatNet& net, const ConcatNet::Grads& g) {
    encoder.step(net.encoder.mutable_params(), g.encoder);
    decoder.step(net.decoder.mutable_params(), g.decoder);
  }
};

inline std::vector<int> identity_index(Eigen::Index n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return idx;
}

}  // namespace formlab::nn
