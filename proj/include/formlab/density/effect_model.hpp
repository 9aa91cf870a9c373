#pragma once

#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "formlab/density/gmm.hpp"
#include "formlab/density/standardizer.hpp"
#include "formlab/nn/adam.hpp"
#include "formlab/nn/checkpoint.hpp"
#include "formlab/nn/concat_net.hpp"

namespace formlab::density {

/// Shared hyperparameters of the demonstrator and imitator effect models.
/// Both models are always built from one instance of this struct.
struct EffectModelConfig {
  int obs_dim = 0;
  int hidden = 256;
  int max_offset = 5;        // overshooting horizon, offsets 1..max_offset
  double ar_weight = 0.1;    // weight of the autoregressive term
  double l2_weight = 0.1;
  double learning_rate = 1e-4;
  int batch_size = 64;       // windows per step
  long steps = 50000;        // offline (demonstrator) budget
  long eval_interval = 1000;
  double holdout_fraction = 0.05;

  void validate() const {
    require(obs_dim > 0, "effect model obs_dim must be positive");
    require(hidden > 0, "effect model hidden width must be positive");
    require(max_offset >= 1, "effect model max_offset must be >= 1");
    require(ar_weight >= 0 && l2_weight >= 0 && learning_rate >= 0, "effect model weights must be >= 0");
    require(batch_size > 0, "effect model batch_size must be positive");
  }
};

/// Generative next-observation model p(x_t | x_{t-1}) with a diagonal
/// Gaussian-mixture head. Operates on standardized observations; the
/// standardizer travels with the parameters.
struct EffectModel {
  EffectModelConfig config;
  nn::ConcatNet net;
  Standardizer standardizer;

  int obs_dim() const { return config.obs_dim; }
  int head_size() const { return GmmOutput::head_size(config.obs_dim); }

  Mat one_hot(const std::vector<int>& deltas) const {
    Mat oh = Mat::Zero(config.max_offset, static_cast<Eigen::Index>(deltas.size()));
    for (std::size_t j = 0; j < deltas.size(); ++j) {
      if (deltas[j] < 1 || deltas[j] > config.max_offset)
        throw StructuralError("effect model offset " + std::to_string(deltas[j]) + " outside [1, " +
                              std::to_string(config.max_offset) + "]");
      oh(deltas[j] - 1, static_cast<Eigen::Index>(j)) = 1.0;
    }
    return oh;
  }

  /// Head outputs for standardized inputs; column j conditions on
  /// x_std(:, index[j]) and offset deltas[j].
  Mat heads(const Mat& x_std, const std::vector<int>& index, const std::vector<int>& deltas,
            nn::ConcatNet::Cache* cache = nullptr) const {
    return net.forward(x_std, index, one_hot(deltas), cache);
  }

  GmmOutput forward(const Vec& x_prev_std, int delta) const {
    Mat x = x_prev_std;
    Mat h = heads(x, {0}, {delta});
    return GmmOutput::from_head(h.col(0), obs_dim());
  }

  /// Next-step log-density of raw observations, including the log-Jacobian
  /// of the standardizer so models with different statistics are comparable.
  Vec log_prob(const Mat& x_prev, const Mat& x_next) const {
    require(x_prev.cols() == x_next.cols(), "log_prob: column count mismatch");
    const Mat xs = standardizer.standardize(x_prev);
    const Mat ys = standardizer.standardize(x_next);
    const Eigen::Index n = x_prev.cols();
    Mat h = heads(xs, nn::identity_index(n), std::vector<int>(static_cast<std::size_t>(n), 1));
    Vec out(n);
    Vec unused;
    const double jac = standardizer.log_det_scale();
    for (Eigen::Index j = 0; j < n; ++j) out(j) = gmm_log_prob_head(h.col(j), ys.col(j), unused, false) - jac;
    return out;
  }

  double log_prob(const Vec& x_prev, const Vec& x_next) const {
    Mat a = x_prev, b = x_next;
    return log_prob(a, b)(0);
  }
};

inline EffectModel make_effect_model(const EffectModelConfig& cfg, Rng& rng) {
  cfg.validate();
  using nn::Activation;
  EffectModel m;
  m.config = cfg;
  m.net.encoder = nn::make_mlp(cfg.obs_dim, {cfg.hidden, cfg.hidden}, {Activation::tanh, Activation::elu});
  m.net.decoder = nn::make_mlp(cfg.hidden + cfg.max_offset, {cfg.hidden, GmmOutput::head_size(cfg.obs_dim)},
                               {Activation::elu, Activation::identity});
  m.net.init(rng);
  m.standardizer = Standardizer(cfg.obs_dim);
  return m;
}

/// One-step sample x~ ~ p(. | x_prev_std, offset 1), in standardized space.
inline Vec sample_next(const EffectModel& model, const Vec& x_prev_std, Rng& rng) {
  return gmm_sample(model.forward(x_prev_std, 1), rng);
}

// ---------------------------------------------------------------------------
// Training

/// A training anchor: time index t into a (dim x steps+1) observation matrix.
struct EffectWindow {
  const Mat* obs = nullptr;
  int t = 0;
};

/// Standardized tensors for one batch of windows.
struct EffectBatch {
  Mat anchors;               // sigma(x_t)
  Mat previous;              // sigma(x_{t-1}), only meaningful when ar terms are used
  std::vector<Mat> targets;  // targets[d-1] = sigma(x_{t+d})
};

inline EffectBatch make_effect_batch(const EffectModel& model, const std::vector<EffectWindow>& windows) {
  const int dim = model.obs_dim();
  const auto b = static_cast<Eigen::Index>(windows.size());
  EffectBatch batch;
  batch.anchors.resize(dim, b);
  batch.previous.resize(dim, b);
  batch.targets.assign(static_cast<std::size_t>(model.config.max_offset), Mat(dim, b));
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& w = windows[static_cast<std::size_t>(j)];
    require(w.obs && w.obs->rows() == dim, "effect window observation dimension mismatch");
    require(w.t + model.config.max_offset < w.obs->cols(), "effect window runs past the trajectory end");
    batch.anchors.col(j) = model.standardizer.standardize(Vec(w.obs->col(w.t)));
    batch.previous.col(j) =
        w.t > 0 ? model.standardizer.standardize(Vec(w.obs->col(w.t - 1))) : batch.anchors.col(j);
    for (int d = 1; d <= model.config.max_offset; ++d)
      batch.targets[static_cast<std::size_t>(d - 1)].col(j) = model.standardizer.standardize(Vec(w.obs->col(w.t + d)));
  }
  return batch;
}

/// Samples the autoregressive inputs x~_t ~ p(. | sigma(x_{t-1})). They are
/// treated as data downstream: no gradient flows through the draw.
inline Mat draw_ar_inputs(const EffectModel& model, const EffectBatch& batch, Rng& rng) {
  const Eigen::Index b = batch.previous.cols();
  Mat h = model.heads(batch.previous, nn::identity_index(b), std::vector<int>(static_cast<std::size_t>(b), 1));
  Mat out(model.obs_dim(), b);
  for (Eigen::Index j = 0; j < b; ++j) out.col(j) = gmm_sample(GmmOutput::from_head(h.col(j), model.obs_dim()), rng);
  return out;
}

struct EffectLoss {
  double loss = 0.0;            // negative objective
  double overshoot_ll = 0.0;    // mean over windows of (1/max_offset) sum_d log p
  double ar_ll = 0.0;           // mean autoregressive log p
  nn::ConcatNet::Grads grads;
};

/// loss = -[ mean_t (1/dmax) sum_d log p(sigma(x_{t+d}) | sigma(x_t), d)
///           + ar_weight * mean_t log p(sigma(x_{t+1}) | x~_t, 1) ]
inline EffectLoss effect_loss(const EffectModel& model, const EffectBatch& batch, const Mat& ar_inputs) {
  const int dim = model.obs_dim();
  const int dmax = model.config.max_offset;
  const Eigen::Index b = batch.anchors.cols();
  const bool use_ar = model.config.ar_weight > 0.0;
  require(b > 0, "effect_loss on an empty batch");

  Mat x(dim, use_ar ? 2 * b : b);
  x.leftCols(b) = batch.anchors;
  if (use_ar) {
    require(ar_inputs.cols() == b && ar_inputs.rows() == dim, "autoregressive input shape mismatch");
    x.rightCols(b) = ar_inputs;
  }
  std::vector<int> index, deltas;
  for (int d = 1; d <= dmax; ++d)
    for (Eigen::Index j = 0; j < b; ++j) {
      index.push_back(static_cast<int>(j));
      deltas.push_back(d);
    }
  if (use_ar)
    for (Eigen::Index j = 0; j < b; ++j) {
      index.push_back(static_cast<int>(b + j));
      deltas.push_back(1);
    }

  nn::ConcatNet::Cache cache;
  Mat h = model.heads(x, index, deltas, &cache);
  Mat d_heads(h.rows(), h.cols());
  EffectLoss out;
  const double w_over = 1.0 / (static_cast<double>(b) * dmax);
  const double w_ar = model.config.ar_weight / static_cast<double>(b);
  Eigen::Index col = 0;
  for (int d = 1; d <= dmax; ++d)
    for (Eigen::Index j = 0; j < b; ++j, ++col) {
      auto dh = d_heads.col(col);
      const double lp = gmm_log_prob_head(h.col(col), batch.targets[static_cast<std::size_t>(d - 1)].col(j), dh, true);
      out.overshoot_ll += lp * w_over;
      dh *= w_over;
    }
  if (use_ar)
    for (Eigen::Index j = 0; j < b; ++j, ++col) {
      auto dh = d_heads.col(col);
      const double lp = gmm_log_prob_head(h.col(col), batch.targets[0].col(j), dh, true);
      out.ar_ll += lp / static_cast<double>(b);
      dh *= w_ar;
    }
  out.loss = -(out.overshoot_ll + model.config.ar_weight * out.ar_ll);
  model.net.backward(cache, d_heads, out.grads);
  return out;
}

/// Draws `count` anchors uniformly over all trajectories with enough
/// lookahead. Trajectories too short for max_offset are skipped, never padded.
inline std::vector<EffectWindow> sample_windows(const std::vector<const Mat*>& trajectories, const EffectModelConfig& cfg,
                                                int count, Rng& rng) {
  const int first = cfg.ar_weight > 0.0 ? 1 : 0;
  std::vector<const Mat*> usable;
  for (const Mat* m : trajectories)
    if (m->cols() - 1 - cfg.max_offset >= first) usable.push_back(m);
  require(!usable.empty(), "no trajectory is long enough for the overshooting horizon");
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  std::vector<EffectWindow> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Mat* m = usable[pick(rng)];
    std::uniform_int_distribution<int> t(first, static_cast<int>(m->cols()) - 1 - cfg.max_offset);
    out.push_back({m, t(rng)});
  }
  return out;
}

/// Optimizer state bundled with the model it updates. The same step is used
/// offline (demonstrator) and online (imitator).
class EffectTrainer {
 public:
  explicit EffectTrainer(EffectModel& model) : model_(&model) {
    nn::AdamConfig a{.learning_rate = model.config.learning_rate, .l2_weight = model.config.l2_weight};
    enc_ = nn::AdamState(a);
    dec_ = nn::AdamState(a);
  }

  EffectModel& model() { return *model_; }
  long steps() const { return steps_; }
  void set_learning_rate(double lr) {
    enc_.config().learning_rate = lr;
    dec_.config().learning_rate = lr;
  }

  EffectLoss step(const std::vector<EffectWindow>& windows, Rng& rng) {
    Mat anchors(model_->obs_dim(), static_cast<Eigen::Index>(windows.size()));
    for (std::size_t j = 0; j < windows.size(); ++j)
      anchors.col(static_cast<Eigen::Index>(j)) = windows[j].obs->col(windows[j].t);
    model_->standardizer.update(anchors);
    const EffectBatch batch = make_effect_batch(*model_, windows);
    const Mat ar = model_->config.ar_weight > 0.0 ? draw_ar_inputs(*model_, batch, rng) : Mat();
    EffectLoss l = effect_loss(*model_, batch, ar);
    if (!std::isfinite(l.loss))
      throw NumericalError("effect model loss is not finite at step " + std::to_string(steps_));
    enc_.step(model_->net.encoder.mutable_params(), l.grads.encoder);
    dec_.step(model_->net.decoder.mutable_params(), l.grads.decoder);
    ++steps_;
    return l;
  }

 private:
  EffectModel* model_;
  nn::AdamState enc_, dec_;
  long steps_ = 0;
};

/// Mean raw-space next-step log-likelihood over every transition.
inline double mean_next_step_log_likelihood(const EffectModel& model, const std::vector<const Mat*>& trajectories) {
  double total = 0.0;
  long count = 0;
  for (const Mat* m : trajectories) {
    if (m->cols() < 2) continue;
    const Vec lp = model.log_prob(Mat(m->leftCols(m->cols() - 1)), Mat(m->rightCols(m->cols() - 1)));
    total += lp.sum();
    count += lp.size();
  }
  require(count > 0, "no transitions to evaluate");
  return total / static_cast<double>(count);
}

struct EffectTrainLogEntry {
  long step = 0;
  double train_loss = 0.0;
  double heldout_log_likelihood = 0.0;
};

/// Offline maximum-likelihood training of the demonstrator model. A fraction
/// of trajectories (at least one when there are two or more) is held out and
/// its next-step log-likelihood logged every eval_interval steps. The
/// standardizer is frozen on return.
inline EffectModel train_demonstrator(const std::vector<const Mat*>& trajectories, const EffectModelConfig& cfg, Rng& rng,
                                      std::vector<EffectTrainLogEntry>* log = nullptr,
                                      const std::function<void(const EffectTrainLogEntry&)>& on_eval = {}) {
  require(!trajectories.empty(), "train_demonstrator: empty dataset");
  EffectModel model = make_effect_model(cfg, rng);
  std::vector<const Mat*> train, heldout;
  std::size_t n_hold = 0;
  if (trajectories.size() >= 2)
    n_hold = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.holdout_fraction * trajectories.size()));
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    (i < trajectories.size() - n_hold ? train : heldout).push_back(trajectories[i]);

  EffectTrainer trainer(model);
  double running = 0.0;
  for (long s = 0; s < cfg.steps; ++s) {
    const auto windows = sample_windows(train, cfg, cfg.batch_size, rng);
    const EffectLoss l = trainer.step(windows, rng);
    running = s == 0 ? l.loss : 0.98 * running + 0.02 * l.loss;
    const bool last = s + 1 == cfg.steps;
    if (cfg.eval_interval > 0 && ((s + 1) % cfg.eval_interval == 0 || last)) {
      EffectTrainLogEntry e{s + 1, running,
                            mean_next_step_log_likelihood(model, heldout.empty() ? train : heldout)};
      if (log) log->push_back(e);
      if (on_eval) on_eval(e);
    }
  }
  model.standardizer.freeze();
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoint: two FORMNET blocks, a standardizer block and a config echo.

inline std::string effect_config_echo(const EffectModelConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "obs_dim = " << c.obs_dim << "\nhidden = " << c.hidden << "\nmax_offset = " << c.max_offset
     << "\nar_weight = " << c.ar_weight << "\nl2_weight = " << c.l2_weight << "\nlearning_rate = " << c.learning_rate
     << "\nbatch_size = " << c.batch_size << "\nsteps = " << c.steps << "\neval_interval = " << c.eval_interval
     << "\nholdout_fraction = " << c.holdout_fraction << "\n";
  return os.str();
}

inline void write_effect_model(std::ostream& os, const EffectModel& m) {
  nn::write_net(os, m.net.encoder);
  nn::write_net(os, m.net.decoder);
  os << "STANDARDIZER v1 dim=" << m.standardizer.dim() << " count=" << m.standardizer.count()
     << " frozen=" << (m.standardizer.frozen() ? 1 : 0) << "\n";
  for (int i = 0; i < m.standardizer.dim(); ++i) io::write_f64(os, m.standardizer.mean()(i));
  for (int i = 0; i < m.standardizer.dim(); ++i) io::write_f64(os, m.standardizer.variance()(i));
  const std::string echo = effect_config_echo(m.config);
  os << "CONFIG v1 bytes=" << echo.size() << "\n" << echo;
}

inline EffectModel read_effect_model(std::istream& is) {
  EffectModel m;
  m.net.encoder = nn::read_net(is);
  m.net.decoder = nn::read_net(is);
  std::string header = io::read_line(is);
  if (header.rfind("STANDARDIZER v1", 0) != 0) throw StructuralError("effect checkpoint: missing standardizer block");
  auto kv = nn::detail::parse_record(header.substr(16));
  const int dim = std::stoi(kv.at("dim"));
  Vec mean(dim), var(dim);
  for (int i = 0; i < dim; ++i) mean(i) = io::read_f64(is);
  for (int i = 0; i < dim; ++i) var(i) = io::read_f64(is);
  m.standardizer = Standardizer(mean, var, std::stol(kv.at("count")));
  if (kv.at("frozen") == "1") m.standardizer.freeze();
  header = io::read_line(is);
  if (header.rfind("CONFIG v1 bytes=", 0) != 0) throw StructuralError("effect checkpoint: missing config echo");
  std::string echo(std::stoul(header.substr(16)), '\0');
  is.read(echo.data(), static_cast<std::streamsize>(echo.size()));
  std::istringstream es(echo);
  std::string line;
  EffectModelConfig& c = m.config;
  while (std::getline(es, line)) {
    auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 3);
    if (k == "obs_dim") c.obs_dim = std::stoi(v);
    else if (k == "hidden") c.hidden = std::stoi(v);
    else if (k == "max_offset") c.max_offset = std::stoi(v);
    else if (k == "ar_weight") c.ar_weight = std::stod(v);
    else if (k == "l2_weight") c.l2_weight = std::stod(v);
    else if (k == "learning_rate") c.learning_rate = std::stod(v);
    else if (k == "batch_size") c.batch_size = std::stoi(v);
    else if (k == "steps") c.steps = std::stol(v);
    else if (k == "eval_interval") c.eval_interval = std::stol(v);
    else if (k == "holdout_fraction") c.holdout_fraction = std::stod(v);
  }
  require(m.net.encoder.input_dim() == c.obs_dim && m.standardizer.dim() == c.obs_dim,
          "effect checkpoint: config echo disagrees with network shapes");
  return m;
}

}  // namespace formlab::density
