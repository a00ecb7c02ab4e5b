#include "fanlasso/trainer.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace fanlasso {

void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ValidationError("train config: learning_rate must be finite and nonnegative");
  }
  if (cfg.batch_size < 1) throw ValidationError("train config: batch_size must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ValidationError("train config: betas must lie in [0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) throw ValidationError("train config: epsilon must be positive");
}

AdamState make_adam_state(const ReluNetwork& net, const SelectionLayer* sel) {
  AdamState state;
  auto shape = [&](ParamTensors& t) {
    t.layers.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      t.layers[l].w = Matrix(net.layers[l].w.rows(), net.layers[l].w.cols());
      t.layers[l].b.assign(net.layers[l].b.size(), 0.0);
    }
    if (sel) t.theta = Matrix(sel->theta.rows(), sel->theta.cols());
  };
  shape(state.m);
  shape(state.v);
  return state;
}

namespace {

void adam_update(double* param, const double* grad, double* m, double* v, std::size_t count,
                 double c1, double c2, const TrainConfig& cfg) {
  for (std::size_t i = 0; i < count; ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    param[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void clamp_span(double* x, std::size_t count, double bound) {
  for (std::size_t i = 0; i < count; ++i) {
    if (x[i] > bound) x[i] = bound;
    if (x[i] < -bound) x[i] = -bound;
  }
}

}  // namespace

void adam_step(ReluNetwork& net, SelectionLayer* sel, AdamState& state, const Gradients& grads,
               const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (grads.layers.size() != net.layers.size()) {
    throw ValidationError("adam_step: gradient layer count mismatch");
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const auto& g = grads.layers[l];
    if (g.w.rows() != layer.w.rows() || g.w.cols() != layer.w.cols() ||
        g.b.size() != layer.b.size()) {
      throw ValidationError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
    }
    adam_update(layer.w.data(), g.w.data(), state.m.layers[l].w.data(), state.v.layers[l].w.data(),
                layer.w.size(), c1, c2, cfg);
    adam_update(layer.b.data(), g.b.data(), state.m.layers[l].b.data(), state.v.layers[l].b.data(),
                layer.b.size(), c1, c2, cfg);
  }
  if (sel) {
    if (grads.theta.rows() != sel->theta.rows() || grads.theta.cols() != sel->theta.cols()) {
      throw ValidationError("adam_step: theta gradient shape mismatch");
    }
    adam_update(sel->theta.data(), grads.theta.data(), state.m.theta.data(), state.v.theta.data(),
                sel->theta.size(), c1, c2, cfg);
  }
  if (std::isfinite(net.weight_bound_t)) {
    for (auto& layer : net.layers) {
      clamp_span(layer.w.data(), layer.w.size(), net.weight_bound_t);
      clamp_span(layer.b.data(), layer.b.size(), net.weight_bound_t);
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> batch_partition(std::size_t n,
                                                                 std::size_t batch_size) {
  if (batch_size < 1) throw ValidationError("batch_partition: batch_size must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> parts;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    parts.emplace_back(begin, std::min(begin + batch_size, n));
  }
  return parts;
}

namespace {

SampleSet gather_rows(const SampleSet& src, const std::vector<std::size_t>& order,
                      std::size_t begin, std::size_t end) {
  SampleSet out;
  const std::size_t nb = end - begin;
  out.direct = Matrix(nb, src.direct.cols());
  if (!src.raw.empty()) out.raw = Matrix(nb, src.raw.cols());
  out.labels.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t r = order[begin + i];
    std::copy(src.direct.row(r).begin(), src.direct.row(r).end(), out.direct.row(i).begin());
    if (!src.raw.empty())
      std::copy(src.raw.row(r).begin(), src.raw.row(r).end(), out.raw.row(i).begin());
    out.labels[i] = src.labels[r];
  }
  return out;
}

void check_finite_set(const SampleSet& s, const char* name) {
  if (has_nonfinite(s.direct) || has_nonfinite(s.raw) || has_nonfinite(s.labels)) {
    throw ValidationError(std::string("train: non-finite values in the ") + name + " set");
  }
}

}  // namespace

TrainHistory train(ReluNetwork& net, SelectionLayer* sel, const SampleSet& train_data,
                   const SampleSet& valid_data, const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (train_data.size() == 0) throw ValidationError("train: empty training set");
  check_finite_set(train_data, "training");
  const bool have_valid = valid_data.size() > 0;
  if (have_valid) check_finite_set(valid_data, "validation");

  const std::size_t n = train_data.size();
  Rng shuffle_rng(cfg.seed);
  AdamState state = make_adam_state(net, sel);

  TrainHistory hist;
  hist.train_loss.reserve(cfg.max_epochs);
  hist.valid_loss.reserve(cfg.max_epochs);

  const bool track_best = cfg.early_stop && have_valid;
  double best_loss = std::numeric_limits<double>::infinity();
  ReluNetwork best_net;
  SelectionLayer best_sel;
  bool have_best = false;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::pair<std::size_t, std::size_t>> parts;
    if (cfg.full_batch) {
      parts = {{0, n}};
    } else {
      order = shuffled_indices(n, shuffle_rng);
      parts = batch_partition(n, cfg.batch_size);
    }
    double epoch_loss = 0.0;
    for (const auto& [begin, end] : parts) {
      const SampleSet batch = gather_rows(train_data, order, begin, end);
      const BackwardResult res = backward(net, sel, batch);
      adam_step(net, sel, state, res.grads, cfg);
      epoch_loss += res.loss * static_cast<double>(end - begin);
    }
    hist.train_loss.push_back(epoch_loss / static_cast<double>(n));

    double vl = std::numeric_limits<double>::quiet_NaN();
    if (have_valid) vl = penalized_loss(net, sel, valid_data);
    hist.valid_loss.push_back(vl);

    if (track_best && (!have_best || vl < best_loss)) {
      best_loss = vl;
      best_net = net;
      if (sel) best_sel = *sel;
      hist.best_epoch = epoch;
      have_best = true;
    }
  }

  if (track_best && have_best) {
    net = std::move(best_net);
    if (sel) *sel = std::move(best_sel);
  } else if (cfg.max_epochs > 0) {
    hist.best_epoch = cfg.max_epochs - 1;
  }
  return hist;
}

}  // namespace fanlasso
