#include "fanlasso/network.hpp"

#include <cmath>
#include <string>

namespace fanlasso {

double clipped_l1(double x, double tau) {
  if (!(tau > 0.0)) throw ValidationError("clipped_l1: tau must be positive");
  return std::min(std::fabs(x) / tau, 1.0);
}

double clipped_l1_subgrad(double x, double tau) {
  if (!(tau > 0.0)) throw ValidationError("clipped_l1_subgrad: tau must be positive");
  const double a = std::fabs(x);
  if (a == 0.0 || a >= tau) return 0.0;
  return (x > 0.0 ? 1.0 : -1.0) / tau;
}

double truncate(double z, double m) {
  if (!(m > 0.0)) throw ValidationError("truncate: bound must be positive");
  if (z > m) return m;
  if (z < -m) return -m;
  return z;
}

ReluNetwork make_relu_network(std::size_t input_dim, std::size_t depth_l, std::size_t width_n,
                              double output_bound_m, double weight_bound_t, Rng& rng) {
  if (input_dim < 1) throw ValidationError("make_relu_network: input_dim must be positive");
  if (!(output_bound_m > 0.0)) {
    throw ValidationError("make_relu_network: output bound must be positive");
  }
  if (!(weight_bound_t > 0.0)) {
    throw ValidationError("make_relu_network: weight bound must be positive");
  }
  if (depth_l > 0 && width_n < 1) {
    throw ValidationError("make_relu_network: hidden width must be positive");
  }
  ReluNetwork net;
  net.input_dim = input_dim;
  net.depth_l = depth_l;
  net.width_n = width_n;
  net.output_bound_m = output_bound_m;
  net.weight_bound_t = weight_bound_t;
  net.layers.resize(depth_l + 1);
  for (std::size_t l = 0; l <= depth_l; ++l) {
    const std::size_t fan_in = l == 0 ? input_dim : width_n;
    const std::size_t fan_out = l == depth_l ? 1 : width_n;
    auto& layer = net.layers[l];
    layer.w = Matrix(fan_out, fan_in);
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < layer.w.size(); ++i) layer.w.data()[i] = rng.uniform(-a, a);
    layer.b.assign(fan_out, 0.0);
  }
  return net;
}

SelectionLayer make_selection_layer(std::size_t p, std::size_t n_select, double tau, double lambda,
                                    Rng& rng) {
  if (p < 1 || n_select < 1) {
    throw ValidationError("make_selection_layer: dimensions must be positive");
  }
  if (!(tau > 0.0)) throw ValidationError("make_selection_layer: tau must be positive");
  if (lambda < 0.0) throw ValidationError("make_selection_layer: lambda must be nonnegative");
  SelectionLayer sel;
  sel.theta = Matrix(p, n_select);
  for (std::size_t i = 0; i < sel.theta.size(); ++i)
    sel.theta.data()[i] = rng.uniform(-0.01, 0.01);
  sel.tau = tau;
  sel.lambda = lambda;
  return sel;
}

double forward(const ReluNetwork& net, std::span<const double> input) {
  if (input.size() != net.input_dim) {
    throw ValidationError("forward: input size does not match the network");
  }
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    next.assign(layer.b.begin(), layer.b.end());
    for (std::size_t i = 0; i < layer.w.rows(); ++i) {
      const double* wi = layer.w.data() + i * layer.w.cols();
      double s = next[i];
      for (std::size_t j = 0; j < layer.w.cols(); ++j) s += wi[j] * cur[j];
      next[i] = s;
    }
    if (l + 1 < net.layers.size())
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    cur.swap(next);
  }
  return truncate(cur[0], net.output_bound_m);
}

void assemble_input(std::span<const double> direct, const SelectionLayer* sel,
                    std::span<const double> raw, double output_bound_m, std::span<double> out) {
  const std::size_t n_sel = sel ? sel->theta.cols() : 0;
  if (out.size() != direct.size() + n_sel) {
    throw ValidationError("assemble_input: output span has the wrong size");
  }
  std::copy(direct.begin(), direct.end(), out.begin());
  if (!sel) return;
  if (raw.size() != sel->theta.rows()) {
    throw ValidationError("assemble_input: raw feature size does not match theta");
  }
  const double bound = sel->trunc_bound ? *sel->trunc_bound : output_bound_m;
  for (std::size_t j = 0; j < n_sel; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < raw.size(); ++l) s += sel->theta(l, j) * raw[l];
    out[direct.size() + j] = truncate(s, bound);
  }
}

namespace {

void validate_sample_set(const ReluNetwork& net, const SelectionLayer* sel,
                         const SampleSet& data, const char* who) {
  const std::size_t n = data.size();
  if (n == 0) throw ValidationError(std::string(who) + ": empty sample set");
  if (data.labels.size() != n) {
    throw ValidationError(std::string(who) + ": label count does not match the rows");
  }
  const std::size_t n_sel = sel ? sel->theta.cols() : 0;
  if (data.direct.cols() + n_sel != net.input_dim) {
    throw ValidationError(std::string(who) + ": feature blocks do not add up to the input dim");
  }
  if (sel) {
    if (data.raw.rows() != n || data.raw.cols() != sel->theta.rows()) {
      throw ValidationError(std::string(who) + ": raw block does not match the selection layer");
    }
  } else if (!data.raw.empty()) {
    throw ValidationError(std::string(who) + ": raw block present without a selection layer");
  }
}

double penalty_term(const SelectionLayer* sel) {
  if (!sel || sel->lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (double t : sel->theta.storage()) sum += clipped_l1(t, sel->tau);
  return sel->lambda * sum;
}

}  // namespace

double penalized_loss(const ReluNetwork& net, const SelectionLayer* sel, const SampleSet& data) {
  validate_sample_set(net, sel, data, "penalized_loss");
  const std::size_t n = data.size();
  // lighter-weight forward: activations only, no stored pre-activations
  const std::size_t d_dir = data.direct.cols();
  const std::size_t n_sel = sel ? sel->theta.cols() : 0;
  Matrix act;
  if (sel) {
    act = Matrix(n, d_dir + n_sel);
    const Matrix sp = multiply(data.raw, sel->theta);
    const double bound = sel->trunc_bound ? *sel->trunc_bound : net.output_bound_m;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d_dir; ++j) act(i, j) = data.direct(i, j);
      for (std::size_t j = 0; j < n_sel; ++j) act(i, d_dir + j) = truncate(sp(i, j), bound);
    }
  } else {
    act = data.direct;
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Matrix next = multiply_a_bt(act, net.layers[l].w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < net.layers[l].b.size(); ++j) next(i, j) += net.layers[l].b[j];
    if (l + 1 < net.layers.size())
      for (std::size_t i = 0; i < next.size(); ++i)
        if (next.data()[i] < 0.0) next.data()[i] = 0.0;
    act = std::move(next);
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = truncate(act(i, 0), net.output_bound_m) - data.labels[i];
    mse += err * err;
  }
  mse /= static_cast<double>(n);
  return mse + penalty_term(sel);
}

BackwardResult backward(const ReluNetwork& net, const SelectionLayer* sel, const SampleSet& data) {
  validate_sample_set(net, sel, data, "backward");
  const std::size_t n = data.size();
  const std::size_t d_dir = data.direct.cols();
  const std::size_t n_layers = net.layers.size();

  // forward pass keeping pre-activations
  const std::size_t n_sel = sel ? sel->theta.cols() : 0;
  Matrix input(n, d_dir + n_sel);
  Matrix sel_pre;
  if (sel) {
    sel_pre = multiply(data.raw, sel->theta);
    const double bound = sel->trunc_bound ? *sel->trunc_bound : net.output_bound_m;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d_dir; ++j) input(i, j) = data.direct(i, j);
      for (std::size_t j = 0; j < n_sel; ++j) input(i, d_dir + j) = truncate(sel_pre(i, j), bound);
    }
  } else {
    input = data.direct;
  }
  std::vector<Matrix> pre(n_layers);   // pre-activations
  std::vector<Matrix> act(n_layers);   // post-relu activations (act[l] feeds layer l+1)
  const Matrix* cur = &input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = multiply_a_bt(*cur, net.layers[l].w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < net.layers[l].b.size(); ++j) pre[l](i, j) += net.layers[l].b[j];
    if (l + 1 < n_layers) {
      act[l] = pre[l];
      for (std::size_t i = 0; i < act[l].size(); ++i)
        if (act[l].data()[i] < 0.0) act[l].data()[i] = 0.0;
      cur = &act[l];
    }
  }

  BackwardResult res;
  res.grads.layers.resize(n_layers);

  // output layer delta: d(mse)/d(pre) with the truncation derivative applied
  Matrix delta(n, 1);
  double mse = 0.0;
  const double m = net.output_bound_m;
  for (std::size_t i = 0; i < n; ++i) {
    const double raw_out = pre[n_layers - 1](i, 0);
    const double out = truncate(raw_out, m);
    const double err = out - data.labels[i];
    mse += err * err;
    const double dtrunc = std::fabs(raw_out) < m ? 1.0 : 0.0;
    delta(i, 0) = 2.0 * err * dtrunc / static_cast<double>(n);
  }
  mse /= static_cast<double>(n);
  res.loss = mse + penalty_term(sel);

  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& below = l == 0 ? input : act[l - 1];
    res.grads.layers[l].w = multiply_at_b(delta, below);
    res.grads.layers[l].b.assign(net.layers[l].b.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < net.layers[l].b.size(); ++j)
        res.grads.layers[l].b[j] += delta(i, j);
    if (l == 0) {
      delta = multiply(delta, net.layers[l].w);  // n x input_dim
    } else {
      Matrix next_delta = multiply(delta, net.layers[l].w);  // n x fan_in
      // relu derivative: 1 on strictly positive pre-activation
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < next_delta.cols(); ++j)
          if (!(pre[l - 1](i, j) > 0.0)) next_delta(i, j) = 0.0;
      delta = std::move(next_delta);
    }
  }

  if (sel) {
    const double bound = sel->trunc_bound ? *sel->trunc_bound : net.output_bound_m;
    Matrix dsel(n, n_sel);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n_sel; ++j) {
        const double inside = std::fabs(sel_pre(i, j)) < bound ? 1.0 : 0.0;
        dsel(i, j) = delta(i, d_dir + j) * inside;
      }
    res.grads.theta = multiply_at_b(data.raw, dsel);
    for (std::size_t i = 0; i < res.grads.theta.size(); ++i)
      res.grads.theta.data()[i] +=
          sel->lambda * clipped_l1_subgrad(sel->theta.storage()[i], sel->tau);
  }
  return res;
}

}  // namespace fanlasso
