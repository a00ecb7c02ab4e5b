#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fanlasso/matrix.hpp"
#include "fanlasso/rng.hpp"

namespace fanlasso {

// Fully connected ReLU network with shapes (input_dim, N, ..., N, 1): depth_l
// hidden layers of common width width_n, a scalar output truncated to
// [-output_bound_m, output_bound_m], and an optional sup-norm bound
// weight_bound_t enforced on every weight and bias after each optimizer step.
// depth_l == 0 degenerates to a truncated affine map.
struct ReluNetwork {
  struct Layer {
    Matrix w;               // fan_out x fan_in
    std::vector<double> b;  // fan_out

    bool operator==(const Layer&) const = default;
  };

  std::size_t input_dim = 0;
  std::size_t depth_l = 0;
  std::size_t width_n = 0;
  double output_bound_m = 1.0;
  double weight_bound_t = std::numeric_limits<double>::infinity();
  std::vector<Layer> layers;  // depth_l + 1 entries

  bool operator==(const ReluNetwork&) const = default;
};

// Variable-selection front end: selected feature j is trun(theta_j^T x) with
// every entry of theta charged the clipped-L1 penalty lambda * psi_tau.
struct SelectionLayer {
  Matrix theta;  // p x n_select
  double tau = 0.01;
  double lambda = 0.0;
  // truncation bound for the selected features; the model's output bound
  // applies when unset
  std::optional<double> trunc_bound;

  bool operator==(const SelectionLayer&) const = default;
};

// Sample block fed to the loss/gradient routines. `direct` columns enter the
// network untouched; `raw` columns pass through the selection layer first. The
// network input per row is [direct, trun(theta^T raw)].
struct SampleSet {
  Matrix direct;          // n x d_direct (d_direct may be 0)
  Matrix raw;             // n x p, empty when there is no selection path
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
};

// Clipped L1: psi_tau(x) = min(|x| / tau, 1).
double clipped_l1(double x, double tau);

// Subgradient convention: sign(x)/tau on 0 < |x| < tau, and 0 at the origin
// and on the flat region |x| >= tau.
double clipped_l1_subgrad(double x, double tau);

// trun_m(z) = sign(z) * min(|z|, m); its derivative convention is 1 strictly
// inside the band and 0 outside (including on the boundary).
double truncate(double z, double m);

// Weight init: uniform(-a, a) per layer with a = sqrt(6 / (fan_in + fan_out)),
// biases zero, drawn row-major layer by layer.
ReluNetwork make_relu_network(std::size_t input_dim, std::size_t depth_l, std::size_t width_n,
                              double output_bound_m, double weight_bound_t, Rng& rng);

// theta ~ uniform(-0.01, 0.01), row-major.
SelectionLayer make_selection_layer(std::size_t p, std::size_t n_select, double tau, double lambda,
                                    Rng& rng);

// Run the network on an assembled input vector.
double forward(const ReluNetwork& net, std::span<const double> input);

// Write [direct, trun(theta^T raw)] for one sample into `out`.
void assemble_input(std::span<const double> direct, const SelectionLayer* sel,
                    std::span<const double> raw, double output_bound_m, std::span<double> out);

// Mean squared error over the set plus lambda * sum psi_tau(theta). `sel` may
// be null when the set has no raw block.
double penalized_loss(const ReluNetwork& net, const SelectionLayer* sel, const SampleSet& data);

// Parameter-shaped container reused for gradients and optimizer moments.
struct ParamTensors {
  std::vector<ReluNetwork::Layer> layers;
  Matrix theta;  // empty when there is no selection layer
};
using Gradients = ParamTensors;

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

// Gradient of the penalized loss in every network parameter and, when `sel`
// is present, in theta (data path through the truncation plus the penalty
// subgradient). ReLU takes derivative 0 at the kink; truncation takes 0 on
// and outside the band edge.
BackwardResult backward(const ReluNetwork& net, const SelectionLayer* sel, const SampleSet& data);

}  // namespace fanlasso
