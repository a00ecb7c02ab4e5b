#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fanlasso/network.hpp"

namespace fanlasso {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  // single full-set batch per epoch, no shuffling
  bool full_batch = false;
  // keep the parameter snapshot with the lowest validation penalized loss
  bool early_stop = true;

  bool operator==(const TrainConfig&) const = default;
};

void validate_train_config(const TrainConfig& cfg);

// Adam first and second moments in parameter shape, plus the step counter.
struct AdamState {
  ParamTensors m;
  ParamTensors v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const ReluNetwork& net, const SelectionLayer* sel);

// One Adam update with bias correction. After the update, if weight_bound_t is
// finite every network weight and bias is clamped to [-T, T]; theta is only
// ever shaped by its penalty, never clamped.
void adam_step(ReluNetwork& net, SelectionLayer* sel, AdamState& state, const Gradients& grads,
               const TrainConfig& cfg);

// Contiguous [begin, end) slices covering 0..n-1 in order; the final short
// batch is kept.
std::vector<std::pair<std::size_t, std::size_t>> batch_partition(std::size_t n,
                                                                 std::size_t batch_size);

struct TrainHistory {
  std::vector<double> train_loss;  // running penalized loss per epoch
  std::vector<double> valid_loss;  // NaN entries when no validation set
  std::size_t best_epoch = 0;      // index of the restored snapshot
};

// Minibatch Adam over the penalized loss. Shuffling, when not in full-batch
// mode, is seeded from cfg.seed; identical seeds give bit-identical parameter
// trajectories. With early_stop and a non-empty validation set the parameters
// with the lowest validation penalized loss are restored at the end.
TrainHistory train(ReluNetwork& net, SelectionLayer* sel, const SampleSet& train_data,
                   const SampleSet& valid_data, const TrainConfig& cfg);

}  // namespace fanlasso
