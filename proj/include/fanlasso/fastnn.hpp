#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fanlasso/factor.hpp"
#include "fanlasso/network.hpp"
#include "fanlasso/trainer.hpp"

namespace fanlasso {

// Architecture knobs shared by every estimator. Unset optionals resolve at
// training time: output_bound_m to 10 * max |y_train| (1.0 when the labels
// are identically zero), lambda to 1.3 * log(p) / n_train.
struct ArchConfig {
  std::size_t depth_l = 4;
  std::size_t width_n = 100;
  std::size_t n_select = 50;
  double tau = 0.01;
  std::optional<double> lambda;
  std::optional<double> output_bound_m;
  double weight_bound_t = std::numeric_limits<double>::infinity();
  // separate truncation level for the selected features; the output bound
  // applies when unset
  std::optional<double> sel_trunc_bound;

  bool operator==(const ArchConfig&) const = default;
};

double resolve_output_bound(const ArchConfig& arch, std::span<const double> labels);
double resolve_lambda(const ArchConfig& arch, std::size_t p, std::size_t n_train);

struct LabeledSet {
  Matrix x;  // n x p
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
};

enum class ModelRole { Source, Target };

// Factor-augmented sparse model: prediction is
//   net([p^{-1} W^T x, trun(theta^T x)]).
struct FastNnModel {
  DiversifiedProjection projection;  // frozen after training
  SelectionLayer selection;
  ReluNetwork net;  // input dim r_bar + n_select
  ModelRole role = ModelRole::Source;

  bool operator==(const FastNnModel&) const = default;
};

// Fine-tuned estimator on top of a frozen source model: prediction is
//   target_net([p^{-1} W_target^T x, source_prediction(x), trun(theta^T x)])
// with the source score slot sitting at index r_bar of the direct block.
struct FineTunedModel {
  FastNnModel source;  // never touched by fine-tuning
  DiversifiedProjection target_projection;
  SelectionLayer target_selection;
  ReluNetwork target_net;  // input dim r_bar + 1 + n_select

  bool operator==(const FineTunedModel&) const = default;
};

// Plain ReLU network on whatever design matrix it was trained on.
struct VanillaModel {
  ReluNetwork net;

  bool operator==(const VanillaModel&) const = default;
};

// Vanilla transfer baseline: target net consumes [x, source_prediction(x)].
struct VanillaFineTunedModel {
  VanillaModel source;
  ReluNetwork target_net;  // input dim p + 1

  bool operator==(const VanillaFineTunedModel&) const = default;
};

double fast_nn_predict(const FastNnModel& model, std::span<const double> x);

// Elementwise fast_nn_predict over the rows of x; the cached source scores
// fed to fine-tuning.
std::vector<double> augment_target(const FastNnModel& source, const Matrix& x);

// Rows behind a source training run. The unlabeled block builds the
// projection; the labeled blocks drive the penalized fit.
struct SourceTrainData {
  Matrix x_unlabeled;
  LabeledSet train;
  LabeledSet valid;  // may be empty
};

// Train the factor-augmented sparse model. The projection comes from the
// unlabeled block, optionally pooled with extra covariate rows under the
// source-side covariance selection rule (delta defaults to
// default_threshold(r_bar, p, total rows) when unset). Seed streams derived
// from cfg.seed: 1 network init, 2 theta init, 3 shuffling, 0 data split in
// the fraction-based overload.
FastNnModel train_source(const SourceTrainData& data, std::size_t r_bar, const ArchConfig& arch,
                         const TrainConfig& cfg, const Matrix* pool_covariates = nullptr,
                         std::optional<double> delta = std::nullopt);

// Fraction-based convenience split: shuffles rows, carves the unlabeled and
// validation blocks, trains on the rest.
FastNnModel train_source(const Matrix& x, const std::vector<double>& y, double unlabeled_fraction,
                         double valid_fraction, std::size_t r_bar, const ArchConfig& arch,
                         const TrainConfig& cfg, const Matrix* pool_covariates = nullptr,
                         std::optional<double> delta = std::nullopt);

// Fine-tune on target rows with the source frozen: source scores are computed
// once up front and enter as a constant feature column.
FineTunedModel train_finetune(const FastNnModel& source, const LabeledSet& train,
                              const LabeledSet& valid,
                              const DiversifiedProjection& target_projection,
                              const ArchConfig& arch, const TrainConfig& cfg);

double finetune_predict(const FineTunedModel& model, std::span<const double> x);

// Plain MSE training on the raw design matrix (no projection, no selection).
VanillaModel train_vanilla(const LabeledSet& train, const LabeledSet& valid,
                           const ArchConfig& arch, const TrainConfig& cfg);

double vanilla_predict(const VanillaModel& model, std::span<const double> x);

VanillaFineTunedModel train_vanilla_finetune(const VanillaModel& source, const LabeledSet& train,
                                             const LabeledSet& valid, const ArchConfig& arch,
                                             const TrainConfig& cfg);

double vanilla_finetune_predict(const VanillaFineTunedModel& model, std::span<const double> x);

// Infeasible benchmark: the caller supplies the true low-dimensional design
// (factors, relevant idiosyncratic columns, true source regression values)
// and a plain network learns the residual map on it.
VanillaModel train_oracle(const LabeledSet& train, const LabeledSet& valid,
                          const ArchConfig& arch, const TrainConfig& cfg);

struct EvalReport {
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t n_eval = 0;
  // mean squared distance to the noiseless truth, when the truth is known
  std::optional<double> excess_mse;
};

using PredictFn = std::function<double(std::span<const double>)>;

EvalReport evaluate(const PredictFn& predict, const Matrix& x, std::span<const double> y,
                    std::span<const double> truth = {});

}  // namespace fanlasso
