#include "fanlasso/fastnn.hpp"

#include <cmath>
#include <string>

namespace fanlasso {

double resolve_output_bound(const ArchConfig& arch, std::span<const double> labels) {
  if (arch.output_bound_m) {
    if (!(*arch.output_bound_m > 0.0)) {
      throw ValidationError("arch config: output bound must be positive");
    }
    return *arch.output_bound_m;
  }
  double peak = 0.0;
  for (double y : labels) peak = std::max(peak, std::fabs(y));
  return peak > 0.0 ? 10.0 * peak : 1.0;
}

double resolve_lambda(const ArchConfig& arch, std::size_t p, std::size_t n_train) {
  if (arch.lambda) {
    if (*arch.lambda < 0.0 || !std::isfinite(*arch.lambda)) {
      throw ValidationError("arch config: lambda must be finite and nonnegative");
    }
    return *arch.lambda;
  }
  if (p < 1 || n_train < 1) {
    throw ValidationError("resolve_lambda: p and n_train must be positive");
  }
  return 1.3 * std::log(static_cast<double>(p)) / static_cast<double>(n_train);
}

namespace {

void check_fast_nn(const FastNnModel& m, const char* who) {
  const std::string prefix(who);
  if (m.projection.w.cols() != m.projection.r_bar) {
    throw ValidationError(prefix + ": projection width does not match r_bar");
  }
  if (m.selection.theta.rows() != m.projection.w.rows()) {
    throw ValidationError(prefix + ": selection rows do not match the covariate dimension");
  }
  if (m.net.input_dim != m.projection.r_bar + m.selection.theta.cols()) {
    throw ValidationError(prefix + ": network input dim is not r_bar + selected count");
  }
}

void check_finetuned(const FineTunedModel& m, const char* who) {
  const std::string prefix(who);
  check_fast_nn(m.source, who);
  const std::size_t p = m.target_projection.w.rows();
  if (m.source.projection.w.rows() != p) {
    throw ValidationError(prefix + ": source and target covariate dimensions differ");
  }
  if (m.target_projection.w.cols() != m.target_projection.r_bar) {
    throw ValidationError(prefix + ": target projection width does not match r_bar");
  }
  if (m.target_selection.theta.rows() != p) {
    throw ValidationError(prefix + ": target selection rows do not match the covariate dimension");
  }
  if (m.target_net.input_dim !=
      m.target_projection.r_bar + 1 + m.target_selection.theta.cols()) {
    throw ValidationError(prefix + ": target network input dim is not r_bar + 1 + selected count");
  }
}

void check_labeled(const LabeledSet& s, std::size_t p, const char* who, const char* block) {
  if (s.x.rows() != s.size()) {
    throw ValidationError(std::string(who) + ": " + block + " rows do not match its labels");
  }
  if (s.size() > 0 && s.x.cols() != p) {
    throw ValidationError(std::string(who) + ": " + block + " covariate dimension mismatch");
  }
}

}  // namespace

double fast_nn_predict(const FastNnModel& model, std::span<const double> x) {
  check_fast_nn(model, "fast_nn_predict");
  const std::size_t p = model.projection.w.rows();
  if (x.size() != p) throw ValidationError("fast_nn_predict: covariate dimension mismatch");
  std::vector<double> direct(model.projection.r_bar);
  multiply_at_vec(model.projection.w, x, direct);
  const double inv_p = 1.0 / static_cast<double>(p);
  for (double& v : direct) v *= inv_p;
  std::vector<double> input(model.net.input_dim);
  assemble_input(direct, &model.selection, x, model.net.output_bound_m, input);
  return forward(model.net, input);
}

std::vector<double> augment_target(const FastNnModel& source, const Matrix& x) {
  check_fast_nn(source, "augment_target");
  if (x.rows() == 0) return {};
  if (x.cols() != source.projection.w.rows()) {
    throw ValidationError("augment_target: covariate dimension mismatch");
  }
  std::vector<double> scores(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) scores[i] = fast_nn_predict(source, x.row(i));
  return scores;
}

FastNnModel train_source(const SourceTrainData& data, std::size_t r_bar, const ArchConfig& arch,
                         const TrainConfig& cfg, const Matrix* pool_covariates,
                         std::optional<double> delta) {
  validate_train_config(cfg);
  if (r_bar < 1) throw ValidationError("train_source: r_bar must be positive");
  const std::size_t p = data.x_unlabeled.cols();
  if (data.x_unlabeled.rows() < r_bar) {
    throw ValidationError("train_source: unlabeled block needs at least r_bar rows");
  }
  if (data.train.size() == 0) throw ValidationError("train_source: empty training block");
  check_labeled(data.train, p, "train_source", "training block");
  check_labeled(data.valid, p, "train_source", "validation block");

  DiversifiedProjection proj;
  if (pool_covariates && pool_covariates->rows() > 0) {
    if (pool_covariates->cols() != p) {
      throw ValidationError("train_source: pooled covariate dimension mismatch");
    }
    const CovarianceBundle bundle = make_covariance_bundle(data.x_unlabeled, *pool_covariates);
    const double d =
        delta ? *delta : default_threshold(r_bar, p, bundle.n_p + bundle.n_q);
    const CovarianceChoice choice = select_source_covariance(bundle, d);
    proj = diversified_projection(choice.sigma, r_bar, choice.source, d);
  } else {
    proj = diversified_projection(sample_covariance(data.x_unlabeled), r_bar,
                                  CovarianceSource::Source);
  }

  const double bound = resolve_output_bound(arch, data.train.y);
  const double lambda = resolve_lambda(arch, p, data.train.size());

  Rng net_rng(Rng::derive(cfg.seed, 1));
  Rng theta_rng(Rng::derive(cfg.seed, 2));
  FastNnModel model;
  model.projection = std::move(proj);
  model.selection = make_selection_layer(p, arch.n_select, arch.tau, lambda, theta_rng);
  model.selection.trunc_bound = arch.sel_trunc_bound;
  model.net = make_relu_network(r_bar + arch.n_select, arch.depth_l, arch.width_n, bound,
                                arch.weight_bound_t, net_rng);
  model.role = ModelRole::Source;

  SampleSet train_set;
  train_set.direct = surrogate_factors(model.projection, data.train.x);
  train_set.raw = data.train.x;
  train_set.labels = data.train.y;
  SampleSet valid_set;
  if (data.valid.size() > 0) {
    valid_set.direct = surrogate_factors(model.projection, data.valid.x);
    valid_set.raw = data.valid.x;
    valid_set.labels = data.valid.y;
  }
  TrainConfig run_cfg = cfg;
  run_cfg.seed = Rng::derive(cfg.seed, 3);
  fanlasso::train(model.net, &model.selection, train_set, valid_set, run_cfg);
  return model;
}

FastNnModel train_source(const Matrix& x, const std::vector<double>& y, double unlabeled_fraction,
                         double valid_fraction, std::size_t r_bar, const ArchConfig& arch,
                         const TrainConfig& cfg, const Matrix* pool_covariates,
                         std::optional<double> delta) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw ValidationError("train_source: label count mismatch");
  if (!(unlabeled_fraction > 0.0 && unlabeled_fraction < 1.0) || !(valid_fraction >= 0.0) ||
      !(unlabeled_fraction + valid_fraction < 1.0)) {
    throw ValidationError("train_source: fractions must leave room for a training block");
  }
  validate_train_config(cfg);
  Rng split_rng(Rng::derive(cfg.seed, 0));
  const std::vector<std::size_t> order = shuffled_indices(n, split_rng);
  const std::size_t n_unlabeled =
      static_cast<std::size_t>(std::floor(unlabeled_fraction * static_cast<double>(n)));
  const std::size_t n_valid =
      static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(n)));
  if (n_unlabeled < r_bar) {
    throw ValidationError("train_source: unlabeled fraction leaves fewer than r_bar rows");
  }
  if (n_unlabeled + n_valid >= n) {
    throw ValidationError("train_source: no rows left for the training block");
  }

  SourceTrainData data;
  data.x_unlabeled = Matrix(n_unlabeled, x.cols());
  data.valid.x = Matrix(n_valid, x.cols());
  data.valid.y.resize(n_valid);
  const std::size_t n_train = n - n_unlabeled - n_valid;
  data.train.x = Matrix(n_train, x.cols());
  data.train.y.resize(n_train);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    if (i < n_unlabeled) {
      std::copy(x.row(src).begin(), x.row(src).end(), data.x_unlabeled.row(i).begin());
    } else if (i < n_unlabeled + n_valid) {
      const std::size_t k = i - n_unlabeled;
      std::copy(x.row(src).begin(), x.row(src).end(), data.valid.x.row(k).begin());
      data.valid.y[k] = y[src];
    } else {
      const std::size_t k = i - n_unlabeled - n_valid;
      std::copy(x.row(src).begin(), x.row(src).end(), data.train.x.row(k).begin());
      data.train.y[k] = y[src];
    }
  }
  return train_source(data, r_bar, arch, cfg, pool_covariates, delta);
}

FineTunedModel train_finetune(const FastNnModel& source, const LabeledSet& train,
                              const LabeledSet& valid,
                              const DiversifiedProjection& target_projection,
                              const ArchConfig& arch, const TrainConfig& cfg) {
  validate_train_config(cfg);
  check_fast_nn(source, "train_finetune");
  const std::size_t p = target_projection.w.rows();
  if (source.projection.w.rows() != p) {
    throw ValidationError("train_finetune: source and target covariate dimensions differ");
  }
  if (target_projection.w.cols() != target_projection.r_bar || target_projection.r_bar < 1) {
    throw ValidationError("train_finetune: malformed target projection");
  }
  if (train.size() == 0) throw ValidationError("train_finetune: empty training block");
  check_labeled(train, p, "train_finetune", "training block");
  check_labeled(valid, p, "train_finetune", "validation block");

  const double bound = resolve_output_bound(arch, train.y);
  const double lambda = resolve_lambda(arch, p, train.size());
  const std::size_t r = target_projection.r_bar;

  Rng net_rng(Rng::derive(cfg.seed, 1));
  Rng theta_rng(Rng::derive(cfg.seed, 2));
  FineTunedModel model;
  model.source = source;
  model.target_projection = target_projection;
  model.target_selection = make_selection_layer(p, arch.n_select, arch.tau, lambda, theta_rng);
  model.target_selection.trunc_bound = arch.sel_trunc_bound;
  model.target_net = make_relu_network(r + 1 + arch.n_select, arch.depth_l, arch.width_n, bound,
                                       arch.weight_bound_t, net_rng);

  auto build_set = [&](const LabeledSet& ls) {
    SampleSet s;
    const Matrix f = surrogate_factors(model.target_projection, ls.x);
    const std::vector<double> scores = augment_target(model.source, ls.x);
    s.direct = Matrix(ls.size(), r + 1);
    for (std::size_t i = 0; i < ls.size(); ++i) {
      for (std::size_t k = 0; k < r; ++k) s.direct(i, k) = f(i, k);
      s.direct(i, r) = scores[i];
    }
    s.raw = ls.x;
    s.labels = ls.y;
    return s;
  };
  const SampleSet train_set = build_set(train);
  SampleSet valid_set;
  if (valid.size() > 0) valid_set = build_set(valid);
  TrainConfig run_cfg = cfg;
  run_cfg.seed = Rng::derive(cfg.seed, 3);
  fanlasso::train(model.target_net, &model.target_selection, train_set, valid_set, run_cfg);
  return model;
}

double finetune_predict(const FineTunedModel& model, std::span<const double> x) {
  check_finetuned(model, "finetune_predict");
  const std::size_t p = model.target_projection.w.rows();
  if (x.size() != p) throw ValidationError("finetune_predict: covariate dimension mismatch");
  const std::size_t r = model.target_projection.r_bar;
  std::vector<double> direct(r + 1);
  multiply_at_vec(model.target_projection.w, x, std::span<double>(direct.data(), r));
  const double inv_p = 1.0 / static_cast<double>(p);
  for (std::size_t k = 0; k < r; ++k) direct[k] *= inv_p;
  direct[r] = fast_nn_predict(model.source, x);
  std::vector<double> input(model.target_net.input_dim);
  assemble_input(direct, &model.target_selection, x, model.target_net.output_bound_m, input);
  return forward(model.target_net, input);
}

VanillaModel train_vanilla(const LabeledSet& train, const LabeledSet& valid,
                           const ArchConfig& arch, const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (train.size() == 0) throw ValidationError("train_vanilla: empty training block");
  const std::size_t p = train.x.cols();
  check_labeled(train, p, "train_vanilla", "training block");
  check_labeled(valid, p, "train_vanilla", "validation block");

  const double bound = resolve_output_bound(arch, train.y);
  Rng net_rng(Rng::derive(cfg.seed, 1));
  VanillaModel model;
  model.net =
      make_relu_network(p, arch.depth_l, arch.width_n, bound, arch.weight_bound_t, net_rng);

  SampleSet train_set;
  train_set.direct = train.x;
  train_set.labels = train.y;
  SampleSet valid_set;
  if (valid.size() > 0) {
    valid_set.direct = valid.x;
    valid_set.labels = valid.y;
  }
  TrainConfig run_cfg = cfg;
  run_cfg.seed = Rng::derive(cfg.seed, 3);
  fanlasso::train(model.net, nullptr, train_set, valid_set, run_cfg);
  return model;
}

double vanilla_predict(const VanillaModel& model, std::span<const double> x) {
  return forward(model.net, x);
}

VanillaFineTunedModel train_vanilla_finetune(const VanillaModel& source, const LabeledSet& train,
                                             const LabeledSet& valid, const ArchConfig& arch,
                                             const TrainConfig& cfg) {
  validate_train_config(cfg);
  const std::size_t p = source.net.input_dim;
  if (train.size() == 0) throw ValidationError("train_vanilla_finetune: empty training block");
  check_labeled(train, p, "train_vanilla_finetune", "training block");
  check_labeled(valid, p, "train_vanilla_finetune", "validation block");

  const double bound = resolve_output_bound(arch, train.y);
  Rng net_rng(Rng::derive(cfg.seed, 1));
  VanillaFineTunedModel model;
  model.source = source;
  model.target_net =
      make_relu_network(p + 1, arch.depth_l, arch.width_n, bound, arch.weight_bound_t, net_rng);

  auto build_set = [&](const LabeledSet& ls) {
    SampleSet s;
    s.direct = Matrix(ls.size(), p + 1);
    for (std::size_t i = 0; i < ls.size(); ++i) {
      std::copy(ls.x.row(i).begin(), ls.x.row(i).end(), s.direct.row(i).begin());
      s.direct(i, p) = vanilla_predict(model.source, ls.x.row(i));
    }
    s.labels = ls.y;
    return s;
  };
  const SampleSet train_set = build_set(train);
  SampleSet valid_set;
  if (valid.size() > 0) valid_set = build_set(valid);
  TrainConfig run_cfg = cfg;
  run_cfg.seed = Rng::derive(cfg.seed, 3);
  fanlasso::train(model.target_net, nullptr, train_set, valid_set, run_cfg);
  return model;
}

double vanilla_finetune_predict(const VanillaFineTunedModel& model, std::span<const double> x) {
  const std::size_t p = model.source.net.input_dim;
  if (x.size() != p) {
    throw ValidationError("vanilla_finetune_predict: covariate dimension mismatch");
  }
  std::vector<double> augmented(x.begin(), x.end());
  augmented.push_back(vanilla_predict(model.source, x));
  return forward(model.target_net, augmented);
}

VanillaModel train_oracle(const LabeledSet& train, const LabeledSet& valid,
                          const ArchConfig& arch, const TrainConfig& cfg) {
  // the oracle design (true factors, relevant idiosyncratics, true source
  // values) is supplied by the caller; the fit itself is a plain network
  return train_vanilla(train, valid, arch, cfg);
}

EvalReport evaluate(const PredictFn& predict, const Matrix& x, std::span<const double> y,
                    std::span<const double> truth) {
  if (x.rows() == 0) throw ValidationError("evaluate: empty evaluation set");
  if (y.size() != x.rows()) throw ValidationError("evaluate: label count mismatch");
  if (!truth.empty() && truth.size() != y.size()) {
    throw ValidationError("evaluate: truth count mismatch");
  }
  EvalReport rep;
  rep.n_eval = x.rows();
  double mse = 0.0;
  double excess = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double pred = predict(x.row(i));
    mse += (pred - y[i]) * (pred - y[i]);
    if (!truth.empty()) excess += (pred - truth[i]) * (pred - truth[i]);
  }
  rep.mse = mse / static_cast<double>(rep.n_eval);
  rep.rmse = std::sqrt(rep.mse);
  if (!truth.empty()) rep.excess_mse = excess / static_cast<double>(rep.n_eval);
  return rep;
}

}  // namespace fanlasso
