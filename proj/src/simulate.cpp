#include "fanlasso/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <tuple>

#include "fanlasso/common.hpp"
#include "fanlasso/format.hpp"

namespace fanlasso {

CovariateShiftConfig covariate_paper_preset() { return {}; }

CovariateShiftConfig covariate_desk_preset() {
  CovariateShiftConfig cfg;
  cfg.p = 300;
  cfg.n_p_grid = {100, 200, 300};
  cfg.replications = 20;
  return cfg;
}

void validate_config(const CovariateShiftConfig& cfg) {
  if (cfg.p < 1 || cfg.r < 1) {
    throw ValidationError("covariate config: p and r must be positive");
  }
  if (cfg.r > cfg.p) throw ValidationError("covariate config: r cannot exceed p");
  if (cfg.r_bar < 1 || cfg.r_bar > cfg.p) {
    throw ValidationError("covariate config: r_bar must lie in [1, p]");
  }
  if (cfg.n_p_grid.empty() || cfg.n_q_values.empty()) {
    throw ValidationError("covariate config: sample-size grids must be non-empty");
  }
  for (std::size_t n : cfg.n_p_grid) {
    if (n < 1) throw ValidationError("covariate config: source sample sizes must be positive");
  }
  for (std::size_t n : cfg.n_q_values) {
    if (n < 1) throw ValidationError("covariate config: target sample sizes must be positive");
  }
  if (!(cfg.loading_shift_scale >= 0.0) || !std::isfinite(cfg.loading_shift_scale)) {
    throw ValidationError("covariate config: shift scale must be finite and nonnegative");
  }
  if (cfg.replications < 1) throw ValidationError("covariate config: needs at least one replication");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::FanLasso: return "FanLasso";
    case Method::FtVanilla: return "FtVanilla";
    case Method::FastNnSourceOnly: return "FastNnSourceOnly";
    case Method::VanillaSourceOnly: return "VanillaSourceOnly";
    case Method::Oracle: return "Oracle";
  }
  throw ValidationError("method_name: unknown method");
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::FanLasso, Method::FtVanilla, Method::FastNnSourceOnly,
                   Method::VanillaSourceOnly, Method::Oracle}) {
    if (name == method_name(m)) return m;
  }
  throw ValidationError("parse_method: unknown method '" + std::string(name) + "'");
}

PosteriorShiftConfig posterior_paper_preset() { return {}; }

PosteriorShiftConfig posterior_desk_preset() {
  PosteriorShiftConfig cfg;
  cfg.p = 500;
  cfg.n_p_train = 2000;
  cfg.n_q_train_grid = {50, 200, 1000};
  cfg.replications = 5;
  cfg.arch.depth_l = 3;
  cfg.arch.width_n = 50;
  cfg.arch.n_select = 20;
  return cfg;
}

void validate_config(const PosteriorShiftConfig& cfg) {
  if (cfg.r < 4) {
    throw ValidationError("posterior config: the regression truth needs at least four factors");
  }
  if (cfg.p < 5) {
    throw ValidationError(
        "posterior config: the regression truth needs at least five idiosyncratic entries");
  }
  if (cfg.r > cfg.p) throw ValidationError("posterior config: r cannot exceed p");
  if (cfg.r_bar < 1 || cfg.r_bar > cfg.p) {
    throw ValidationError("posterior config: r_bar must lie in [1, p]");
  }
  if (cfg.n_p_train < 1) throw ValidationError("posterior config: source training set is empty");
  if (!(cfg.valid_fraction > 0.0 && cfg.valid_fraction < 1.0)) {
    throw ValidationError("posterior config: validation fraction must lie in (0, 1)");
  }
  if (cfg.n_unlabeled < cfg.r_bar) {
    throw ValidationError("posterior config: projection needs at least r_bar unlabeled rows");
  }
  if (cfg.n_test < 1) throw ValidationError("posterior config: test set is empty");
  if (cfg.n_q_train_grid.empty()) {
    throw ValidationError("posterior config: target sample-size grid must be non-empty");
  }
  for (std::size_t n : cfg.n_q_train_grid) {
    if (n < 1) throw ValidationError("posterior config: target sample sizes must be positive");
  }
  if (!(cfg.noise_sd >= 0.0) || !std::isfinite(cfg.noise_sd)) {
    throw ValidationError("posterior config: noise sd must be finite and nonnegative");
  }
  if (cfg.replications < 1) throw ValidationError("posterior config: needs at least one replication");
  if (cfg.methods.empty()) throw ValidationError("posterior config: method list is empty");
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.methods.size(); ++j) {
      if (cfg.methods[i] == cfg.methods[j]) {
        throw ValidationError("posterior config: methods must be distinct");
      }
    }
  }
}

Matrix gen_loading_source(std::size_t p, std::size_t r, Rng& rng) {
  const double a = std::sqrt(3.0);
  Matrix b(p, r);
  double* out = b.data();
  for (std::size_t i = 0; i < p * r; ++i) out[i] = rng.uniform(-a, a);
  return b;
}

Matrix gen_loading_target(const Matrix& b_p, double shift_scale, Rng& rng) {
  if (!(shift_scale >= 0.0) || !std::isfinite(shift_scale)) {
    throw ValidationError("gen_loading_target: shift scale must be finite and nonnegative");
  }
  Matrix b = b_p;
  double* out = b.data();
  for (std::size_t i = 0; i < b.rows() * b.cols(); ++i) out[i] += rng.rademacher(shift_scale);
  return b;
}

FactorData gen_factor_data(const Matrix& b, std::size_t n, Rng& rng) {
  const std::size_t p = b.rows();
  const std::size_t r = b.cols();
  FactorData d{Matrix(n, p), Matrix(n, r), Matrix(n, p)};
  double* f = d.f.data();
  for (std::size_t i = 0; i < n * r; ++i) f[i] = rng.uniform(-1.0, 1.0);
  double* u = d.u.data();
  for (std::size_t i = 0; i < n * p; ++i) u[i] = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < r; ++k) s += d.f(i, k) * b(j, k);
      d.x(i, j) = s + d.u(i, j);
    }
  }
  return d;
}

double gp_truth(std::span<const double> f, std::span<const double> u) {
  if (f.size() < 4) throw ValidationError("gp_truth: needs at least four factors");
  if (u.size() < 5) throw ValidationError("gp_truth: needs at least five idiosyncratic entries");
  if (u[3] <= -3.0) throw DataError("gp_truth: log argument is out of domain (u4 <= -3)");
  return f[0] + std::sin(f[1]) + f[2] * f[3] * f[3] + u[0] + u[1] * u[1] * u[2] +
         std::log(3.0 + u[3]) + std::tan(u[4]);
}

double gq_truth(std::span<const double> f, std::span<const double> u, double gp_value) {
  if (f.size() < 2) throw ValidationError("gq_truth: needs at least two factors");
  if (u.size() < 3) throw ValidationError("gq_truth: needs at least three idiosyncratic entries");
  return f[0] - f[1] + u[2] + gp_value;
}

void ExperimentResult::sort_canonical() {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.n_p, a.n_q, a.method, a.metric, a.rep, a.seed) <
           std::tie(b.n_p, b.n_q, b.method, b.metric, b.rep, b.seed);
  });
}

std::string ExperimentResult::to_csv() const {
  std::string out = "rep,method,n_p,n_q,metric,value,seed\n";
  for (const ResultRow& row : rows) {
    if (!std::isfinite(row.value)) {
      throw ValidationError("experiment result: non-finite metric value");
    }
    out += std::to_string(row.rep);
    out += ',';
    out += row.method;
    out += ',';
    out += std::to_string(row.n_p);
    out += ',';
    out += std::to_string(row.n_q);
    out += ',';
    out += row.metric;
    out += ',';
    out += format_double(row.value);
    out += ',';
    out += std::to_string(row.seed);
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> covariate_rows_for_rep(const CovariateShiftConfig& cfg, std::size_t rep) {
  const std::uint64_t rep_seed = Rng::derive(cfg.master_seed, rep);
  std::vector<ResultRow> rows;
  rows.reserve(cfg.n_p_grid.size() * cfg.n_q_values.size() * 3);
  std::size_t cell = 0;
  for (std::size_t n_p : cfg.n_p_grid) {
    for (std::size_t n_q : cfg.n_q_values) {
      Rng rng(Rng::derive(rep_seed, cell++));
      const Matrix b_p = gen_loading_source(cfg.p, cfg.r, rng);
      const Matrix b_q = gen_loading_target(b_p, cfg.loading_shift_scale, rng);
      const Matrix x_p = gen_factor_data(b_p, n_p, rng).x;
      const Matrix x_q = gen_factor_data(b_q, n_q, rng).x;

      const CovarianceBundle bundle = make_covariance_bundle(x_p, x_q);
      const double delta = default_threshold(cfg.r, cfg.p, n_p + n_q);
      const DiversifiedProjection w_tl = transfer_projection(bundle, cfg.r_bar, delta);
      const DiversifiedProjection w_q =
          diversified_projection(bundle.sigma_q, cfg.r_bar, CovarianceSource::Target);
      const DiversifiedProjection w_p =
          diversified_projection(bundle.sigma_p, cfg.r_bar, CovarianceSource::Source);

      rows.push_back({rep, kTransferEstimator, n_p, n_q, "nu_min",
                      alignment_extremes(w_tl, b_q).first, rep_seed});
      rows.push_back({rep, kTargetOnlyEstimator, n_p, n_q, "nu_min",
                      alignment_extremes(w_q, b_q).first, rep_seed});
      rows.push_back({rep, kSourceOnlyEstimator, n_p, n_q, "nu_min",
                      alignment_extremes(w_p, b_q).first, rep_seed});
    }
  }
  return rows;
}

namespace {

std::size_t valid_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// One freshly drawn block with labels and the noiseless truth behind them.
struct LabeledBlock {
  FactorData data;
  std::vector<double> y;
  std::vector<double> truth;
};

LabeledBlock draw_block(const Matrix& b, std::size_t n, bool target, double noise_sd, Rng& rng) {
  LabeledBlock block{gen_factor_data(b, n, rng), {}, {}};
  block.y.resize(n);
  block.truth.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double gp = gp_truth(block.data.f.row(i), block.data.u.row(i));
    block.truth[i] =
        target ? gq_truth(block.data.f.row(i), block.data.u.row(i), gp) : gp;
    block.y[i] = block.truth[i] + noise_sd * rng.gaussian();
  }
  return block;
}

// Design matrix for the infeasible benchmark: true factors, the five relevant
// idiosyncratic entries, and the true source regression value.
Matrix oracle_design(const FactorData& d) {
  const std::size_t n = d.f.rows();
  const std::size_t r = d.f.cols();
  Matrix design(n, r + 6);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < r; ++k) design(i, k) = d.f(i, k);
    for (std::size_t k = 0; k < 5; ++k) design(i, r + k) = d.u(i, k);
    design(i, r + 5) = gp_truth(d.f.row(i), d.u.row(i));
  }
  return design;
}

template <typename PerRep>
ExperimentResult run_replications(std::size_t replications, std::size_t threads, PerRep per_rep) {
  std::vector<std::vector<ResultRow>> slots(replications);
  if (threads <= 1) {
    for (std::size_t rep = 0; rep < replications; ++rep) slots[rep] = per_rep(rep);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (;;) {
        const std::size_t rep = next.fetch_add(1);
        if (rep >= replications) return;
        try {
          slots[rep] = per_rep(rep);
        } catch (...) {
          std::scoped_lock lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(threads, replications);
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  ExperimentResult result;
  for (std::vector<ResultRow>& rows : slots) {
    result.rows.insert(result.rows.end(), std::make_move_iterator(rows.begin()),
                       std::make_move_iterator(rows.end()));
  }
  result.sort_canonical();
  return result;
}

}  // namespace

std::vector<ResultRow> posterior_rows_for_rep(const PosteriorShiftConfig& cfg, std::size_t rep) {
  // stream map, everything derived from the per-replication seed:
  //   0 loadings, 1 source data, 2 source factor-augmented training,
  //   3 source vanilla training; per grid index j: 100+j target data,
  //   200+j fan-lasso fine-tune, 300+j vanilla fine-tune, 400+j oracle
  const std::uint64_t rep_seed = Rng::derive(cfg.master_seed, rep);
  std::vector<ResultRow> rows;

  auto enabled = [&](Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };

  Rng loading_rng(Rng::derive(rep_seed, 0));
  const Matrix b_p = gen_loading_source(cfg.p, cfg.r, loading_rng);
  const Matrix b_q = gen_loading_target(b_p, cfg.loading_shift_scale, loading_rng);

  Rng source_rng(Rng::derive(rep_seed, 1));
  const LabeledBlock src_train =
      draw_block(b_p, cfg.n_p_train, false, cfg.noise_sd, source_rng);
  const LabeledBlock src_valid = draw_block(
      b_p, valid_count(cfg.valid_fraction, cfg.n_p_train), false, cfg.noise_sd, source_rng);
  const Matrix src_unlabeled = gen_factor_data(b_p, cfg.n_unlabeled, source_rng).x;

  // source models are target-independent, so they are fit once per
  // replication and shared across the whole n_q grid
  std::optional<FastNnModel> fast_source;
  if (enabled(Method::FanLasso) || enabled(Method::FastNnSourceOnly)) {
    try {
      const SourceTrainData sdata{src_unlabeled,
                                  {src_train.data.x, src_train.y},
                                  {src_valid.data.x, src_valid.y}};
      TrainConfig tc = cfg.train;
      tc.seed = Rng::derive(rep_seed, 2);
      fast_source = train_source(sdata, cfg.r_bar, cfg.arch, tc);
    } catch (const std::exception&) {
      fast_source.reset();
    }
  }
  std::optional<VanillaModel> vanilla_source;
  if (enabled(Method::FtVanilla) || enabled(Method::VanillaSourceOnly)) {
    try {
      TrainConfig tc = cfg.train;
      tc.seed = Rng::derive(rep_seed, 3);
      vanilla_source = train_vanilla({src_train.data.x, src_train.y},
                                     {src_valid.data.x, src_valid.y}, cfg.arch, tc);
    } catch (const std::exception&) {
      vanilla_source.reset();
    }
  }

  for (std::size_t j = 0; j < cfg.n_q_train_grid.size(); ++j) {
    const std::size_t n_q = cfg.n_q_train_grid[j];
    Rng target_rng(Rng::derive(rep_seed, 100 + j));
    const LabeledBlock tgt_train = draw_block(b_q, n_q, true, cfg.noise_sd, target_rng);
    const LabeledBlock tgt_valid = draw_block(
        b_q, valid_count(cfg.valid_fraction, n_q), true, cfg.noise_sd, target_rng);
    const Matrix tgt_unlabeled = gen_factor_data(b_q, cfg.n_unlabeled, target_rng).x;
    const LabeledBlock tgt_test = draw_block(b_q, cfg.n_test, true, cfg.noise_sd, target_rng);

    auto emit = [&](Method m, const std::function<EvalReport()>& body) {
      if (!enabled(m)) return;
      try {
        const EvalReport report = body();
        rows.push_back(
            {rep, method_name(m), cfg.n_p_train, n_q, "rmse", report.rmse, rep_seed});
        if (report.excess_mse) {
          rows.push_back({rep, method_name(m), cfg.n_p_train, n_q, "excess_rmse",
                          std::sqrt(*report.excess_mse), rep_seed});
        }
      } catch (const std::exception&) {
        rows.push_back({rep, method_name(m), cfg.n_p_train, n_q, "error", 1.0, rep_seed});
      }
    };

    emit(Method::FanLasso, [&] {
      if (!fast_source) throw ConvergenceError("posterior experiment: source training failed");
      const CovarianceBundle bundle = make_covariance_bundle(src_unlabeled, tgt_unlabeled);
      const double delta = default_threshold(cfg.r, cfg.p, 2 * cfg.n_unlabeled);
      const DiversifiedProjection w_tl = transfer_projection(bundle, cfg.r_bar, delta);
      TrainConfig tc = cfg.train;
      tc.seed = Rng::derive(rep_seed, 200 + j);
      const FineTunedModel model =
          train_finetune(*fast_source, {tgt_train.data.x, tgt_train.y},
                         {tgt_valid.data.x, tgt_valid.y}, w_tl, cfg.arch, tc);
      return evaluate([&](std::span<const double> x) { return finetune_predict(model, x); },
                      tgt_test.data.x, tgt_test.y, tgt_test.truth);
    });

    emit(Method::FtVanilla, [&] {
      if (!vanilla_source) throw ConvergenceError("posterior experiment: source training failed");
      TrainConfig tc = cfg.train;
      tc.seed = Rng::derive(rep_seed, 300 + j);
      const VanillaFineTunedModel model =
          train_vanilla_finetune(*vanilla_source, {tgt_train.data.x, tgt_train.y},
                                 {tgt_valid.data.x, tgt_valid.y}, cfg.arch, tc);
      return evaluate(
          [&](std::span<const double> x) { return vanilla_finetune_predict(model, x); },
          tgt_test.data.x, tgt_test.y, tgt_test.truth);
    });

    emit(Method::FastNnSourceOnly, [&] {
      if (!fast_source) throw ConvergenceError("posterior experiment: source training failed");
      return evaluate(
          [&](std::span<const double> x) { return fast_nn_predict(*fast_source, x); },
          tgt_test.data.x, tgt_test.y, tgt_test.truth);
    });

    emit(Method::VanillaSourceOnly, [&] {
      if (!vanilla_source) throw ConvergenceError("posterior experiment: source training failed");
      return evaluate([&](std::span<const double> x) { return vanilla_predict(*vanilla_source, x); },
                      tgt_test.data.x, tgt_test.y, tgt_test.truth);
    });

    emit(Method::Oracle, [&] {
      const Matrix train_design = oracle_design(tgt_train.data);
      const Matrix valid_design = oracle_design(tgt_valid.data);
      const Matrix test_design = oracle_design(tgt_test.data);
      TrainConfig tc = cfg.train;
      tc.seed = Rng::derive(rep_seed, 400 + j);
      const VanillaModel model = train_oracle({train_design, tgt_train.y},
                                              {valid_design, tgt_valid.y}, cfg.arch, tc);
      return evaluate([&](std::span<const double> x) { return vanilla_predict(model, x); },
                      test_design, tgt_test.y, tgt_test.truth);
    });
  }
  return rows;
}

ExperimentResult run_covariate_experiment(const CovariateShiftConfig& cfg, std::size_t threads) {
  validate_config(cfg);
  return run_replications(cfg.replications, threads,
                          [&](std::size_t rep) { return covariate_rows_for_rep(cfg, rep); });
}

ExperimentResult run_posterior_experiment(const PosteriorShiftConfig& cfg, std::size_t threads) {
  validate_config(cfg);
  return run_replications(cfg.replications, threads,
                          [&](std::size_t rep) { return posterior_rows_for_rep(cfg, rep); });
}

}  // namespace fanlasso
