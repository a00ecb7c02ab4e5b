#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fanlasso/fastnn.hpp"
#include "fanlasso/matrix.hpp"
#include "fanlasso/rng.hpp"

namespace fanlasso {

// Eigenspace-transfer experiment: how well each candidate projection aligns
// with the target loading space as the source sample grows. The defaults are
// the full-scale study; covariate_desk_preset shrinks it to laptop scale.
struct CovariateShiftConfig {
  std::size_t p = 1000;
  std::size_t r = 4;
  // projection dimension: deliberately overshoots r, matching the estimation
  // pipeline; the drift threshold still uses the true r
  std::size_t r_bar = 10;
  std::vector<std::size_t> n_p_grid = {100, 150, 200, 250, 300};
  std::vector<std::size_t> n_q_values = {7, 10};
  double loading_shift_scale = 0.5;
  std::size_t replications = 100;
  std::uint64_t master_seed = 42;

  bool operator==(const CovariateShiftConfig&) const = default;
};

CovariateShiftConfig covariate_paper_preset();
CovariateShiftConfig covariate_desk_preset();

void validate_config(const CovariateShiftConfig& cfg);

// Estimators compared in the regression-transfer experiment.
enum class Method { FanLasso, FtVanilla, FastNnSourceOnly, VanillaSourceOnly, Oracle };

const char* method_name(Method m);
Method parse_method(std::string_view name);

// Regression-transfer experiment: test RMSE of the fine-tuned estimators and
// the source-only baselines as the labeled target sample grows.
struct PosteriorShiftConfig {
  std::size_t p = 5000;
  std::size_t r = 4;
  double loading_shift_scale = 0.1;
  std::size_t n_p_train = 5000;
  double valid_fraction = 0.1;
  std::size_t n_unlabeled = 100;
  std::size_t n_test = 100;
  std::vector<std::size_t> n_q_train_grid = {50,   100,  200,  500,  1000, 1500, 2000,
                                             2500, 3000, 3500, 4000, 4500, 5000};
  double noise_sd = 0.5;
  std::size_t replications = 100;
  std::uint64_t master_seed = 42;
  std::vector<Method> methods = {Method::FanLasso, Method::FtVanilla, Method::FastNnSourceOnly,
                                 Method::VanillaSourceOnly, Method::Oracle};
  std::size_t r_bar = 10;
  ArchConfig arch;
  // cfg.train.seed is ignored here: every replication derives its own seed
  // from master_seed so runs are order independent
  TrainConfig train;

  bool operator==(const PosteriorShiftConfig&) const = default;
};

PosteriorShiftConfig posterior_paper_preset();
PosteriorShiftConfig posterior_desk_preset();

void validate_config(const PosteriorShiftConfig& cfg);

// Method tokens for the covariate experiment rows.
inline constexpr const char* kTransferEstimator = "Transfer";
inline constexpr const char* kTargetOnlyEstimator = "TargetOnly";
inline constexpr const char* kSourceOnlyEstimator = "SourceOnly";

struct ResultRow {
  std::size_t rep = 0;
  std::string method;
  std::size_t n_p = 0;
  std::size_t n_q = 0;
  std::string metric;  // "nu_min", "rmse", "excess_rmse" or "error"
  double value = 0.0;
  std::uint64_t seed = 0;  // per-replication derived seed

  bool operator==(const ResultRow&) const = default;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;

  // order rows by (n_p, n_q, method, metric, rep) so the emitted file does
  // not depend on execution order
  void sort_canonical();
  // header: rep,method,n_p,n_q,metric,value,seed
  std::string to_csv() const;

  bool operator==(const ExperimentResult&) const = default;
};

// Loading matrix with i.i.d. Unif(-sqrt 3, sqrt 3) entries (unit variance).
Matrix gen_loading_source(std::size_t p, std::size_t r, Rng& rng);

// Entrywise shifted copy: each entry moves by exactly +-shift_scale.
Matrix gen_loading_target(const Matrix& b_p, double shift_scale, Rng& rng);

// One sampled block of the factor model x = B f + u with f, u ~ Unif(-1, 1).
struct FactorData {
  Matrix x;  // n x p
  Matrix f;  // n x r
  Matrix u;  // n x p
};

FactorData gen_factor_data(const Matrix& b, std::size_t n, Rng& rng);

// Source regression truth
//   f1 + sin f2 + f3 f4^2 + u1 + u2^2 u3 + log(3 + u4) + tan u5.
// Needs at least four factors and five idiosyncratic entries; u4 <= -3 is a
// domain error (cannot happen under Unif(-1, 1)).
double gp_truth(std::span<const double> f, std::span<const double> u);

// Target regression truth: f1 - f2 + u3 + gp_value.
double gq_truth(std::span<const double> f, std::span<const double> u, double gp_value);

// One replication's rows. Exposed so runs can be distributed and reassembled;
// assumes cfg has been validated.
std::vector<ResultRow> covariate_rows_for_rep(const CovariateShiftConfig& cfg, std::size_t rep);
std::vector<ResultRow> posterior_rows_for_rep(const PosteriorShiftConfig& cfg, std::size_t rep);

// Full drivers: validate, run every replication (optionally across threads),
// merge and sort. Output is identical for any thread count.
ExperimentResult run_covariate_experiment(const CovariateShiftConfig& cfg, std::size_t threads = 1);
ExperimentResult run_posterior_experiment(const PosteriorShiftConfig& cfg, std::size_t threads = 1);

}  // namespace fanlasso
