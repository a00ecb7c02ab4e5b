#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include "fanlasso/linalg.hpp"
#include "fanlasso/matrix.hpp"

namespace fanlasso {

// Where a covariance estimate (and any projection built from it) came from.
enum class CovarianceSource { Target, Pooled, Source, External };

const char* covariance_source_name(CovarianceSource s);

// Uncentered second-moment estimates for the two populations plus their
// sample-size weighted pool. sigma_a == (n_p sigma_p + n_q sigma_q) / (n_p+n_q)
// holds by construction.
struct CovarianceBundle {
  Matrix sigma_p;
  Matrix sigma_q;
  Matrix sigma_a;
  std::size_t n_p = 0;
  std::size_t n_q = 0;
};

// (1/n) X^T X for an n x p sample matrix.
Matrix sample_covariance(const Matrix& x);

Matrix pooled_covariance(const Matrix& sigma_p, std::size_t n_p, const Matrix& sigma_q,
                         std::size_t n_q);

CovarianceBundle make_covariance_bundle(const Matrix& x_source, const Matrix& x_target);

// Data-driven boundary for the covariance-discrepancy test:
//   delta = r sqrt(log p / n) + r^2 sqrt(log r / n) + 1 / sqrt(p)
// with natural logs and n the total sample count behind the estimates.
// r == 0 or r == 1 drops the respective log terms.
double default_threshold(std::size_t r, std::size_t p, std::size_t n);

struct CovarianceChoice {
  Matrix sigma;             // bitwise copy of the chosen bundle member
  CovarianceSource source;  // Pooled or Target (Source for the source-side rule)
};

// Transfer-around-boundary rule for the target side: keep the pooled estimate
// while per-entry discrepancy ||sigma_q - sigma_a||_F / p stays within delta,
// otherwise fall back to the target-only estimate. Ties choose Pooled.
CovarianceChoice select_covariance(const CovarianceBundle& bundle, double delta);

// Same rule for the source side: pooled while ||sigma_p - sigma_a||_F / p is
// within delta, otherwise the source-only estimate.
CovarianceChoice select_source_covariance(const CovarianceBundle& bundle, double delta);

// Projection onto the leading eigenvectors of a covariance estimate, scaled so
// every column has norm sqrt(p). Surrogate factors are then p^{-1} W^T x.
struct DiversifiedProjection {
  Matrix w;  // p x r_bar
  std::size_t r_bar = 0;
  CovarianceSource source = CovarianceSource::External;
  std::optional<double> delta_used;  // threshold behind the selection, when any

  bool operator==(const DiversifiedProjection&) const = default;
};

DiversifiedProjection diversified_projection(const Matrix& sigma, std::size_t r_bar,
                                             CovarianceSource source = CovarianceSource::External,
                                             std::optional<double> delta_used = std::nullopt);

// select_covariance + diversified_projection in one step.
DiversifiedProjection transfer_projection(const CovarianceBundle& bundle, std::size_t r_bar,
                                          double delta);

// Row i of the result is p^{-1} W^T x_i.
Matrix surrogate_factors(const DiversifiedProjection& proj, const Matrix& x);

// p^{-1} W^T B for a true loading matrix B (diagnostics; r_bar x r).
Matrix alignment_matrix(const DiversifiedProjection& proj, const Matrix& b);

// (smallest, largest) singular value of the alignment matrix. The smallest one
// is the figure of merit: it measures how much of the factor space survives
// the projection.
std::pair<double, double> alignment_extremes(const DiversifiedProjection& proj, const Matrix& b);

}  // namespace fanlasso
