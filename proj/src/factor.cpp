#include "fanlasso/factor.hpp"

#include <cmath>
#include <string>

namespace fanlasso {

const char* covariance_source_name(CovarianceSource s) {
  switch (s) {
    case CovarianceSource::Target: return "Target";
    case CovarianceSource::Pooled: return "Pooled";
    case CovarianceSource::Source: return "Source";
    case CovarianceSource::External: return "External";
  }
  return "External";
}

Matrix sample_covariance(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) {
    throw ValidationError("sample_covariance: empty sample matrix");
  }
  if (has_nonfinite(x)) {
    throw ValidationError("sample_covariance: sample matrix has non-finite entries");
  }
  Matrix c = multiply_at_b(x, x);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= inv_n;
  // enforce exact symmetry against accumulation-order roundoff
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = i + 1; j < c.cols(); ++j) c(j, i) = c(i, j);
  return c;
}

Matrix pooled_covariance(const Matrix& sigma_p, std::size_t n_p, const Matrix& sigma_q,
                         std::size_t n_q) {
  if (sigma_p.rows() != sigma_q.rows() || sigma_p.cols() != sigma_q.cols() ||
      sigma_p.rows() != sigma_p.cols()) {
    throw ValidationError("pooled_covariance: shapes disagree");
  }
  if (n_p == 0 || n_q == 0) {
    throw ValidationError("pooled_covariance: sample counts must be positive");
  }
  const double wp = static_cast<double>(n_p) / static_cast<double>(n_p + n_q);
  const double wq = static_cast<double>(n_q) / static_cast<double>(n_p + n_q);
  Matrix out(sigma_p.rows(), sigma_p.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = wp * sigma_p.storage()[i] + wq * sigma_q.storage()[i];
  return out;
}

CovarianceBundle make_covariance_bundle(const Matrix& x_source, const Matrix& x_target) {
  if (x_source.cols() != x_target.cols()) {
    throw ValidationError("make_covariance_bundle: feature dimensions disagree");
  }
  CovarianceBundle b;
  b.n_p = x_source.rows();
  b.n_q = x_target.rows();
  b.sigma_p = sample_covariance(x_source);
  b.sigma_q = sample_covariance(x_target);
  b.sigma_a = pooled_covariance(b.sigma_p, b.n_p, b.sigma_q, b.n_q);
  return b;
}

double default_threshold(std::size_t r, std::size_t p, std::size_t n) {
  if (p == 0 || n == 0) {
    throw ValidationError("default_threshold: p and n must be positive");
  }
  const double rn = static_cast<double>(r);
  const double inv_n = 1.0 / static_cast<double>(n);
  double delta = 1.0 / std::sqrt(static_cast<double>(p));
  if (r >= 1) delta += rn * std::sqrt(std::log(static_cast<double>(p)) * inv_n);
  if (r >= 2) delta += rn * rn * std::sqrt(std::log(rn) * inv_n);
  return delta;
}

namespace {

double discrepancy_per_dim(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.storage()[i] - b.storage()[i];
    s += d * d;
  }
  return std::sqrt(s) / static_cast<double>(a.rows());
}

}  // namespace

CovarianceChoice select_covariance(const CovarianceBundle& bundle, double delta) {
  if (delta < 0.0 || !std::isfinite(delta)) {
    throw ValidationError("select_covariance: delta must be finite and nonnegative");
  }
  if (discrepancy_per_dim(bundle.sigma_q, bundle.sigma_a) <= delta) {
    return {bundle.sigma_a, CovarianceSource::Pooled};
  }
  return {bundle.sigma_q, CovarianceSource::Target};
}

CovarianceChoice select_source_covariance(const CovarianceBundle& bundle, double delta) {
  if (delta < 0.0 || !std::isfinite(delta)) {
    throw ValidationError("select_source_covariance: delta must be finite and nonnegative");
  }
  if (discrepancy_per_dim(bundle.sigma_p, bundle.sigma_a) <= delta) {
    return {bundle.sigma_a, CovarianceSource::Pooled};
  }
  return {bundle.sigma_p, CovarianceSource::Source};
}

DiversifiedProjection diversified_projection(const Matrix& sigma, std::size_t r_bar,
                                             CovarianceSource source,
                                             std::optional<double> delta_used) {
  const std::size_t p = sigma.rows();
  if (r_bar < 1 || r_bar > p) {
    throw ValidationError("diversified_projection: r_bar must lie in [1, p]");
  }
  const EigenResult eig = sym_eig_topk(sigma, r_bar);
  DiversifiedProjection proj;
  proj.r_bar = r_bar;
  proj.source = source;
  proj.delta_used = delta_used;
  proj.w = eig.eigenvectors;
  const double scale = std::sqrt(static_cast<double>(p));
  for (std::size_t i = 0; i < proj.w.size(); ++i) proj.w.data()[i] *= scale;
  return proj;
}

DiversifiedProjection transfer_projection(const CovarianceBundle& bundle, std::size_t r_bar,
                                          double delta) {
  const CovarianceChoice choice = select_covariance(bundle, delta);
  return diversified_projection(choice.sigma, r_bar, choice.source, delta);
}

Matrix surrogate_factors(const DiversifiedProjection& proj, const Matrix& x) {
  if (x.cols() != proj.w.rows()) {
    throw ValidationError("surrogate_factors: sample dimension does not match projection");
  }
  Matrix f = multiply(x, proj.w);
  const double inv_p = 1.0 / static_cast<double>(proj.w.rows());
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] *= inv_p;
  return f;
}

Matrix alignment_matrix(const DiversifiedProjection& proj, const Matrix& b) {
  if (b.rows() != proj.w.rows()) {
    throw ValidationError("alignment_matrix: loading matrix dimension mismatch");
  }
  Matrix h = multiply_at_b(proj.w, b);
  const double inv_p = 1.0 / static_cast<double>(proj.w.rows());
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] *= inv_p;
  return h;
}

std::pair<double, double> alignment_extremes(const DiversifiedProjection& proj, const Matrix& b) {
  return singular_extremes(alignment_matrix(proj, b));
}

}  // namespace fanlasso
