#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fanlasso/factor.hpp"
#include "fanlasso/linalg.hpp"
#include "fanlasso/rng.hpp"

using namespace fanlasso;

namespace {

// Naive uncentered covariance: explicit triple loop, no shared code with the
// library implementation.
Matrix naive_covariance(const Matrix& x) {
  Matrix c(x.cols(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j)
    for (std::size_t k = 0; k < x.cols(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j) * x(i, k);
      c(j, k) = s / static_cast<double>(x.rows());
    }
  return c;
}

Matrix runif_matrix(std::size_t n, std::size_t p, Rng& rng) {
  Matrix x(n, p);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2.0, 2.0);
  return x;
}

// x_i = B f_i + u_i with b ~ U(-sqrt(3), sqrt(3)) and f, u ~ U(-1, 1).
Matrix factor_data(const Matrix& b, std::size_t n, Rng& rng) {
  const std::size_t p = b.rows(), r = b.cols();
  Matrix f(n, r);
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1.0, 1.0);
  Matrix x = multiply_a_bt(f, b);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x(i, j) += rng.uniform(-1.0, 1.0);
  return x;
}

Matrix random_loading(std::size_t p, std::size_t r, Rng& rng) {
  const double s = std::sqrt(3.0);
  Matrix b(p, r);
  for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-s, s);
  return b;
}

}  // namespace

TEST_CASE("sample covariance equals the naive triple loop") {
  Rng rng(11u);
  const Matrix x = runif_matrix(17, 6, rng);
  const Matrix c = sample_covariance(x);
  const Matrix naive = naive_covariance(x);
  REQUIRE(c.rows() == 6);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(std::fabs(c.storage()[i] - naive.storage()[i]) < 1e-12);
  // exactly symmetric, and PSD up to roundoff
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) CHECK(c(i, j) == c(j, i));
  const EigenResult eig = sym_eig_topk(c, c.rows());
  CHECK(eig.eigenvalues.back() >= -1e-8);
}

TEST_CASE("sample covariance is uncentered") {
  // constant column: mean removal would zero it out, second moments keep it
  Matrix x(4, 1);
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = 2.0;
  CHECK(sample_covariance(x)(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("pooled covariance is the sample-size weighted average") {
  Rng rng(12u);
  const Matrix xp = runif_matrix(13, 5, rng);
  const Matrix xq = runif_matrix(7, 5, rng);
  const Matrix sp = sample_covariance(xp);
  const Matrix sq = sample_covariance(xq);
  const Matrix sa = pooled_covariance(sp, 13, sq, 7);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double expected = (13.0 * sp.storage()[i] + 7.0 * sq.storage()[i]) / 20.0;
    CHECK(std::fabs(sa.storage()[i] - expected) <= 1e-12);
  }
  const CovarianceBundle bundle = make_covariance_bundle(xp, xq);
  CHECK(bundle.n_p == 13);
  CHECK(bundle.n_q == 7);
  CHECK(bundle.sigma_p == sp);
  CHECK(bundle.sigma_q == sq);
  CHECK(bundle.sigma_a == sa);
}

TEST_CASE("default threshold frozen values") {
  // Frozen against independent arithmetic:
  CHECK(std::fabs(default_threshold(4, 1000, 307) - 1.7068072931) < 1e-6);
  CHECK(std::fabs(default_threshold(2, 100, 450) - 0.4593116203) < 1e-6);
  // r = 1 drops the r^2 sqrt(log r / n) term
  CHECK(std::fabs(default_threshold(1, 50, 100) - 0.3392097028) < 1e-6);
  // r = 0 leaves only the 1/sqrt(p) term
  CHECK(default_threshold(0, 100, 50) == doctest::Approx(0.1));
}

TEST_CASE("default threshold monotonicity and validation") {
  CHECK(default_threshold(3, 200, 100) > default_threshold(2, 200, 100));
  CHECK(default_threshold(2, 200, 400) < default_threshold(2, 200, 100));
  CHECK_THROWS_AS(default_threshold(2, 0, 100), ValidationError);
  CHECK_THROWS_AS(default_threshold(2, 200, 0), ValidationError);
}

TEST_CASE("covariance selection keeps the pooled estimate inside the boundary") {
  Rng rng(13u);
  const Matrix xp = runif_matrix(40, 4, rng);
  const CovarianceBundle same = make_covariance_bundle(xp, xp);
  // identical populations: discrepancy 0, any nonnegative delta pools
  const CovarianceChoice pooled = select_covariance(same, 0.0);
  CHECK(pooled.source == CovarianceSource::Pooled);
  CHECK(pooled.sigma == same.sigma_a);

  Matrix xq = runif_matrix(40, 4, rng);
  for (std::size_t i = 0; i < xq.size(); ++i) xq.data()[i] *= 40.0;  // gross mismatch
  const CovarianceBundle far = make_covariance_bundle(xp, xq);
  const CovarianceChoice target = select_covariance(far, 1e-3);
  CHECK(target.source == CovarianceSource::Target);
  CHECK(target.sigma == far.sigma_q);
}

TEST_CASE("covariance selection tie goes to the pooled estimate") {
  Rng rng(14u);
  const CovarianceBundle bundle =
      make_covariance_bundle(runif_matrix(30, 3, rng), runif_matrix(10, 3, rng));
  Matrix diff = bundle.sigma_q;
  for (std::size_t i = 0; i < diff.size(); ++i) diff.data()[i] -= bundle.sigma_a.storage()[i];
  const double crit = frobenius_norm(diff) / 3.0;
  CHECK(select_covariance(bundle, crit).source == CovarianceSource::Pooled);
  CHECK(select_covariance(bundle, std::nextafter(crit, 0.0)).source == CovarianceSource::Target);
}

TEST_CASE("covariance selection is monotone in the threshold") {
  Rng rng(15u);
  for (int t = 0; t < 10; ++t) {
    const CovarianceBundle bundle =
        make_covariance_bundle(factor_data(random_loading(12, 2, rng), 25, rng),
                               factor_data(random_loading(12, 2, rng), 9, rng));
    double lo = rng.uniform(0.0, 1.0), hi = lo + rng.uniform(0.0, 1.0);
    const auto a = select_covariance(bundle, lo);
    const auto b = select_covariance(bundle, hi);
    if (a.source == CovarianceSource::Pooled) CHECK(b.source == CovarianceSource::Pooled);
  }
}

TEST_CASE("source-side selection mirrors the target rule") {
  Rng rng(16u);
  const Matrix xp = runif_matrix(20, 4, rng);
  const CovarianceBundle same = make_covariance_bundle(xp, xp);
  CHECK(select_source_covariance(same, 0.0).source == CovarianceSource::Pooled);

  Matrix xq = runif_matrix(60, 4, rng);
  for (std::size_t i = 0; i < xq.size(); ++i) xq.data()[i] *= 25.0;
  const CovarianceBundle far = make_covariance_bundle(xp, xq);
  const CovarianceChoice src = select_source_covariance(far, 1e-3);
  CHECK(src.source == CovarianceSource::Source);
  CHECK(src.sigma == far.sigma_p);
}

TEST_CASE("pooling wins with high probability when populations coincide") {
  // p=100, r=2, n_p=400, n_q=50, no loading shift: the boundary rule should
  // keep the pooled estimate in at least 95% of replications
  const std::size_t p = 100, r = 2, n_p = 400, n_q = 50;
  const double delta = default_threshold(r, p, n_p + n_q);
  int pooled_count = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(Rng::derive(909u, static_cast<std::uint64_t>(rep)));
    const Matrix b = random_loading(p, r, rng);
    const CovarianceBundle bundle =
        make_covariance_bundle(factor_data(b, n_p, rng), factor_data(b, n_q, rng));
    if (select_covariance(bundle, delta).source == CovarianceSource::Pooled) ++pooled_count;
  }
  CHECK(pooled_count >= 48);
}

TEST_CASE("diversified projection column scaling and orientation") {
  const std::size_t p = 6;
  Matrix sigma(p, p);
  for (std::size_t i = 0; i < p; ++i) sigma(i, i) = 1.0;
  sigma(0, 0) = 9.0;
  sigma(1, 1) = 4.0;
  const DiversifiedProjection proj = diversified_projection(sigma, 2, CovarianceSource::External);
  REQUIRE(proj.w.cols() == 2);
  CHECK(proj.r_bar == 2);
  CHECK_FALSE(proj.delta_used.has_value());
  // leading directions are e1 and e2 scaled to norm sqrt(p), positive by the
  // sign convention
  CHECK(proj.w(0, 0) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-10));
  CHECK(proj.w(1, 1) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-10));
  for (std::size_t j = 0; j < 2; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < p; ++i) norm += proj.w(i, j) * proj.w(i, j);
    CHECK(std::fabs(std::sqrt(norm) - std::sqrt(static_cast<double>(p))) < 1e-8);
  }
  // mutual orthogonality scaled by p
  double dot = 0.0;
  for (std::size_t i = 0; i < p; ++i) dot += proj.w(i, 0) * proj.w(i, 1);
  CHECK(std::fabs(dot) < 1e-6 * static_cast<double>(p));
}

TEST_CASE("diversified projection column norms on random covariances") {
  Rng rng(17u);
  const Matrix x = runif_matrix(40, 15, rng);
  const DiversifiedProjection proj =
      diversified_projection(sample_covariance(x), 5, CovarianceSource::Target);
  for (std::size_t j = 0; j < 5; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < 15; ++i) norm += proj.w(i, j) * proj.w(i, j);
    CHECK(std::fabs(std::sqrt(norm) - std::sqrt(15.0)) < 1e-8);
  }
  CHECK_THROWS_AS(diversified_projection(sample_covariance(x), 16, CovarianceSource::Target),
                  ValidationError);
}

TEST_CASE("transfer projection records the selection it made") {
  Rng rng(18u);
  const Matrix b = random_loading(30, 2, rng);
  const CovarianceBundle bundle =
      make_covariance_bundle(factor_data(b, 80, rng), factor_data(b, 20, rng));
  const double delta = default_threshold(2, 30, 100);
  const DiversifiedProjection proj = transfer_projection(bundle, 2, delta);
  CHECK((proj.source == CovarianceSource::Pooled || proj.source == CovarianceSource::Target));
  REQUIRE(proj.delta_used.has_value());
  CHECK(*proj.delta_used == delta);
  CHECK(proj.w.rows() == 30);
  CHECK(proj.w.cols() == 2);
}

TEST_CASE("surrogate factors match the per-row definition") {
  Rng rng(19u);
  const Matrix x = runif_matrix(9, 12, rng);
  const DiversifiedProjection proj =
      diversified_projection(sample_covariance(x), 3, CovarianceSource::Target);
  const Matrix f = surrogate_factors(proj, x);
  REQUIRE(f.rows() == 9);
  REQUIRE(f.cols() == 3);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < 12; ++l) s += proj.w(l, j) * x(i, l);
      CHECK(std::fabs(f(i, j) - s / 12.0) < 1e-12);
    }
}

TEST_CASE("alignment of a projection built from the true loading span") {
  // B = sqrt(p) V with V orthonormal makes p^{-1} W^T B the identity when W
  // shares the span, so both alignment extremes are exactly 1
  const std::size_t p = 8;
  Matrix sigma(p, p);
  for (std::size_t i = 0; i < p; ++i) sigma(i, i) = i < 2 ? 5.0 - static_cast<double>(i) : 0.5;
  const DiversifiedProjection proj = diversified_projection(sigma, 2, CovarianceSource::External);
  Matrix b(p, 2);
  b(0, 0) = std::sqrt(static_cast<double>(p));
  b(1, 1) = std::sqrt(static_cast<double>(p));
  const Matrix h = alignment_matrix(proj, b);
  REQUIRE(h.rows() == 2);
  REQUIRE(h.cols() == 2);
  CHECK(std::fabs(h(0, 0) - 1.0) < 1e-10);
  CHECK(std::fabs(h(1, 1) - 1.0) < 1e-10);
  CHECK(std::fabs(h(0, 1)) < 1e-10);
  const auto [lo, hi] = alignment_extremes(proj, b);
  CHECK(lo == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("alignment shape validation") {
  Matrix sigma = Matrix::identity(5);
  const DiversifiedProjection proj = diversified_projection(sigma, 2, CovarianceSource::External);
  Matrix wrong(4, 2);
  CHECK_THROWS_AS(alignment_matrix(proj, wrong), ValidationError);
  Matrix x_wrong(3, 4);
  CHECK_THROWS_AS(surrogate_factors(proj, x_wrong), ValidationError);
}
