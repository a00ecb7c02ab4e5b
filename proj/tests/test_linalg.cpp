#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fanlasso/linalg.hpp"
#include "fanlasso/matrix.hpp"
#include "fanlasso/rng.hpp"

using namespace fanlasso;

namespace {

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately share no code with the library:
// eigenvalues come from bisection on det(A - lambda I), singular extremes from
// a direction grid refined by power iteration.
// ---------------------------------------------------------------------------

double det_shifted(const Matrix& a, double lambda) {
  const std::size_t n = a.rows();
  Matrix m = a;
  for (std::size_t i = 0; i < n; ++i) m(i, i) -= lambda;
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(m(r, c)) > std::fabs(m(piv, c))) piv = r;
    if (m(piv, c) == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(c, j));
      det = -det;
    }
    det *= m(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m(r, c) / m(c, c);
      for (std::size_t j = c; j < n; ++j) m(r, j) -= f * m(c, j);
    }
  }
  return det;
}

// All real eigenvalues of a symmetric matrix with a simple spectrum, by
// scanning the Gershgorin interval for sign changes of the characteristic
// polynomial and bisecting each bracket.
std::vector<double> charpoly_eigenvalues(const Matrix& a, int grid = 200000) {
  const std::size_t n = a.rows();
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) radius += std::fabs(a(i, j));
    lo = std::min(lo, a(i, i) - radius);
    hi = std::max(hi, a(i, i) + radius);
  }
  std::vector<double> roots;
  double prev_x = lo, prev_f = det_shifted(a, lo);
  for (int g = 1; g <= grid; ++g) {
    const double x = lo + (hi - lo) * g / grid;
    const double f = det_shifted(a, x);
    if ((prev_f < 0 && f > 0) || (prev_f > 0 && f < 0)) {
      double bl = prev_x, br = x, fl = prev_f;
      while (br - bl > 1e-13) {
        const double mid = 0.5 * (bl + br), fm = det_shifted(a, mid);
        if ((fl < 0) == (fm < 0) && fm != 0.0) {
          bl = mid;
          fl = fm;
        } else {
          br = mid;
        }
      }
      roots.push_back(0.5 * (bl + br));
    }
    prev_x = x;
    prev_f = f;
  }
  return roots;  // ascending
}

// Smallest and largest singular value by maximizing/minimizing ||A u|| over a
// grid of unit directions, refined with (shifted) power iteration on A^T A.
std::pair<double, double> power_singular_extremes(const Matrix& a) {
  const Matrix g = multiply_at_b(a, a);
  const std::size_t n = g.rows();
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out, double shift) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g(i, j) * v[j];
      out[i] = shift == 0.0 ? s : shift * v[i] - s;
    }
  };
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  Rng rng(7151u);
  auto iterate = [&](double shift) {
    // best Rayleigh quotient over a random unit grid as the starting point
    std::vector<double> v(n), w(n), best(n);
    double best_q = -1e300;
    for (int t = 0; t < 2000; ++t) {
      for (auto& x : v) x = rng.gaussian();
      const double nv = norm(v);
      for (auto& x : v) x /= nv;
      apply(v, w, shift);
      double q = 0.0;
      for (std::size_t i = 0; i < n; ++i) q += v[i] * w[i];
      if (q > best_q) {
        best_q = q;
        best = v;
      }
    }
    v = best;
    double lam = 0.0;
    for (int it = 0; it < 20000; ++it) {
      apply(v, w, shift);
      lam = norm(w);
      for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / lam;
    }
    return lam;
  };
  const double lam_max = iterate(0.0);
  const double c = lam_max + 1.0;
  const double lam_min = c - iterate(c);
  return {std::sqrt(std::max(lam_min, 0.0)), std::sqrt(lam_max)};
}

Matrix frozen_6x6() {
  return Matrix(6, 6,
                {4.2, -1.3, 0.7, 2.1, -0.5, 0.3,   -1.3, 3.1, 1.1, -0.2, 0.8, -1.7,
                 0.7, 1.1, 5.6, 0.9, -1.2, 0.4,    2.1, -0.2, 0.9, 2.8, 0.6, -0.9,
                 -0.5, 0.8, -1.2, 0.6, 4.4, 1.5,   0.3, -1.7, 0.4, -0.9, 1.5, 3.9});
}

Matrix frozen_5x3() {
  return Matrix(5, 3, {1.2, -0.4, 0.9, 0.3, 2.1, -1.5, -0.7, 0.5, 0.8, 1.9, -0.2, 0.1,
                       -0.6, 1.1, 1.4});
}

Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(-2.0, 2.0);
  return a;
}

}  // namespace

TEST_CASE("eigendecomposition reproduces characteristic polynomial roots") {
  const Matrix a = frozen_6x6();
  // Frozen output of the bisection oracle (ascending):
  const std::vector<double> expected = {0.009469071793, 1.108280544970, 4.576152614282,
                                        5.018764812797, 6.161047046722, 7.126285909436};
  const std::vector<double> oracle = charpoly_eigenvalues(a);
  REQUIRE(oracle.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(oracle[i] - expected[i]) < 1e-9);

  const EigenResult r = sym_eig_topk(a, 6);
  REQUIRE(r.eigenvalues.size() == 6);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(std::fabs(r.eigenvalues[i] - expected[5 - i]) <= 1e-8);
  CHECK(check_eigen_result(a, r));
}

TEST_CASE("eigendecomposition of a 2x2 with known closed form") {
  const Matrix a(2, 2, {2.0, 1.0, 1.0, 2.0});
  const EigenResult r = sym_eig_topk(a, 2);
  CHECK(r.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(std::fabs(r.eigenvectors(0, 0) - s) < 1e-10);
  CHECK(std::fabs(r.eigenvectors(1, 0) - s) < 1e-10);
  CHECK(std::fabs(std::fabs(r.eigenvectors(0, 1)) - s) < 1e-10);
  // sign convention: largest-magnitude entry positive, earliest index on ties
  CHECK(r.eigenvectors(0, 1) > 0.0);
  CHECK(r.eigenvectors(1, 1) < 0.0);
}

TEST_CASE("diagonal matrix returns sorted top-k pairs") {
  Matrix a(3, 3);
  a(0, 0) = 5.0;
  a(1, 1) = 2.0;
  a(2, 2) = -3.0;
  const EigenResult r = sym_eig_topk(a, 2);
  CHECK(r.eigenvalues[0] == doctest::Approx(5.0));
  CHECK(r.eigenvalues[1] == doctest::Approx(2.0));
  CHECK(r.eigenvectors(0, 0) == doctest::Approx(1.0));
  CHECK(r.eigenvectors(1, 1) == doctest::Approx(1.0));
  CHECK(std::fabs(r.eigenvectors(1, 0)) < 1e-12);
}

TEST_CASE("eigen invariants hold on random symmetric matrices") {
  Rng rng(2024u);
  for (int t = 0; t < 8; ++t) {
    const std::size_t n = 3 + rng.below(30);
    const Matrix a = random_symmetric(n, rng);
    const std::size_t k = 1 + rng.below(n);
    const EigenResult r = sym_eig_topk(a, k);
    CHECK(check_eigen_result(a, r));
    for (std::size_t i = 1; i < r.eigenvalues.size(); ++i)
      CHECK(r.eigenvalues[i - 1] >= r.eigenvalues[i]);
  }
}

TEST_CASE("degenerate spectrum still satisfies the invariants") {
  // identity block plus a distinct eigenvalue; eigenvectors of the repeated
  // eigenvalue are non-unique but must stay orthonormal with small residual
  Matrix a = Matrix::identity(5);
  a(4, 4) = 3.0;
  const EigenResult r = sym_eig_topk(a, 5);
  CHECK(r.eigenvalues[0] == doctest::Approx(3.0));
  for (std::size_t i = 1; i < 5; ++i) CHECK(r.eigenvalues[i] == doctest::Approx(1.0));
  CHECK(check_eigen_result(a, r));
}

TEST_CASE("eigendecomposition input validation") {
  Matrix bad(2, 2, {1.0, 0.5, 0.2, 1.0});
  CHECK_THROWS_AS(sym_eig_topk(bad, 1), ValidationError);
  Matrix rect(2, 3);
  CHECK_THROWS_AS(sym_eig_topk(rect, 1), ValidationError);
  Matrix ok = Matrix::identity(3);
  CHECK_THROWS_AS(sym_eig_topk(ok, 0), ValidationError);
  CHECK_THROWS_AS(sym_eig_topk(ok, 4), ValidationError);
}

TEST_CASE("frobenius norm matches naive summation") {
  Rng rng(99u);
  Matrix a(7, 4);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) = rng.uniform(-3.0, 3.0);
  double naive = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) naive += a(i, j) * a(i, j);
  CHECK(frobenius_norm(a) == doctest::Approx(std::sqrt(naive)).epsilon(1e-14));
  // scaling property
  Matrix b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] *= -2.5;
  CHECK(frobenius_norm(b) == doctest::Approx(2.5 * frobenius_norm(a)).epsilon(1e-13));
  CHECK(frobenius_norm(Matrix(3, 3)) == 0.0);
}

TEST_CASE("singular extremes match the grid/power-iteration oracle") {
  const Matrix a = frozen_5x3();
  // Frozen output of the oracle below:
  const double expected_min = 1.894575850312;
  const double expected_max = 2.776526108159;
  const auto [omin, omax] = power_singular_extremes(a);
  CHECK(std::fabs(omin - expected_min) < 1e-8);
  CHECK(std::fabs(omax - expected_max) < 1e-8);

  const auto [nmin, nmax] = singular_extremes(a);
  CHECK(std::fabs(nmin - expected_min) / expected_min < 1e-6);
  CHECK(std::fabs(nmax - expected_max) / expected_max < 1e-6);
  CHECK(nmin <= nmax);
}

TEST_CASE("singular extremes of simple matrices") {
  Matrix d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const auto [dmin, dmax] = singular_extremes(d);
  CHECK(dmin == doctest::Approx(1.0));
  CHECK(dmax == doctest::Approx(3.0));

  const Matrix rank1(2, 2, {1.0, 0.0, 2.0, 0.0});
  const auto [rmin, rmax] = singular_extremes(rank1);
  CHECK(rmin == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rmax == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("singular extremes are transpose invariant") {
  Rng rng(512u);
  for (int t = 0; t < 6; ++t) {
    Matrix a(4 + rng.below(6), 3 + rng.below(8));
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
    const auto [amin, amax] = singular_extremes(a);
    const auto [tmin, tmax] = singular_extremes(transpose(a));
    const bool wide = a.cols() > a.rows();
    // the smaller side has min(m,n) singular values; comparing against the
    // transpose must agree on those
    CHECK(std::fabs(amax - tmax) < 1e-10 * (1.0 + amax));
    if (!wide || a.rows() == a.cols()) CHECK(std::fabs(amin - tmin) < 1e-10 * (1.0 + amax));
    else CHECK(std::fabs(amin - tmin) < 1e-10 * (1.0 + amax));
  }
}

TEST_CASE("subspace distance closed forms") {
  Matrix e1(3, 1), e2(3, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  CHECK(subspace_distance(e1, e2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(subspace_distance(e1, e1) == doctest::Approx(0.0));

  // sign flip and column permutation leave the span unchanged
  Rng rng(31u);
  Matrix a = random_symmetric(6, rng);
  const EigenResult r = sym_eig_topk(a, 2);
  Matrix v = r.eigenvectors;
  Matrix flipped = v;
  for (std::size_t i = 0; i < 6; ++i) flipped(i, 0) = -flipped(i, 0);
  CHECK(subspace_distance(v, flipped) < 1e-7);
  Matrix swapped(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    swapped(i, 0) = v(i, 1);
    swapped(i, 1) = v(i, 0);
  }
  CHECK(subspace_distance(v, swapped) < 1e-7);
}

TEST_CASE("subspace distance is symmetric and bounded") {
  Rng rng(77u);
  for (int t = 0; t < 5; ++t) {
    Matrix a = random_symmetric(8, rng);
    Matrix b = random_symmetric(8, rng);
    const std::size_t r = 1 + rng.below(4);
    const Matrix v1 = sym_eig_topk(a, r).eigenvectors;
    const Matrix v2 = sym_eig_topk(b, r).eigenvectors;
    const double d12 = subspace_distance(v1, v2);
    const double d21 = subspace_distance(v2, v1);
    CHECK(std::fabs(d12 - d21) <= 1e-12);
    CHECK(d12 >= 0.0);
    CHECK(d12 <= std::sqrt(2.0 * static_cast<double>(r)) + 1e-12);
  }
}

TEST_CASE("subspace distance validates its inputs") {
  Matrix not_orth(3, 1);
  not_orth(0, 0) = 2.0;
  Matrix e1(3, 1);
  e1(0, 0) = 1.0;
  CHECK_THROWS_AS(subspace_distance(not_orth, e1), ValidationError);
  Matrix wrong_shape(4, 1);
  wrong_shape(0, 0) = 1.0;
  CHECK_THROWS_AS(subspace_distance(e1, wrong_shape), ValidationError);
}
