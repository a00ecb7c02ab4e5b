#include "fanlasso/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fanlasso {

namespace {

// Householder reduction of a symmetric matrix to tridiagonal form. On entry z
// holds the matrix; on exit z accumulates the orthogonal transformation, d the
// diagonal and e the subdiagonal (e[0] unused).
void householder_tridiagonalize(Matrix& z, std::vector<double>& d, std::vector<double>& e) {
  const int n = static_cast<int>(z.rows());
  for (int i = n - 1; i >= 1; --i) {
    const int l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (int k = 0; k <= l; ++k) scale += std::fabs(z(i, k));
      if (scale == 0.0) {
        e[i] = z(i, l);
      } else {
        for (int k = 0; k <= l; ++k) {
          z(i, k) /= scale;
          h += z(i, k) * z(i, k);
        }
        double f = z(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j <= l; ++j) {
          z(j, i) = z(i, j) / h;
          g = 0.0;
          for (int k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
          for (int k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
          e[j] = g / h;
          f += e[j] * z(i, j);
        }
        const double hh = f / (h + h);
        for (int j = 0; j <= l; ++j) {
          f = z(i, j);
          e[j] = g = e[j] - hh * f;
          for (int k = 0; k <= j; ++k) z(j, k) -= f * e[k] + g * z(i, k);
        }
      }
    } else {
      e[i] = z(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    const int l = i - 1;
    if (d[i] != 0.0) {
      for (int j = 0; j <= l; ++j) {
        double g = 0.0;
        for (int k = 0; k <= l; ++k) g += z(i, k) * z(k, j);
        for (int k = 0; k <= l; ++k) z(k, j) -= g * z(k, i);
      }
    }
    d[i] = z(i, i);
    z(i, i) = 1.0;
    for (int j = 0; j <= l; ++j) z(j, i) = z(i, j) = 0.0;
  }
}

// Implicit-shift QL on the tridiagonal (d, e), rotating the columns of z
// along. Caps the sweeps per eigenvalue; 50 * p in total.
void ql_implicit_shift(std::vector<double>& d, std::vector<double>& e, Matrix& z) {
  constexpr int kMaxSweeps = 50;
  const int n = static_cast<int>(d.size());
  const double eps = std::numeric_limits<double>::epsilon();
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= eps * dd || std::fabs(e[m]) < 1e-300) break;
      }
      if (m != l) {
        if (iter++ == kMaxSweeps) {
          throw ConvergenceError("sym_eig_topk: QL sweep cap exhausted, off-diagonal " +
                                 std::to_string(std::fabs(e[l])));
        }
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        int i = m - 1;
        for (; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (int k = 0; k < n; ++k) {
            f = z(k, i + 1);
            z(k, i + 1) = s * z(k, i) + c * f;
            z(k, i) = c * z(k, i) - s * f;
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace

EigenResult sym_eig_topk(const Matrix& a, std::size_t k, double tol) {
  const std::size_t p = a.rows();
  if (p == 0 || a.cols() != p) {
    throw ValidationError("sym_eig_topk: matrix must be square and non-empty");
  }
  if (k < 1 || k > p) {
    throw ValidationError("sym_eig_topk: k must lie in [1, p]");
  }
  if (has_nonfinite(a)) {
    throw ValidationError("sym_eig_topk: matrix has non-finite entries");
  }
  const double amax = max_abs(a);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      if (std::fabs(a(i, j) - a(j, i)) > tol * amax) {
        throw ValidationError("sym_eig_topk: matrix is not symmetric within tolerance");
      }
    }
  }

  Matrix z = a;
  std::vector<double> d(p), e(p);
  householder_tridiagonalize(z, d, e);
  ql_implicit_shift(d, e, z);

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });

  EigenResult result;
  result.eigenvalues.resize(k);
  result.eigenvectors = Matrix(p, k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    result.eigenvalues[j] = d[src];
    // sign convention: entry of largest magnitude positive, earliest index
    // winning ties
    std::size_t arg = 0;
    double best = std::fabs(z(0, src));
    for (std::size_t i = 1; i < p; ++i) {
      const double v = std::fabs(z(i, src));
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    const double sign = z(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < p; ++i) result.eigenvectors(i, j) = sign * z(i, src);
  }
  return result;
}

bool check_eigen_result(const Matrix& a, const EigenResult& r, double tol) {
  const std::size_t p = a.rows();
  const std::size_t k = r.eigenvalues.size();
  if (r.eigenvectors.rows() != p || r.eigenvectors.cols() != k) return false;
  const double anorm = frobenius_norm(a);
  for (std::size_t j = 0; j < k; ++j) {
    double res = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      double av = 0.0;
      for (std::size_t l = 0; l < p; ++l) av += a(i, l) * r.eigenvectors(l, j);
      const double diff = av - r.eigenvalues[j] * r.eigenvectors(i, j);
      res += diff * diff;
    }
    if (std::sqrt(res) > tol * std::max(anorm, 1e-300)) return false;
  }
  const Matrix gram = multiply_at_b(r.eigenvectors, r.eigenvectors);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double target = i == j ? 1.0 : 0.0;
      if (std::fabs(gram(i, j) - target) > tol) return false;
    }
  }
  return true;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.storage()) s += v * v;
  return std::sqrt(s);
}

std::vector<double> singular_values(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw ValidationError("singular_values: empty matrix");
  }
  const Matrix gram = a.cols() <= a.rows() ? multiply_at_b(a, a) : multiply_a_bt(a, a);
  const EigenResult r = sym_eig_topk(gram, gram.rows());
  std::vector<double> sv(r.eigenvalues.size());
  for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = std::sqrt(std::max(r.eigenvalues[i], 0.0));
  return sv;
}

std::pair<double, double> singular_extremes(const Matrix& a) {
  const std::vector<double> sv = singular_values(a);
  return {sv.back(), sv.front()};
}

double subspace_distance(const Matrix& v1, const Matrix& v2) {
  if (v1.rows() != v2.rows() || v1.cols() != v2.cols() || v1.cols() == 0) {
    throw ValidationError("subspace_distance: bases must share a p x r shape");
  }
  const auto check_orthonormal = [](const Matrix& v, const char* name) {
    const Matrix gram = multiply_at_b(v, v);
    for (std::size_t i = 0; i < gram.rows(); ++i) {
      for (std::size_t j = 0; j < gram.cols(); ++j) {
        const double target = i == j ? 1.0 : 0.0;
        if (std::fabs(gram(i, j) - target) > 1e-8) {
          throw ValidationError(std::string("subspace_distance: ") + name +
                                " does not have orthonormal columns");
        }
      }
    }
  };
  check_orthonormal(v1, "first basis");
  check_orthonormal(v2, "second basis");
  const std::vector<double> sv = singular_values(multiply_at_b(v1, v2));
  double sum = 0.0;
  for (double s : sv) sum += 2.0 * (1.0 - std::min(s, 1.0));
  return std::sqrt(std::max(sum, 0.0));
}

}  // namespace fanlasso
