#include "fanlasso/matrix.hpp"

#include <cmath>
#include <utility>

namespace fanlasso {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ValidationError("Matrix: data size does not match shape");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

namespace {

void check_inner(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ValidationError(std::string("matrix product: inner dimensions disagree in ") + what);
  }
}

}  // namespace

Matrix multiply(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "A*B");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.cols(), k = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data() + i * n;
    double* ci = c.data() + i * k;
    for (std::size_t l = 0; l < n; ++l) {
      const double ail = ai[l];
      if (ail == 0.0) continue;
      const double* bl = b.data() + l * k;
      for (std::size_t j = 0; j < k; ++j) ci[j] += ail * bl[j];
    }
  }
  return c;
}

Matrix multiply_at_b(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "A^T*B");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = a.cols(), k = b.cols();
  for (std::size_t l = 0; l < a.rows(); ++l) {
    const double* al = a.data() + l * n;
    const double* bl = b.data() + l * k;
    for (std::size_t i = 0; i < n; ++i) {
      const double ali = al[i];
      if (ali == 0.0) continue;
      double* ci = c.data() + i * k;
      for (std::size_t j = 0; j < k; ++j) ci[j] += ali * bl[j];
    }
  }
  return c;
}

Matrix multiply_a_bt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "A*B^T");
  Matrix c(a.rows(), b.rows());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data() + i * n;
    double* ci = c.data() + i * b.rows();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.data() + j * n;
      double s = 0.0;
      for (std::size_t l = 0; l < n; ++l) s += ai[l] * bj[l];
      ci[j] = s;
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void multiply_at_vec(const Matrix& a, std::span<const double> x, std::span<double> out) {
  if (x.size() != a.rows() || out.size() != a.cols()) {
    throw ValidationError("multiply_at_vec: size mismatch");
  }
  for (std::size_t j = 0; j < a.cols(); ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* ai = a.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += xi * ai[j];
  }
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.storage()) m = std::max(m, std::fabs(v));
  return m;
}

bool has_nonfinite(const Matrix& a) { return has_nonfinite(std::span<const double>(a.storage())); }

bool has_nonfinite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return true;
  return false;
}

}  // namespace fanlasso
