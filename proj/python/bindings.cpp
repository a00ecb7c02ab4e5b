// Python bindings for the core operations. Numpy arrays cross the boundary by
// copy into the row-major Matrix type.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fanlasso/linalg.hpp"
#include "fanlasso/matrix.hpp"

namespace py = pybind11;
using namespace fanlasso;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw ValidationError("expected a 2-d array");
  const auto r = static_cast<std::size_t>(arr.shape(0));
  const auto c = static_cast<std::size_t>(arr.shape(1));
  std::vector<double> data(arr.data(), arr.data() + r * c);
  return Matrix(r, c, std::move(data));
}

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data(), m.data() + m.size(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_fanlasso, m) {
  m.doc() = "factor-augmented transfer regression core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  m.def(
      "sym_eig_topk",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, std::size_t k,
         double tol) {
        const EigenResult r = sym_eig_topk(to_matrix(a), k, tol);
        return py::make_tuple(py::cast(r.eigenvalues), to_numpy(r.eigenvectors));
      },
      py::arg("a"), py::arg("k"), py::arg("tol") = kDefaultEigTol,
      "Top-k eigenpairs of a symmetric matrix: (eigenvalues, eigenvectors)");

  m.def("frobenius_norm",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
          return frobenius_norm(to_matrix(a));
        });

  m.def("singular_extremes",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
          const auto [lo, hi] = singular_extremes(to_matrix(a));
          return py::make_tuple(lo, hi);
        });

  m.def("subspace_distance",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v1,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& v2) {
          return subspace_distance(to_matrix(v1), to_matrix(v2));
        });
}
