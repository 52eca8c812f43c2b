#include "msdc/linalg.hpp"

#include "msdc/errors.hpp"

namespace msdc {

Matrix to_matrix(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("to_matrix expects a [1, 1, r, c] tensor, got " + s.str());
  Matrix m(static_cast<Eigen::Index>(s.h), static_cast<Eigen::Index>(s.w));
  for (std::size_t r = 0; r < s.h; ++r)
    for (std::size_t c = 0; c < s.w; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t(r, c);
  return m;
}

Tensor to_tensor(const Matrix& m) {
  Tensor t = Tensor::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
  return t;
}

Vector vec_columns(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unvec_columns(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw ShapeError("unvec_columns length mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace msdc
