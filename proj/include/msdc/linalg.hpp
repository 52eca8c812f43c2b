#pragma once

#include <Eigen/Dense>

#include "msdc/tensor.hpp"

namespace msdc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Trailing-axis matrix of a single-slice tensor.
Matrix to_matrix(const Tensor& t);
Tensor to_tensor(const Matrix& m);

// Column-wise stacking of a matrix and its inverse.
Vector vec_columns(const Matrix& m);
Matrix unvec_columns(const Vector& v, Eigen::Index rows, Eigen::Index cols);

}  // namespace msdc
