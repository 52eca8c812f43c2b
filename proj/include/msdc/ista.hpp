#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "msdc/linalg.hpp"
#include "msdc/stp.hpp"

namespace msdc {

// Linear sensing map on vectorized signals: either an explicit M x N matrix
// or the separable pair vec(X) -> vec(Phi1 X Phi2^T) on column-stacked n x n images.
class SensingOperator {
 public:
  static SensingOperator dense(Matrix phi);
  static SensingOperator separable(Matrix phi1, Matrix phi2);
  static SensingOperator from_stp(const StpOperator& op);

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& y) const;
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  // Explicit matrix; separable operators are expanded through the Kronecker product.
  Matrix materialize() const;

 private:
  bool separable_ = false;
  Matrix a_;
  Matrix b_;
};

// min_x 0.5 |Phi x - y|^2 + lambda |Psi x|_1 solved with step rho.
struct SparseProblem {
  SensingOperator phi;
  Vector y;
  double lambda = 0.0;
  double rho = 1.0;
};

// Orthonormal sparsifying transform acting on vectorized signals.
class OrthoTransform {
 public:
  enum class Kind { Identity, Dct2d };

  static OrthoTransform identity(std::size_t length);
  // Type-II orthonormal DCT on column-stacked n x n images.
  static OrthoTransform dct2d(std::size_t n);

  Kind kind() const { return kind_; }
  std::size_t length() const { return length_; }
  Vector forward(const Vector& v) const;
  Vector inverse(const Vector& c) const;

 private:
  Kind kind_ = Kind::Identity;
  std::size_t length_ = 0;
  std::size_t side_ = 0;
  Matrix basis_;  // side x side 1-D DCT matrix
};

// x - rho Phi^T (Phi x - y)
Vector gradient_step(const Vector& x_prev, const SensingOperator& phi, const Vector& y, double rho);

// Psi^{-1} soft(Psi r, rho * lambda) with r the gradient step.
Vector ista_step(const Vector& x_prev, const SparseProblem& problem, const OrthoTransform& psi);

double objective(const Vector& x, const SparseProblem& problem, const OrthoTransform& psi);

struct IstaResult {
  Vector x;
  // objective(x0), objective(x1), ... one entry per iterate including the start.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

// Iterates ista_step until the relative iterate change drops below tol or
// max_iter steps are taken. Starts from zero unless x0 is given.
IstaResult ista_solve(const SparseProblem& problem, const OrthoTransform& psi, int max_iter,
                      double tol, const std::optional<Vector>& x0 = std::nullopt);

// Largest eigenvalue of Phi^T Phi by power iteration.
double lipschitz_bound(const SensingOperator& phi, int max_iter = 200, double tol = 1e-6);

// Elementwise (|v| - lambda)_+ sgn(v).
Vector soft_threshold(const Vector& v, double lambda);

}  // namespace msdc
