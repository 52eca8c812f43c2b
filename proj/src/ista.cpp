#include "msdc/ista.hpp"

#include <cmath>
#include <numbers>

#include "msdc/errors.hpp"

namespace msdc {

SensingOperator SensingOperator::dense(Matrix phi) {
  if (phi.size() == 0) throw ShapeError("empty sensing matrix");
  SensingOperator op;
  op.a_ = std::move(phi);
  return op;
}

SensingOperator SensingOperator::separable(Matrix phi1, Matrix phi2) {
  if (phi1.cols() != phi2.cols() || phi1.rows() != phi2.rows() || phi1.size() == 0) {
    throw ShapeError("separable sensing requires two equally sized, non-empty matrices");
  }
  SensingOperator op;
  op.separable_ = true;
  op.a_ = std::move(phi1);
  op.b_ = std::move(phi2);
  return op;
}

SensingOperator SensingOperator::from_stp(const StpOperator& op) {
  op.validate();
  return separable(to_matrix(op.phi1), to_matrix(op.phi2));
}

Eigen::Index SensingOperator::rows() const {
  return separable_ ? a_.rows() * b_.rows() : a_.rows();
}

Eigen::Index SensingOperator::cols() const {
  return separable_ ? a_.cols() * b_.cols() : a_.cols();
}

Vector SensingOperator::apply(const Vector& x) const {
  if (x.size() != cols()) throw ShapeError("sensing operator: signal length mismatch");
  if (!separable_) return a_ * x;
  const Matrix X = unvec_columns(x, a_.cols(), b_.cols());
  return vec_columns(a_ * X * b_.transpose());
}

Vector SensingOperator::adjoint(const Vector& y) const {
  if (y.size() != rows()) throw ShapeError("sensing operator: measurement length mismatch");
  if (!separable_) return a_.transpose() * y;
  const Matrix Y = unvec_columns(y, a_.rows(), b_.rows());
  return vec_columns(a_.transpose() * Y * b_);
}

Matrix SensingOperator::materialize() const {
  if (!separable_) return a_;
  // vec(A X B^T) = (B (x) A) vec(X)
  Matrix k(rows(), cols());
  for (Eigen::Index i = 0; i < b_.rows(); ++i)
    for (Eigen::Index j = 0; j < b_.cols(); ++j)
      k.block(i * a_.rows(), j * a_.cols(), a_.rows(), a_.cols()) = b_(i, j) * a_;
  return k;
}

OrthoTransform OrthoTransform::identity(std::size_t length) {
  OrthoTransform t;
  t.kind_ = Kind::Identity;
  t.length_ = length;
  return t;
}

OrthoTransform OrthoTransform::dct2d(std::size_t n) {
  if (n == 0) throw ArgumentError("dct size must be positive");
  OrthoTransform t;
  t.kind_ = Kind::Dct2d;
  t.side_ = n;
  t.length_ = n * n;
  const auto N = static_cast<Eigen::Index>(n);
  t.basis_.resize(N, N);
  const double dn = static_cast<double>(n);
  for (Eigen::Index k = 0; k < N; ++k) {
    const double alpha = std::sqrt((k == 0 ? 1.0 : 2.0) / dn);
    for (Eigen::Index i = 0; i < N; ++i) {
      t.basis_(k, i) = alpha * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                                        static_cast<double>(k) / (2.0 * dn));
    }
  }
  return t;
}

Vector OrthoTransform::forward(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != length_) throw ShapeError("transform length mismatch");
  if (kind_ == Kind::Identity) return v;
  const auto s = static_cast<Eigen::Index>(side_);
  return vec_columns(basis_ * unvec_columns(v, s, s) * basis_.transpose());
}

Vector OrthoTransform::inverse(const Vector& c) const {
  if (static_cast<std::size_t>(c.size()) != length_) throw ShapeError("transform length mismatch");
  if (kind_ == Kind::Identity) return c;
  const auto s = static_cast<Eigen::Index>(side_);
  return vec_columns(basis_.transpose() * unvec_columns(c, s, s) * basis_);
}

Vector soft_threshold(const Vector& v, double lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("soft threshold must be non-negative");
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i)) - lambda;
    out(i) = a > 0.0 ? std::copysign(a, v(i)) : 0.0;
  }
  return out;
}

Vector gradient_step(const Vector& x_prev, const SensingOperator& phi, const Vector& y, double rho) {
  if (y.size() != phi.rows() || x_prev.size() != phi.cols()) {
    throw ShapeError("gradient_step: operand lengths do not conform to the sensing operator");
  }
  return x_prev - rho * phi.adjoint(phi.apply(x_prev) - y);
}

Vector ista_step(const Vector& x_prev, const SparseProblem& problem, const OrthoTransform& psi) {
  const Vector r = gradient_step(x_prev, problem.phi, problem.y, problem.rho);
  return psi.inverse(soft_threshold(psi.forward(r), problem.rho * problem.lambda));
}

double objective(const Vector& x, const SparseProblem& problem, const OrthoTransform& psi) {
  const Vector resid = problem.phi.apply(x) - problem.y;
  return 0.5 * resid.squaredNorm() + problem.lambda * psi.forward(x).lpNorm<1>();
}

IstaResult ista_solve(const SparseProblem& problem, const OrthoTransform& psi, int max_iter,
                      double tol, const std::optional<Vector>& x0) {
  if (max_iter < 1) throw ArgumentError("ista_solve: max_iter must be >= 1");
  if (!(tol >= 0.0)) throw ArgumentError("ista_solve: tol must be >= 0");
  if (!(problem.rho > 0.0)) throw ArgumentError("ista_solve: rho must be positive");
  if (!(problem.lambda >= 0.0)) throw ArgumentError("ista_solve: lambda must be >= 0");

  IstaResult res;
  res.x = x0 ? *x0 : Vector::Zero(problem.phi.cols());
  res.objective_trace.push_back(objective(res.x, problem, psi));
  for (int k = 1; k <= max_iter; ++k) {
    Vector next = ista_step(res.x, problem, psi);
    const double change = (next - res.x).norm() / std::max(res.x.norm(), 1e-12);
    res.x = std::move(next);
    res.iterations = k;
    res.objective_trace.push_back(objective(res.x, problem, psi));
    if (change < tol || change == 0.0) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double lipschitz_bound(const SensingOperator& phi, int max_iter, double tol) {
  Vector v = Vector::Ones(phi.cols());
  // Deterministic, non-symmetric start so no eigenvector is missed by construction.
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = phi.adjoint(phi.apply(v));
    const double next = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next) * 1e-3) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace msdc
