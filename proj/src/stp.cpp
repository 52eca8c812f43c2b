#include "msdc/stp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "msdc/errors.hpp"

namespace msdc {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

StpOperator StpOperator::gaussian(std::size_t n, std::size_t m, std::uint64_t seed) {
  StpOperator op;
  op.n = n;
  op.m = m;
  const Matrix p1 = gaussian_init(m, n, seed);
  const Matrix p2 = gaussian_init(m, n, seed ^ 0x9e3779b97f4a7c15ULL);
  op.phi1 = to_tensor(p1);
  op.phi2 = to_tensor(p2);
  op.rec1 = to_tensor(p1.transpose());
  op.rec2 = to_tensor(p2.transpose());
  return op;
}

StpOperator StpOperator::identity(std::size_t n) {
  StpOperator op;
  op.n = n;
  op.m = n;
  const Matrix id = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  op.phi1 = op.phi2 = op.rec1 = op.rec2 = to_tensor(id);
  return op;
}

double StpOperator::cs_ratio() const {
  const double r = static_cast<double>(m) / static_cast<double>(n);
  return r * r;
}

void StpOperator::validate() const {
  const Shape sampling{1, 1, m, n};
  const Shape recon{1, 1, n, m};
  if (m == 0 || m > n) throw ShapeError("stp operator requires 0 < m <= n");
  if (!(phi1.shape() == sampling) || !(phi2.shape() == sampling) || !(rec1.shape() == recon) ||
      !(rec2.shape() == recon)) {
    throw ShapeError("stp operator matrices do not match n=" + std::to_string(n) +
                     ", m=" + std::to_string(m));
  }
}

Vector stp_left_product(const Matrix& phi_t, const Vector& x, std::size_t t) {
  if (t == 0) throw ArgumentError("stp shrinkage factor must be positive");
  const auto ti = static_cast<Eigen::Index>(t);
  if (x.size() % ti != 0 || x.size() / ti != phi_t.cols()) {
    throw ArgumentError("stp: t=" + std::to_string(t) + " does not divide signal length " +
                        std::to_string(x.size()) + " consistently with a " + dims(phi_t) +
                        " matrix");
  }
  // y[i t + s] = sum_j phi[i, j] x[j t + s]
  const Eigen::Map<const Matrix> xs(x.data(), ti, phi_t.cols());
  const Matrix ys = xs * phi_t.transpose();
  return Eigen::Map<const Vector>(ys.data(), ys.size());
}

Matrix measure_single(const Matrix& X, const Matrix& phi) {
  if (X.rows() != X.cols() || phi.cols() != X.cols()) {
    throw ShapeError("measure_single: image " + dims(X) + ", matrix " + dims(phi));
  }
  return X * phi.transpose();
}

Matrix measure(const Matrix& X, const StpOperator& op) {
  op.validate();
  const auto n = static_cast<Eigen::Index>(op.n);
  if (X.rows() != n || X.cols() != n) {
    throw ShapeError("measure: image " + dims(X) + " but operator expects side " + std::to_string(op.n));
  }
  return to_matrix(op.phi1) * X * to_matrix(op.phi2).transpose();
}

Matrix initial_reconstruct(const Matrix& Y, const StpOperator& op) {
  op.validate();
  const auto m = static_cast<Eigen::Index>(op.m);
  if (Y.rows() != m || Y.cols() != m) {
    throw ShapeError("initial_reconstruct: measurement " + dims(Y) + " but operator expects side " +
                     std::to_string(op.m));
  }
  return to_matrix(op.rec1) * Y * to_matrix(op.rec2).transpose();
}

std::size_t size_for_ratio(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ArgumentError("cs ratio must lie in (0, 1]");
  if (n == 0) throw ArgumentError("image side must be positive");
  const double target = static_cast<double>(n) * std::sqrt(ratio);
  const auto m = static_cast<std::size_t>(std::floor(target + 0.5));
  return std::clamp<std::size_t>(m, 1, n);
}

Matrix gaussian_init(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m > n) throw ArgumentError("gaussian_init requires m <= n");
  if (m == 0) throw ArgumentError("gaussian_init requires m >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  Matrix out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  // Row-major fill so the draw order is independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = dist(rng);
  return out;
}

double mutual_coherence(const Matrix& A) {
  if (A.cols() < 2) throw ArgumentError("mutual_coherence needs at least two columns");
  const Vector norms = A.colwise().norm();
  if ((norms.array() == 0.0).any()) throw ArgumentError("mutual_coherence: zero column");
  const Matrix gram = A.transpose() * A;
  double mu = 0.0;
  for (Eigen::Index i = 0; i < A.cols(); ++i)
    for (Eigen::Index j = i + 1; j < A.cols(); ++j)
      mu = std::max(mu, std::abs(gram(i, j)) / (norms(i) * norms(j)));
  return std::min(mu, 1.0);
}

}  // namespace msdc
