#pragma once

#include <cstddef>
#include <cstdint>

#include "msdc/linalg.hpp"
#include "msdc/tensor.hpp"

namespace msdc {

// Whole-image separable sampler Y = Phi1 X Phi2^T with its learnable
// reconstruction X0 = Rec1 Y Rec2^T. All four matrices are stored as
// single-slice tensors so they can be bound on a Graph and trained.
struct StpOperator {
  std::size_t n = 0;  // image side
  std::size_t m = 0;  // measurement side
  Tensor phi1;        // [1, 1, m, n]
  Tensor phi2;        // [1, 1, m, n]
  Tensor rec1;        // [1, 1, n, m]
  Tensor rec2;        // [1, 1, n, m]

  // Independent N(0, 1/m) sampling matrices, reconstruction set to their transposes.
  static StpOperator gaussian(std::size_t n, std::size_t m, std::uint64_t seed);
  static StpOperator identity(std::size_t n);

  double cs_ratio() const;
  // Stored reals across all four matrices.
  std::size_t stored_reals() const { return 4 * m * n; }
  // Throws ShapeError if any matrix disagrees with (n, m).
  void validate() const;
};

// (Phi_t (x) I_t) x without forming the Kronecker product.
Vector stp_left_product(const Matrix& phi_t, const Vector& x, std::size_t t);

// X Phi^T, the one-sided measurement of an n x n image (result n x m).
Matrix measure_single(const Matrix& X, const Matrix& phi);
// Phi1 X Phi2^T.
Matrix measure(const Matrix& X, const StpOperator& op);
// Rec1 Y Rec2^T.
Matrix initial_reconstruct(const Matrix& Y, const StpOperator& op);

// Measurement side for a requested CS ratio: round-half-up of n * sqrt(ratio), clamped to [1, n].
std::size_t size_for_ratio(std::size_t n, double ratio);

// m x n matrix of i.i.d. N(0, 1/m) entries.
Matrix gaussian_init(std::size_t m, std::size_t n, std::uint64_t seed);

// max_{i != j} |<a_i, a_j>| / (|a_i| |a_j|) over columns.
double mutual_coherence(const Matrix& A);

}  // namespace msdc
