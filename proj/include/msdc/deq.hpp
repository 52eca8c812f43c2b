#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdc/graph.hpp"
#include "msdc/tensor.hpp"

namespace msdc {

struct SolverConfig {
  int max_iter = 50;
  double tol = 1e-5;
  int anderson_memory = 5;
  double beta = 1.0;
  // Ridge on the Anderson normal equations, relative to their mean diagonal.
  double ls_reg = 1e-4;

  void validate() const;
};

struct FixedPointResult {
  Tensor x_star;
  // |f(x*) - x*| / max(|x*|, 1e-12) for the returned x*.
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_trace;
};

// Iterate left the finite range (norm above 1e12, NaN or Inf).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, Tensor last_finite, int iteration)
      : std::runtime_error(what), last_finite_(std::move(last_finite)), iteration_(iteration) {}
  const Tensor& last_finite() const { return last_finite_; }
  int iteration() const { return iteration_; }

 private:
  Tensor last_finite_;
  int iteration_;
};

inline constexpr double kDivergenceNorm = 1e12;

using FixedPointMap = std::function<Tensor(const Tensor&)>;

// x_{k+1} = f(x_k). Each iteration evaluates f once at the current iterate
// and stops as soon as that iterate's relative residual is within tol; the
// returned x* is always the last iterate whose residual was measured.
FixedPointResult picard_solve(const FixedPointMap& f, const Tensor& x0, const SolverConfig& cfg);

// Anderson-accelerated fixed-point iteration over the last `anderson_memory`
// iterates, same stopping rule and result contract as picard_solve.
FixedPointResult anderson_solve(const FixedPointMap& f, const Tensor& x0, const SolverConfig& cfg);

// What deq_backward uses when the adjoint solve does not converge.
enum class AdjointFallback {
  Neumann,       // truncated series sum_{i<k} (J^T)^i upstream, k = max_iter
  JacobianFree,  // v = upstream
};

struct AdjointResult {
  Tensor v;  // solution of v = upstream + J^T v
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
  bool neumann_fallback = false;
  bool jacobian_free = false;
};

// Implicit gradient at an equilibrium recorded on `g`: `x_leaf` is the
// differentiable input leaf holding x*, `f_out` the block output f(x*).
// Solves the adjoint fixed point with Anderson, falling back as selected by
// `fallback`, then runs one full backward pass seeded with v so that every
// bound parameter (and anything feeding the input injection) accumulates
// v^T df/dtheta.
AdjointResult deq_backward(Graph& g, Var x_leaf, Var f_out, const Tensor& upstream,
                           const SolverConfig& cfg, AdjointFallback fallback = AdjointFallback::Neumann);

// One application of the map on a graph.
using StepFn = std::function<Var(Var)>;

struct UnrolledResult {
  Tensor x_k;
  Tensor grad_x0;
};

// k taped applications of `step` starting at x0, then a full backward pass
// seeded with upstream(x_k). Parameters bound inside `step` accumulate the
// exact unrolled gradient.
UnrolledResult unrolled_solve_with_grad(Graph& g, const StepFn& step, const Tensor& x0, int k_steps,
                                        const std::function<Tensor(const Tensor&)>& upstream);

}  // namespace msdc
