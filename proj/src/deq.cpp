#include "msdc/deq.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Dense>

#include "msdc/errors.hpp"

namespace msdc {

void SolverConfig::validate() const {
  if (max_iter < 1) throw ArgumentError("solver max_iter must be >= 1");
  if (anderson_memory < 1) throw ArgumentError("anderson memory must be >= 1");
  if (!(tol >= 0.0)) throw ArgumentError("solver tol must be >= 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw ArgumentError("anderson beta must lie in (0, 1]");
  if (!(ls_reg >= 0.0)) throw ArgumentError("anderson ridge must be >= 0");
}

namespace {

void guard(const Tensor& next, const Tensor& last, int iteration) {
  const double nrm = norm2(next);
  if (!std::isfinite(nrm) || nrm > kDivergenceNorm) {
    throw DivergenceError("fixed-point iteration diverged at iteration " + std::to_string(iteration),
                          last, iteration);
  }
}

double relative_residual(const Tensor& fx, const Tensor& x) {
  double num = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = fx[i] - x[i];
    num += d * d;
  }
  return std::sqrt(num) / std::max(norm2(x), 1e-12);
}

Tensor evaluate(const FixedPointMap& f, const Tensor& x, int iteration) {
  Tensor fx = f(x);
  if (!(fx.shape() == x.shape())) throw ShapeError("fixed-point map changed the state shape");
  guard(fx, x, iteration);
  return fx;
}

}  // namespace

FixedPointResult picard_solve(const FixedPointMap& f, const Tensor& x0, const SolverConfig& cfg) {
  cfg.validate();
  FixedPointResult res;
  Tensor x = x0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    Tensor fx = evaluate(f, x, k);
    const double r = relative_residual(fx, x);
    res.residual_trace.push_back(r);
    res.iterations = k;
    res.residual_norm = r;
    if (r <= cfg.tol) {
      res.converged = true;
      break;
    }
    if (k == cfg.max_iter) break;
    x = std::move(fx);
  }
  res.x_star = std::move(x);
  return res;
}

FixedPointResult anderson_solve(const FixedPointMap& f, const Tensor& x0, const SolverConfig& cfg) {
  cfg.validate();
  const auto memory = static_cast<std::size_t>(cfg.anderson_memory);
  const std::size_t dim = x0.size();
  std::deque<Tensor> xs, fs;
  FixedPointResult res;
  Tensor x = x0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    Tensor fx = evaluate(f, x, k);
    const double r = relative_residual(fx, x);
    res.residual_trace.push_back(r);
    res.iterations = k;
    res.residual_norm = r;
    if (r <= cfg.tol) {
      res.converged = true;
      break;
    }
    if (k == cfg.max_iter) break;

    xs.push_back(x);
    fs.push_back(std::move(fx));
    if (xs.size() > memory) {
      xs.pop_front();
      fs.pop_front();
    }
    const std::size_t p = xs.size();

    Eigen::VectorXd alpha = Eigen::VectorXd::Ones(1);
    if (p > 1) {
      Eigen::MatrixXd G(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(p));
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < dim; ++i) G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fs[j][i] - xs[j][i];
      Eigen::MatrixXd H = G.transpose() * G;
      const double ridge = cfg.ls_reg * H.diagonal().mean();
      H.diagonal().array() += ridge;
      // alpha = H^{-1} 1 / (1^T H^{-1} 1) minimizes |G alpha| subject to sum(alpha) = 1.
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      Eigen::VectorXd z = ldlt.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p)));
      const double denom = z.sum();
      if (ldlt.info() == Eigen::Success && z.allFinite() && std::isfinite(denom) && denom != 0.0) {
        alpha = z / denom;
      } else {
        alpha.resize(0);  // singular: plain Picard step below
      }
    }

    Tensor next = Tensor::like(x);
    if (alpha.size() == 0) {
      next = fs.back();
    } else if (p == 1 || alpha.size() == 1) {
      const Tensor& xl = xs.back();
      const Tensor& fl = fs.back();
      if (cfg.beta == 1.0) {
        next = fl;
      } else {
        for (std::size_t i = 0; i < dim; ++i) next[i] = (1.0 - cfg.beta) * xl[i] + cfg.beta * fl[i];
      }
    } else {
      for (std::size_t j = 0; j < p; ++j) {
        const double a = alpha(static_cast<Eigen::Index>(j));
        for (std::size_t i = 0; i < dim; ++i) {
          next[i] += a * ((1.0 - cfg.beta) * xs[j][i] + cfg.beta * fs[j][i]);
        }
      }
    }
    guard(next, x, k);
    x = std::move(next);
  }
  res.x_star = std::move(x);
  return res;
}

AdjointResult deq_backward(Graph& g, Var x_leaf, Var f_out, const Tensor& upstream,
                           const SolverConfig& cfg, AdjointFallback fallback) {
  cfg.validate();
  if (!(upstream.shape() == g.value(f_out).shape()) || !(upstream.shape() == g.value(x_leaf).shape())) {
    throw ShapeError("deq_backward: upstream gradient must match the equilibrium state");
  }
  auto vjp = [&](const Tensor& w) {
    g.backward(f_out, w, GradTarget::InputsOnly);
    return g.grad(x_leaf);
  };
  auto adjoint_map = [&](const Tensor& w) {
    Tensor out = vjp(w);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += upstream[i];
    return out;
  };

  AdjointResult res;
  bool solved = false;
  try {
    FixedPointResult fp = anderson_solve(adjoint_map, upstream, cfg);
    res.iterations = fp.iterations;
    res.residual_norm = fp.residual_norm;
    if (fp.converged) {
      res.v = std::move(fp.x_star);
      res.converged = true;
      solved = true;
    }
  } catch (const DivergenceError&) {
  }

  if (!solved && fallback == AdjointFallback::JacobianFree) {
    res.jacobian_free = true;
    res.v = upstream;
  } else if (!solved) {
    // sum_{i=0}^{k-1} (J^T)^i upstream with k = max_iter, stopped early if the terms blow up.
    res.neumann_fallback = true;
    Tensor term = upstream;
    Tensor acc = upstream;
    for (int i = 1; i < cfg.max_iter; ++i) {
      term = vjp(term);
      const double nrm = norm2(term);
      if (!std::isfinite(nrm) || nrm > kDivergenceNorm) break;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += term[j];
    }
    res.v = std::move(acc);
  }

  g.backward(f_out, res.v, GradTarget::All);
  return res;
}

UnrolledResult unrolled_solve_with_grad(Graph& g, const StepFn& step, const Tensor& x0, int k_steps,
                                        const std::function<Tensor(const Tensor&)>& upstream) {
  if (k_steps < 1) throw ArgumentError("unrolled solve needs k_steps >= 1");
  const Var start = g.input(x0);
  Var x = start;
  for (int k = 0; k < k_steps; ++k) x = step(x);
  UnrolledResult res;
  res.x_k = g.value(x);
  g.backward(x, upstream(res.x_k), GradTarget::All);
  res.grad_x0 = g.grad(start);
  return res;
}

}  // namespace msdc
