#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msdc/deq.hpp"
#include "msdc/ista_block.hpp"
#include "msdc/stp.hpp"

namespace msdc {

// Jointly trained sampler + weight-tied equilibrium block.
struct Model {
  StpOperator stp;
  IstaBlockParams block;

  // Gaussian sampler at the measurement side for `ratio`, block kernels from
  // the same seed, step size 1 / L with L = |Phi1^T Phi1| |Phi2^T Phi2|.
  static Model init(std::size_t n, double ratio, const BlockConfig& config, std::uint64_t seed);
  // Lossless starting point: identity sampler (m = n), rho 1 and a zero
  // head so every image is its own equilibrium.
  static Model identity(std::size_t n, const BlockConfig& config, std::uint64_t seed);

  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  std::vector<Tensor*> parameters();
  void zero_grad();
  // Throws ConfigError / ShapeError if the parameter shapes are inconsistent.
  void validate() const;
};

// [1, 1, n, n] image -> [1, 1, m, m] measurement.
Tensor measure(const Model& model, const Tensor& image);
Tensor initial_reconstruct(const Model& model, const Tensor& measurement);

// x -> f(x, y) with the model treated as constant.
FixedPointMap block_map(const Model& model, const Tensor& measurement, const BranchMask& mask);

struct Reconstruction {
  Tensor image;
  Tensor initial;
  FixedPointResult solve;
  bool diverged = false;
};

// Anderson solve of the equilibrium from x0 = initial reconstruction. A
// divergent solve returns the last finite iterate with diverged set.
Reconstruction reconstruct_deq(const Model& model, const Tensor& measurement, const SolverConfig& cfg,
                               const BranchMask& mask);

}  // namespace msdc
