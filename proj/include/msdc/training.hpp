#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msdc/adam.hpp"
#include "msdc/dataset.hpp"
#include "msdc/deq.hpp"
#include "msdc/graph.hpp"
#include "msdc/model.hpp"

namespace msdc {

struct TrainConfig {
  double lr = 1e-5;
  std::size_t batch = 16;
  std::size_t epochs = 1;
  // When non-zero, run exactly this many optimizer steps, cycling epochs.
  std::size_t steps = 0;
  double gamma_sym = 0.01;
  double gamma_init = 0.1;
  std::uint64_t seed = 0;
  double cs_ratio = 0.25;
  std::size_t image_side = 64;
  SolverConfig forward{30, 1e-4, 5, 1.0, 1e-4};
  SolverConfig backward{30, 1e-4, 5, 1.0, 1e-4};
  BranchMask mask = kAllBranches;
  AdjointFallback adjoint_fallback = AdjointFallback::Neumann;
  // Weight of |f(x* + e) - f(x*)|^2 / |e|^2 with e ~ N(0, jacobian_probe^2),
  // a finite-difference estimate of |J|_F^2 / dim at the equilibrium; 0 disables.
  double jacobian_reg = 0.0;
  double jacobian_probe = 1e-2;
  // Global L2 norm cap on the parameter gradient before each Adam step; 0 disables.
  double grad_clip = 0.0;

  // Throws ConfigError.
  void validate() const;
};

// hmse(out1, x) + gamma_sym * hmse(out2, 0) + gamma_init * hmse(out3, x)
Var total_loss(Var out1, Var out2, Var out3, Var x_true, double gamma_sym, double gamma_init);
double total_loss(const Tensor& out1, const Tensor& out2, const Tensor& out3, const Tensor& x_true,
                  double gamma_sym, double gamma_init);

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;        // batch mean of the total loss
  double sym_hmse = 0.0;    // batch mean of hmse(sym residual, 0)
  double psnr = 0.0;        // batch mean PSNR of x*
  double psnr_init = 0.0;   // batch mean PSNR of the initial reconstruction
  double forward_iters = 0.0;
  double adjoint_iters = 0.0;
  double grad_norm = 0.0;   // global gradient norm before clipping
  double jacobian = 0.0;    // batch mean of the Jacobian probe ratio
  std::size_t diverged = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double loss = 0.0;
  double sym_hmse = 0.0;
  double psnr = 0.0;
  double psnr_init = 0.0;
  bool aborted = false;
};

struct TrainResult {
  Model model;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::vector<std::string> diagnostics;
};

using StepObserver = std::function<void(const StepLog&)>;
using EpochObserver = std::function<void(const EpochLog&, const Model&)>;

// Joint training of sampler and block on the Train split of `data`.
TrainResult train(Model model, const Dataset& data, const TrainConfig& cfg,
                  const StepObserver& on_step = {}, const EpochObserver& on_epoch = {});

}  // namespace msdc
