#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msdc/graph.hpp"
#include "msdc/stp.hpp"
#include "msdc/tensor.hpp"

namespace msdc {

inline constexpr std::size_t kBranches = 7;

// Gate per dilation branch; index d-1 controls dilation d.
using BranchMask = std::array<bool, kBranches>;

inline constexpr BranchMask kAllBranches{true, true, true, true, true, true, true};
inline constexpr BranchMask kNoBranches{};

// Parses a 7-character bit string such as "1010000". Throws ArgumentError.
BranchMask parse_mask(const std::string& bits);
std::string mask_string(const BranchMask& mask);

struct BlockConfig {
  std::size_t channels = 32;
  std::size_t cardinality = 4;
  std::size_t se_reduction = 4;
  // Init-time scale of the head kernels relative to sqrt(1 / (9 C)); 0 starts the block as the IRB.
  double head_gain = 0.1;

  // Throws ConfigError when the divisibility constraints fail.
  void validate() const;
};

// Aggregated residual transform with squeeze-and-excitation gating:
// out = in + gate(b) * b, b = sum of `cardinality` bottleneck branches.
struct ResNextSeParams {
  std::vector<Tensor> reduce;   // [C/g, C, 1, 1] per branch
  std::vector<Tensor> spatial;  // [C/g, C/g, 3, 3] per branch
  std::vector<Tensor> expand;   // [C, C/g, 1, 1] per branch
  Tensor se_down;               // [C/s, C, 1, 1]
  Tensor se_up;                 // [C, C/s, 1, 1]
};

struct IstaBlockParams {
  BlockConfig config;
  Tensor rho;         // [1, 1, 1, 1] gradient step size
  Tensor lambda_pre;  // [1, C, 1, 1]; threshold = softplus(lambda_pre)
  std::array<Tensor, kBranches> msdc;  // [C, 1, 3, 3], branch d uses dilation d
  ResNextSeParams denoise;
  Tensor fwd1, fwd2;  // [C, C, 3, 3] forward sparse transform
  Tensor inv1, inv2;  // [C, C, 3, 3] inverse transform
  ResNextSeParams highpass;
  Tensor head;        // [1, C, 3, 3] projection back to one channel
  BranchMask mask = kAllBranches;  // runtime gate, never serialized

  // Random kernels; rho and lambda set from the arguments.
  static IstaBlockParams init(const BlockConfig& config, std::uint64_t seed, double rho,
                              double lambda = 0.01);

  // Stable (name, tensor) listing of every learnable tensor.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
};

// Graph handles of the sampler matrices.
struct StpVars {
  Var phi1, phi2, rec1, rec2;
};

struct ResNextSeVars {
  std::vector<Var> reduce, spatial, expand;
  Var se_down, se_up;
};

struct BlockVars {
  Var rho;
  Var lambda;  // softplus already applied
  std::array<Var, kBranches> msdc;
  ResNextSeVars denoise, highpass;
  Var fwd1, fwd2, inv1, inv2, head;
};

StpVars bind(Graph& g, StpOperator& op);
BlockVars bind(Graph& g, IstaBlockParams& params);
// Constant bindings for evaluation-only graphs.
StpVars bind_constant(Graph& g, const StpOperator& op);
BlockVars bind_constant(Graph& g, const IstaBlockParams& params);

// Phi1 X Phi2^T and Rec1 Y Rec2^T on [batch, 1, side, side] tensors.
Var measure(Var x, const StpVars& stp);
Var initial_reconstruct(Var y, const StpVars& stp);

// r = x - rho * Rec1 (Phi1 x Phi2^T - y) Rec2^T
Var irb_forward(Var x, Var y, const StpVars& stp, Var rho);
// Sum over enabled branches of the dilated 1 -> C convolutions.
Var msdc_forward(Var r, const std::array<Var, kBranches>& kernels, const BranchMask& mask);
Var resnext_se_forward(Var features, const ResNextSeVars& params);
// Squeeze-and-excitation gate of `features`, shape [batch, C, 1, 1].
Var se_gate(Var features, Var down, Var up);

struct BlockOutput {
  Var x_next;        // [batch, 1, n, n]
  Var sym_residual;  // F_inv(F_fwd(d)) - d, [batch, C, n, n]
  Var r;             // immediate reconstruction
};

BlockOutput ista_block_forward(Var x, Var y, const StpVars& stp, const BlockVars& block,
                               const BranchMask& mask);

// Untaped convenience forms.
Tensor irb_forward(const Tensor& x, const Tensor& y, const StpOperator& op, double rho);
Tensor msdc_forward(const Tensor& r, const IstaBlockParams& params, const BranchMask& mask);
Tensor resnext_se_forward(const Tensor& features, const ResNextSeParams& params);

struct BlockValues {
  Tensor x_next;
  Tensor sym_residual;
};
BlockValues ista_block_forward(const Tensor& x, const Tensor& y, const StpOperator& op,
                               const IstaBlockParams& params);

}  // namespace msdc
