#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "msdc/tensor.hpp"

namespace msdc {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moments plus the shared step counter. Buffers
// are created on the first step and must keep matching their parameters.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update of every parameter from its grad() buffer.
void adam_step(std::span<Tensor* const> params, AdamState& state);

}  // namespace msdc
