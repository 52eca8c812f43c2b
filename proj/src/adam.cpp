#include "msdc/adam.hpp"

#include <cmath>

#include "msdc/errors.hpp"

namespace msdc {

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.step < 0) throw ArgumentError("adam step counter must be non-negative");
  if (state.m.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam state tracks a different parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->requires_grad()) throw ArgumentError("adam parameter without gradient buffer");
    if (state.m[i].size() != params[i]->size() || state.v[i].size() != params[i]->size()) {
      throw ShapeError("adam moment buffer does not match parameter " + params[i]->shape().str());
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i]->data();
    auto grad = params[i]->grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double g = grad[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      data[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace msdc
