#include "msdc/ista_block.hpp"

#include <cmath>

#include "msdc/errors.hpp"

namespace msdc {

BranchMask parse_mask(const std::string& bits) {
  if (bits.size() != kBranches) {
    throw ArgumentError("branch mask must have exactly 7 characters, got \"" + bits + "\"");
  }
  BranchMask mask{};
  for (std::size_t i = 0; i < kBranches; ++i) {
    if (bits[i] != '0' && bits[i] != '1') {
      throw ArgumentError("branch mask may only contain 0 and 1, got \"" + bits + "\"");
    }
    mask[i] = bits[i] == '1';
  }
  return mask;
}

std::string mask_string(const BranchMask& mask) {
  std::string s(kBranches, '0');
  for (std::size_t i = 0; i < kBranches; ++i) s[i] = mask[i] ? '1' : '0';
  return s;
}

void BlockConfig::validate() const {
  if (!(head_gain >= 0.0)) throw ConfigError("head gain must be non-negative");
  if (channels == 0 || cardinality == 0 || se_reduction == 0) {
    throw ConfigError("channel width, cardinality and SE reduction must be positive");
  }
  if (channels % cardinality != 0) {
    throw ConfigError("cardinality " + std::to_string(cardinality) + " does not divide channel width " +
                      std::to_string(channels));
  }
  if (channels % se_reduction != 0) {
    throw ConfigError("SE reduction " + std::to_string(se_reduction) +
                      " does not divide channel width " + std::to_string(channels));
  }
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class KernelFactory {
 public:
  explicit KernelFactory(std::uint64_t seed) : state_(seed) {}

  Tensor make(Shape s, double stddev) {
    state_ = splitmix(state_);
    Tensor t = randn(s, state_, stddev);
    t.set_requires_grad(true);
    return t;
  }

 private:
  std::uint64_t state_;
};

double he(std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

ResNextSeParams init_resnext(const BlockConfig& c, KernelFactory& f) {
  const std::size_t C = c.channels, w = C / c.cardinality, r = C / c.se_reduction;
  ResNextSeParams p;
  for (std::size_t j = 0; j < c.cardinality; ++j) {
    p.reduce.push_back(f.make(Shape{w, C, 1, 1}, he(C)));
    p.spatial.push_back(f.make(Shape{w, w, 3, 3}, he(9 * w)));
    // Small expansion keeps the residual branch near identity at the start.
    p.expand.push_back(f.make(Shape{C, w, 1, 1}, 0.1 * he(w * c.cardinality)));
  }
  p.se_down = f.make(Shape{r, C, 1, 1}, std::sqrt(1.0 / static_cast<double>(C)));
  p.se_up = f.make(Shape{C, r, 1, 1}, std::sqrt(1.0 / static_cast<double>(r)));
  return p;
}

void check_resnext(const ResNextSeParams& p) {
  if (p.reduce.empty() || p.reduce.size() != p.spatial.size() || p.reduce.size() != p.expand.size()) {
    throw ConfigError("ResNeXt-SE parameter set has inconsistent branch counts");
  }
}

void name_resnext(const std::string& prefix, ResNextSeParams& p,
                  std::vector<std::pair<std::string, Tensor*>>& out) {
  for (std::size_t j = 0; j < p.reduce.size(); ++j) {
    const std::string b = prefix + ".branch" + std::to_string(j);
    out.emplace_back(b + ".reduce", &p.reduce[j]);
    out.emplace_back(b + ".spatial", &p.spatial[j]);
    out.emplace_back(b + ".expand", &p.expand[j]);
  }
  out.emplace_back(prefix + ".se_down", &p.se_down);
  out.emplace_back(prefix + ".se_up", &p.se_up);
}

template <typename Binder>
ResNextSeVars bind_resnext(const ResNextSeParams& p, Binder&& b) {
  check_resnext(p);
  ResNextSeVars v;
  for (std::size_t j = 0; j < p.reduce.size(); ++j) {
    v.reduce.push_back(b(p.reduce[j]));
    v.spatial.push_back(b(p.spatial[j]));
    v.expand.push_back(b(p.expand[j]));
  }
  v.se_down = b(p.se_down);
  v.se_up = b(p.se_up);
  return v;
}

template <typename Binder>
BlockVars bind_block(Graph& g, const IstaBlockParams& p, Binder&& b) {
  p.config.validate();
  BlockVars v;
  v.rho = b(p.rho);
  v.lambda = softplus(b(p.lambda_pre));
  for (std::size_t d = 0; d < kBranches; ++d) v.msdc[d] = b(p.msdc[d]);
  v.denoise = bind_resnext(p.denoise, b);
  v.fwd1 = b(p.fwd1);
  v.fwd2 = b(p.fwd2);
  v.inv1 = b(p.inv1);
  v.inv2 = b(p.inv2);
  v.highpass = bind_resnext(p.highpass, b);
  v.head = b(p.head);
  (void)g;
  return v;
}

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

IstaBlockParams IstaBlockParams::init(const BlockConfig& config, std::uint64_t seed, double rho,
                                      double lambda) {
  config.validate();
  if (!(lambda > 0.0)) throw ArgumentError("initial threshold must be positive");
  const std::size_t C = config.channels;
  KernelFactory f(seed);
  IstaBlockParams p;
  p.config = config;
  p.rho = Tensor::scalar(rho);
  p.rho.set_requires_grad(true);
  p.lambda_pre = Tensor(Shape{1, C, 1, 1}, softplus_inverse(lambda));
  p.lambda_pre.set_requires_grad(true);
  for (auto& k : p.msdc) k = f.make(Shape{C, 1, 3, 3}, std::sqrt(1.0 / (9.0 * kBranches)));
  p.denoise = init_resnext(config, f);
  p.fwd1 = f.make(Shape{C, C, 3, 3}, he(9 * C));
  p.fwd2 = f.make(Shape{C, C, 3, 3}, he(9 * C));
  p.inv1 = f.make(Shape{C, C, 3, 3}, he(9 * C));
  p.inv2 = f.make(Shape{C, C, 3, 3}, he(9 * C));
  p.highpass = init_resnext(config, f);
  p.head = f.make(Shape{1, C, 3, 3}, config.head_gain * std::sqrt(1.0 / (9.0 * static_cast<double>(C))));
  return p;
}

std::vector<std::pair<std::string, Tensor*>> IstaBlockParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("block.rho", &rho);
  out.emplace_back("block.lambda_pre", &lambda_pre);
  for (std::size_t d = 0; d < kBranches; ++d) {
    out.emplace_back("block.msdc.d" + std::to_string(d + 1), &msdc[d]);
  }
  name_resnext("block.denoise", denoise, out);
  out.emplace_back("block.fwd1", &fwd1);
  out.emplace_back("block.fwd2", &fwd2);
  out.emplace_back("block.inv1", &inv1);
  out.emplace_back("block.inv2", &inv2);
  name_resnext("block.highpass", highpass, out);
  out.emplace_back("block.head", &head);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> IstaBlockParams::named_tensors() const {
  auto named = const_cast<IstaBlockParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.emplace_back(name, t);
  return out;
}

StpVars bind(Graph& g, StpOperator& op) {
  op.validate();
  return StpVars{g.param(op.phi1), g.param(op.phi2), g.param(op.rec1), g.param(op.rec2)};
}

StpVars bind_constant(Graph& g, const StpOperator& op) {
  op.validate();
  return StpVars{g.constant(op.phi1), g.constant(op.phi2), g.constant(op.rec1), g.constant(op.rec2)};
}

BlockVars bind(Graph& g, IstaBlockParams& params) {
  return bind_block(g, params, [&g](const Tensor& t) { return g.param(const_cast<Tensor&>(t)); });
}

BlockVars bind_constant(Graph& g, const IstaBlockParams& params) {
  return bind_block(g, params, [&g](const Tensor& t) { return g.constant(t); });
}

Var measure(Var x, const StpVars& stp) {
  return matmul(matmul(stp.phi1, x), transpose(stp.phi2));
}

Var initial_reconstruct(Var y, const StpVars& stp) {
  return matmul(matmul(stp.rec1, y), transpose(stp.rec2));
}

Var irb_forward(Var x, Var y, const StpVars& stp, Var rho) {
  const Shape& xs = x.shape();
  const Shape& ys = y.shape();
  const Shape& ps = stp.phi1.shape();
  if (xs.c != 1 || xs.h != ps.w || xs.w != ps.w || ys.h != ps.h || ys.w != ps.h || ys.n != xs.n) {
    throw ShapeError("irb_forward: image " + xs.str() + " and measurement " + ys.str() +
                     " do not conform to a " + std::to_string(ps.h) + "x" + std::to_string(ps.w) +
                     " sampler");
  }
  const Var residual = measure(x, stp) - y;
  return x - rho * initial_reconstruct(residual, stp);
}

Var msdc_forward(Var r, const std::array<Var, kBranches>& kernels, const BranchMask& mask) {
  if (r.shape().c != 1) throw ShapeError("msdc_forward expects a single-channel input");
  std::optional<Var> acc;
  for (std::size_t d = 0; d < kBranches; ++d) {
    if (!mask[d]) continue;
    const Var branch = conv2d(r, kernels[d], static_cast<int>(d + 1));
    acc = acc ? add(*acc, branch) : branch;
  }
  if (!acc) {
    const Shape s = r.shape();
    return r.graph->constant(Tensor(Shape{s.n, kernels[0].shape().n, s.h, s.w}));
  }
  return *acc;
}

Var se_gate(Var features, Var down, Var up) {
  const Var pooled = global_avg_pool(features);
  return sigmoid(conv2d(relu(conv2d(pooled, down)), up));
}

Var resnext_se_forward(Var features, const ResNextSeVars& p) {
  const std::size_t C = features.shape().c;
  const std::size_t g = p.reduce.size();
  if (g == 0 || C % g != 0 || p.reduce[0].shape().c != C) {
    throw ConfigError("ResNeXt-SE: feature width " + std::to_string(C) +
                      " does not match the parameter set");
  }
  std::optional<Var> acc;
  for (std::size_t j = 0; j < g; ++j) {
    const Var a = relu(conv2d(features, p.reduce[j]));
    const Var b = relu(conv2d(a, p.spatial[j]));
    const Var c = conv2d(b, p.expand[j]);
    acc = acc ? add(*acc, c) : c;
  }
  return features + se_gate(*acc, p.se_down, p.se_up) * *acc;
}

BlockOutput ista_block_forward(Var x, Var y, const StpVars& stp, const BlockVars& v,
                               const BranchMask& mask) {
  BlockOutput out;
  out.r = irb_forward(x, y, stp, v.rho);
  const Var u = msdc_forward(out.r, v.msdc, mask);
  const Var d = resnext_se_forward(u, v.denoise);
  const Var s = conv2d(relu(conv2d(d, v.fwd1)), v.fwd2);
  const Var t = soft_threshold(s, v.lambda);
  const Var back = conv2d(relu(conv2d(t, v.inv1)), v.inv2);
  const Var h = conv2d(resnext_se_forward(back, v.highpass), v.head);
  out.x_next = out.r + h;
  // The symmetry path reuses the transform pair on d without thresholding.
  out.sym_residual = conv2d(relu(conv2d(s, v.inv1)), v.inv2) - d;
  return out;
}

Tensor irb_forward(const Tensor& x, const Tensor& y, const StpOperator& op, double rho) {
  Graph g;
  const StpVars stp = bind_constant(g, op);
  return irb_forward(g.constant(x), g.constant(y), stp, g.constant(Tensor::scalar(rho))).value();
}

Tensor msdc_forward(const Tensor& r, const IstaBlockParams& params, const BranchMask& mask) {
  Graph g;
  std::array<Var, kBranches> k;
  for (std::size_t d = 0; d < kBranches; ++d) k[d] = g.constant(params.msdc[d]);
  return msdc_forward(g.constant(r), k, mask).value();
}

Tensor resnext_se_forward(const Tensor& features, const ResNextSeParams& params) {
  Graph g;
  const ResNextSeVars v = bind_resnext(params, [&g](const Tensor& t) { return g.constant(t); });
  return resnext_se_forward(g.constant(features), v).value();
}

BlockValues ista_block_forward(const Tensor& x, const Tensor& y, const StpOperator& op,
                               const IstaBlockParams& params) {
  Graph g;
  const StpVars stp = bind_constant(g, op);
  const BlockVars v = bind_constant(g, params);
  const BlockOutput out = ista_block_forward(g.constant(x), g.constant(y), stp, v, params.mask);
  return BlockValues{out.x_next.value(), out.sym_residual.value()};
}

}  // namespace msdc
