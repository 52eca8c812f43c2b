#include "msdc/model.hpp"

#include <limits>

#include "msdc/errors.hpp"
#include "msdc/ista.hpp"

namespace msdc {

Model Model::init(std::size_t n, double ratio, const BlockConfig& config, std::uint64_t seed) {
  Model model;
  const std::size_t m = size_for_ratio(n, ratio);
  model.stp = StpOperator::gaussian(n, m, seed);
  const double l1 = lipschitz_bound(SensingOperator::dense(to_matrix(model.stp.phi1)));
  const double l2 = lipschitz_bound(SensingOperator::dense(to_matrix(model.stp.phi2)));
  model.block = IstaBlockParams::init(config, seed + 1, 1.0 / (l1 * l2));
  for (Tensor* t : {&model.stp.phi1, &model.stp.phi2, &model.stp.rec1, &model.stp.rec2}) {
    t->set_requires_grad(true);
  }
  return model;
}

Model Model::identity(std::size_t n, const BlockConfig& config, std::uint64_t seed) {
  Model model;
  model.stp = StpOperator::identity(n);
  model.block = IstaBlockParams::init(config, seed + 1, 1.0);
  model.block.head = Tensor(model.block.head.shape());
  model.block.head.set_requires_grad(true);
  for (Tensor* t : {&model.stp.phi1, &model.stp.phi2, &model.stp.rec1, &model.stp.rec2}) {
    t->set_requires_grad(true);
  }
  return model;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out{
      {"stp.phi1", &stp.phi1}, {"stp.phi2", &stp.phi2}, {"stp.rec1", &stp.rec1}, {"stp.rec2", &stp.rec2}};
  for (auto& entry : block.named_tensors()) out.push_back(entry);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::named_tensors() const {
  auto named = const_cast<Model*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.emplace_back(name, t);
  return out;
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

void Model::zero_grad() {
  for (Tensor* t : parameters()) t->zero_grad();
}

void Model::validate() const {
  stp.validate();
  block.config.validate();
  // Building a tiny graph checks every kernel against the configuration.
  const IstaBlockParams& b = block;
  const std::size_t C = b.config.channels;
  if (!(b.rho.shape() == Shape{1, 1, 1, 1}) || !(b.lambda_pre.shape() == Shape{1, C, 1, 1}) ||
      !(b.head.shape() == Shape{1, C, 3, 3})) {
    throw ConfigError("block parameters do not match channel width " + std::to_string(C));
  }
  for (const Tensor& k : b.msdc) {
    if (!(k.shape() == Shape{C, 1, 3, 3})) throw ConfigError("msdc kernel shape mismatch");
  }
  for (const Tensor* k : {&b.fwd1, &b.fwd2, &b.inv1, &b.inv2}) {
    if (!(k->shape() == Shape{C, C, 3, 3})) throw ConfigError("transform kernel shape mismatch");
  }
  const std::size_t w = C / b.config.cardinality, r = C / b.config.se_reduction;
  for (const ResNextSeParams* p : {&b.denoise, &b.highpass}) {
    if (p->reduce.size() != b.config.cardinality || p->spatial.size() != b.config.cardinality ||
        p->expand.size() != b.config.cardinality) {
      throw ConfigError("ResNeXt branch count does not match cardinality");
    }
    for (std::size_t j = 0; j < p->reduce.size(); ++j) {
      if (!(p->reduce[j].shape() == Shape{w, C, 1, 1}) || !(p->spatial[j].shape() == Shape{w, w, 3, 3}) ||
          !(p->expand[j].shape() == Shape{C, w, 1, 1})) {
        throw ConfigError("ResNeXt kernel shape mismatch");
      }
    }
    if (!(p->se_down.shape() == Shape{r, C, 1, 1}) || !(p->se_up.shape() == Shape{C, r, 1, 1})) {
      throw ConfigError("SE kernel shape mismatch");
    }
  }
}

Tensor measure(const Model& model, const Tensor& image) {
  Graph g;
  const StpVars stp = bind_constant(g, model.stp);
  const Shape& s = image.shape();
  if (s.c != 1 || s.h != model.stp.n || s.w != model.stp.n) {
    throw ShapeError("image " + s.str() + " does not match sampler side " + std::to_string(model.stp.n));
  }
  return measure(g.constant(image), stp).value();
}

Tensor initial_reconstruct(const Model& model, const Tensor& measurement) {
  Graph g;
  const StpVars stp = bind_constant(g, model.stp);
  const Shape& s = measurement.shape();
  if (s.c != 1 || s.h != model.stp.m || s.w != model.stp.m) {
    throw ShapeError("measurement " + s.str() + " does not match sampler side " +
                     std::to_string(model.stp.m));
  }
  return initial_reconstruct(g.constant(measurement), stp).value();
}

FixedPointMap block_map(const Model& model, const Tensor& measurement, const BranchMask& mask) {
  return [&model, measurement, mask](const Tensor& x) {
    Graph g;
    const StpVars stp = bind_constant(g, model.stp);
    const BlockVars v = bind_constant(g, model.block);
    return ista_block_forward(g.constant(x), g.constant(measurement), stp, v, mask).x_next.value();
  };
}

Reconstruction reconstruct_deq(const Model& model, const Tensor& measurement, const SolverConfig& cfg,
                               const BranchMask& mask) {
  Reconstruction rec;
  rec.initial = initial_reconstruct(model, measurement);
  try {
    rec.solve = anderson_solve(block_map(model, measurement, mask), rec.initial, cfg);
    rec.image = rec.solve.x_star;
  } catch (const DivergenceError& e) {
    rec.diverged = true;
    rec.image = e.last_finite();
    rec.solve.x_star = e.last_finite();
    rec.solve.iterations = e.iteration();
    rec.solve.converged = false;
    rec.solve.residual_norm = std::numeric_limits<double>::infinity();
  }
  return rec;
}

}  // namespace msdc
