#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msdc/graph.hpp"
#include "msdc/linalg.hpp"
#include "msdc/model.hpp"
#include "msdc/tensor.hpp"

namespace msdc::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("msdc_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

using LossBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;

// Compares reverse-mode gradients of a scalar loss against central
// differences in every leaf element. `skip(leaf, index)` excludes elements
// sitting on a kink.
inline GradReport gradcheck(std::vector<Tensor> leaves, const LossBuilder& build, double h = 1e-5,
                            const std::function<bool(std::size_t, std::size_t)>& skip = {}) {
  Graph g;
  std::vector<Var> vars;
  for (auto& t : leaves) vars.push_back(g.input(t));
  const Var loss = build(g, vars);
  g.backward(loss);
  std::vector<Tensor> analytic;
  for (const Var& v : vars) analytic.push_back(g.grad(v));

  auto eval = [&](const std::vector<Tensor>& ls) {
    Graph g2;
    std::vector<Var> vs;
    for (const auto& t : ls) vs.push_back(g2.constant(t));
    return build(g2, vs).value().item();
  };
  GradReport rep;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    for (std::size_t i = 0; i < leaves[k].size(); ++i) {
      if (skip && skip(k, i)) continue;
      const double orig = leaves[k][i];
      leaves[k][i] = orig + h;
      const double fp = eval(leaves);
      leaves[k][i] = orig - h;
      const double fm = eval(leaves);
      leaves[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      rep.max_rel = std::max(rep.max_rel, rel_err(analytic[k][i], numeric));
      ++rep.checked;
    }
  }
  return rep;
}

// Same check for tensors bound with Graph::param inside `build`. Every
// tensor in `params` must have requires_grad set.
inline GradReport gradcheck_params(const std::vector<Tensor*>& params, const std::function<Var(Graph&)>& build,
                                   double h = 1e-5, std::vector<double>* per_element = nullptr) {
  for (Tensor* p : params) p->zero_grad();
  {
    Graph g;
    g.backward(build(g));
  }
  GradReport rep;
  for (Tensor* p : params) {
    const std::vector<double> analytic(p->grad().begin(), p->grad().end());
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double orig = (*p)[i];
      (*p)[i] = orig + h;
      double fp, fm;
      {
        Graph g;
        fp = build(g).value().item();
      }
      (*p)[i] = orig - h;
      {
        Graph g;
        fm = build(g).value().item();
      }
      (*p)[i] = orig;
      const double e = rel_err(analytic[i], (fp - fm) / (2.0 * h));
      if (per_element) per_element->push_back(e);
      rep.max_rel = std::max(rep.max_rel, e);
      ++rep.checked;
    }
  }
  return rep;
}

// Six-loop "same" convolution used as an independent reference.
inline Tensor conv_reference(const Tensor& x, const Tensor& k, int d) {
  const Shape& s = x.shape();
  const Shape& ks = k.shape();
  Tensor out(Shape{s.n, ks.n, s.h, s.w});
  const long ph = d * static_cast<long>(ks.h - 1) / 2, pw = d * static_cast<long>(ks.w - 1) / 2;
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t co = 0; co < ks.n; ++co)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < s.c; ++ci)
            for (std::size_t ky = 0; ky < ks.h; ++ky)
              for (std::size_t kx = 0; kx < ks.w; ++kx) {
                const long iy = static_cast<long>(y) + static_cast<long>(ky) * d - ph;
                const long ix = static_cast<long>(xx) + static_cast<long>(kx) * d - pw;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(s.h) || ix >= static_cast<long>(s.w)) continue;
                acc += k.at(co, ci, ky, kx) * x.at(b, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          out.at(b, co, y, xx) = acc;
        }
  return out;
}

// 8x8 model with C = 4 whose block is a contraction: an orthogonal sampler at
// m = n with rho 0.5 makes the IRB Jacobian 0.5 I, and the residual path
// starts small.
inline Model contractive_model(std::uint64_t seed) {
  BlockConfig c;
  c.channels = 4;
  c.cardinality = 2;
  c.se_reduction = 2;
  Model m = Model::init(8, 1.0, c, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto [phi, rec] : {std::pair{&m.stp.phi1, &m.stp.rec1}, std::pair{&m.stp.phi2, &m.stp.rec2}}) {
    Matrix g(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) g(i, j) = nd(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    *phi = to_tensor(q);
    *rec = to_tensor(q.transpose());
    phi->set_requires_grad(true);
    rec->set_requires_grad(true);
  }
  m.block.rho[0] = 0.5;
  return m;
}

}  // namespace msdc::testing
