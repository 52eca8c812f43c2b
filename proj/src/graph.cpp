#include "msdc/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "msdc/errors.hpp"

namespace msdc {

const Tensor& Var::value() const { return graph->value(*this); }
const Shape& Var::shape() const { return graph->value(*this).shape(); }

Tensor& Graph::BackwardCtx::input_grad(std::size_t k) const {
  return graph.nodes_[inputs[k]].grad;
}

const Tensor& Graph::BackwardCtx::input_value(std::size_t k) const {
  return graph.nodes_[inputs[k]].value;
}

void Graph::check(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw ArgumentError("variable does not belong to this graph");
  }
}

Var Graph::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  Node node;
  node.op = "input";
  node.value = std::move(value);
  node.requires_grad = true;
  node.reaches_input = true;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(Tensor& p) {
  Node node;
  node.op = "param";
  node.value = Tensor(p.shape(), p.vec());
  if (p.requires_grad()) {
    node.requires_grad = true;
    node.bound = &p;
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(std::string_view op, Tensor value, std::vector<Var> inputs,
                  BackwardFn backward) {
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check(in);
    const Node& src = nodes_[in.id];
    node.requires_grad = node.requires_grad || src.requires_grad;
    node.reaches_input = node.reaches_input || src.reaches_input;
    node.inputs.push_back(in.id);
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

const Tensor& Graph::grad(Var v) const {
  check(v);
  return nodes_[v.id].grad;
}

std::string_view Graph::op(Var v) const {
  check(v);
  return nodes_[v.id].op;
}

void Graph::backward(Var loss) {
  check(loss);
  if (nodes_[loss.id].value.size() != 1) {
    throw ArgumentError("backward(loss) requires a scalar loss, got " +
                        nodes_[loss.id].value.shape().str());
  }
  backward(loss, Tensor::like(nodes_[loss.id].value, 1.0), GradTarget::All);
}

void Graph::backward(Var out, const Tensor& seed, GradTarget target) {
  check(out);
  if (!(seed.shape() == nodes_[out.id].value.shape())) {
    throw ShapeError("backward seed " + seed.shape().str() + " does not match output " +
                     nodes_[out.id].value.shape().str());
  }
  std::vector<char> active(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    const bool on = node.requires_grad &&
                    (target == GradTarget::All || node.reaches_input);
    active[i] = on ? 1 : 0;
    if (node.requires_grad) {
      if (node.grad.shape() == node.value.shape()) {
        std::fill(node.grad.data().begin(), node.grad.data().end(), 0.0);
      } else {
        node.grad = Tensor::like(node.value);
      }
    } else {
      node.grad = Tensor();
    }
  }
  if (!active[out.id]) return;
  std::copy(seed.data().begin(), seed.data().end(), nodes_[out.id].grad.data().begin());

  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!active[i]) continue;
    if (node.backward) {
      BackwardCtx ctx{*this, node.inputs, active};
      node.backward(node.grad, node.value, ctx);
    } else if (node.bound != nullptr && target == GradTarget::All) {
      auto dst = node.bound->grad();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
  }
}

// ---------------------------------------------------------------------------
namespace {

Graph& same_graph(Var a, Var b) {
  if (!a.valid() || a.graph != b.graph) throw ArgumentError("operands live on different graphs");
  return *a.graph;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Geometry of a "same" convolution on one image.
struct ConvGeom {
  long C, H, W, kh, kw, d, ph, pw;
  long taps() const { return C * kh * kw; }
  long plane() const { return H * W; }
  bool pointwise() const { return kh == 1 && kw == 1; }
};

// cols[(c * kh + ky) * kw + kx, y * W + x] = in[c, y + dy, x + dx], zero outside.
void im2col(const double* in, const ConvGeom& g, double* cols) {
  for (long c = 0; c < g.C; ++c)
    for (long ky = 0; ky < g.kh; ++ky)
      for (long kx = 0; kx < g.kw; ++kx) {
        const long dy = ky * g.d - g.ph, dx = kx * g.d - g.pw;
        double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.plane();
        const double* src = in + c * g.plane();
        const long x0 = std::max(0L, -dx), x1 = std::min(g.W, g.W - dx);
        for (long y = 0; y < g.H; ++y) {
          double* o = row + y * g.W;
          const long sy = y + dy;
          if (sy < 0 || sy >= g.H || x0 >= x1) {
            std::fill(o, o + g.W, 0.0);
            continue;
          }
          std::fill(o, o + x0, 0.0);
          std::copy(src + sy * g.W + x0 + dx, src + sy * g.W + x1 + dx, o + x0);
          std::fill(o + std::max(x1, x0), o + g.W, 0.0);
        }
      }
}

// Adjoint of im2col: scatters column rows back into image planes.
void col2im_add(const double* cols, const ConvGeom& g, double* out) {
  for (long c = 0; c < g.C; ++c)
    for (long ky = 0; ky < g.kh; ++ky)
      for (long kx = 0; kx < g.kw; ++kx) {
        const long dy = ky * g.d - g.ph, dx = kx * g.d - g.pw;
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.plane();
        double* dst = out + c * g.plane();
        const long x0 = std::max(0L, -dx), x1 = std::min(g.W, g.W - dx);
        for (long y = 0; y < g.H; ++y) {
          const long sy = y + dy;
          if (sy < 0 || sy >= g.H) continue;
          const double* o = row + y * g.W;
          double* t = dst + sy * g.W + dx;
          for (long x = x0; x < x1; ++x) t[x] += o[x];
        }
      }
}

// Per-thread im2col workspace; contents are fully overwritten before use.
double* scratch(std::size_t count) {
  thread_local std::vector<double> buf;
  if (buf.size() < count) buf.resize(count);
  return buf.data();
}

ConvGeom geometry(const Shape& s, const Shape& ks, int d) {
  return ConvGeom{static_cast<long>(s.c), static_cast<long>(s.h), static_cast<long>(s.w),
                  static_cast<long>(ks.h), static_cast<long>(ks.w), d,
                  d * static_cast<long>(ks.h - 1) / 2, d * static_cast<long>(ks.w - 1) / 2};
}

void check_conv(const Shape& in, const Shape& k, int dilation) {
  if (dilation < 1) throw ArgumentError("conv2d dilation must be >= 1");
  if (k.c != in.c) {
    throw ShapeError("conv2d channel mismatch: input " + in.str() + ", kernel " + k.str());
  }
  if (k.h % 2 == 0 || k.w % 2 == 0) throw ShapeError("conv2d kernel extent must be odd");
}

Tensor conv_forward(const Tensor& x, const Tensor& k, int d, const Tensor* bias) {
  const Shape& s = x.shape();
  const Shape& ks = k.shape();
  check_conv(s, ks, d);
  if (bias != nullptr && bias->size() != ks.n) throw ShapeError("conv2d bias length mismatch");
  Tensor out(Shape{s.n, ks.n, s.h, s.w});
  const ConvGeom g = geometry(s, ks, d);
  const long co = static_cast<long>(ks.n);
  ConstMapMat kmat(k.data().data(), co, g.taps());
  double* cols = g.pointwise() ? nullptr : scratch(static_cast<std::size_t>(g.taps() * g.plane()));
  for (std::size_t b = 0; b < s.n; ++b) {
    const double* in = x.data().data() + b * s.c * s.plane();
    if (!g.pointwise()) im2col(in, g, cols);
    ConstMapMat cmat(g.pointwise() ? in : cols, g.taps(), g.plane());
    MapMat omat(out.data().data() + b * ks.n * s.plane(), co, g.plane());
    omat.noalias() = kmat * cmat;
    if (bias != nullptr) {
      for (long c = 0; c < co; ++c) omat.row(c).array() += (*bias)[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

// Per-axis broadcasting layout of two operands against a result.
struct Broadcast {
  Shape out;
  std::array<std::size_t, 4> sa{}, sb{};
};

std::array<std::size_t, 4> dims(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

std::array<std::size_t, 4> strides_for(const Shape& s, const std::array<std::size_t, 4>& o) {
  const auto d = dims(s);
  std::array<std::size_t, 4> st{};
  std::size_t acc = 1;
  for (int ax = 3; ax >= 0; --ax) {
    st[ax] = (d[ax] == 1 && o[ax] != 1) ? 0 : acc;
    acc *= d[ax];
  }
  return st;
}

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  const auto da = dims(a), db = dims(b);
  std::array<std::size_t, 4> o{};
  for (int ax = 0; ax < 4; ++ax) {
    if (da[ax] == db[ax] || db[ax] == 1) {
      o[ax] = da[ax];
    } else if (da[ax] == 1) {
      o[ax] = db[ax];
    } else {
      throw ShapeError(std::string(op) + ": shapes " + a.str() + " and " + b.str() +
                       " are not broadcastable");
    }
  }
  Broadcast bc;
  bc.out = Shape{o[0], o[1], o[2], o[3]};
  bc.sa = strides_for(a, o);
  bc.sb = strides_for(b, o);
  return bc;
}

// Visits every output element with the flat offsets into both operands.
template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
  const auto o = dims(bc.out);
  std::size_t idx = 0;
  for (std::size_t i0 = 0; i0 < o[0]; ++i0)
    for (std::size_t i1 = 0; i1 < o[1]; ++i1)
      for (std::size_t i2 = 0; i2 < o[2]; ++i2) {
        const std::size_t ra = i0 * bc.sa[0] + i1 * bc.sa[1] + i2 * bc.sa[2];
        const std::size_t rb = i0 * bc.sb[0] + i1 * bc.sb[1] + i2 * bc.sb[2];
        for (std::size_t i3 = 0; i3 < o[3]; ++i3, ++idx) {
          f(idx, ra + i3 * bc.sa[3], rb + i3 * bc.sb[3]);
        }
      }
}

template <typename Fwd, typename Da, typename Db>
Var binary(const char* name, Var a, Var b, Fwd fwd, Da da, Db db) {
  Graph& g = same_graph(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  const Broadcast bc = broadcast(va.shape(), vb.shape(), name);
  Tensor out(bc.out);
  for_each_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = fwd(va[ia], vb[ib]);
  });
  return g.record(name, std::move(out), {a, b},
                  [bc, da, db](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
                    const Tensor& xa = ctx.input_value(0);
                    const Tensor& xb = ctx.input_value(1);
                    const bool wa = ctx.wants(0), wb = ctx.wants(1);
                    Tensor* ga = wa ? &ctx.input_grad(0) : nullptr;
                    Tensor* gb = wb ? &ctx.input_grad(1) : nullptr;
                    for_each_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                      if (ga) (*ga)[ia] += go[i] * da(xa[ia], xb[ib]);
                      if (gb) (*gb)[ib] += go[i] * db(xa[ia], xb[ib]);
                    });
                  });
}

template <typename Fwd, typename Deriv>
Var unary(const char* name, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& va = a.value();
  Tensor out = Tensor::like(va);
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = fwd(va[i]);
  return a.graph->record(name, std::move(out), {a},
                         [deriv](const Tensor& go, const Tensor& y, const Graph::BackwardCtx& ctx) {
                           const Tensor& x = ctx.input_value(0);
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t i = 0; i < x.size(); ++i) gx[i] += go[i] * deriv(x[i], y[i]);
                         });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int dilation, const Tensor* bias) {
  return conv_forward(input, kernel, dilation, bias);
}

Var conv2d(Var input, Var kernel, int dilation, std::optional<Var> bias) {
  Graph& g = same_graph(input, kernel);
  const Tensor* bias_value = nullptr;
  std::vector<Var> inputs{input, kernel};
  if (bias) {
    same_graph(input, *bias);
    bias_value = &bias->value();
    inputs.push_back(*bias);
  }
  Tensor out = conv_forward(input.value(), kernel.value(), dilation, bias_value);
  const bool has_bias = bias.has_value();
  return g.record(
      "conv2d", std::move(out), std::move(inputs),
      [dilation, has_bias](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
        const Tensor& x = ctx.input_value(0);
        const Tensor& k = ctx.input_value(1);
        const Shape& s = x.shape();
        const Shape& ks = k.shape();
        const ConvGeom geo = geometry(s, ks, dilation);
        const long co = static_cast<long>(ks.n);
        const std::size_t plane = s.plane();
        const bool wx = ctx.wants(0), wk = ctx.wants(1);
        ConstMapMat kmat(k.data().data(), co, geo.taps());
        double* cols =
            geo.pointwise() ? nullptr : scratch(static_cast<std::size_t>(geo.taps() * geo.plane()));
        RowMat gcols;
        for (std::size_t b = 0; b < s.n; ++b) {
          ConstMapMat gomat(go.data().data() + b * ks.n * plane, co, geo.plane());
          const double* in = x.data().data() + b * s.c * plane;
          if (wk) {
            if (!geo.pointwise()) im2col(in, geo, cols);
            ConstMapMat cmat(geo.pointwise() ? in : cols, geo.taps(), geo.plane());
            MapMat gkmat(ctx.input_grad(1).data().data(), co, geo.taps());
            gkmat.noalias() += gomat * cmat.transpose();
          }
          if (wx) {
            double* gin = ctx.input_grad(0).data().data() + b * s.c * plane;
            if (geo.pointwise()) {
              MapMat gimat(gin, geo.taps(), geo.plane());
              gimat.noalias() += kmat.transpose() * gomat;
            } else {
              gcols.noalias() = kmat.transpose() * gomat;
              col2im_add(gcols.data(), geo, gin);
            }
          }
        }
        if (has_bias && ctx.wants(2)) {
          Tensor& gb = ctx.input_grad(2);
          for (std::size_t b = 0; b < s.n; ++b)
            for (std::size_t co = 0; co < ks.n; ++co) {
              const double* o = go.data().data() + (b * ks.n + co) * plane;
              double acc = 0.0;
              for (std::size_t i = 0; i < plane; ++i) acc += o[i];
              gb[co] += acc;
            }
        }
      });
}

Var soft_threshold(Var v, Var lambda) {
  Graph& g = same_graph(v, lambda);
  const Tensor& x = v.value();
  const Tensor& lam = lambda.value();
  const Shape& ls = lam.shape();
  const bool per_channel = ls.n == 1 && ls.c == x.shape().c && ls.h == 1 && ls.w == 1;
  if (!(lam.size() == 1 || per_channel)) {
    throw ShapeError("soft_threshold lambda must be scalar or per-channel, got " + ls.str());
  }
  for (double l : lam.data()) {
    if (!(l >= 0.0)) throw ArgumentError("soft_threshold lambda must be non-negative");
  }
  const std::size_t C = x.shape().c, plane = x.shape().plane();
  Tensor out = Tensor::like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double l = lam.size() == 1 ? lam[0] : lam[(i / plane) % C];
    const double a = std::abs(x[i]) - l;
    out[i] = a > 0.0 ? std::copysign(a, x[i]) : 0.0;
  }
  return g.record("soft_threshold", std::move(out), {v, lambda},
                  [C, plane](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
                    const Tensor& x = ctx.input_value(0);
                    const Tensor& lam = ctx.input_value(1);
                    Tensor* gx = ctx.wants(0) ? &ctx.input_grad(0) : nullptr;
                    Tensor* gl = ctx.wants(1) ? &ctx.input_grad(1) : nullptr;
                    for (std::size_t i = 0; i < x.size(); ++i) {
                      const std::size_t li = lam.size() == 1 ? 0 : (i / plane) % C;
                      if (std::abs(x[i]) > lam[li]) {
                        if (gx) (*gx)[i] += go[i];
                        if (gl) (*gl)[li] -= go[i] * (x[i] > 0.0 ? 1.0 : -1.0);
                      }
                    }
                  });
}

Var relu(Var v) {
  return unary(
      "relu", v, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var v) {
  return unary(
      "sigmoid", v, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var v) {
  return unary(
      "softplus", v,
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var global_avg_pool(Var v) {
  const Tensor& x = v.value();
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  if (plane == 0) throw ShapeError("global_avg_pool of empty planes");
  Tensor out(Shape{s.n, s.c, 1, 1});
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += x[p * plane + i];
    out[p] = acc / static_cast<double>(plane);
  }
  return v.graph->record("global_avg_pool", std::move(out), {v},
                         [plane](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
                           Tensor& gx = ctx.input_grad(0);
                           const double inv = 1.0 / static_cast<double>(plane);
                           for (std::size_t p = 0; p < go.size(); ++p)
                             for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += go[p] * inv;
                         });
}

namespace {

// C[p x r] += A[p x q] * B[q x r] with optional transposes on the stored operands.
// C[p x r] += op(A) op(B) with op(A) p x q and op(B) q x r; ta / tb mark
// operands stored transposed.
void gemm_acc(double* C, const double* A, const double* B, std::size_t p, std::size_t q,
              std::size_t r, bool ta, bool tb) {
  const auto P = static_cast<long>(p), Q = static_cast<long>(q), R = static_cast<long>(r);
  MapMat c(C, P, R);
  if (!ta && !tb) {
    c.noalias() += ConstMapMat(A, P, Q) * ConstMapMat(B, Q, R);
  } else if (!ta) {
    c.noalias() += ConstMapMat(A, P, Q) * ConstMapMat(B, R, Q).transpose();
  } else if (!tb) {
    c.noalias() += ConstMapMat(A, Q, P).transpose() * ConstMapMat(B, Q, R);
  } else {
    c.noalias() += ConstMapMat(A, Q, P).transpose() * ConstMapMat(B, R, Q).transpose();
  }
}

std::size_t batch_dim(std::size_t a, std::size_t b, const Shape& sa, const Shape& sb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeError("matmul leading axes not broadcastable: " + sa.str() + " vs " + sb.str());
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.w != sb.h) throw ShapeError("matmul inner extents differ: " + sa.str() + " x " + sb.str());
  const std::size_t N = batch_dim(sa.n, sb.n, sa, sb);
  const std::size_t Cc = batch_dim(sa.c, sb.c, sa, sb);
  const std::size_t p = sa.h, q = sa.w, r = sb.w;
  Tensor out(Shape{N, Cc, p, r});
  auto slice_a = [sa, p, q](std::size_t n, std::size_t c) {
    return ((sa.n == 1 ? 0 : n) * sa.c + (sa.c == 1 ? 0 : c)) * p * q;
  };
  auto slice_b = [sb, q, r](std::size_t n, std::size_t c) {
    return ((sb.n == 1 ? 0 : n) * sb.c + (sb.c == 1 ? 0 : c)) * q * r;
  };
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < Cc; ++c)
      gemm_acc(out.data().data() + (n * Cc + c) * p * r, a.value().data().data() + slice_a(n, c),
               b.value().data().data() + slice_b(n, c), p, q, r, false, false);
  return g.record("matmul", std::move(out), {a, b},
                  [=](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
                    const double* A = ctx.input_value(0).data().data();
                    const double* B = ctx.input_value(1).data().data();
                    for (std::size_t n = 0; n < N; ++n)
                      for (std::size_t c = 0; c < Cc; ++c) {
                        const double* G = go.data().data() + (n * Cc + c) * p * r;
                        if (ctx.wants(0))  // dA = G B^T
                          gemm_acc(ctx.input_grad(0).data().data() + slice_a(n, c), G,
                                   B + slice_b(n, c), p, r, q, false, true);
                        if (ctx.wants(1))  // dB = A^T G
                          gemm_acc(ctx.input_grad(1).data().data() + slice_b(n, c),
                                   A + slice_a(n, c), G, q, p, r, true, false);
                      }
                  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  const Shape s = x.shape();
  Tensor out(Shape{s.n, s.c, s.w, s.h});
  const std::size_t plane = s.plane();
  for (std::size_t p = 0; p < s.n * s.c; ++p)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) out[p * plane + j * s.h + i] = x[p * plane + i * s.w + j];
  return a.graph->record("transpose", std::move(out), {a},
                         [s, plane](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t p = 0; p < s.n * s.c; ++p)
                             for (std::size_t i = 0; i < s.h; ++i)
                               for (std::size_t j = 0; j < s.w; ++j)
                                 gx[p * plane + i * s.w + j] += go[p * plane + j * s.h + i];
                         });
}

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return a.graph->record("sum", Tensor::scalar(acc), {a},
                         [](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
                           Tensor& gx = ctx.input_grad(0);
                           for (double& g : gx.data()) g += go[0];
                         });
}

Var hmse(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!(x.shape() == y.shape())) {
    throw ShapeError("hmse shape mismatch: " + x.shape().str() + " vs " + y.shape().str());
  }
  const double inv_n = 1.0 / static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x[i] - y[i];
    acc += e * e;
  }
  return g.record("hmse", Tensor::scalar(0.5 * inv_n * acc), {a, b},
                  [inv_n](const Tensor& go, const Tensor&, const Graph::BackwardCtx& ctx) {
                    const Tensor& x = ctx.input_value(0);
                    const Tensor& y = ctx.input_value(1);
                    Tensor* ga = ctx.wants(0) ? &ctx.input_grad(0) : nullptr;
                    Tensor* gb = ctx.wants(1) ? &ctx.input_grad(1) : nullptr;
                    for (std::size_t i = 0; i < x.size(); ++i) {
                      const double d = go[0] * inv_n * (x[i] - y[i]);
                      if (ga) (*ga)[i] += d;
                      if (gb) (*gb)[i] -= d;
                    }
                  });
}

Var hmse(Var a) { return hmse(a, a.graph->constant(Tensor::like(a.value()))); }

}  // namespace msdc
