#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "msdc/tensor.hpp"

namespace msdc {

class Graph;

// Handle to a value recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = std::numeric_limits<std::size_t>::max();

  bool valid() const { return graph != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const;
};

// Which leaves a backward pass propagates into.
enum class GradTarget {
  All,         // every differentiable leaf; bound parameters accumulate
  InputsOnly,  // only unbound differentiable leaves; parameters untouched
};

// Reverse-mode tape. Nodes are appended in forward order and therefore form
// a topological order; backward walks them in exact reverse.
class Graph {
 public:
  // Receives the output gradient and writes into input gradients. `wants(k)`
  // tells whether input k takes part in the current pass; `input_grad(k)`
  // is the accumulator for input k and is only valid when wants(k).
  struct BackwardCtx {
    Graph& graph;
    const std::vector<std::size_t>& inputs;
    const std::vector<char>& active;

    bool wants(std::size_t k) const { return active[inputs[k]] != 0; }
    Tensor& input_grad(std::size_t k) const;
    const Tensor& input_value(std::size_t k) const;
  };
  using BackwardFn = std::function<void(const Tensor& out_grad, const Tensor& out_value,
                                        const BackwardCtx& ctx)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Non-differentiable leaf.
  Var constant(Tensor value);
  // Differentiable leaf not bound to storage. Gradient readable via grad().
  Var input(Tensor value);
  // Differentiable leaf bound to `p`; an All pass adds into p.grad(). The
  // value is copied at record time, `p` must outlive the graph. A tensor
  // without requires_grad() is recorded as a constant.
  Var param(Tensor& p);

  // Used by primitives to append a node.
  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  // Gradient of the last backward pass. Zeros for differentiable nodes the
  // pass did not reach, empty for constants.
  const Tensor& grad(Var v) const;
  std::string_view op(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Scalar loss, seed 1.
  void backward(Var loss);
  // Vector-Jacobian product seeded with `seed` at `out`.
  void backward(Var out, const Tensor& seed, GradTarget target = GradTarget::All);

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor* bound = nullptr;
    bool requires_grad = false;
    bool reaches_input = false;
  };

  void check(Var v) const;

  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable primitives. All inputs must live on the same graph.

// "Same" 2-D convolution, zero padding dilation*(k-1)/2 per axis.
// kernel: [out_c, in_c, kh, kw] with odd kh, kw; bias: [1, out_c, 1, 1].
Var conv2d(Var input, Var kernel, int dilation = 1, std::optional<Var> bias = std::nullopt);

// (|v| - lambda)_+ sgn(v). lambda is [1,1,1,1] or [1,C,1,1] and must be >= 0.
// Subgradient 0 where |v| <= lambda.
Var soft_threshold(Var v, Var lambda);

Var relu(Var v);
Var sigmoid(Var v);
Var softplus(Var v);
// Mean over each (batch, channel) plane -> [n, c, 1, 1].
Var global_avg_pool(Var v);

// Per-slice matrix product over the trailing two axes. Leading axes must
// agree or be 1 on one side (broadcast).
Var matmul(Var a, Var b);
// Per-slice transpose of the trailing two axes.
Var transpose(Var a);

// Broadcasting elementwise arithmetic: every axis must match or be 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

Var sum(Var a);
// (1 / 2N) * sum (a - b)^2, N the element count.
Var hmse(Var a, Var b);
// hmse against zero.
Var hmse(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Plain (untaped) evaluation of the same convolution, used by callers that
// never need gradients.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int dilation,
                      const Tensor* bias = nullptr);

}  // namespace msdc
