#include "msdc/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "msdc/errors.hpp"
#include "msdc/metrics.hpp"
#include "msdc/stp.hpp"

namespace msdc {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (!(cs_ratio > 0.0 && cs_ratio <= 1.0)) throw ConfigError("cs_ratio must lie in (0, 1]");
  if (image_side < 1) throw ConfigError("image side must be positive");
  if (steps == 0 && epochs == 0) throw ConfigError("either epochs or steps must be positive");
  if (gamma_sym < 0.0 || gamma_init < 0.0) throw ConfigError("loss weights must be non-negative");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
  if (!(jacobian_reg >= 0.0)) throw ConfigError("jacobian_reg must be non-negative");
  if (!(jacobian_probe > 0.0)) throw ConfigError("jacobian_probe must be positive");
  forward.validate();
  backward.validate();
}

namespace {

void check_loss_shapes(const Shape& o1, const Shape& o2, const Shape& o3, const Shape& x) {
  if (!(o1 == x) || !(o3 == x) || o2.n != x.n || o2.h != x.h || o2.w != x.w) {
    throw ShapeError("total_loss: outputs " + o1.str() + ", " + o2.str() + ", " + o3.str() +
                     " do not conform to " + x.str());
  }
}

}  // namespace

Var total_loss(Var out1, Var out2, Var out3, Var x_true, double gamma_sym, double gamma_init) {
  check_loss_shapes(out1.value().shape(), out2.value().shape(), out3.value().shape(), x_true.value().shape());
  return hmse(out1, x_true) + gamma_sym * hmse(out2) + gamma_init * hmse(out3, x_true);
}

double total_loss(const Tensor& out1, const Tensor& out2, const Tensor& out3, const Tensor& x_true,
                  double gamma_sym, double gamma_init) {
  check_loss_shapes(out1.shape(), out2.shape(), out3.shape(), x_true.shape());
  return hmse(out1, x_true) + gamma_sym * hmse(out2, Tensor::like(out2)) +
         gamma_init * hmse(out3, x_true);
}

namespace {

struct Solved {
  Tensor x_star;
  int iterations = 0;
  bool diverged = false;
};

// Accumulates w * d(ratio)/dtheta into the parameter grads and returns the ratio.
double jacobian_penalty(Model& model, const Tensor& x, const Tensor& x_star, const TrainConfig& cfg,
                        std::uint64_t seed, double w) {
  const Tensor e = randn(x_star.shape(), seed, cfg.jacobian_probe);
  Tensor shifted = x_star;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += e[i];
  Graph g;
  const StpVars stp = bind(g, model.stp);
  const BlockVars vars = bind(g, model.block);
  const Var y = measure(g.constant(x), stp);
  const Var f0 = ista_block_forward(g.constant(x_star), y, stp, vars, cfg.mask).x_next;
  const Var f1 = ista_block_forward(g.constant(shifted), y, stp, vars, cfg.mask).x_next;
  const Var ratio = scale(hmse(f1, f0), 1.0 / msdc::hmse(e, Tensor::like(e)));
  g.backward(w * ratio);
  return ratio.value().item();
}

}  // namespace

TrainResult train(Model model, const Dataset& data, const TrainConfig& cfg, const StepObserver& on_step,
                  const EpochObserver& on_epoch) {
  cfg.validate();
  model.validate();
  const auto pool = data.subset(Split::Train);
  if (pool.empty()) throw ConfigError("training split is empty");
  if (model.stp.n != cfg.image_side || data.side != cfg.image_side) {
    throw ConfigError("model side " + std::to_string(model.stp.n) + " / data side " +
                      std::to_string(data.side) + " do not match image_side " +
                      std::to_string(cfg.image_side));
  }
  if (model.stp.m != size_for_ratio(cfg.image_side, cfg.cs_ratio)) {
    throw ConfigError("model measurement side does not match cs_ratio");
  }

  TrainResult result;
  AdamState adam;
  adam.config.lr = cfg.lr;
  std::mt19937_64 rng(cfg.seed);
  const std::size_t per_epoch = (pool.size() + cfg.batch - 1) / cfg.batch;
  const std::size_t total_steps = cfg.steps > 0 ? cfg.steps : cfg.epochs * per_epoch;

  std::size_t step = 0;
  int stalled = 0;
  for (std::size_t epoch = 0; step < total_steps; ++epoch) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog elog;
    elog.epoch = epoch;
    for (std::size_t start = 0; start < order.size() && step < total_steps; start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      const std::size_t bsz = end - start;
      StepLog slog;
      slog.step = step;
      slog.epoch = epoch;

      // Equilibria of the current parameters, no tape.
      std::vector<Solved> solved(bsz);
      std::vector<Tensor> measurements(bsz), initials(bsz);
      for (std::size_t b = 0; b < bsz; ++b) {
        const Tensor& x = pool[order[start + b]]->image;
        measurements[b] = measure(model, x);
        initials[b] = initial_reconstruct(model, measurements[b]);
        try {
          FixedPointResult r =
              anderson_solve(block_map(model, measurements[b], cfg.mask), initials[b], cfg.forward);
          solved[b].x_star = std::move(r.x_star);
          solved[b].iterations = r.iterations;
        } catch (const DivergenceError& e) {
          solved[b].diverged = true;
          solved[b].iterations = e.iteration();
          ++slog.diverged;
        }
      }
      if (2 * slog.diverged > bsz) {
        result.diagnostics.push_back("epoch " + std::to_string(epoch) + " aborted at step " +
                                     std::to_string(step) + ": " + std::to_string(slog.diverged) + " of " +
                                     std::to_string(bsz) + " forward solves diverged");
        elog.aborted = true;
        break;
      }

      const double weight = 1.0 / static_cast<double>(bsz - slog.diverged);
      model.zero_grad();
      for (std::size_t b = 0; b < bsz; ++b) {
        if (solved[b].diverged) continue;
        const Tensor& x = pool[order[start + b]]->image;
        Graph g;
        const StpVars stp = bind(g, model.stp);
        const BlockVars vars = bind(g, model.block);
        const Var xt = g.constant(x);
        const Var y = measure(xt, stp);
        const Var z0 = initial_reconstruct(y, stp);
        const Var xs = g.input(solved[b].x_star);
        const BlockOutput out = ista_block_forward(xs, y, stp, vars, cfg.mask);
        const Var loss = total_loss(xs, out.sym_residual, z0, xt, cfg.gamma_sym, cfg.gamma_init);
        g.backward(weight * loss);
        const Tensor upstream = g.grad(xs);
        const AdjointResult adj = deq_backward(g, xs, out.x_next, upstream, cfg.backward, cfg.adjoint_fallback);

        if (cfg.jacobian_reg > 0.0) {
          slog.jacobian += weight * jacobian_penalty(model, x, solved[b].x_star, cfg,
                                                  cfg.seed ^ (0x9e3779b97f4a7c15ULL * (step * cfg.batch + b + 1)),
                                                  weight * cfg.jacobian_reg);
        }
        slog.loss += weight * loss.value().item();
        slog.sym_hmse += weight * hmse(out.sym_residual).value().item();
        slog.psnr += weight * psnr(solved[b].x_star, x);
        slog.psnr_init += weight * psnr(z0.value(), x);
        slog.forward_iters += weight * solved[b].iterations;
        slog.adjoint_iters += weight * adj.iterations;
      }
      std::vector<Tensor*> params = model.parameters();
      double sq = 0.0;
      for (const Tensor* p : params)
        for (double v : p->grad()) sq += v * v;
      slog.grad_norm = std::sqrt(sq);
      if (cfg.grad_clip > 0.0 && slog.grad_norm > cfg.grad_clip) {
        const double scale = cfg.grad_clip / slog.grad_norm;
        for (Tensor* p : params)
          for (double& v : p->grad()) v *= scale;
      }
      adam_step(params, adam);

      result.steps.push_back(slog);
      if (on_step) on_step(slog);
      elog.steps += 1;
      elog.loss += slog.loss;
      elog.sym_hmse += slog.sym_hmse;
      elog.psnr += slog.psnr;
      elog.psnr_init += slog.psnr_init;
      ++step;
    }
    if (elog.steps > 0) {
      const double k = static_cast<double>(elog.steps);
      elog.loss /= k;
      elog.sym_hmse /= k;
      elog.psnr /= k;
      elog.psnr_init /= k;
    }
    result.epochs.push_back(elog);
    if (on_epoch) on_epoch(elog, model);
    stalled = (elog.aborted && elog.steps == 0) ? stalled + 1 : 0;
    if (stalled >= 3) {
      result.diagnostics.push_back("training stopped: three consecutive epochs made no progress");
      break;
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace msdc
