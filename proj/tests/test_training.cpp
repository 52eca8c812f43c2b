#include <gtest/gtest.h>

#include <cstring>

#include <Eigen/SVD>

#include "msdc/errors.hpp"
#include "msdc/evaluate.hpp"
#include "msdc/io.hpp"
#include "msdc/linalg.hpp"
#include "msdc/metrics.hpp"
#include "msdc/training.hpp"

using namespace msdc;

namespace {

BlockConfig tiny() {
  BlockConfig c;
  c.channels = 4;
  c.cardinality = 2;
  c.se_reduction = 2;
  return c;
}

TrainConfig quick(std::size_t side, double ratio) {
  TrainConfig cfg;
  cfg.image_side = side;
  cfg.cs_ratio = ratio;
  cfg.batch = 1;
  cfg.lr = 1e-4;
  cfg.forward.max_iter = 10;
  cfg.backward.max_iter = 5;
  return cfg;
}

double slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  TrainConfig c;
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.cs_ratio = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.cs_ratio = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.grad_clip = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.jacobian_reg = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.jacobian_probe = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TotalLoss, Examples) {
  const Tensor x = rand_uniform(Shape{1, 1, 6, 6}, 1);
  const Tensor zero(Shape{1, 1, 6, 6});
  EXPECT_EQ(total_loss(x, zero, x, x, 0.01, 0.1), 0.0);
  const Tensor a = randn(Shape{1, 1, 6, 6}, 2), b = randn(Shape{1, 1, 6, 6}, 3), c = randn(Shape{1, 1, 6, 6}, 4);
  EXPECT_EQ(total_loss(a, b, c, x, 0.0, 0.0), hmse(a, x));
  const double oracle = hmse(a, x) + 0.3 * hmse(b, zero) + 0.7 * hmse(c, x);
  EXPECT_NEAR(total_loss(a, b, c, x, 0.3, 0.7), oracle, 1e-14);
  Graph g;
  const Var v = total_loss(g.constant(a), g.constant(b), g.constant(c), g.constant(x), 0.3, 0.7);
  EXPECT_NEAR(v.value().item(), oracle, 1e-14);
  EXPECT_THROW(total_loss(a, Tensor(Shape{1, 1, 6, 5}), c, x, 0.3, 0.7), ShapeError);
}

TEST(Train, RejectsInconsistentModel) {
  const Dataset d = make_dataset({rand_uniform(Shape{1, 1, 16, 16}, 5)});
  EXPECT_THROW(train(Model::init(8, 0.25, tiny(), 1), d, quick(16, 0.25)), ConfigError);
  EXPECT_THROW(train(Model::init(16, 0.5, tiny(), 1), d, quick(16, 0.25)), ConfigError);
  EXPECT_THROW(train(Model::init(16, 0.25, tiny(), 1), make_dataset({}), quick(16, 0.25)), ConfigError);
}

TEST(Train, BitForBitDeterministic) {
  const Dataset d = make_dataset({to_unit_tensor(generate_synthetic(SyntheticKind::Piecewise, 16, 7))});
  TrainConfig cfg = quick(16, 0.25);
  cfg.epochs = 3;
  cfg.seed = 11;
  const TrainResult a = train(Model::init(16, 0.25, tiny(), 2), d, cfg);
  const TrainResult b = train(Model::init(16, 0.25, tiny(), 2), d, cfg);
  ASSERT_EQ(a.steps.size(), 3u);
  ASSERT_EQ(b.steps.size(), 3u);
  const double la = a.steps.back().loss, lb = b.steps.back().loss;
  EXPECT_EQ(std::memcmp(&la, &lb, sizeof(double)), 0);
  EXPECT_EQ(serialize_checkpoint(a.model), serialize_checkpoint(b.model));
  EXPECT_NE(serialize_checkpoint(a.model), serialize_checkpoint(Model::init(16, 0.25, tiny(), 2)));
}

TEST(Train, JacobianProbeWithinSingularValueBounds) {
  Model m = Model::init(16, 0.5, tiny(), 8);
  m.block.head = Tensor(m.block.head.shape());
  m.block.head.set_requires_grad(true);
  const Dataset d = make_dataset({to_unit_tensor(generate_synthetic(SyntheticKind::Piecewise, 16, 9))});
  TrainConfig cfg = quick(16, 0.5);
  cfg.steps = 1;
  cfg.jacobian_reg = 1.0;
  const TrainResult r = train(m, d, cfg);
  ASSERT_EQ(r.steps.size(), 1u);

  // With a zero head the block is X - rho Rec1 (Phi1 X Phi2^T - Y) Rec2^T, whose Jacobian on
  // vec(X) is I - rho (Rec2 Phi2) kron (Rec1 Phi1); the probe ratio is a Rayleigh quotient of J^T J.
  const Matrix a = to_matrix(m.stp.rec1) * to_matrix(m.stp.phi1);
  const Matrix b = to_matrix(m.stp.rec2) * to_matrix(m.stp.phi2);
  Matrix k(b.rows() * a.rows(), b.cols() * a.cols());
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) k.block(i * a.rows(), j * a.cols(), a.rows(), a.cols()) = b(i, j) * a;
  const Matrix jac = Matrix::Identity(k.rows(), k.cols()) - m.block.rho[0] * k;
  const Eigen::JacobiSVD<Matrix> svd(jac);
  const double smax = svd.singularValues().maxCoeff(), smin = svd.singularValues().minCoeff();
  EXPECT_GE(r.steps[0].jacobian, smin * smin - 1e-9);
  EXPECT_LE(r.steps[0].jacobian, smax * smax + 1e-9);
  EXPECT_GT(r.steps[0].grad_norm, 0.0);

  cfg.jacobian_reg = 0.0;
  const TrainResult plain = train(m, d, cfg);
  EXPECT_EQ(plain.steps[0].jacobian, 0.0);
  EXPECT_NE(serialize_checkpoint(plain.model), serialize_checkpoint(r.model));
}

TEST(Train, IdentityModelHasZeroJacobianProbe) {
  const Dataset d = make_dataset({to_unit_tensor(generate_synthetic(SyntheticKind::Piecewise, 16, 3))});
  TrainConfig cfg = quick(16, 1.0);
  cfg.steps = 1;
  cfg.jacobian_reg = 1.0;
  const TrainResult r = train(Model::identity(16, tiny(), 1), d, cfg);
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_NEAR(r.steps[0].jacobian, 0.0, 1e-20);
}

TEST(Train, StepBudgetAndBatching) {
  std::vector<Tensor> imgs;
  for (std::uint64_t i = 0; i < 5; ++i) imgs.push_back(to_unit_tensor(generate_synthetic(SyntheticKind::GaussianBlobs, 16, i)));
  TrainConfig cfg = quick(16, 0.25);
  cfg.batch = 2;
  cfg.steps = 7;
  std::size_t epochs_seen = 0;
  const TrainResult r = train(Model::init(16, 0.25, tiny(), 3), make_dataset(imgs), cfg, {},
                              [&](const EpochLog&, const Model&) { ++epochs_seen; });
  EXPECT_EQ(r.steps.size(), 7u);
  EXPECT_EQ(r.epochs.size(), 3u);
  EXPECT_EQ(epochs_seen, 3u);
  EXPECT_EQ(r.epochs[0].steps, 3u);
  EXPECT_EQ(r.epochs[2].steps, 1u);
}

TEST(Train, DivergingBatchesAbortEpochs) {
  Model m = Model::init(16, 0.25, tiny(), 4);
  m.block.rho[0] = 1e4;
  const Dataset d = make_dataset({rand_uniform(Shape{1, 1, 16, 16}, 6), rand_uniform(Shape{1, 1, 16, 16}, 7)});
  TrainConfig cfg = quick(16, 0.25);
  cfg.forward.max_iter = 200;
  cfg.steps = 10;
  const TrainResult r = train(m, d, cfg);
  EXPECT_TRUE(r.steps.empty());
  ASSERT_EQ(r.epochs.size(), 3u);
  for (const EpochLog& e : r.epochs) EXPECT_TRUE(e.aborted);
  ASSERT_EQ(r.diagnostics.size(), 4u);
  EXPECT_NE(r.diagnostics[0].find("diverged"), std::string::npos);
  EXPECT_NE(r.diagnostics[3].find("no progress"), std::string::npos);
}

TEST(Train, OverfitsSingleImage) {
  const Tensor img = to_unit_tensor(generate_synthetic(SyntheticKind::Piecewise, 64, 21));
  const Dataset d = make_dataset({img});
  TrainConfig cfg = quick(64, 0.25);
  cfg.steps = 500;
  const TrainResult r = train(Model::init(64, 0.25, tiny(), 5), d, cfg);
  ASSERT_EQ(r.steps.size(), 500u);

  std::vector<double> first;
  for (std::size_t i = 0; i < 50; ++i) first.push_back(r.steps[i].loss);
  EXPECT_LT(slope(first), 0.0);

  EvalConfig ec;
  const auto all = d.subset(Split::Train);
  const double deq = evaluate({{0.25, &r.model}}, all, ec).aggregates.at(0).psnr_db;
  ec.method = Reconstructor::Initial;
  const double init = evaluate({{0.25, &r.model}}, all, ec).aggregates.at(0).psnr_db;
  EXPECT_GE(deq - init, 3.0) << "deq " << deq << " init " << init;
}
