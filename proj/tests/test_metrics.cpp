#include <gtest/gtest.h>

#include <cmath>

#include "msdc/errors.hpp"
#include "msdc/metrics.hpp"
#include "reference_metrics.hpp"

using namespace msdc;
using msdc::testing::reference_psnr;
using msdc::testing::reference_ssim;

TEST(Hmse, Examples) {
  const Tensor a = randn(Shape{1, 1, 3, 3}, 1);
  EXPECT_EQ(hmse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(hmse(Tensor(Shape{1, 1, 1, 2}, {1.0, 0.0}), Tensor(Shape{1, 1, 1, 2}, {0.0, 0.0})), 0.25);
  const Tensor b = randn(Shape{1, 1, 3, 3}, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(hmse(a, b), acc / 18.0, 1e-14);
  EXPECT_EQ(hmse(a, b), hmse(b, a));
  EXPECT_GT(hmse(a, b), 0.0);
  EXPECT_THROW(hmse(a, Tensor(Shape{1, 1, 3, 2})), ShapeError);
}

TEST(Psnr, Examples) {
  const Tensor r = rand_uniform(Shape{1, 1, 8, 8}, 3);
  EXPECT_EQ(psnr(r, r), kPsnrIdentical);
  Tensor off = r;
  for (std::size_t i = 0; i < off.size(); ++i) off[i] += 1.0;
  EXPECT_NEAR(psnr(off, r), 0.0, 1e-12);
  Tensor tenth = r;
  for (std::size_t i = 0; i < tenth.size(); ++i) tenth[i] += (i % 2 ? 0.1 : -0.1);
  EXPECT_NEAR(psnr(tenth, r), 20.0, 1e-9);
  EXPECT_NEAR(psnr(off, r, 2.0), 20.0 * std::log10(2.0), 1e-12);
  EXPECT_THROW(psnr(r, r, 0.0), ArgumentError);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const Tensor r = rand_uniform(Shape{1, 1, 16, 16}, 4);
  const Tensor noise = randn(Shape{1, 1, 16, 16}, 5);
  double prev = 1e9;
  for (double amp : {0.01, 0.02, 0.05, 0.1}) {
    Tensor x = r;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += amp * noise[i];
    const double p = psnr(x, r);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, IdenticalIsExactlyOneAndSymmetric) {
  const Tensor a = rand_uniform(Shape{1, 1, 20, 24}, 6);
  const Tensor b = rand_uniform(Shape{1, 1, 20, 24}, 7);
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_EQ(ssim(a, b), ssim(b, a));
  EXPECT_GE(ssim(a, b), -1.0);
  EXPECT_LE(ssim(a, b), 1.0);
}

TEST(Ssim, ConstantPlusLargeNoiseNearZero) {
  Tensor ref(Shape{1, 1, 32, 32}, 0.5);
  const Tensor noise = randn(Shape{1, 1, 32, 32}, 8);
  Tensor x = ref;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.5 * noise[i];
  const double s = ssim(x, ref);
  EXPECT_LE(std::abs(s), 0.1);
  EXPECT_NEAR(s, reference_ssim(x, ref), 1e-9);
}

TEST(Ssim, ConstantImagesReduceToLuminanceTerm) {
  for (double a : {0.2, 0.5, 0.9})
    for (double b : {0.21, 0.4, 0.95}) {
      const Tensor x(Shape{1, 1, 12, 12}, a), y(Shape{1, 1, 12, 12}, b);
      const double c1 = 1e-4;
      EXPECT_NEAR(ssim(x, y), (2 * a * b + c1) / (a * a + b * b + c1), 1e-12);
    }
}

TEST(Ssim, AffineRescaleBelowOne) {
  const Tensor r = rand_uniform(Shape{1, 1, 16, 16}, 9);
  Tensor x = r;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.8 * r[i] + 0.05;
  const double s = ssim(x, r);
  EXPECT_LT(s, 1.0);
  EXPECT_GT(s, 0.9);
}

TEST(Ssim, MatchesReferenceImplementation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor r = rand_uniform(Shape{1, 1, 17 + seed, 19}, 100 + seed);
    const Tensor n = randn(Shape{1, 1, 17 + seed, 19}, 200 + seed, 0.1);
    Tensor x = r;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += n[i];
    EXPECT_NEAR(ssim(x, r), reference_ssim(x, r), 1e-9);
    EXPECT_NEAR(psnr(x, r), reference_psnr(x, r), 1e-9);
  }
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(Tensor(Shape{1, 1, 10, 20}), Tensor(Shape{1, 1, 10, 20})), ArgumentError);
  EXPECT_THROW(ssim(Tensor(Shape{1, 1, 12, 12}), Tensor(Shape{1, 1, 12, 13})), ShapeError);
  EXPECT_THROW(ssim(Tensor(Shape{1, 2, 12, 12}), Tensor(Shape{1, 2, 12, 12})), ShapeError);
}
