#pragma once

#include <cmath>
#include <vector>

#include "msdc/tensor.hpp"

namespace msdc::testing {

inline double reference_psnr(const Tensor& x, const Tensor& ref) {
  long double sq = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double d = static_cast<long double>(x[i]) - static_cast<long double>(ref[i]);
    sq += d * d;
  }
  const long double mse = sq / static_cast<long double>(x.size());
  if (mse == 0.0L) return 99.0;
  return static_cast<double>(-10.0L * std::log10(mse));
}

// Direct windowed evaluation with a 2-D Gaussian and two-pass central moments.
inline double reference_ssim(const Tensor& x, const Tensor& ref) {
  const std::size_t H = x.shape().h, W = x.shape().w;
  const int K = 11;
  const double sigma = 1.5;
  std::vector<double> w(K * K);
  double z = 0.0;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      const double di = i - K / 2, dj = j - K / 2;
      w[i * K + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      z += w[i * K + j];
    }
  for (double& v : w) v /= z;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + K <= H; ++r)
    for (std::size_t c = 0; c + K <= W; ++c) {
      double mx = 0.0, my = 0.0;
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
          mx += w[i * K + j] * x.at(0, 0, r + i, c + j);
          my += w[i * K + j] * ref.at(0, 0, r + i, c + j);
        }
      double vx = 0.0, vy = 0.0, cxy = 0.0;
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
          const double dx = x.at(0, 0, r + i, c + j) - mx;
          const double dy = ref.at(0, 0, r + i, c + j) - my;
          vx += w[i * K + j] * dx * dx;
          vy += w[i * K + j] * dy * dy;
          cxy += w[i * K + j] * dx * dy;
        }
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace msdc::testing
