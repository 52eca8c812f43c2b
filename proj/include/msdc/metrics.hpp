#pragma once

#include "msdc/tensor.hpp"

namespace msdc {

inline constexpr double kPsnrIdentical = 99.0;

// (1 / 2N) sum (a - b)^2
double hmse(const Tensor& a, const Tensor& b);

// 10 log10(peak^2 / MSE); kPsnrIdentical when MSE is zero.
double psnr(const Tensor& x, const Tensor& ref, double peak = 1.0);

// Mean SSIM over every fully contained 11x11 window of a single-plane image.
// Gaussian window sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Tensor& x, const Tensor& ref);

struct SsimConstants {
  static constexpr int window = 11;
  static constexpr double sigma = 1.5;
  static constexpr double k1 = 0.01;
  static constexpr double k2 = 0.03;
  static constexpr double range = 1.0;
};

}  // namespace msdc
