#include "msdc/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "msdc/errors.hpp"

namespace msdc {

namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
  }
}

std::array<double, SsimConstants::window> gaussian_taps() {
  std::array<double, SsimConstants::window> w{};
  const int r = SsimConstants::window / 2;
  double total = 0.0;
  for (int i = 0; i < SsimConstants::window; ++i) {
    const double d = static_cast<double>(i - r);
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * SsimConstants::sigma * SsimConstants::sigma));
    total += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable "valid" Gaussian filter, output (H - 10) x (W - 10).
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t H, std::size_t W,
                                 const std::array<double, SsimConstants::window>& taps) {
  const std::size_t K = taps.size();
  const std::size_t OW = W - K + 1, OH = H - K + 1;
  std::vector<double> rows(H * OW, 0.0);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += taps[k] * img[y * W + x + k];
      rows[y * OW + x] = acc;
    }
  std::vector<double> out(OH * OW, 0.0);
  for (std::size_t y = 0; y < OH; ++y)
    for (std::size_t x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += taps[k] * rows[(y + k) * OW + x];
      out[y * OW + x] = acc;
    }
  return out;
}

}  // namespace

double hmse(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "hmse");
  if (a.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    acc += e * e;
  }
  return acc / (2.0 * static_cast<double>(a.size()));
}

double psnr(const Tensor& x, const Tensor& ref, double peak) {
  same_shape(x, ref, "psnr");
  if (!(peak > 0.0)) throw ArgumentError("psnr peak must be positive");
  const double mse = 2.0 * hmse(x, ref);
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& x, const Tensor& ref) {
  same_shape(x, ref, "ssim");
  const Shape& s = x.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("ssim expects a single-plane image");
  const auto K = static_cast<std::size_t>(SsimConstants::window);
  if (s.h < K || s.w < K) throw ArgumentError("ssim: image smaller than the 11x11 window");

  const std::size_t N = x.size();
  std::vector<double> a(x.vec()), b(ref.vec()), aa(N), bb(N), ab(N);
  for (std::size_t i = 0; i < N; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto taps = gaussian_taps();
  const auto mu_a = filter_valid(a, s.h, s.w, taps);
  const auto mu_b = filter_valid(b, s.h, s.w, taps);
  const auto e_aa = filter_valid(aa, s.h, s.w, taps);
  const auto e_bb = filter_valid(bb, s.h, s.w, taps);
  const auto e_ab = filter_valid(ab, s.h, s.w, taps);

  const double c1 = std::pow(SsimConstants::k1 * SsimConstants::range, 2);
  const double c2 = std::pow(SsimConstants::k2 * SsimConstants::range, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
    const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace msdc
