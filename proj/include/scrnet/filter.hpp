#ifndef SCRNET_FILTER_HPP
#define SCRNET_FILTER_HPP

#include <cmath>
#include <span>
#include <vector>

#include "scrnet/error.hpp"
#include "scrnet/image.hpp"

namespace scrnet {

/// Reflect-101 border index (…, 2, 1 | 0, 1, …, n-1 | n-2, …). Works for
/// offsets of any magnitude, so a kernel may be wider than the image.
inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Normalised isotropic Gaussian on a (2r+1)^2 grid.
///
/// The 2-D weights are kept for inspection; filtering uses the equivalent
/// separable 1-D taps (the normalised 2-D Gaussian is exactly the outer product
/// of the normalised 1-D one).
class Kernel2D {
 public:
  int radius() const { return radius_; }
  double sigma() const { return sigma_; }
  int size() const { return 2 * radius_ + 1; }
  double weight(int dy, int dx) const { return weights_[(dy + radius_) * size() + (dx + radius_)]; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& taps() const { return taps_; }

  friend Kernel2D gaussian_kernel(int radius, double sigma);

 private:
  int radius_ = 0;
  double sigma_ = 1.0;
  std::vector<double> weights_;
  std::vector<double> taps_;
};

inline Kernel2D gaussian_kernel(int radius, double sigma) {
  if (radius < 0) throw InvalidArgument("gaussian_kernel: radius must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("gaussian_kernel: sigma must be positive, got " + std::to_string(sigma));
  }
  Kernel2D k;
  k.radius_ = radius;
  k.sigma_ = sigma;
  const int n = 2 * radius + 1;
  const double inv = 1.0 / (2.0 * sigma * sigma);

  k.taps_.resize(n);
  double tap_sum = 0.0;
  for (int d = -radius; d <= radius; ++d) tap_sum += k.taps_[d + radius] = std::exp(-d * d * inv);
  for (double& t : k.taps_) t /= tap_sum;

  k.weights_.resize(static_cast<std::size_t>(n) * n);
  double sum = 0.0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      sum += k.weights_[(dy + radius) * n + (dx + radius)] = std::exp(-(dx * dx + dy * dy) * inv);
  for (double& w : k.weights_) w /= sum;
  return k;
}

namespace detail {

inline std::vector<int> reflect_table(int n, int radius) {
  std::vector<int> table(static_cast<std::size_t>(n) + 2 * radius);
  for (int i = -radius; i < n + radius; ++i) table[i + radius] = reflect101(i, n);
  return table;
}

// One separable pass over a single plane, accumulated in double.
inline void filter_plane(std::span<const float> src, std::span<float> dst, int height, int width,
                         const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  const auto rows = reflect_table(height, r);
  const auto cols = reflect_table(width, r);
  std::vector<double> tmp(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const float* row = src.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += taps[d + r] * row[cols[x + d + r]];
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += taps[d + r] * tmp[static_cast<std::size_t>(rows[y + d + r]) * width + x];
      dst[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc);
    }
  }
}

}  // namespace detail

/// Per-channel correlation with reflect-101 borders; output has the input's shape
/// and mask.
inline Image filter2d(const Image& img, const Kernel2D& kernel) {
  Image out = img;
  if (kernel.radius() == 0) return out;
  for (int c = 0; c < img.channels(); ++c) {
    detail::filter_plane(img.plane(c), out.plane(c), img.height(), img.width(), kernel.taps());
  }
  return out;
}

inline constexpr int kHfcRadius = 26;
inline constexpr double kHfcSigma = 9.0;

/// High-frequency component: img minus its Gaussian low-pass. Signed.
inline Image extract_hfc(const Image& img, int radius = kHfcRadius, double sigma = kHfcSigma) {
  const Image low = filter2d(img, gaussian_kernel(radius, sigma));
  Image out = img;
  auto& d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= low.data()[i];
  return out;
}

/// Maps a signed image affinely onto [0,1] for display (min -> 0, max -> 1).
inline Image visualize_signed(const Image& img) {
  Image out = img;
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const float span = *hi - *lo;
  for (float& v : out.data()) v = span > 0.0f ? (v - *lo) / span : 0.5f;
  return out;
}

}  // namespace scrnet

#endif  // SCRNET_FILTER_HPP
