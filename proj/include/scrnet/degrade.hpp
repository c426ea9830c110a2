#ifndef SCRNET_DEGRADE_HPP
#define SCRNET_DEGRADE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "scrnet/error.hpp"
#include "scrnet/filter.hpp"
#include "scrnet/image.hpp"
#include "scrnet/random.hpp"

namespace scrnet {

/// One draw of the cataract simulation parameters.
struct SimParams {
  double alpha = 1.0;     // illumination attenuation, (0,1]
  double beta = 0.0;      // haze panel weight, >= 0
  int r_b = 1;            // clear-image blur radius
  double sigma_b = 10.0;  // clear-image blur spatial constant
  int r_l = 1;            // panel blur radius
  double sigma_l = 10.0;  // panel blur spatial constant
  double center_a = 0.5;  // panel centre row, fraction of height
  double center_b = 0.5;  // panel centre column, fraction of width
  std::uint64_t seed = 0;

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

inline constexpr int kBlurRadiusMin = 1;
inline constexpr int kBlurRadiusMax = 3;
inline constexpr double kBlurSigmaMin = 10.0;
inline constexpr double kBlurSigmaMax = 30.0;
inline constexpr int kDefaultScsSize = 16;

/// Sampling ranges; every field is drawn uniformly and independently.
struct ParamRanges {
  double alpha_min = 0.5, alpha_max = 0.95;
  double beta_min = 0.2, beta_max = 0.8;
  int r_b_min = kBlurRadiusMin, r_b_max = kBlurRadiusMax;
  double sigma_b_min = kBlurSigmaMin, sigma_b_max = kBlurSigmaMax;
  int r_l_min = kBlurRadiusMin, r_l_max = kBlurRadiusMax;
  double sigma_l_min = kBlurSigmaMin, sigma_l_max = kBlurSigmaMax;
  double center_a_min = 0.2, center_a_max = 0.8;
  double center_b_min = 0.2, center_b_max = 0.8;

  /// Panel centre restricted to [margin, 1 - margin] on both axes.
  void set_panel_margin(double margin) {
    center_a_min = center_b_min = margin;
    center_a_max = center_b_max = 1.0 - margin;
  }

  /// Zero-width ranges that reproduce p exactly.
  static ParamRanges point(const SimParams& p) {
    ParamRanges r;
    r.alpha_min = r.alpha_max = p.alpha;
    r.beta_min = r.beta_max = p.beta;
    r.r_b_min = r.r_b_max = p.r_b;
    r.sigma_b_min = r.sigma_b_max = p.sigma_b;
    r.r_l_min = r.r_l_max = p.r_l;
    r.sigma_l_min = r.sigma_l_max = p.sigma_l;
    r.center_a_min = r.center_a_max = p.center_a;
    r.center_b_min = r.center_b_max = p.center_b;
    return r;
  }
};

struct SimOptions {
  bool normalize_panel = true;       // divide J by its maximum
  bool allow_identity_blur = false;  // radius 0 blur; test configurations only
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline void check_range(double lo, double hi, double min_allowed, double max_allowed, const char* name) {
  if (!(lo <= hi) || lo < min_allowed || hi > max_allowed || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument(std::string(name) + " range [" + fmt_g(lo) + ", " + fmt_g(hi) +
                          "] must be ordered and lie within [" + fmt_g(min_allowed) + "," + fmt_g(max_allowed) +
                          "]");
  }
}

}  // namespace detail

inline void validate(const ParamRanges& r, bool allow_identity_blur = false) {
  const int rmin = allow_identity_blur ? 0 : kBlurRadiusMin;
  detail::check_range(r.alpha_min, r.alpha_max, 0.0, 1.0, "alpha");
  if (r.alpha_min <= 0.0) throw InvalidArgument("alpha range must exclude 0");
  detail::check_range(r.beta_min, r.beta_max, 0.0, HUGE_VAL, "beta");
  detail::check_range(r.r_b_min, r.r_b_max, rmin, kBlurRadiusMax, "r_b");
  detail::check_range(r.sigma_b_min, r.sigma_b_max, kBlurSigmaMin, kBlurSigmaMax, "sigma_b");
  detail::check_range(r.r_l_min, r.r_l_max, rmin, kBlurRadiusMax, "r_l");
  detail::check_range(r.sigma_l_min, r.sigma_l_max, kBlurSigmaMin, kBlurSigmaMax, "sigma_l");
  detail::check_range(r.center_a_min, r.center_a_max, 0.0, 1.0, "center_a");
  detail::check_range(r.center_b_min, r.center_b_max, 0.0, 1.0, "center_b");
}

inline void validate(const SimParams& p, bool allow_identity_blur = false) {
  validate(ParamRanges::point(p), allow_identity_blur);
}

/// Draws one parameter record. Fields are drawn in declaration order.
inline SimParams sample_params(Rng& rng, const ParamRanges& ranges, bool allow_identity_blur = false) {
  validate(ranges, allow_identity_blur);
  SimParams p;
  p.alpha = uniform(rng, ranges.alpha_min, ranges.alpha_max);
  p.beta = uniform(rng, ranges.beta_min, ranges.beta_max);
  p.r_b = uniform_int(rng, ranges.r_b_min, ranges.r_b_max);
  p.sigma_b = uniform(rng, ranges.sigma_b_min, ranges.sigma_b_max);
  p.r_l = uniform_int(rng, ranges.r_l_min, ranges.r_l_max);
  p.sigma_l = uniform(rng, ranges.sigma_l_min, ranges.sigma_l_max);
  p.center_a = uniform(rng, ranges.center_a_min, ranges.center_a_max);
  p.center_b = uniform(rng, ranges.center_b_min, ranges.center_b_max);
  return p;
}

/// Euclidean distance field from (center_a*(h-1), center_b*(w-1)). With
/// normalize, divided by its maximum (an all-zero field stays zero).
inline Image transmission_panel(int height, int width, double center_a, double center_b,
                                bool normalize = true) {
  const double a = center_a * (height - 1);
  const double b = center_b * (width - 1);
  std::vector<double> dist(static_cast<std::size_t>(height) * width);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j)
      dist[static_cast<std::size_t>(i) * width + j] = std::sqrt((i - a) * (i - a) + (j - b) * (j - b));
  const double peak = *std::max_element(dist.begin(), dist.end());
  const double scale = (normalize && peak > 0.0) ? 1.0 / peak : 1.0;
  Image panel(height, width, 1);
  for (std::size_t i = 0; i < dist.size(); ++i) panel.data()[i] = static_cast<float>(dist[i] * scale);
  return panel;
}

/// Cataract simulation, per channel c:
///   s'_c = alpha * (s_c * g_B) + beta * (J * g_L) * (L_c - s_c),
/// with L_c the channel maximum, clamped to [0,1].
inline Image simulate_cataract(const Image& clear, const SimParams& p, const SimOptions& opt = {}) {
  validate(p, opt.allow_identity_blur);
  const Image blurred = filter2d(clear, gaussian_kernel(p.r_b, p.sigma_b));
  const Image panel = filter2d(transmission_panel(clear.height(), clear.width(), p.center_a, p.center_b,
                                                  opt.normalize_panel),
                               gaussian_kernel(p.r_l, p.sigma_l));
  Image out(clear.height(), clear.width(), clear.channels());
  for (int c = 0; c < clear.channels(); ++c) {
    const auto src = clear.plane(c);
    const auto blur = blurred.plane(c);
    const auto haze = panel.plane(0);
    auto dst = out.plane(c);
    const float peak = *std::max_element(src.begin(), src.end());
    for (std::size_t i = 0; i < src.size(); ++i) {
      const double v = p.alpha * blur[i] + p.beta * haze[i] * (static_cast<double>(peak) - src[i]);
      dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  if (clear.has_mask()) out.set_mask(clear.mask());
  return out;
}

/// A clear image and K simulated cataract images sharing its structure.
struct ScsSample {
  Image clear;
  std::vector<Image> cataracts;
  std::vector<SimParams> params;
  Image clear_hfc;
  std::vector<Image> cataract_hfcs;

  std::size_t size() const { return cataracts.size(); }
};

/// Parameters for slot i are drawn from an RNG seeded with child_seed(master, i),
/// so any subset of slots can be produced independently.
inline SimParams slot_params(std::uint64_t master_seed, int slot, const ParamRanges& ranges,
                             bool allow_identity_blur = false) {
  const std::uint64_t seed = child_seed(master_seed, static_cast<std::uint64_t>(slot));
  Rng rng(seed);
  SimParams p = sample_params(rng, ranges, allow_identity_blur);
  p.seed = seed;
  return p;
}

inline ScsSample make_scs(const Image& clear, int k, std::uint64_t master_seed, const ParamRanges& ranges,
                          const SimOptions& opt = {}, int hfc_radius = kHfcRadius,
                          double hfc_sigma = kHfcSigma) {
  if (k < 1) throw InvalidArgument("make_scs: k must be >= 1");
  validate(ranges, opt.allow_identity_blur);
  ScsSample s;
  s.clear = clear;
  s.clear_hfc = extract_hfc(clear, hfc_radius, hfc_sigma);
  s.cataracts.reserve(k);
  for (int i = 0; i < k; ++i) {
    s.params.push_back(slot_params(master_seed, i, ranges, opt.allow_identity_blur));
    s.cataracts.push_back(simulate_cataract(clear, s.params.back(), opt));
    s.cataract_hfcs.push_back(extract_hfc(s.cataracts.back(), hfc_radius, hfc_sigma));
  }
  return s;
}

}  // namespace scrnet

#endif  // SCRNET_DEGRADE_HPP
