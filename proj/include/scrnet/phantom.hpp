#ifndef SCRNET_PHANTOM_HPP
#define SCRNET_PHANTOM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scrnet/image.hpp"
#include "scrnet/random.hpp"

namespace scrnet {

/// Procedural clear fundus image: orange-red retina inside a circular field
/// of view, bright optic disc, darker macula and a branching vessel tree
/// rooted at the disc. Deterministic in (size, seed); carries its FOV mask.
inline Image make_fundus_phantom(int size, std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  const double n = size;
  const double cx = 0.5 * (n - 1), cy = 0.5 * (n - 1), radius = 0.48 * n;

  // Per-image colour and geometry jitter.
  const double base_r = uniform(rng, 0.70, 0.85);
  const double base_g = uniform(rng, 0.30, 0.42);
  const double base_b = uniform(rng, 0.10, 0.18);
  const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
  const double disc_x = cx + side * uniform(rng, 0.22, 0.30) * n;
  const double disc_y = cy + uniform(rng, -0.08, 0.08) * n;
  const double disc_r = uniform(rng, 0.065, 0.085) * n;
  const double mac_x = cx - side * uniform(rng, 0.02, 0.08) * n;
  const double mac_y = cy + uniform(rng, -0.04, 0.04) * n;
  const double mac_r = uniform(rng, 0.08, 0.12) * n;

  // Vessel centre-lines as polylines grown from the disc.
  struct Segment {
    double x0, y0, x1, y1, width;
  };
  std::vector<Segment> segments;
  struct Tip {
    double x, y, angle, width;
    int depth;
  };
  std::vector<Tip> tips;
  const int trunks = 4;
  for (int t = 0; t < trunks; ++t) {
    const double vertical = t < 2 ? -1.0 : 1.0;
    const double spread = (t % 2 == 0 ? 0.35 : 1.0) * uniform(rng, 0.8, 1.2);
    const double angle = std::atan2(vertical, -side * spread);
    tips.push_back({disc_x, disc_y, angle, uniform(rng, 0.030, 0.040) * n, 0});
  }
  const double step = 0.035 * n;
  while (!tips.empty()) {
    Tip tip = tips.back();
    tips.pop_back();
    const int steps = 5 + uniform_int(rng, 0, 5);
    for (int s = 0; s < steps; ++s) {
      tip.angle += uniform(rng, -0.25, 0.25);
      // Arcades bend back toward the horizontal axis through the macula.
      const double nx = tip.x + step * std::cos(tip.angle);
      const double ny = tip.y + step * std::sin(tip.angle);
      segments.push_back({tip.x, tip.y, nx, ny, tip.width});
      tip.x = nx;
      tip.y = ny;
      if (std::hypot(tip.x - cx, tip.y - cy) > radius) break;
      if (tip.depth < 3 && uniform01(rng) < 0.22) {
        const double branch = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.5, 0.9);
        tips.push_back({tip.x, tip.y, tip.angle + branch, tip.width * 0.7, tip.depth + 1});
        tip.width *= 0.85;
      }
      tip.width = std::max(tip.width * 0.96, 0.008 * n);
    }
  }

  Image img(size, size, 3);
  std::vector<std::uint8_t> mask(img.pixels(), 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      if (r > radius) continue;
      mask[static_cast<std::size_t>(y) * size + x] = 1;

      // Illumination falls off toward the rim.
      const double shade = 1.0 - 0.35 * std::pow(r / radius, 2.0);
      double red = base_r * shade, green = base_g * shade, blue = base_b * shade;

      const double md = std::hypot(x - mac_x, y - mac_y) / mac_r;
      const double mac = std::exp(-md * md);
      red *= 1.0 - 0.25 * mac;
      green *= 1.0 - 0.35 * mac;
      blue *= 1.0 - 0.30 * mac;

      double vessel = 0.0;
      for (const auto& s : segments) {
        const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
        const double len2 = vx * vx + vy * vy;
        double u = len2 > 0 ? ((x - s.x0) * vx + (y - s.y0) * vy) / len2 : 0.0;
        u = std::clamp(u, 0.0, 1.0);
        const double d = std::hypot(x - (s.x0 + u * vx), y - (s.y0 + u * vy));
        const double half = 0.5 * s.width;
        vessel = std::max(vessel, std::clamp(half + 0.5 - d, 0.0, 1.0));
      }
      red = red * (1.0 - 0.40 * vessel);
      green = green * (1.0 - 0.65 * vessel);
      blue = blue * (1.0 - 0.50 * vessel);

      const double dd = std::hypot(x - disc_x, y - disc_y) / disc_r;
      const double disc = std::clamp(1.5 - dd, 0.0, 1.0);
      red += (0.98 - red) * disc;
      green += (0.85 - green) * disc;
      blue += (0.55 - blue) * disc;

      const double grain = 0.015 * (uniform01(rng) - 0.5);
      img.at(0, y, x) = static_cast<float>(std::clamp(red + grain, 0.0, 1.0));
      img.at(1, y, x) = static_cast<float>(std::clamp(green + grain, 0.0, 1.0));
      img.at(2, y, x) = static_cast<float>(std::clamp(blue + grain, 0.0, 1.0));
    }
  }
  img.set_mask(std::move(mask));
  return img;
}

}  // namespace scrnet

#endif  // SCRNET_PHANTOM_HPP
