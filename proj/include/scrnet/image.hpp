#ifndef SCRNET_IMAGE_HPP
#define SCRNET_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scrnet/error.hpp"

namespace scrnet {

/// Floating-point raster with optional field-of-view mask.
///
/// Storage is channel-planar: value (c, y, x) lives at
/// data()[(c * height + y) * width + x]. This matches the NCHW layout of the
/// tensor engine, so a single image maps onto one batch entry without copies
/// of individual pixels. Colour images are RGB with three channels; a few
/// intermediate fields (the transmission panel) are single-channel.
class Image {
 public:
  Image() = default;

  Image(int height, int width, int channels = 3, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
      throw InvalidArgument("Image: dimensions must be positive, got " +
                            std::to_string(height) + "x" + std::to_string(width) + "x" +
                            std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  Image(int height, int width, int channels, std::vector<float> data)
      : Image(height, width, channels) {
    if (data.size() != data_.size()) {
      throw InvalidArgument("Image: data size does not match dimensions");
    }
    data_ = std::move(data);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> plane(int c) { return {data_.data() + c * pixels(), pixels()}; }
  std::span<const float> plane(int c) const { return {data_.data() + c * pixels(), pixels()}; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool has_mask() const { return !mask_.empty(); }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  bool in_mask(int y, int x) const {
    return mask_.empty() || mask_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set_mask(std::vector<std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != pixels()) {
      throw InvalidArgument("Image: mask dimensions must equal height x width");
    }
    mask_ = std::move(mask);
  }
  void clear_mask() { mask_.clear(); }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data_ == b.data_ && a.mask_ == b.mask_;
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
  std::vector<std::uint8_t> mask_;
};

/// Circular field-of-view mask inscribed in an h x w frame.
inline std::vector<std::uint8_t> circular_mask(int height, int width, double radius_fraction = 0.5) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(height) * width, 0);
  const double cy = 0.5 * (height - 1);
  const double cx = 0.5 * (width - 1);
  const double r = radius_fraction * std::min(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dy = y - cy;
      const double dx = x - cx;
      mask[static_cast<std::size_t>(y) * width + x] = (dy * dy + dx * dx <= r * r) ? 1 : 0;
    }
  }
  return mask;
}

/// Bilinear resampling with pixel-centre alignment. The mask, if any, is
/// resampled by nearest neighbour.
inline Image resize_bilinear(const Image& src, int height, int width) {
  if (src.height() == height && src.width() == width) return src;
  Image out(height, width, src.channels());
  const double sy = static_cast<double>(src.height()) / height;
  const double sx = static_cast<double>(src.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = (1 - wx) * src.at(c, y0, x0) + wx * src.at(c, y0, x1);
        const double bot = (1 - wx) * src.at(c, y1, x0) + wx * src.at(c, y1, x1);
        out.at(c, y, x) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  if (src.has_mask()) {
    std::vector<std::uint8_t> mask(out.pixels());
    for (int y = 0; y < height; ++y) {
      const int ys = std::min(static_cast<int>((y + 0.5) * sy), src.height() - 1);
      for (int x = 0; x < width; ++x) {
        const int xs = std::min(static_cast<int>((x + 0.5) * sx), src.width() - 1);
        mask[static_cast<std::size_t>(y) * width + x] = src.in_mask(ys, xs) ? 1 : 0;
      }
    }
    out.set_mask(std::move(mask));
  }
  return out;
}

/// Largest centred square crop.
inline Image center_crop_square(const Image& src) {
  const int side = std::min(src.height(), src.width());
  if (side == src.height() && side == src.width()) return src;
  const int oy = (src.height() - side) / 2;
  const int ox = (src.width() - side) / 2;
  Image out(side, side, src.channels());
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) out.at(c, y, x) = src.at(c, y + oy, x + ox);
  if (src.has_mask()) {
    std::vector<std::uint8_t> mask(out.pixels());
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        mask[static_cast<std::size_t>(y) * side + x] = src.in_mask(y + oy, x + ox) ? 1 : 0;
    out.set_mask(std::move(mask));
  }
  return out;
}

}  // namespace scrnet

#endif  // SCRNET_IMAGE_HPP
