#ifndef SCRNET_IMAGE_IO_HPP
#define SCRNET_IMAGE_IO_HPP

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "scrnet/error.hpp"
#include "scrnet/image.hpp"

namespace scrnet {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct DecodedRaster {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3 after transforms
  int max_value = 255;
  std::vector<std::uint16_t> samples;  // interleaved
};

// Holds only trivially destructible state across setjmp.
inline bool read_png_raw(std::FILE* fp, DecodedRaster& out, std::string& why) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    why = "cannot allocate PNG reader";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    why = "cannot allocate PNG info";
    return false;
  }
  png_bytep buffer = nullptr;
  png_bytepp rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    std::free(buffer);
    std::free(rows);
    png_destroy_read_struct(&png, &info, nullptr);
    why = "corrupt or unsupported PNG data";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer = static_cast<png_bytep>(std::malloc(rowbytes * height));
  rows = static_cast<png_bytepp>(std::malloc(sizeof(png_bytep) * height));
  if (!buffer || !rows) png_error(png, "out of memory");
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer + y * rowbytes;
  png_read_image(png, rows);
  png_read_end(png, nullptr);

  out.height = static_cast<int>(height);
  out.width = static_cast<int>(width);
  out.channels = channels;
  out.max_value = out_depth == 16 ? 65535 : 255;
  out.samples.resize(static_cast<std::size_t>(width) * height * channels);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = out_depth == 16
                         ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1])
                         : buffer[i];
  }
  std::free(buffer);
  std::free(rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline DecodedRaster read_ppm_raw(std::istream& in, const std::string& path) {
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        tok.push_back(ch);
        break;
      }
    }
    while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) tok.push_back(ch);
    return tok;
  };
  DecodedRaster r;
  if (next_token() != "P6") throw IoError(path + ": not a binary PPM (P6)");
  try {
    r.width = std::stoi(next_token());
    r.height = std::stoi(next_token());
    r.max_value = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError(path + ": malformed PPM header");
  }
  if (r.max_value < 1 || r.max_value > 65535) throw IoError(path + ": invalid PPM maxval");
  if (r.width < 1 || r.height < 1) throw IoError(path + ": zero-sized image");
  r.channels = 3;
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height * 3;
  const int bytes = r.max_value > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw IoError(path + ": truncated PPM data");
  r.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.samples[i] = bytes == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
  }
  return r;
}

}  // namespace detail

/// Reads an 8/16-bit PNG or binary PPM into a 3-channel image in [0,1].
/// Grayscale is replicated to RGB; alpha is dropped.
inline Image load_image(const std::filesystem::path& path) {
  const std::string name = path.string();
  detail::FilePtr fp(std::fopen(name.c_str(), "rb"));
  if (!fp) throw IoError(name + ": cannot open for reading");
  unsigned char sig[8] = {};
  const std::size_t got = std::fread(sig, 1, 8, fp.get());
  detail::DecodedRaster raster;
  if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) {
    std::rewind(fp.get());
    std::string why;
    if (!detail::read_png_raw(fp.get(), raster, why)) throw IoError(name + ": " + why);
  } else if (got >= 2 && sig[0] == 'P' && sig[1] == '6') {
    fp.reset();
    std::ifstream in(path, std::ios::binary);
    raster = detail::read_ppm_raw(in, name);
  } else {
    throw IoError(name + ": unsupported format (expected PNG or binary PPM)");
  }
  if (raster.height < 1 || raster.width < 1) throw IoError(name + ": zero-sized image");

  Image img(raster.height, raster.width, 3);
  const double scale = 1.0 / raster.max_value;
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * raster.width + x) * raster.channels;
      for (int c = 0; c < 3; ++c) {
        const int src = raster.channels == 1 ? 0 : c;
        img.at(c, y, x) = static_cast<float>(raster.samples[base + src] * scale);
      }
    }
  }
  return img;
}

/// Quantises a [0,1] value to a byte: round(clamp(v,0,1) * 255).
inline std::uint8_t to_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

/// Writes an 8-bit PNG (RGB for 3 channels, gray for 1).
inline void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw InvalidArgument("save_image: empty image");
  if (img.channels() != 1 && img.channels() != 3) {
    throw InvalidArgument("save_image: only 1- or 3-channel images can be written");
  }
  const int ch = img.channels();
  std::vector<std::uint8_t> buf(img.pixels() * ch);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < ch; ++c)
        buf[(static_cast<std::size_t>(y) * img.width() + x) * ch + c] = to_byte(img.at(c, y, x));

  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(img.width());
  out.height = static_cast<png_uint_32>(img.height());
  out.format = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::string name = path.string();
  if (!png_image_write_to_file(&out, name.c_str(), 0, buf.data(), 0, nullptr)) {
    std::string why = out.message;
    png_image_free(&out);
    throw IoError(name + ": cannot write PNG (" + why + ")");
  }
}

/// Sorted list of PNG/PPM files in a directory (non-recursive).
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Signed HFC sidecar: "HFC0", u32 height, u32 width, u32 channels (all
/// little-endian), then channel-planar little-endian float32 values.
inline void write_hfc_raw(const Image& hfc, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes{'H', 'F', 'C', '0'};
  auto put = [&bytes](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  put(static_cast<std::uint32_t>(hfc.height()));
  put(static_cast<std::uint32_t>(hfc.width()));
  put(static_cast<std::uint32_t>(hfc.channels()));
  for (float v : hfc.data()) put(std::bit_cast<std::uint32_t>(v));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

inline Image read_hfc_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "HFC0", 4) != 0) throw IoError(path.string() + ": bad HFC header");
  auto get = [&bytes](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  const std::uint32_t h = get(4), w = get(8), c = get(12);
  if (h == 0 || w == 0 || c == 0) throw IoError(path.string() + ": zero-sized HFC");
  const std::size_t n = static_cast<std::size_t>(h) * w * c;
  if (bytes.size() != 16 + 4 * n) throw IoError(path.string() + ": HFC payload size mismatch");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get(16 + 4 * i));
  return Image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(data));
}

}  // namespace scrnet


#endif  // SCRNET_IMAGE_IO_HPP
