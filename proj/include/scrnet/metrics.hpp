#ifndef SCRNET_METRICS_HPP
#define SCRNET_METRICS_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "scrnet/error.hpp"
#include "scrnet/image.hpp"
#include "scrnet/image_io.hpp"

namespace scrnet {

namespace detail {

inline const std::vector<std::uint8_t>* shared_mask(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(op) + ": dimension mismatch " + std::to_string(a.height()) + "x" +
                          std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                          std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                          std::to_string(b.channels()));
  }
  if (a.has_mask() && b.has_mask() && a.mask() != b.mask()) {
    throw InvalidArgument(std::string(op) + ": images carry different masks");
  }
  if (a.has_mask()) return &a.mask();
  if (b.has_mask()) return &b.mask();
  return nullptr;
}

}  // namespace detail

/// Mean squared error over all channels (and masked pixels, if any).
inline double mse(const Image& a, const Image& b) {
  const auto* mask = detail::shared_mask(a, b, "mse");
  double acc = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    const auto pa = a.plane(c);
    const auto pb = b.plane(c);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (mask && !(*mask)[i]) continue;
      const double d = static_cast<double>(pa[i]) - pb[i];
      acc += d * d;
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("mse: mask selects no pixels");
  return acc / static_cast<double>(count);
}

/// Peak signal-to-noise ratio with peak 1.0; +infinity for identical images.
inline double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Single-scale SSIM on peak 1.0: Gaussian window, per-channel maps over
/// valid window positions (no padding), averaged over positions and channels.
/// With a mask, only windows whose centre pixel lies inside it are averaged.
inline double ssim(const Image& a, const Image& b, const SsimOptions& opt = {}) {
  const auto* mask = detail::shared_mask(a, b, "ssim");
  const int win = opt.window;
  if (a.height() < win || a.width() < win) {
    throw InvalidArgument("ssim: image " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                          " smaller than the " + std::to_string(win) + "x" + std::to_string(win) + " window");
  }
  std::vector<double> taps(win);
  double tsum = 0.0;
  for (int i = 0; i < win; ++i) {
    const double d = i - (win - 1) / 2.0;
    tsum += taps[i] = std::exp(-d * d / (2.0 * opt.sigma * opt.sigma));
  }
  for (double& t : taps) t /= tsum;

  const double c1 = opt.k1 * opt.k1;
  const double c2 = opt.k2 * opt.k2;
  const int h = a.height(), w = a.width();
  const int oh = h - win + 1, ow = w - win + 1;
  const int half = win / 2;

  // Horizontal then vertical valid-mode pass over the five moment images.
  auto valid_filter = [&](const std::vector<double>& src) {
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int d = 0; d < win; ++d) acc += taps[d] * src[static_cast<std::size_t>(y) * w + x + d];
        tmp[static_cast<std::size_t>(y) * ow + x] = acc;
      }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int d = 0; d < win; ++d) acc += taps[d] * tmp[static_cast<std::size_t>(y + d) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = acc;
      }
    return out;
  };

  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xa(a.pixels()), xb(a.pixels()), aa(a.pixels()), bb(a.pixels()), ab(a.pixels());
  for (int c = 0; c < a.channels(); ++c) {
    const auto pa = a.plane(c);
    const auto pb = b.plane(c);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      xa[i] = pa[i];
      xb[i] = pb[i];
      aa[i] = xa[i] * xa[i];
      bb[i] = xb[i] * xb[i];
      ab[i] = xa[i] * xb[i];
    }
    const auto mu_a = valid_filter(xa), mu_b = valid_filter(xb);
    const auto e_aa = valid_filter(aa), e_bb = valid_filter(bb), e_ab = valid_filter(ab);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        if (mask && !(*mask)[static_cast<std::size_t>(y + half) * w + x + half]) continue;
        const std::size_t i = static_cast<std::size_t>(y) * ow + x;
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  }
  if (count == 0) throw InvalidArgument("ssim: mask selects no window centres");
  return total / static_cast<double>(count);
}

struct EvalRow {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_psnr_db = std::numeric_limits<double>::quiet_NaN();  // over finite rows
  double mean_ssim = std::numeric_limits<double>::quiet_NaN();
  std::size_t infinite_rows = 0;
  std::vector<std::string> skipped;  // one message per skipped pair

  void aggregate() {
    double ps = 0.0, ss = 0.0;
    std::size_t finite = 0;
    infinite_rows = 0;
    for (const auto& r : rows) {
      ss += r.ssim;
      if (std::isfinite(r.psnr_db)) {
        ps += r.psnr_db;
        ++finite;
      } else {
        ++infinite_rows;
      }
    }
    mean_ssim = rows.empty() ? std::numeric_limits<double>::quiet_NaN() : ss / static_cast<double>(rows.size());
    mean_psnr_db = finite ? ps / static_cast<double>(finite)
                          : (rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : std::numeric_limits<double>::infinity());
  }
};

/// Candidate reference names for a restored file, most specific first:
/// the name itself, then with "_restored" and then "_cataract_NN" stripped.
inline std::vector<std::string> counterpart_stems(const std::string& stem) {
  std::vector<std::string> out{stem};
  std::string s = stem;
  static const std::regex restored("_restored$");
  static const std::regex cataract("_cataract_[0-9]+$");
  std::string t = std::regex_replace(s, restored, "");
  if (t != s) out.push_back(s = t);
  t = std::regex_replace(s, cataract, "");
  if (t != s) out.push_back(t);
  return out;
}

inline std::optional<std::filesystem::path> find_counterpart(const std::filesystem::path& restored,
                                                             const std::filesystem::path& reference_dir) {
  for (const auto& stem : counterpart_stems(restored.stem().string())) {
    for (const char* ext : {".png", ".ppm"}) {
      const auto candidate = reference_dir / (stem + ext);
      if (std::filesystem::is_regular_file(candidate)) return candidate;
    }
  }
  return std::nullopt;
}

inline std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open report for writing");
  out << "name,psnr_db,ssim\n";
  for (const auto& r : report.rows) out << r.name << ',' << format_db(r.psnr_db) << ',' << format_db(r.ssim) << '\n';
  out << "MEAN," << format_db(report.mean_psnr_db) << ',' << format_db(report.mean_ssim) << '\n';
  out << "# infinite_psnr_rows=" << report.infinite_rows << " excluded_from_mean skipped=" << report.skipped.size()
      << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

/// Scores every image of restored_dir against its counterpart in
/// reference_dir. Pairs without a counterpart or with mismatched dimensions
/// are recorded in report.skipped and the run continues.
inline EvalReport evaluate(const std::filesystem::path& restored_dir, const std::filesystem::path& reference_dir,
                           const std::optional<std::filesystem::path>& report_path = std::nullopt) {
  if (!std::filesystem::is_directory(reference_dir)) throw IoError(reference_dir.string() + ": not a directory");
  EvalReport report;
  for (const auto& file : list_images(restored_dir)) {
    const auto ref = find_counterpart(file, reference_dir);
    const std::string name = file.filename().string();
    if (!ref) {
      report.skipped.push_back(name + ": no counterpart in " + reference_dir.string());
      continue;
    }
    const Image a = load_image(file);
    const Image b = load_image(*ref);
    if (!a.same_shape(b)) {
      report.skipped.push_back(name + ": dimension mismatch with " + ref->filename().string());
      continue;
    }
    report.rows.push_back({name, psnr(a, b), ssim(a, b)});
  }
  report.aggregate();
  if (report_path) write_report_csv(report, *report_path);
  return report;
}

}  // namespace scrnet

#endif  // SCRNET_METRICS_HPP
