// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Optional argv[1] overrides the bundled 20-image training set.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "scratch.hpp"
#include "scrnet/checkpoint.hpp"
#include "scrnet/cli.hpp"
#include "scrnet/conv.hpp"
#include "scrnet/degrade.hpp"
#include "scrnet/filter.hpp"
#include "scrnet/metrics.hpp"
#include "scrnet/phantom.hpp"
#include "scrnet/training.hpp"

using namespace scrnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path desk_data = SCRNET_DESK_DATA;
constexpr std::uint64_t kSmokeSeed = 1;
constexpr int kHeldOut = 10;

Tensor<float> to_float(const std::vector<double>& v, Shape s) {
  return Tensor<float>::from_data(s, std::vector<float>(v.begin(), v.end()));
}

double max_gap(const std::vector<float>& a, const std::vector<double>& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) g = std::max(g, std::abs(static_cast<double>(a[i]) - b[i]));
  return g;
}

// ---------------------------------------------------------------------------
// Shared desk-scale runs

RunConfig desk_config(std::uint64_t seed, bool use_dh, bool use_hfc) {
  RunConfig c;  // desk defaults: L=4, 64x64, K=4, 20 + 10 epochs
  c.train.seed = seed;
  c.model.seed = seed;
  c.model.use_dh = use_dh;
  c.model.use_hfc = use_hfc;
  return c;
}

struct HeldOut {
  std::vector<Image> clear, cataract;
};

// Phantoms the training set never saw, degraded with seeds disjoint from training.
const HeldOut& held_out() {
  static const HeldOut h = [] {
    HeldOut out;
    for (int i = 0; i < kHeldOut; ++i) {
      const Image clear = make_fundus_phantom(64, 900000 + i);
      const SimParams p = slot_params(child_seed(424242, static_cast<std::uint64_t>(i)), 0, ParamRanges{});
      out.cataract.push_back(simulate_cataract(clear, p));
      out.clear.push_back(clear);
    }
    return out;
  }();
  return h;
}

struct Scores {
  double psnr_restored = 0, psnr_cataract = 0, ssim_restored = 0, ssim_cataract = 0;
};

Scores score(const Model<float>& model) {
  const auto& h = held_out();
  Scores s;
  for (int i = 0; i < kHeldOut; ++i) {
    const Image r = restore_image(model, h.cataract[i]);
    s.psnr_restored += psnr(r, h.clear[i]) / kHeldOut;
    s.ssim_restored += ssim(r, h.clear[i]) / kHeldOut;
    s.psnr_cataract += psnr(h.cataract[i], h.clear[i]) / kHeldOut;
    s.ssim_cataract += ssim(h.cataract[i], h.clear[i]) / kHeldOut;
  }
  return s;
}

struct SmokeRun {
  TrainResult result;
  double seconds = 0.0;
  std::vector<unsigned char> checkpoint;
};

const SmokeRun& smoke() {
  static const SmokeRun run = [] {
    const RunConfig c = desk_config(kSmokeSeed, true, true);
    const auto t0 = Clock::now();
    SmokeRun r{train(desk_data, c.train, c.model, c.degrade), 0.0, {}};
    r.seconds = seconds_since(t0);
    r.checkpoint = serialize_checkpoint(r.result.model);
    return r;
  }();
  return run;
}

// ---------------------------------------------------------------------------

void oracle_equivalence(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  double conv_gap = 0, convt_gap = 0, filter_gap = 0, adj_gap = 0;
  const int instances = 50;
  for (int t = 0; t < instances; ++t) {
    const int n = pick(1, 2), ci = pick(1, 4), co = pick(1, 4), k = pick(1, 4), stride = pick(1, 2), pad = pick(0, k - 1);
    const int h = pick(k, 10), w = pick(k, 10);
    const auto x = oracle::random_vector(static_cast<std::size_t>(n) * ci * h * w, 1000 + t);
    const auto wt = oracle::random_vector(static_cast<std::size_t>(co) * ci * k * k, 2000 + t);
    const auto b = oracle::random_vector(co, 3000 + t);
    int ho = 0, wo = 0;
    const auto ref = oracle::conv(x, n, ci, h, w, wt, co, k, b, stride, pad, ho, wo);
    const auto xf = to_float(x, {n, ci, h, w});
    const auto wf = to_float(wt, {co, ci, k, k});
    const auto y = conv2d(xf, wf, to_float(b, {co}), stride, pad);
    conv_gap = std::max(conv_gap, max_gap(y.values(), ref));

    // Transposed convolution with the same kernel maps the output grid back.
    const auto r = oracle::random_vector(static_cast<std::size_t>(n) * co * ho * wo, 4000 + t);
    const auto bt = oracle::random_vector(ci, 5000 + t);
    int th = 0, tw = 0;
    const auto tref = oracle::conv_transpose(r, n, co, ho, wo, wt, ci, k, bt, stride, pad, th, tw);
    const auto rf = to_float(r, {n, co, ho, wo});
    const auto tout = conv2d_transpose(rf, wf, to_float(bt, {ci}), stride, pad);
    convt_gap = std::max(convt_gap, max_gap(tout.values(), tref));

    // <conv(x), r> = <x, conv_transpose(r)> when the transpose lands on x's grid.
    if (th == h && tw == w) {
      const auto yb = conv2d(xf, wf, Tensor<float>(), stride, pad);
      const auto back = conv2d_transpose(rf, wf, Tensor<float>(), stride, pad);
      double lhs = 0, rhs = 0;
      for (std::size_t i = 0; i < r.size(); ++i) lhs += static_cast<double>(yb.values()[i]) * rf.values()[i];
      for (std::size_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(xf.values()[i]) * back.values()[i];
      adj_gap = std::max(adj_gap, std::abs(lhs - rhs));
    }

    const int fh = pick(3, 12), fw = pick(3, 12), fc = pick(1, 3);
    const int radius = pick(1, std::min(fh, fw) - 1);
    const double sigma = std::uniform_real_distribution<double>(0.5, 5.0)(rng);
    const Image img = oracle::random_image(fh, fw, fc, 6000 + t);
    const Image got = filter2d(img, gaussian_kernel(radius, sigma));
    filter_gap = std::max(filter_gap, max_gap(got.data(), oracle::filter(img, radius, sigma)));
  }
  const double secs = seconds_since(t0);
  o.require(conv_gap <= 1e-5, "conv2d");
  o.require(convt_gap <= 1e-5, "conv2d_transpose");
  o.require(filter_gap <= 1e-5, "filter2d");
  o.require(adj_gap <= 1e-4, "adjointness");
  o.require(secs < 30.0, "runtime");
  o.detail << instances << " instances each; max gaps conv " << fmt(conv_gap) << ", transpose " << fmt(convt_gap)
           << ", filter " << fmt(filter_gap) << ", adjoint " << fmt(adj_gap) << "; " << fmt(secs, "%.2f") << " s";
}

void gradient_suite(Outcome& o) {
  const auto t0 = Clock::now();
  ModelConfig c;
  c.num_layers = 2;
  c.base_channels = 4;
  c.max_channels = 64;
  c.image_size = 16;
  c.seed = 7;
  auto p = oracle::make_toy_problem(c, 2, 21);
  const auto rep = oracle::check_full_loss(p, 100, 1e-3, 1e-4, 33);
  const double secs = seconds_since(t0);
  o.require(rep.checked == 100, "100 coordinates checked");
  o.require(rep.failures == 0, "relative error");
  o.require(rep.forward_gap < 1e-10, "forward agrees with loop oracle");
  o.require(secs < 120.0, "runtime");
  o.detail << rep.checked << " coordinates (" << rep.skipped_near_kink << " near kinks skipped), max rel error "
           << fmt(rep.max_rel_error) << ", forward gap " << fmt(rep.forward_gap) << "; " << fmt(secs, "%.2f") << " s";
}

void cataract_fidelity(Outcome& o) {
  double gap = 0.0;
  for (int i = 0; i < 10; ++i) {
    const Image s = oracle::random_image(8, 8, 3, 700 + i);
    const SimParams p = slot_params(77, i, ParamRanges{});
    const auto ref = oracle::cataract(s, p.alpha, p.beta, p.r_b, p.sigma_b, p.r_l, p.sigma_l, p.center_a, p.center_b);
    gap = std::max(gap, max_gap(simulate_cataract(s, p).data(), ref));
  }
  SimParams id;
  id.alpha = 1.0;
  id.beta = 0.0;
  id.r_b = id.r_l = 0;
  SimOptions opt;
  opt.allow_identity_blur = true;
  const Image s = oracle::random_image(8, 8, 3, 799);
  const bool exact = simulate_cataract(s, id, opt) == s;
  o.require(gap <= 1e-5, "per-pixel match");
  o.require(exact, "identity case");
  o.detail << "10 images, max gap " << fmt(gap) << "; identity case " << (exact ? "exact" : "not exact");
}

void hfc_properties(Outcome& o) {
  const Image flat(64, 64, 3, 0.37f);
  double const_gap = 0.0;
  for (float v : extract_hfc(flat).data()) const_gap = std::max(const_gap, std::abs(static_cast<double>(v)));

  const Image x = oracle::random_image(48, 56, 3, 81), y = oracle::random_image(48, 56, 3, 82);
  const double a = 0.7, b = -1.3;
  Image mix(48, 56, 3);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = static_cast<float>(a * x.data()[i] + b * y.data()[i]);
  const Image hm = extract_hfc(mix), hx = extract_hfc(x), hy = extract_hfc(y);
  double lin_gap = 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i)
    lin_gap = std::max(lin_gap, std::abs(hm.data()[i] - (a * hx.data()[i] + b * hy.data()[i])));

  const Image low = filter2d(x, gaussian_kernel(kHfcRadius, kHfcSigma));
  double rec_gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    rec_gap = std::max(rec_gap, std::abs(static_cast<double>(hx.data()[i]) + low.data()[i] - x.data()[i]));

  ScratchDir dir("accept_hfc");
  fs::create_directories(dir / "in");
  save_image(make_fundus_phantom(64, 5), dir / "in" / "eye.png");
  std::ostringstream out, err;
  const int code = run_cli({"hfc", "--input", (dir / "in").string(), "--output", (dir / "out").string()}, out, err);
  std::ifstream meta(dir / "out" / "hfc_params.txt");
  const std::string text{std::istreambuf_iterator<char>(meta), std::istreambuf_iterator<char>()};
  const bool recorded = code == 0 && text.find("radius = 26") != std::string::npos &&
                        text.find("sigma = 9") != std::string::npos;

  o.require(const_gap <= 1e-6, "constant image");
  o.require(lin_gap <= 1e-6, "linearity");
  o.require(rec_gap <= 1e-6, "reconstruction");
  o.require(recorded, "default parameters recorded");
  o.detail << "constant " << fmt(const_gap) << ", linearity " << fmt(lin_gap) << ", reconstruction "
           << fmt(rec_gap) << "; CLI metadata " << (recorded ? "records r=26, sigma=9" : "missing");
}

void loss_identities(Outcome& o) {
  const auto& log = smoke().result.log;
  double sum_gap = 0.0;
  for (const auto& r : log) sum_gap = std::max(sum_gap, std::abs(r.total - (r.l_h + r.l_r + r.l_cyc)));

  using TD = Tensor<double>;
  const Kernel2D k = gaussian_kernel(3, 2.0);
  const TD s = TD::from_data({2, 3, 8, 8}, oracle::random_vector(384, 91, 0.0, 1.0));
  const TD hs = hfc(s, k);
  const auto zero = compute_losses<double>({hs, s}, s, hs, 2, k);
  const bool all_zero = zero.l_h.item() == 0.0 && zero.l_r.item() == 0.0 && std::abs(zero.l_cyc.item()) < 1e-15 &&
                        std::abs(zero.total.item()) < 1e-15;

  const TD s1 = TD::from_data({1, 3, 8, 8}, oracle::random_vector(192, 92, 0.0, 1.0));
  const TD h1 = hfc(s1, k);
  const auto off = compute_losses<double>({affine(h1, 1.0, 1.0), s1}, s1, h1, 1, k);
  const double off_gap = std::max({std::abs(off.l_h.item() - 1.0), std::abs(off.l_r.item()),
                                   std::abs(off.l_cyc.item() - 1.0), std::abs(off.total.item() - 2.0)});

  o.require(!log.empty() && sum_gap <= 1e-6, "total equals sum of terms");
  o.require(all_zero, "perfect prediction");
  o.require(off_gap <= 1e-12, "constant offset");
  o.detail << log.size() << " logged steps, max |total - sum| " << fmt(sum_gap) << "; perfect prediction "
           << (all_zero ? "zero" : "nonzero") << "; offset case (1, 0, 1, 2) within " << fmt(off_gap);
}

void smoke_training(Outcome& o) {
  const auto& r = smoke();
  const int last = r.result.log.empty() ? 0 : r.result.log.back().epoch;
  const double first = r.result.epoch_mean_total(0), final = r.result.epoch_mean_total(last);
  o.require(last + 1 == 30, "30 epochs");
  o.require(final <= 0.5 * first, "loss halves");
  o.require(r.seconds < 600.0, "runtime");
  o.detail << "epoch 0 mean " << fmt(first) << ", epoch " << last << " mean " << fmt(final) << " (ratio "
           << fmt(final / first, "%.3f") << "); " << fmt(r.seconds, "%.1f") << " s";
}

void restoration_gain(Outcome& o) {
  ScratchDir dir("accept_ckpt");
  {
    std::ofstream out(dir / "smoke.ckpt", std::ios::binary);
    const auto& bytes = smoke().checkpoint;
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const Scores s = score(load_checkpoint<float>(dir / "smoke.ckpt"));
  const double dp = s.psnr_restored - s.psnr_cataract, ds = s.ssim_restored - s.ssim_cataract;
  o.require(dp >= 1.0, "PSNR gain");
  o.require(ds >= 0.02, "SSIM gain");
  o.detail << kHeldOut << " held-out images; PSNR " << fmt(s.psnr_cataract, "%.2f") << " -> "
           << fmt(s.psnr_restored, "%.2f") << " dB (+" << fmt(dp, "%.2f") << "), SSIM "
           << fmt(s.ssim_cataract, "%.4f") << " -> " << fmt(s.ssim_restored, "%.4f") << " (+" << fmt(ds, "%.4f")
           << ")";
}

void ablation(Outcome& o) {
  const std::uint64_t seeds[] = {kSmokeSeed, 2, 3};
  int ordered = 0;
  for (std::uint64_t seed : seeds) {
    double p[3];
    for (int v = 0; v < 3; ++v) {
      if (v == 0 && seed == kSmokeSeed) {
        p[v] = score(smoke().result.model).psnr_restored;
        continue;
      }
      const RunConfig c = desk_config(seed, v == 0, v != 2);
      p[v] = score(train(desk_data, c.train, c.model, c.degrade).model).psnr_restored;
    }
    const bool ok = p[0] >= p[1] && p[1] >= p[2];
    ordered += ok;
    o.detail << "seed " << seed << ": " << fmt(p[0], "%.3f") << " / " << fmt(p[1], "%.3f") << " / "
             << fmt(p[2], "%.3f") << (ok ? " ordered" : " not ordered") << "; ";
  }
  o.require(ordered >= 2, "majority ordering");
  o.detail << ordered << "/3 seeds give full >= w/o D_H >= w/o HFC,D_H (held-out PSNR dB)";
}

void determinism(Outcome& o) {
  ::unsetenv("SCRNET_THREADS");
  ScratchDir dir("accept_det");
  write_file(dir / "short.cfg",
             "num_layers = 3\nbase_channels = 8\nmax_channels = 16\nimage_size = 32\n"
             "epochs_flat = 1\nepochs_decay = 1\nk = 2\nbatch_size = 4\nseed = 5\n");
  auto cli = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code == 0;
  };
  bool ran = true;
  for (const char* tag : {"a", "b"}) {
    const fs::path root = dir / tag;
    ran &= cli({"synthesize", "--input", desk_data.string(), "--output", (root / "syn").string(), "--k", "2",
                "--seed", "9"});
    ran &= cli({"train", "--data", desk_data.string(), "--config", (dir / "short.cfg").string(), "--out",
                (root / "m.ckpt").string(), "--log", (root / "loss.csv").string()});
  }
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "syn")) {
    ++files;
    differing += file_bytes(e.path()) != file_bytes(dir / "b" / "syn" / e.path().filename());
  }
  const bool ckpt_same = file_bytes(dir / "a" / "m.ckpt") == file_bytes(dir / "b" / "m.ckpt");
  const bool log_same = file_bytes(dir / "a" / "loss.csv") == file_bytes(dir / "b" / "loss.csv");

  // Load, re-save, compare bytes and every parameter.
  const auto model = load_checkpoint<float>(dir / "a" / "m.ckpt");
  save_checkpoint(model, dir / "resaved.ckpt");
  const auto back = load_checkpoint<float>(dir / "resaved.ckpt");
  bool params_same = model.parameters().size() == back.parameters().size() && back.config == model.config;
  for (std::size_t i = 0; params_same && i < model.parameters().size(); ++i)
    params_same = model.parameters()[i].values() == back.parameters()[i].values();
  const bool round_trip = params_same && file_bytes(dir / "resaved.ckpt") == file_bytes(dir / "a" / "m.ckpt");

  o.require(ran, "CLI runs succeeded");
  o.require(files > 0 && differing == 0, "synthesize byte-identical");
  o.require(ckpt_same && log_same, "train byte-identical");
  o.require(round_trip, "checkpoint round trip");
  o.detail << "synthesize: " << files - differing << "/" << files << " files identical; train checkpoint "
           << (ckpt_same ? "identical" : "differs") << ", loss log " << (log_same ? "identical" : "differs")
           << "; round trip " << (round_trip ? "bit-exact" : "differs");
}

void metric_validation(Outcome& o) {
  double psnr_gap = 0.0, ssim_gap = 0.0;
  for (int i = 0; i < 10; ++i) {
    const Image a = oracle::random_image(24, 21, 3, 1100 + i);
    Image b = oracle::random_image(24, 21, 3, 1200 + i, 0.0, 0.2);
    for (std::size_t j = 0; j < b.size(); ++j) b.data()[j] = std::clamp(a.data()[j] + b.data()[j] - 0.1f, 0.0f, 1.0f);
    psnr_gap = std::max(psnr_gap, std::abs(psnr(a, b) - oracle::psnr(a, b)));
    ssim_gap = std::max(ssim_gap, std::abs(ssim(a, b) - oracle::ssim(a, b)));
  }
  const Image x = oracle::random_image(32, 32, 3, 1300);
  const double self = ssim(x, x);
  const double offset = psnr(Image(16, 16, 3, 0.3f), Image(16, 16, 3, 0.4f));
  o.require(psnr_gap <= 1e-6, "psnr oracle");
  o.require(ssim_gap <= 1e-4, "ssim oracle");
  o.require(std::abs(self - 1.0) <= 1e-12, "ssim(x,x)");
  o.require(std::abs(offset - 20.0) <= 1e-6, "0.1 offset");
  o.detail << "psnr gap " << fmt(psnr_gap) << " dB, ssim gap " << fmt(ssim_gap) << ", ssim(x,x) = "
           << fmt(self, "%.15g") << ", 0.1 offset -> " << fmt(offset, "%.9f") << " dB";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) desk_data = argv[1];
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"oracle equivalence", oracle_equivalence}, {"gradient check", gradient_suite},
      {"cataract model", cataract_fidelity},     {"HFC properties", hfc_properties},
      {"loss identities", loss_identities},      {"smoke training", smoke_training},
      {"restoration gain", restoration_gain},    {"ablation ordering", ablation},
      {"determinism", determinism},              {"metric validation", metric_validation},
  };
  const auto t0 = Clock::now();
  int failed = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
              << o.detail.str() << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << " in "
            << fmt(seconds_since(t0), "%.1f") << " s" << std::endl;
  return failed ? 1 : 0;
}
