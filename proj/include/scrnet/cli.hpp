#ifndef SCRNET_CLI_HPP
#define SCRNET_CLI_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scrnet/checkpoint.hpp"
#include "scrnet/config.hpp"
#include "scrnet/degrade.hpp"
#include "scrnet/filter.hpp"
#include "scrnet/image_io.hpp"
#include "scrnet/metrics.hpp"
#include "scrnet/parallel.hpp"
#include "scrnet/random.hpp"
#include "scrnet/training.hpp"

// Command-line front end. Every subcommand checks its flags, configuration
// and inputs before creating any output, so a failed invocation leaves the
// file system untouched.

namespace scrnet {

namespace fs = std::filesystem;

namespace cli_detail {

inline std::vector<fs::path> require_images(const fs::path& dir, const char* flag) {
  if (!fs::is_directory(dir)) throw IoError(std::string(flag) + " " + dir.string() + ": not a directory");
  auto files = list_images(dir);
  if (files.empty()) throw IoError(std::string(flag) + " " + dir.string() + ": no PNG/PPM images");
  return files;
}

inline void require_parent(const fs::path& file, const char* flag) {
  const fs::path parent = file.parent_path();
  if (!parent.empty() && fs::exists(parent) && !fs::is_directory(parent)) {
    throw IoError(std::string(flag) + " " + file.string() + ": parent is not a directory");
  }
  if (fs::is_directory(file)) throw IoError(std::string(flag) + " " + file.string() + ": is a directory");
}

inline void make_parent(const fs::path& file) {
  if (!file.parent_path().empty()) fs::create_directories(file.parent_path());
}

inline std::string params_csv(const std::vector<SimParams>& params) {
  std::string out = "index,seed,alpha,beta,r_b,sigma_b,r_l,sigma_l,center_a,center_b\n";
  char buf[512];
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g,%d,%.17g,%d,%.17g,%.17g,%.17g\n", i,
                  static_cast<unsigned long long>(p.seed), p.alpha, p.beta, p.r_b, p.sigma_b, p.r_l, p.sigma_l,
                  p.center_a, p.center_b);
    out += buf;
  }
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

struct SynthesizeArgs {
  std::string input, output, config;
  int k = kDefaultScsSize;
  std::uint64_t seed = 0;
  bool raw_panel = false;
};

inline int synthesize(const SynthesizeArgs& a, std::ostream& out) {
  DegradeConfig degrade;
  if (!a.config.empty()) degrade = parse_config(a.config).degrade;
  if (a.raw_panel) degrade.sim.normalize_panel = false;
  validate(degrade.ranges, degrade.sim.allow_identity_blur);
  const auto files = require_images(a.input, "--input");
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(load_image(f));

  fs::create_directories(a.output);
  parallel_for(files.size(), [&](std::size_t i) {
    const std::string stem = files[i].stem().string();
    const std::uint64_t master = child_seed(a.seed, hash_name(stem));
    std::vector<SimParams> params;
    for (int j = 0; j < a.k; ++j) {
      params.push_back(slot_params(master, j, degrade.ranges, degrade.sim.allow_identity_blur));
      char name[64];
      std::snprintf(name, sizeof name, "_cataract_%02d.png", j);
      save_image(simulate_cataract(images[i], params.back(), degrade.sim), fs::path(a.output) / (stem + name));
    }
    write_text(fs::path(a.output) / (stem + "_params.csv"), params_csv(params));
  });
  out << "synthesized " << files.size() * static_cast<std::size_t>(a.k) << " cataract images from "
      << files.size() << " inputs into " << a.output << '\n';
  return 0;
}

struct HfcArgs {
  std::string input, output;
  int radius = kHfcRadius;
  double sigma = kHfcSigma;
};

inline int hfc(const HfcArgs& a, std::ostream& out) {
  gaussian_kernel(a.radius, a.sigma);  // rejects bad parameters up front
  const auto files = require_images(a.input, "--input");
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(load_image(f));

  fs::create_directories(a.output);
  char meta[128];
  std::snprintf(meta, sizeof meta, "radius = %d\nsigma = %.17g\nformat = HFC0 f32 little-endian planar\n", a.radius,
                a.sigma);
  write_text(fs::path(a.output) / "hfc_params.txt", meta);
  parallel_for(files.size(), [&](std::size_t i) {
    const std::string stem = files[i].stem().string();
    const Image h = extract_hfc(images[i], a.radius, a.sigma);
    save_image(visualize_signed(h), fs::path(a.output) / (stem + "_hfc.png"));
    write_hfc_raw(h, fs::path(a.output) / (stem + "_hfc.f32"));
  });
  out << "wrote HFC maps for " << files.size() << " images (radius " << a.radius << ", sigma " << a.sigma
      << ") into " << a.output << '\n';
  return 0;
}

struct TrainArgs {
  std::string data, config, out, log;
  std::optional<std::uint64_t> seed;
  bool freeze_scs = false;
};

inline int train_cmd(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = parse_config(a.config);
  if (a.seed) cfg.train.seed = cfg.model.seed = *a.seed;
  if (a.freeze_scs) cfg.train.freeze_scs = true;
  validate(cfg);
  require_parent(a.out, "--out");
  if (!a.log.empty()) require_parent(a.log, "--log");
  const auto files = require_images(a.data, "--data");
  std::vector<Image> images;
  for (const auto& f : files) {
    images.push_back(prepare_training_image(load_image(f), cfg.model.image_size, f.filename().string()));
  }

  int last_epoch = -1;
  double acc = 0.0;
  int steps = 0;
  auto flush = [&] {
    if (steps == 0) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %d mean_total %.6f\n", last_epoch, acc / steps);
    out << buf << std::flush;
  };
  const TrainResult result = train(images, cfg.train, cfg.model, cfg.degrade, [&](const LossReport& r) {
    if (r.epoch != last_epoch) {
      flush();
      last_epoch = r.epoch;
      acc = 0.0;
      steps = 0;
    }
    acc += r.total;
    ++steps;
  });
  flush();

  make_parent(a.out);
  save_checkpoint(result.model, a.out);
  if (!a.log.empty()) {
    make_parent(a.log);
    write_loss_log(result.log, a.log);
  }
  out << "trained " << cfg.train.total_epochs() << " epochs on " << images.size() << " images; checkpoint "
      << a.out << '\n';
  return 0;
}

struct RestoreArgs {
  std::string checkpoint, input, output;
};

inline int restore(const RestoreArgs& a, std::ostream& out) {
  const Model<float> model = load_checkpoint<float>(a.checkpoint);
  const auto files = require_images(a.input, "--input");
  std::vector<Image> images;
  for (const auto& f : files) {
    images.push_back(load_image(f));
    if (images.back().height() < 2 || images.back().width() < 2) throw IoError(f.string() + ": image too small");
  }

  fs::create_directories(a.output);
  parallel_for(files.size(), [&](std::size_t i) {
    save_image(restore_image(model, images[i]), fs::path(a.output) / (files[i].stem().string() + "_restored.png"));
  });
  out << "restored " << files.size() << " images into " << a.output << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string restored, reference, report;
};

inline int evaluate_cmd(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  require_images(a.restored, "--restored");
  if (!fs::is_directory(a.reference)) throw IoError("--reference " + a.reference + ": not a directory");
  require_parent(a.report, "--report");
  make_parent(a.report);
  const EvalReport report = evaluate(a.restored, a.reference, fs::path(a.report));
  out << "evaluated " << report.rows.size() << " pairs: mean PSNR " << format_db(report.mean_psnr_db)
      << " dB, mean SSIM " << format_db(report.mean_ssim) << '\n';
  for (const auto& s : report.skipped) err << "skipped " << s << '\n';
  if (!report.skipped.empty()) {
    err << "error: " << report.skipped.size() << " restored images had no usable reference\n";
    return 1;
  }
  return 0;
}

}  // namespace cli_detail

/// Parses and runs one invocation. Returns the process exit status; errors are
/// reported as a single line on err.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure-consistent restoration of cataract fundus images", "scrnet"};
  app.require_subcommand(1);

  cli_detail::SynthesizeArgs syn;
  auto* s = app.add_subcommand("synthesize", "Write K simulated cataract images per clear input");
  s->add_option("--input", syn.input, "Directory of clear images")->required();
  s->add_option("--output", syn.output, "Output directory")->required();
  s->add_option("--k", syn.k, "Cataract images per input")->check(CLI::Range(1, 1000));
  s->add_option("--seed", syn.seed, "Master seed");
  s->add_option("--config", syn.config, "Configuration file (degradation ranges)");
  s->add_flag("--raw-panel", syn.raw_panel, "Keep the transmission panel in pixel units");

  cli_detail::HfcArgs hf;
  auto* h = app.add_subcommand("hfc", "Extract high-frequency components");
  h->add_option("--input", hf.input, "Directory of images")->required();
  h->add_option("--output", hf.output, "Output directory")->required();
  h->add_option("--radius", hf.radius, "Low-pass kernel radius")->check(CLI::NonNegativeNumber);
  h->add_option("--sigma", hf.sigma, "Low-pass spatial constant")->check(CLI::PositiveNumber);

  cli_detail::TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on clear images");
  t->add_option("--data", tr.data, "Directory of clear images")->required();
  t->add_option("--config", tr.config, "Configuration file");
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--log", tr.log, "Per-step loss CSV");
  t->add_option("--seed", tr.seed, "Seed for initialisation, shuffling and synthesis");
  t->add_flag("--freeze-scs", tr.freeze_scs, "Draw each image's cataract set once instead of every epoch");

  cli_detail::RestoreArgs re;
  auto* r = app.add_subcommand("restore", "Restore cataract images with a trained checkpoint");
  r->add_option("--checkpoint", re.checkpoint, "Checkpoint path")->required();
  r->add_option("--input", re.input, "Directory of cataract images")->required();
  r->add_option("--output", re.output, "Output directory")->required();

  cli_detail::EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score restored images against references");
  e->add_option("--restored", ev.restored, "Directory of restored images")->required();
  e->add_option("--reference", ev.reference, "Directory of reference images")->required();
  e->add_option("--report", ev.report, "Report CSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  }

  try {
    if (s->parsed()) return cli_detail::synthesize(syn, out);
    if (h->parsed()) return cli_detail::hfc(hf, out);
    if (t->parsed()) return cli_detail::train_cmd(tr, out);
    if (r->parsed()) return cli_detail::restore(re, out);
    if (e->parsed()) return cli_detail::evaluate_cmd(ev, out, err);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace scrnet

#endif  // SCRNET_CLI_HPP
