#ifndef SCRNET_TRAINING_HPP
#define SCRNET_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scrnet/adam.hpp"
#include "scrnet/conv.hpp"
#include "scrnet/degrade.hpp"
#include "scrnet/error.hpp"
#include "scrnet/filter.hpp"
#include "scrnet/image.hpp"
#include "scrnet/image_io.hpp"
#include "scrnet/model.hpp"
#include "scrnet/random.hpp"
#include "scrnet/tensor.hpp"

namespace scrnet {

struct TrainConfig {
  int epochs_flat = 20;
  int epochs_decay = 10;
  double base_lr = 1e-3;
  int batch_size = 8;
  int k = 4;
  std::uint64_t seed = 0;
  bool use_scs = true;     // false: one cataract per clear image per epoch
  bool freeze_scs = false; // reuse the epoch-0 SCS every epoch

  int total_epochs() const { return epochs_flat + epochs_decay; }
  int cataracts_per_image() const { return use_scs ? k : 1; }
};

/// Degradation settings used to synthesise training pairs.
struct DegradeConfig {
  ParamRanges ranges;
  SimOptions sim;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs_flat < 0 || c.epochs_decay < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(c.base_lr > 0.0) || !std::isfinite(c.base_lr)) throw InvalidArgument("base_lr must be positive");
  if (c.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (c.k < 1) throw InvalidArgument("k must be >= 1");
}

/// Full-scale schedule: 150 flat epochs at 1e-3, 50 decaying epochs, batch 8, K = 16.
inline TrainConfig full_scale_train_config() {
  TrainConfig c;
  c.epochs_flat = 150;
  c.epochs_decay = 50;
  c.base_lr = 1e-3;
  c.batch_size = 8;
  c.k = kDefaultScsSize;
  return c;
}

/// base_lr during the flat phase, then linear decay that reaches 0 at the
/// end of the schedule: lr(e) = base * (1 - (e - flat) / decay).
inline double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.total_epochs()) {
    throw InvalidArgument("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(cfg.total_epochs()) + "]");
  }
  if (epoch < cfg.epochs_flat) return cfg.base_lr;
  if (cfg.epochs_decay == 0) return 0.0;
  return cfg.base_lr * (1.0 - static_cast<double>(epoch - cfg.epochs_flat) / cfg.epochs_decay);
}

struct LossReport {
  double l_h = 0.0;
  double l_r = 0.0;
  double l_cyc = 0.0;
  double total = 0.0;
  int epoch = 0;
  int step = 0;
  double lr = 0.0;
};

template <typename T>
struct LossTerms {
  Tensor<T> l_h;
  Tensor<T> l_r;
  Tensor<T> l_cyc;
  Tensor<T> total;
};

/// Alignment, restoration and cycle losses plus their unit-weight sum.
///
/// Each term is a per-element mean L1 over the batch, scaled by the SCS size
/// so that it estimates the sum over the K members of one set. H(restored) is
/// taken through the differentiable low-pass so the cycle term reaches D_R.
/// Without an alignment output, l_h and l_cyc are exact zeros.
template <typename T>
LossTerms<T> compute_losses(const ForwardResult<T>& out, const Tensor<T>& clear, const Tensor<T>& clear_hfc,
                            int scs_size, const Kernel2D& hfc_kernel) {
  const T scale = static_cast<T>(scs_size);
  LossTerms<T> t;
  t.l_r = affine(l1_loss(out.restored, clear), scale, T(0));
  if (out.aligned_hfc.defined()) {
    t.l_h = affine(l1_loss(out.aligned_hfc, clear_hfc), scale, T(0));
    t.l_cyc = affine(l1_loss(hfc(out.restored, hfc_kernel), out.aligned_hfc), scale, T(0));
  } else {
    t.l_h = Tensor<T>::scalar(T(0));
    t.l_cyc = Tensor<T>::scalar(T(0));
  }
  t.total = add(add(t.l_h, t.l_r), t.l_cyc);
  return t;
}

/// Packs images into an [N,C,H,W] tensor.
template <typename T>
Tensor<T> to_tensor(const std::vector<const Image*>& images) {
  const Image& first = *images.front();
  std::vector<T> data;
  data.reserve(images.size() * first.size());
  for (const Image* img : images) {
    if (!img->same_shape(first)) throw InvalidArgument("to_tensor: images differ in shape");
    data.insert(data.end(), img->data().begin(), img->data().end());
  }
  return Tensor<T>::from_data({static_cast<int>(images.size()), first.channels(), first.height(), first.width()},
                              std::move(data));
}

template <typename T>
Image to_image(const Tensor<T>& t, int index = 0) {
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  const std::size_t n = static_cast<std::size_t>(c) * h * w;
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(t.values()[index * n + i]);
  return Image(h, w, c, std::move(data));
}

/// Centre-crops to a square and resizes to side x side. Images smaller than
/// side in either dimension are rejected.
inline Image prepare_training_image(const Image& img, int side, const std::string& name = "image") {
  if (img.height() < side || img.width() < side) {
    throw InvalidArgument(name + ": " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                          " is smaller than the training size " + std::to_string(side));
  }
  return resize_bilinear(center_crop_square(img), side, side);
}

inline std::vector<Image> load_training_images(const std::filesystem::path& dir) {
  std::vector<Image> out;
  for (const auto& p : list_images(dir)) out.push_back(load_image(p));
  if (out.empty()) throw InvalidArgument(dir.string() + ": no training images (PNG/PPM) found");
  return out;
}

struct TrainResult {
  Model<float> model;
  std::vector<LossReport> log;

  /// Mean total loss over the steps of one epoch.
  double epoch_mean_total(int epoch) const {
    double acc = 0.0;
    int n = 0;
    for (const auto& r : log)
      if (r.epoch == epoch) {
        acc += r.total;
        ++n;
      }
    return n ? acc / n : std::nan("");
  }
};

using StepCallback = std::function<void(const LossReport&)>;

/// Trains from clear images. Per epoch the images are visited in a seeded
/// order; each contributes one SCS (K cataracts, or one without SCS) whose
/// members occupy consecutive batch slots. Deterministic for a fixed seed.
inline TrainResult train(const std::vector<Image>& clear_images, const TrainConfig& cfg, const ModelConfig& mcfg,
                         const DegradeConfig& degrade = {}, const StepCallback& on_step = {}) {
  validate(cfg);
  validate(mcfg);
  validate(degrade.ranges, degrade.sim.allow_identity_blur);
  if (clear_images.empty()) throw InvalidArgument("train: empty dataset");

  TrainResult result{build_model<float>(mcfg), {}};
  if (cfg.total_epochs() == 0) return result;

  std::vector<Image> clears;
  for (std::size_t i = 0; i < clear_images.size(); ++i) {
    Image img = prepare_training_image(clear_images[i], mcfg.image_size, "training image " + std::to_string(i));
    img.clear_mask();
    clears.push_back(std::move(img));
  }
  std::vector<Image> clear_hfcs;
  for (const auto& c : clears) clear_hfcs.push_back(extract_hfc(c, mcfg.hfc_radius, mcfg.hfc_sigma));

  const Kernel2D kernel = gaussian_kernel(mcfg.hfc_radius, mcfg.hfc_sigma);
  const int k = cfg.cataracts_per_image();
  auto params = result.model.parameters();
  AdamState<float> adam;
  std::map<std::size_t, ScsSample> frozen_sets;

  struct Item {
    const Image* input;
    const Image* clear;
    const Image* clear_hfc;
  };

  int step = 0;
  for (int epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
    const double lr = lr_at(epoch, cfg);

    std::vector<std::size_t> order(clears.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(child_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_int(shuffle_rng, 0, static_cast<int>(i - 1))]);

    std::vector<ScsSample> epoch_sets;
    epoch_sets.reserve(order.size());
    std::vector<Item> items;
    for (std::size_t idx : order) {
      const ScsSample* set = nullptr;
      const std::uint64_t image_seed = child_seed(cfg.seed, idx);
      if (cfg.freeze_scs) {
        auto it = frozen_sets.find(idx);
        if (it == frozen_sets.end()) {
          it = frozen_sets
                   .emplace(idx, make_scs(clears[idx], k, child_seed(image_seed, 0), degrade.ranges, degrade.sim,
                                          mcfg.hfc_radius, mcfg.hfc_sigma))
                   .first;
        }
        set = &it->second;
      } else {
        epoch_sets.push_back(make_scs(clears[idx], k, child_seed(image_seed, static_cast<std::uint64_t>(epoch)),
                                      degrade.ranges, degrade.sim, mcfg.hfc_radius, mcfg.hfc_sigma));
        set = &epoch_sets.back();
      }
      for (int j = 0; j < k; ++j) {
        const Image* input = mcfg.use_hfc ? &set->cataract_hfcs[j] : &set->cataracts[j];
        items.push_back({input, &clears[idx], &clear_hfcs[idx]});
      }
    }

    for (std::size_t begin = 0; begin < items.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(items.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Image*> inputs, targets, target_hfcs;
      for (std::size_t i = begin; i < end; ++i) {
        inputs.push_back(items[i].input);
        targets.push_back(items[i].clear);
        target_hfcs.push_back(items[i].clear_hfc);
      }
      const auto out = forward(result.model, to_tensor<float>(inputs));
      const auto losses = compute_losses(out, to_tensor<float>(targets), to_tensor<float>(target_hfcs), k, kernel);
      backward(losses.total);
      adam_step(params, adam, lr);

      LossReport r{losses.l_h.item(), losses.l_r.item(), losses.l_cyc.item(), losses.total.item(), epoch, step++, lr};
      result.log.push_back(r);
      if (on_step) on_step(r);
    }
  }
  return result;
}

inline TrainResult train(const std::filesystem::path& clear_image_dir, const TrainConfig& cfg,
                         const ModelConfig& mcfg, const DegradeConfig& degrade = {},
                         const StepCallback& on_step = {}) {
  return train(load_training_images(clear_image_dir), cfg, mcfg, degrade, on_step);
}

inline void write_loss_log(const std::vector<LossReport>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open loss log for writing");
  out << "epoch,step,l_h,l_r,l_cyc,total,lr\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.step, r.l_h, r.l_r, r.l_cyc,
                  r.total, r.lr);
    out << buf;
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

/// Restores one cataract image: resized to the training resolution, mapped
/// to its HFC (unless the model takes raw input), passed through the network,
/// and the restoration head resized back to the input size.
inline Image restore_image(const Model<float>& model, const Image& cataract) {
  const ModelConfig& c = model.config;
  if (cataract.channels() != c.input_channels) {
    throw InvalidArgument("restore_image: expected " + std::to_string(c.input_channels) + " channels");
  }
  Image input = resize_bilinear(cataract, c.image_size, c.image_size);
  input.clear_mask();
  if (c.use_hfc) input = extract_hfc(input, c.hfc_radius, c.hfc_sigma);
  const Model<float> inference = frozen(model);
  const auto out = forward(inference, to_tensor<float>({&input}));
  Image restored = resize_bilinear(to_image(out.restored), cataract.height(), cataract.width());
  if (cataract.has_mask()) restored.set_mask(cataract.mask());
  return restored;
}

}  // namespace scrnet

#endif  // SCRNET_TRAINING_HPP
