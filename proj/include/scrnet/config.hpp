#ifndef SCRNET_CONFIG_HPP
#define SCRNET_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "scrnet/degrade.hpp"
#include "scrnet/error.hpp"
#include "scrnet/model.hpp"
#include "scrnet/training.hpp"

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Absent keys keep the desk-scale defaults; `preset = paper` switches
// to the full-scale schedule and architecture before the other keys apply.

namespace scrnet {

struct RunConfig {
  TrainConfig train;
  ModelConfig model;
  DegradeConfig degrade;
};

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& key, std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& config_setters() {
  using std::string;
  static const std::map<string, Setter> setters = [] {
    std::map<string, Setter> m;
    auto as_int = [](auto field) {
      return [field](RunConfig& c, const string& k, const string& v) { field(c) = parse_number<int>(k, v); };
    };
    auto as_double = [](auto field) {
      return [field](RunConfig& c, const string& k, const string& v) { field(c) = parse_number<double>(k, v); };
    };
    auto as_float = [](auto field) {
      return [field](RunConfig& c, const string& k, const string& v) {
        field(c) = static_cast<float>(parse_number<double>(k, v));
      };
    };
    auto as_bool = [](auto field) {
      return [field](RunConfig& c, const string& k, const string& v) { field(c) = parse_bool(k, v); };
    };
    // model
    m["num_layers"] = as_int([](RunConfig& c) -> int& { return c.model.num_layers; });
    m["base_channels"] = as_int([](RunConfig& c) -> int& { return c.model.base_channels; });
    m["max_channels"] = as_int([](RunConfig& c) -> int& { return c.model.max_channels; });
    m["kernel_size"] = as_int([](RunConfig& c) -> int& { return c.model.kernel_size; });
    m["image_size"] = as_int([](RunConfig& c) -> int& { return c.model.image_size; });
    m["negative_slope"] = as_float([](RunConfig& c) -> float& { return c.model.negative_slope; });
    m["use_dh"] = as_bool([](RunConfig& c) -> bool& { return c.model.use_dh; });
    m["use_hfc"] = as_bool([](RunConfig& c) -> bool& { return c.model.use_hfc; });
    m["hfc_radius"] = as_int([](RunConfig& c) -> int& { return c.model.hfc_radius; });
    m["hfc_sigma"] = as_float([](RunConfig& c) -> float& { return c.model.hfc_sigma; });
    m["model_seed"] = [](RunConfig& c, const string& k, const string& v) {
      c.model.seed = parse_number<std::uint64_t>(k, v);
    };
    // training
    m["epochs_flat"] = as_int([](RunConfig& c) -> int& { return c.train.epochs_flat; });
    m["epochs_decay"] = as_int([](RunConfig& c) -> int& { return c.train.epochs_decay; });
    m["base_lr"] = as_double([](RunConfig& c) -> double& { return c.train.base_lr; });
    m["batch_size"] = as_int([](RunConfig& c) -> int& { return c.train.batch_size; });
    m["k"] = as_int([](RunConfig& c) -> int& { return c.train.k; });
    m["use_scs"] = as_bool([](RunConfig& c) -> bool& { return c.train.use_scs; });
    m["freeze_scs"] = as_bool([](RunConfig& c) -> bool& { return c.train.freeze_scs; });
    m["seed"] = [](RunConfig& c, const string& k, const string& v) {
      c.train.seed = parse_number<std::uint64_t>(k, v);
    };
    // degradation
    m["alpha_min"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.alpha_min; });
    m["alpha_max"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.alpha_max; });
    m["beta_min"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.beta_min; });
    m["beta_max"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.beta_max; });
    m["r_b_min"] = as_int([](RunConfig& c) -> int& { return c.degrade.ranges.r_b_min; });
    m["r_b_max"] = as_int([](RunConfig& c) -> int& { return c.degrade.ranges.r_b_max; });
    m["sigma_b_min"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.sigma_b_min; });
    m["sigma_b_max"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.sigma_b_max; });
    m["r_l_min"] = as_int([](RunConfig& c) -> int& { return c.degrade.ranges.r_l_min; });
    m["r_l_max"] = as_int([](RunConfig& c) -> int& { return c.degrade.ranges.r_l_max; });
    m["sigma_l_min"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.sigma_l_min; });
    m["sigma_l_max"] = as_double([](RunConfig& c) -> double& { return c.degrade.ranges.sigma_l_max; });
    m["panel_margin"] = [](RunConfig& c, const string& k, const string& v) {
      const double margin = parse_number<double>(k, v);
      if (!(margin >= 0.0 && margin <= 0.5)) throw ConfigError("config key 'panel_margin' must lie in [0,0.5]");
      c.degrade.ranges.set_panel_margin(margin);
    };
    m["raw_panel"] = [](RunConfig& c, const string& k, const string& v) {
      c.degrade.sim.normalize_panel = !parse_bool(k, v);
    };
    return m;
  }();
  return setters;
}

}  // namespace detail

/// Full-scale preset: 256x256 inputs, 8 layers, K = 16, lr 1e-3, 150 + 50
/// epochs, batch 8.
inline RunConfig full_scale_run_config() {
  RunConfig c;
  c.train = full_scale_train_config();
  c.model = full_scale_model_config();
  return c;
}

/// Checks every section; throws ConfigError naming the offending setting.
inline void validate(const RunConfig& c) {
  try {
    validate(c.train);
    validate(c.model);
    validate(c.degrade.ranges, c.degrade.sim.allow_identity_blur);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config") {
  std::map<std::string, std::pair<std::string, int>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": expected 'key = value'");
    if (key != "preset" && !detail::config_setters().count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!entries.emplace(key, std::make_pair(value, lineno)).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
  }

  RunConfig cfg;
  if (auto it = entries.find("preset"); it != entries.end()) {
    if (it->second.first == "paper") {
      cfg = full_scale_run_config();
    } else if (it->second.first != "desk") {
      throw ConfigError(source + ":" + std::to_string(it->second.second) + ": unknown preset '" +
                        it->second.first + "' (expected desk or paper)");
    }
    entries.erase(it);
  }
  const bool explicit_model_seed = entries.count("model_seed") > 0;
  for (const auto& [key, entry] : entries) {
    try {
      detail::config_setters().at(key)(cfg, key, entry.first);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(entry.second) + ": " + e.what());
    }
  }
  if (!explicit_model_seed) cfg.model.seed = cfg.train.seed;
  validate(cfg);
  return cfg;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

}  // namespace scrnet

#endif  // SCRNET_CONFIG_HPP
