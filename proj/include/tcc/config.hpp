#pragma once

// Run configuration: flat `key = value` text with dotted keys. Values come
// from built-in defaults, then a config file, then flag overrides. The
// canonical form lists every key in sorted order and is written next to
// every run's outputs.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcc/data.hpp"
#include "tcc/models.hpp"
#include "tcc/train.hpp"

#ifndef TCC_VERSION
#define TCC_VERSION "0.0.0"
#endif

namespace tcc {

inline constexpr const char* kToolVersion = TCC_VERSION;

// Malformed invocation or configuration; maps to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss{std::string(s)};
  while (std::getline(ss, cell, sep)) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static std::map<std::string, std::string> defaults() {
    return {
        {"seed", "0"},
        {"out", ""},
        {"force", "false"},
        {"data.root", ""},
        {"data.splits", "all"},
        {"synth.count", "10"},
        {"synth.frames", "5"},
        {"synth.height", "64"},
        {"synth.width", "64"},
        {"synth.patch_size", "8"},
        {"synth.trajectory", "constant"},
        {"synth.switch_at", "2"},
        {"synth.palette_bias", "1,1,1"},
        {"synth.gray_mean", "false"},
        {"synth.content_change", "0.1"},
        {"synth.split_count", "3"},
        {"model.kind", "TCCNET"},
        {"model.backbone", "tiny"},
        {"model.input_resolution", "64"},
        {"model.hidden_size", "8"},
        {"model.kernel_size", "5"},
        {"model.cascade_stages", "2"},
        {"model.c4_stages", "2"},
        {"model.tied", "false"},
        {"model.confidence_pooling", "false"},
        {"model.pretrained", ""},
        {"train.split", "split_0"},
        {"train.epochs", "50"},
        {"train.learning_rate", "0.001"},
        {"train.batch_size", "1"},
        {"train.frame_selection", "full"},
        {"train.augment", "true"},
        {"train.val_fraction", "0.2"},
        {"train.init_from", ""},
        {"eval.checkpoint", ""},
        {"eval.baseline", ""},
        {"eval.name", ""},
        {"eval.frame_selection", "full"},
        {"compare.baseline", ""},
        {"compare.challengers", ""},
        {"bench.checkpoints", ""},
        {"bench.selections", "full,first_median_shot"},
        {"bench.repeats", "3"},
        {"bench.split", ""},
    };
  }

  // `key = value` lines; '#' starts a comment.
  void load(std::istream& in, const std::string& origin = "config") {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      set(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path.string());
    load(in, path.string());
  }

  // `key=value` override.
  void apply(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw UsageError("override '" + std::string(assignment) + "' lacks '='");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) {
    if (key == "tool.version") return;  // always the running tool's version
    if (!values_.count(key)) throw UsageError("unknown config key '" + key + "'");
    values_[key] = value;
    explicit_.insert(key);
  }

  bool is_explicit(const std::string& key) const { return explicit_.count(key) > 0; }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
  }

  long long integer(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used == v.size()) return x;
    } catch (const std::logic_error&) {
    }
    throw UsageError(key + ": expected an integer, got '" + v + "'");
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t used = 0;
      if (!v.empty() && v[0] != '-') {
        const auto x = std::stoull(v, &used);
        if (used == v.size()) return x;
      }
    } catch (const std::logic_error&) {
    }
    throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
  }

  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used == v.size()) return x;
    } catch (const std::logic_error&) {
    }
    throw UsageError(key + ": expected a number, got '" + v + "'");
  }

  bool boolean(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError(key + ": expected true or false, got '" + v + "'");
  }

  std::uint64_t seed() const { return unsigned_integer("seed"); }

  // Sorted `key = value` lines, headed by the tool version.
  std::string canonical() const {
    std::ostringstream out;
    out << "tool.version = " << kToolVersion << '\n';
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

// ---- typed views ---------------------------------------------------------------

namespace detail {
template <typename F>
auto as_usage(const std::string& key, F f) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw UsageError(key + ": " + e.what());
  }
}
}  // namespace detail

inline ModelKind model_kind_of(const RunConfig& c) {
  std::string v = c.str("model.kind");
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return detail::as_usage("model.kind", [&] { return parse_model_kind(v); });
}

inline FrameSelection frame_selection_of(const RunConfig& c, const std::string& key) {
  return detail::as_usage(key, [&] { return FrameSelection::parse(c.str(key)); });
}

inline int int_in(const RunConfig& c, const std::string& key, long long lo) {
  const long long v = c.integer(key);
  if (v < lo || v > 1'000'000'000) throw UsageError(key + ": must be >= " + std::to_string(lo));
  return static_cast<int>(v);
}

inline ModelConfig model_config_of(const RunConfig& c) {
  ModelConfig m;
  m.kind = model_kind_of(c);
  m.backbone.variant = detail::as_usage("model.backbone", [&] { return parse_backbone_variant(c.str("model.backbone")); });
  m.backbone.input_resolution = int_in(c, "model.input_resolution", 8);
  m.backbone.pretrained_weights = c.str("model.pretrained");
  m.hidden_size = int_in(c, "model.hidden_size", 1);
  m.kernel_size = int_in(c, "model.kernel_size", 1);
  m.cascade.stages = int_in(c, "model.cascade_stages", 1);
  m.cascade.inner_c4_stages = int_in(c, "model.c4_stages", 1);
  m.cascade.tied = c.boolean("model.tied");
  m.confidence_pooling = c.boolean("model.confidence_pooling");
  m.init_seed = c.seed();
  detail::as_usage("model", [&] {
    m.validate();
    return 0;
  });
  return m;
}

inline TrainConfig train_config_of(const RunConfig& c) {
  TrainConfig t;
  t.epochs = int_in(c, "train.epochs", 1);
  t.learning_rate = c.real("train.learning_rate");
  t.batch_size = int_in(c, "train.batch_size", 1);
  t.frame_selection = frame_selection_of(c, "train.frame_selection");
  t.augment = c.boolean("train.augment");
  t.seed = c.seed();
  detail::as_usage("train", [&] {
    t.validate();
    return 0;
  });
  return t;
}

inline SynthConfig synth_config_of(const RunConfig& c) {
  SynthConfig s;
  s.frames = int_in(c, "synth.frames", 1);
  s.height = int_in(c, "synth.height", 1);
  s.width = int_in(c, "synth.width", 1);
  s.patch_size = int_in(c, "synth.patch_size", 1);
  s.trajectory = detail::as_usage("synth.trajectory", [&] { return parse_trajectory(c.str("synth.trajectory")); });
  s.switch_at = int_in(c, "synth.switch_at", 0);
  const auto bias = split_list(c.str("synth.palette_bias"));
  if (bias.size() != 3) throw UsageError("synth.palette_bias: expected three comma-separated numbers");
  for (int i = 0; i < 3; ++i) {
    try {
      s.palette_bias[i] = std::stod(bias[i]);
    } catch (const std::logic_error&) {
      throw UsageError("synth.palette_bias: '" + bias[i] + "' is not a number");
    }
  }
  s.gray_mean = c.boolean("synth.gray_mean");
  s.content_change = c.real("synth.content_change");
  detail::as_usage("synth", [&] {
    s.validate();
    return 0;
  });
  return s;
}

}  // namespace tcc
