#pragma once

// Frame sequences, frame selection, augmentation, pseudo-zoom generation,
// synthetic scene synthesis and train/test splitting.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tcc/color.hpp"
#include "tcc/image_ops.hpp"

namespace tcc {

using Rng = std::mt19937_64;

// Ordered frames ending with the shot frame; only the shot frame carries
// ground truth.
struct FrameSequence {
  std::string id;
  std::vector<ImageFrame> frames;
  std::optional<Illuminant> ground_truth;

  std::size_t length() const { return frames.size(); }
  std::size_t shot_index() const { return frames.size() - 1; }
  const ImageFrame& shot() const { return frames.back(); }

  void validate() const {
    if (frames.empty()) throw DomainError("sequence '" + id + "' has no frames");
    for (const auto& f : frames) {
      if (f.height() != frames[0].height() || f.width() != frames[0].width())
        throw DomainError("sequence '" + id + "' has frames of differing size");
    }
    if (ground_truth && std::abs(ground_truth->norm() - 1.0) > 1e-9)
      throw DomainError("sequence '" + id + "' ground truth is not unit-normalized");
  }
};

// ---- frame selection -----------------------------------------------------

class FrameSelection {
 public:
  enum class Strategy { Full, LastK, FirstMedianShot };

  static FrameSelection full() { return FrameSelection(Strategy::Full, 0); }
  static FrameSelection last_k(int k) {
    if (k < 1) throw DomainError("LAST_K requires k >= 1");
    return FrameSelection(Strategy::LastK, k);
  }
  static FrameSelection first_median_shot() { return FrameSelection(Strategy::FirstMedianShot, 0); }

  // Accepts "full", "first_median_shot" (alias "3f") and "last_k:<k>"
  // (alias "last<k>").
  static FrameSelection parse(std::string_view s) {
    if (s == "full" || s == "FULL") return full();
    if (s == "first_median_shot" || s == "FIRST_MEDIAN_SHOT" || s == "3f") return first_median_shot();
    auto parse_k = [&](std::string_view digits) {
      if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit))
        throw DomainError("invalid frame selection '" + std::string(s) + "'");
      return last_k(std::stoi(std::string(digits)));
    };
    for (std::string_view prefix : {"last_k:", "LAST_K:", "last"}) {
      if (s.starts_with(prefix)) return parse_k(s.substr(prefix.size()));
    }
    throw DomainError("invalid frame selection '" + std::string(s) + "'");
  }

  Strategy strategy() const { return strategy_; }
  int k() const { return k_; }

  std::string to_string() const {
    switch (strategy_) {
      case Strategy::Full: return "full";
      case Strategy::LastK: return "last_k:" + std::to_string(k_);
      case Strategy::FirstMedianShot: return "first_median_shot";
    }
    return "full";
  }

  // Indices retained from a sequence of length T, ascending, last = T-1.
  std::vector<std::size_t> indices(std::size_t T) const {
    if (T == 0) throw DomainError("frame selection on empty sequence");
    std::vector<std::size_t> idx;
    switch (strategy_) {
      case Strategy::Full:
        for (std::size_t i = 0; i < T; ++i) idx.push_back(i);
        break;
      case Strategy::LastK: {
        std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(k_), T);
        for (std::size_t i = T - n; i < T; ++i) idx.push_back(i);
        break;
      }
      case Strategy::FirstMedianShot:
        for (std::size_t i : {std::size_t{0}, (T - 1) / 2, T - 1})
          if (idx.empty() || idx.back() != i) idx.push_back(i);
        break;
    }
    return idx;
  }

  friend bool operator==(const FrameSelection&, const FrameSelection&) = default;

 private:
  FrameSelection(Strategy s, int k) : strategy_(s), k_(k) {}
  Strategy strategy_;
  int k_;
};

inline FrameSequence select_frames(const FrameSequence& seq, const FrameSelection& selection) {
  FrameSequence out;
  out.id = seq.id;
  out.ground_truth = seq.ground_truth;
  for (std::size_t i : selection.indices(seq.length())) out.frames.push_back(seq.frames[i]);
  return out;
}

// ---- augmentation --------------------------------------------------------

struct AugmentSpec {
  double rotation_min = -30.0, rotation_max = 30.0;  // degrees
  double crop_min = 0.8, crop_max = 1.0;             // fraction of the shorter side
  double hflip_probability = 0.5;

  static AugmentSpec identity() { return {0.0, 0.0, 1.0, 1.0, 0.0}; }

  void validate() const {
    if (rotation_min != -rotation_max || rotation_max < 0.0)
      throw DomainError("rotation range must be symmetric about zero");
    if (!(crop_min > 0.0) || crop_max > 1.0 || crop_min > crop_max)
      throw DomainError("crop ratio range must lie within (0, 1]");
    if (!(hflip_probability >= 0.0 && hflip_probability <= 1.0))
      throw DomainError("flip probability must lie in [0, 1]");
  }
};

struct AugmentParams {
  double angle = 0.0;
  double crop_ratio = 1.0;
  double offset_x = 0.0, offset_y = 0.0;  // fractions of the free margin
  bool flip = false;
};

inline AugmentParams sample_augment(const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_real_distribution<double> angle(spec.rotation_min, spec.rotation_max);
  std::uniform_real_distribution<double> crop(spec.crop_min, spec.crop_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentParams p;
  p.angle = angle(rng);
  p.crop_ratio = crop(rng);
  p.offset_x = unit(rng);
  p.offset_y = unit(rng);
  p.flip = unit(rng) < spec.hflip_probability;
  return p;
}

// Rotate, square-crop on the shorter side, resample back to side x side, and
// flip. Output frames are min(H, W) square.
inline ImageFrame augment_frame(const ImageFrame& f, const AugmentParams& p) {
  const int side = std::min(f.height(), f.width());
  ImageFrame rotated = rotate(f, p.angle);
  const double s = p.crop_ratio * side;
  const Box box{p.offset_x * (f.width() - s), p.offset_y * (f.height() - s), s, s};
  ImageFrame out = resample_box(rotated, box, side, side);
  return p.flip ? flip_horizontal(out) : out;
}

// One transform is sampled per call and applied identically to every frame.
inline FrameSequence augment(const FrameSequence& seq, const AugmentSpec& spec, Rng& rng) {
  const AugmentParams p = sample_augment(spec, rng);
  FrameSequence out;
  out.id = seq.id;
  out.ground_truth = seq.ground_truth;
  out.frames.reserve(seq.length());
  for (const auto& f : seq.frames) out.frames.push_back(augment_frame(f, p));
  return out;
}

// ---- pseudo-zoom ---------------------------------------------------------

struct ZoomSequence {
  std::vector<ImageFrame> frames;
  std::vector<Box> boxes;  // source region of each emitted frame
};

// Zoom path over the shot frame. The path starts at the full frame and
// shrinks the crop linearly to half the frame while the centre performs a
// bounded random walk (at most 5% of the dimension per step). Frames are
// emitted end-of-path first so the sequence closes on the full shot frame.
inline ZoomSequence pseudo_zoom(const ImageFrame& shot, int length, int out_h, int out_w, Rng& rng) {
  if (length < 1) throw DomainError("pseudo-zoom length must be >= 1");
  if (shot.height() < 8 || shot.width() < 8) throw DomainError("pseudo-zoom needs at least 8x8 input");
  const double W = shot.width(), H = shot.height();
  std::uniform_real_distribution<double> step(-0.05, 0.05);

  std::vector<Box> path;
  double cx = W / 2.0, cy = H / 2.0;
  for (int g = 0; g < length; ++g) {
    const double frac = length == 1 ? 1.0 : 1.0 - 0.5 * g / (length - 1);
    const double w = frac * W, h = frac * H;
    if (g > 0) {
      cx += step(rng) * W;
      cy += step(rng) * H;
    }
    cx = std::clamp(cx, w / 2.0, W - w / 2.0);
    cy = std::clamp(cy, h / 2.0, H - h / 2.0);
    path.push_back({cx - w / 2.0, cy - h / 2.0, w, h});
  }

  ZoomSequence out;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    out.boxes.push_back(*it);
    out.frames.push_back(resample_box(shot, *it, out_h, out_w));
  }
  return out;
}

// ---- synthetic scenes ----------------------------------------------------

enum class Trajectory { Constant, LinearDrift, SwitchAtK };

inline Trajectory parse_trajectory(std::string_view s) {
  if (s == "constant") return Trajectory::Constant;
  if (s == "linear_drift" || s == "drift") return Trajectory::LinearDrift;
  if (s == "switch" || s == "switch_at_k") return Trajectory::SwitchAtK;
  throw DomainError("unknown trajectory '" + std::string(s) + "'");
}

inline std::string to_string(Trajectory t) {
  switch (t) {
    case Trajectory::Constant: return "constant";
    case Trajectory::LinearDrift: return "linear_drift";
    case Trajectory::SwitchAtK: return "switch_at_k";
  }
  return "constant";
}

struct SynthConfig {
  int frames = 5;
  int height = 64;
  int width = 64;
  int patch_size = 8;
  Trajectory trajectory = Trajectory::Constant;
  int switch_at = 2;  // first frame lit by the second illuminant
  // Mean reflectance of the scene palette. (1,1,1) gives gray-world-
  // consistent scenes; anything else biases the scene colour.
  std::array<double, 3> palette_bias{1.0, 1.0, 1.0};
  // Rescale each canonical frame so its channel means are exactly equal.
  bool gray_mean = false;
  // Fraction of patches recoloured between consecutive frames.
  double content_change = 0.1;
  std::optional<Illuminant> start_illuminant;
  std::optional<Illuminant> end_illuminant;

  void validate() const {
    if (frames < 1 || height < 8 || width < 8 || patch_size < 1)
      throw DomainError("synthetic sequence needs T >= 1 and frames at least 8x8");
    if (trajectory == Trajectory::SwitchAtK && (switch_at < 1 || switch_at >= frames))
      throw DomainError("switch index must lie in [1, T)");
    for (double b : palette_bias)
      if (!(b > 0.0 && b <= 1.0)) throw DomainError("palette bias must lie in (0, 1]");
  }
};

struct SynthSequence {
  FrameSequence sequence;
  std::vector<ImageFrame> canonical;   // cast-free frames
  std::vector<Illuminant> illuminants;  // unit-norm cast of each frame
};

// Plausible daylight-to-tungsten illuminants, unit-normalized.
inline Illuminant sample_illuminant(Rng& rng) {
  std::uniform_real_distribution<double> rg(0.45, 1.1), bg(0.35, 1.0);
  return Illuminant::normalized(rg(rng), 1.0, bg(rng));
}

inline SynthSequence synth_sequence(const SynthConfig& cfg, Rng& rng, std::string id = "seq") {
  cfg.validate();
  const int P = cfg.patch_size;
  const int gh = cfg.height / P + 2, gw = cfg.width / P + 2;
  std::uniform_real_distribution<double> refl(0.05, 1.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> jitter(-2, 2);

  auto draw_patch = [&](std::array<double, 3>& p) {
    for (int j = 0; j < 3; ++j) p[j] = refl(rng) * cfg.palette_bias[j];
  };
  std::vector<std::array<double, 3>> grid(static_cast<std::size_t>(gh) * gw);
  for (auto& p : grid) draw_patch(p);

  const Illuminant c1 = cfg.start_illuminant ? cfg.start_illuminant->unit() : sample_illuminant(rng);
  const Illuminant c2 = cfg.end_illuminant ? cfg.end_illuminant->unit() : sample_illuminant(rng);

  SynthSequence out;
  out.sequence.id = std::move(id);
  int ox = P / 2, oy = P / 2;
  for (int t = 0; t < cfg.frames; ++t) {
    if (t > 0) {
      for (auto& p : grid)
        if (unit(rng) < cfg.content_change) draw_patch(p);
      ox = std::clamp(ox + jitter(rng), 0, P - 1);
      oy = std::clamp(oy + jitter(rng), 0, P - 1);
    }
    ImageFrame canon(cfg.height, cfg.width);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const auto& p = grid[static_cast<std::size_t>((y + oy) / P) * gw + (x + ox) / P];
        for (int j = 0; j < 3; ++j) canon.at(y, x, j) = p[j];
      }
    if (cfg.gray_mean) {
      auto m = canon.channel_means();
      const double target = std::min({m[0], m[1], m[2]});
      auto d = canon.data();
      for (std::size_t i = 0; i < canon.pixel_count(); ++i)
        for (int j = 0; j < 3; ++j) d[i * 3 + j] *= target / m[j];
    }

    Illuminant c = c1;
    switch (cfg.trajectory) {
      case Trajectory::Constant: break;
      case Trajectory::LinearDrift: {
        const double a = cfg.frames == 1 ? 1.0 : static_cast<double>(t) / (cfg.frames - 1);
        c = Illuminant::normalized((1 - a) * c1.r() + a * c2.r(), (1 - a) * c1.g() + a * c2.g(),
                                   (1 - a) * c1.b() + a * c2.b());
        break;
      }
      case Trajectory::SwitchAtK: c = t < cfg.switch_at ? c1 : c2; break;
    }
    out.sequence.frames.push_back(apply_cast(canon, c));
    out.canonical.push_back(std::move(canon));
    out.illuminants.push_back(c);
  }
  out.sequence.ground_truth = out.illuminants.back();
  return out;
}

// ---- splits --------------------------------------------------------------

struct DatasetSplit {
  std::string name;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

inline std::size_t test_count(std::size_t n) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) / 3.0));
}

// The benchmark split, when given, is returned first; the remaining splits
// have pairwise-disjoint test sets of round(n/3) sequences.
inline std::vector<DatasetSplit> make_splits(std::vector<std::string> ids, std::uint64_t seed,
                                             int count,
                                             const std::optional<DatasetSplit>& benchmark = {}) {
  if (ids.empty()) throw DomainError("cannot split an empty dataset");
  if (count < 1) throw DomainError("split count must be >= 1");
  std::sort(ids.begin(), ids.end());
  const std::size_t m = test_count(ids.size());
  const int generated = count - (benchmark ? 1 : 0);
  if (static_cast<std::size_t>(generated) * m > ids.size())
    throw DomainError("cannot draw " + std::to_string(generated) + " disjoint test sets of size " +
                      std::to_string(m) + " from " + std::to_string(ids.size()) + " sequences");

  std::vector<DatasetSplit> splits;
  if (benchmark) splits.push_back(*benchmark);
  Rng rng(seed);
  std::vector<std::string> order = ids;
  std::shuffle(order.begin(), order.end(), rng);
  for (int s = 0; s < generated; ++s) {
    DatasetSplit split;
    split.name = "split_" + std::to_string(splits.size());
    std::set<std::string> test(order.begin() + s * m, order.begin() + (s + 1) * m);
    for (const auto& id : ids) (test.count(id) ? split.test_ids : split.train_ids).push_back(id);
    splits.push_back(std::move(split));
  }
  return splits;
}

}  // namespace tcc
