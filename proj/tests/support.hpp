#pragma once

// Fixtures shared by the unit suites and the acceptance binary.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tcc/tcc.hpp"

namespace tcc::fixtures {

inline std::vector<FrameSequence> synth_set(int n, const SynthConfig& cfg, std::uint64_t seed,
                                            const std::string& prefix = "seq") {
  Rng rng(seed);
  std::vector<FrameSequence> out;
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%03d", prefix.c_str(), i);
    out.push_back(synth_sequence(cfg, rng, id).sequence);
  }
  return out;
}

// Scenes whose mean reflectance is not gray, so gray-world is biased.
inline SynthConfig non_gray_scene() {
  SynthConfig cfg;
  cfg.palette_bias = {1.0, 0.7, 0.45};
  cfg.patch_size = 4;
  return cfg;
}

struct GradSample {
  std::string name;
  std::size_t index = 0;
  double analytic = 0, numeric = 0;
  double rel_error() const {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    return std::abs(analytic - numeric) / scale;
  }
};

struct GradCheck {
  std::vector<GradSample> samples;  // one per parameter group with a usable gradient
  std::size_t groups = 0;
  double max_rel_error() const {
    double m = 0;
    for (const auto& s : samples) m = std::max(m, s.rel_error());
    return m;
  }
};

// Training-loss gradient of a tiny model against central differences, one
// random element per parameter group whose analytic gradient exceeds
// `min_grad` (so the relative error is meaningful).
inline GradCheck gradient_check(ModelKind kind, std::uint64_t seed, int frames = 3, double h = 1e-5,
                                double min_grad = 1e-6) {
  Model model(ModelConfig::tiny(kind, seed));
  SynthConfig sc;
  sc.frames = frames;
  Rng rng(seed + 1);
  const FrameSequence seq = synth_sequence(sc, rng).sequence;
  const ModelInputs in = prepare_inputs(seq, model.resolution(), rng);
  const Illuminant truth = *seq.ground_truth;

  auto params = model.parameters();
  for (auto& p : params) p.var.zero_grad();
  ad::Var loss = mal_loss(model.predict(in).stage_outputs, truth);
  ad::backward(loss);

  auto eval = [&] {
    ad::NoGradGuard g;
    return mal_loss(model.predict(in).stage_outputs, truth).item();
  };

  GradCheck out;
  out.groups = params.size();
  std::mt19937_64 pick(seed + 2);
  for (auto& p : params) {
    auto grad = p.var.grad();
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < grad.size(); ++i)
      if (std::abs(grad[i]) > min_grad) usable.push_back(i);
    if (usable.empty()) continue;
    const std::size_t i = usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(pick)];
    auto vals = p.var.mutable_value();
    const double saved = vals[i];
    vals[i] = saved + h;
    const double fp = eval();
    vals[i] = saved - h;
    const double fm = eval();
    vals[i] = saved;
    out.samples.push_back({p.name, i, grad[i], (fp - fm) / (2 * h)});
  }
  return out;
}

// Stage estimator returning a fixed illuminant regardless of input.
class FixedEstimator : public TemporalEstimator {
 public:
  explicit FixedEstimator(Illuminant c) : c_(c) {}
  ad::Var forward(std::span<const ad::Var>, std::span<const ad::Var>) const override {
    return ad::constant({3}, {c_.r(), c_.g(), c_.b()});
  }
  void collect(const std::string&, nn::ParamList&) const override {}

 private:
  Illuminant c_;
};

// Oracle stage: reports the cast still present in its shot frame, measured
// as the per-channel ratio of the input's channel sums to the canonical's.
class ResidualCastOracle : public TemporalEstimator {
 public:
  explicit ResidualCastOracle(ImageFrame canonical_shot) : canonical_(std::move(canonical_shot)) {}
  ad::Var forward(std::span<const ad::Var> frames, std::span<const ad::Var>) const override {
    const ImageFrame shot = from_tensor(frames.back());
    const auto a = shot.channel_means(), b = canonical_.channel_means();
    return ad::constant({3}, {a[0] / b[0], a[1] / b[1], a[2] / b[2]});
  }
  void collect(const std::string&, nn::ParamList&) const override {}

 private:
  ImageFrame canonical_;
};

struct StubCascadeRun {
  std::vector<std::vector<ad::Var>> frames_seen, pz_seen;  // per stage
  CascadeResult result;
};

inline StubCascadeRun run_stub_cascade(std::vector<std::shared_ptr<const TemporalEstimator>> stages,
                                       const ModelInputs& in) {
  TemporalCascade cascade(std::move(stages), false);
  StubCascadeRun run;
  run.result = cascade.forward(in.frames, in.pz, [&](int, std::span<const ad::Var> f, std::span<const ad::Var> z) {
    run.frames_seen.emplace_back(f.begin(), f.end());
    run.pz_seen.emplace_back(z.begin(), z.end());
  });
  return run;
}

inline StubCascadeRun run_stub_cascade(const std::vector<Illuminant>& stage_outputs, const ModelInputs& in) {
  std::vector<std::shared_ptr<const TemporalEstimator>> stages;
  for (const auto& c : stage_outputs) stages.push_back(std::make_shared<FixedEstimator>(c));
  return run_stub_cascade(std::move(stages), in);
}

// Cast-free shot frame recovered by the first stage of a C_TCCNET-shaped
// cascade whose stages are ground-truth oracles; the largest per-pixel
// deviation from the canonical frame is reported for stages >= 1.
struct OracleCascadeCheck {
  std::vector<double> max_deviation;  // per stage >= 1
  double final_error_deg = 0;
};

inline OracleCascadeCheck oracle_cascade_check(std::uint64_t seed, int stages = 3) {
  SynthConfig cfg;
  Rng rng(seed);
  const auto s = synth_sequence(cfg, rng);
  const ModelInputs in = prepare_inputs(s.sequence, cfg.height, rng);
  std::vector<std::shared_ptr<const TemporalEstimator>> oracles;
  for (int i = 0; i < stages; ++i) oracles.push_back(std::make_shared<ResidualCastOracle>(s.canonical.back()));
  const auto run = run_stub_cascade(oracles, in);
  OracleCascadeCheck out;
  for (std::size_t i = 1; i < run.frames_seen.size(); ++i) {
    const ImageFrame shot = from_tensor(run.frames_seen[i].back());
    double m = 0;
    for (std::size_t k = 0; k < shot.data().size(); ++k)
      m = std::max(m, std::abs(shot.data()[k] - s.canonical.back().data()[k]));
    out.max_deviation.push_back(m);
  }
  out.final_error_deg = angular_error(run.result.trace.cumulative.back(), *s.sequence.ground_truth);
  return out;
}

}  // namespace tcc::fixtures
