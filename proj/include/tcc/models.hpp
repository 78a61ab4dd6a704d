#pragma once

// The estimator family: per-frame backbones, the C4 per-frame cascade, the
// ConvLSTM cell, the two-branch temporal network and the cascading wrapper.

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tcc/autodiff.hpp"
#include "tcc/color.hpp"
#include "tcc/data.hpp"
#include "tcc/image_ops.hpp"
#include "tcc/log.hpp"
#include "tcc/nn.hpp"

namespace tcc {

using ad::Var;

enum class ModelKind { TCCNet, TCCNetC4, CTCCNet, CTCCNetC4, SingleFrameC4 };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::TCCNet, ModelKind::TCCNetC4, ModelKind::CTCCNet,
                                               ModelKind::CTCCNetC4, ModelKind::SingleFrameC4};

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::TCCNet: return "TCCNET";
    case ModelKind::TCCNetC4: return "TCCNET_C4";
    case ModelKind::CTCCNet: return "C_TCCNET";
    case ModelKind::CTCCNetC4: return "C_TCCNET_C4";
    case ModelKind::SingleFrameC4: return "SINGLE_FRAME_C4";
  }
  return "TCCNET";
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (ModelKind k : kAllModelKinds)
    if (s == to_string(k)) return k;
  throw DomainError("unknown model kind '" + std::string(s) + "'");
}

inline bool is_temporal_cascade(ModelKind k) { return k == ModelKind::CTCCNet || k == ModelKind::CTCCNetC4; }

// The non-cascading kind whose weights seed each stage of a cascade.
inline ModelKind cascade_submodule_kind(ModelKind k) {
  if (k == ModelKind::CTCCNet) return ModelKind::TCCNet;
  if (k == ModelKind::CTCCNetC4) return ModelKind::TCCNetC4;
  throw DomainError(to_string(k) + " is not a temporal cascade");
}

enum class BackboneVariant { Tiny, SqueezeStyle };

inline std::string to_string(BackboneVariant v) { return v == BackboneVariant::Tiny ? "tiny" : "squeeze_style"; }
inline BackboneVariant parse_backbone_variant(std::string_view s) {
  if (s == "tiny") return BackboneVariant::Tiny;
  if (s == "squeeze_style") return BackboneVariant::SqueezeStyle;
  throw DomainError("unknown backbone variant '" + std::string(s) + "'");
}

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::Tiny;
  int input_resolution = 64;
  std::string pretrained_weights;  // optional checkpoint to copy backbone weights from
};

struct CascadeConfig {
  int stages = 3;
  int inner_c4_stages = 3;
  bool tied = false;

  void validate() const {
    if (stages < 1) throw DomainError("cascade needs at least one stage");
    if (inner_c4_stages < 1) throw DomainError("C4 needs at least one stage");
  }
};

struct ModelConfig {
  ModelKind kind = ModelKind::TCCNet;
  BackboneConfig backbone;
  int hidden_size = 128;
  int kernel_size = 5;
  CascadeConfig cascade;
  bool confidence_pooling = false;
  std::uint64_t init_seed = 0;

  // Desk-scale configuration: 64x64 input, 8 hidden channels, two stages.
  static ModelConfig tiny(ModelKind kind, std::uint64_t seed = 0) {
    ModelConfig c;
    c.kind = kind;
    c.hidden_size = 8;
    c.cascade.stages = 2;
    c.cascade.inner_c4_stages = 2;
    c.init_seed = seed;
    return c;
  }

  void validate() const {
    cascade.validate();
    if (hidden_size < 1 || kernel_size < 1 || kernel_size % 2 == 0)
      throw DomainError("ConvLSTM needs hidden size >= 1 and an odd kernel");
    if (backbone.input_resolution < 8 || backbone.input_resolution % 8 != 0)
      throw DomainError("input resolution must be a positive multiple of 8");
  }
};

// ---- cascade core --------------------------------------------------------

struct CascadeResult {
  Var estimate;                    // unit-norm cumulative estimate, {3}
  std::vector<Var> stage_outputs;  // positive per-stage estimates, {3} each
  EstimateTrace trace;
};

inline constexpr double kMinStageComponent = 1e-4;

// Runs `stages` estimate-then-correct steps. `stage(i, divisor)` returns the
// raw 3-vector estimate of stage i given the cumulative unit-norm estimate of
// stages 0..i-1 (undefined for i = 0) by which it must correct its inputs.
template <typename StageFn>
CascadeResult run_cascade(int stages, StageFn&& stage) {
  if (stages < 1) throw DomainError("cascade needs at least one stage");
  CascadeResult res;
  Var product, cumulative;
  for (int i = 0; i < stages; ++i) {
    Var raw = stage(i, cumulative);
    if (raw.size() != 3) throw ad::ShapeError("stage estimate must be a 3-vector");
    Var positive = raw;
    if (std::any_of(raw.value().begin(), raw.value().end(), [](double v) { return !(v >= kMinStageComponent); })) {
      res.trace.clamped_stages.push_back(i);
      log_warning("cascade stage " + std::to_string(i) + " produced a non-positive component; clamped");
      positive = ad::clamp_min(raw, kMinStageComponent);
    }
    product = i == 0 ? positive : ad::mul(product, positive);
    cumulative = ad::normalize(product);
    res.stage_outputs.push_back(positive);
    res.trace.stage_estimates.emplace_back(positive[0], positive[1], positive[2]);
    res.trace.cumulative.emplace_back(cumulative[0], cumulative[1], cumulative[2]);
  }
  res.estimate = cumulative;
  return res;
}

// ---- per-frame encoders --------------------------------------------------

class FrameEncoder : public nn::Module {
 public:
  virtual Var encode(const Var& frame) const = 0;
  virtual int out_channels() const = 0;
};

class Backbone : public FrameEncoder {
 public:
  static constexpr int kStride = 8;

  Backbone(const BackboneConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    if (cfg.variant == BackboneVariant::Tiny) {
      convs_.emplace_back(3, 8, 3, 2, 1, rng);
      convs_.emplace_back(8, 16, 3, 2, 1, rng);
      convs_.emplace_back(16, 16, 3, 2, 1, rng);
      out_channels_ = 16;
    } else {
      // Strided stem followed by squeeze/expand blocks.
      convs_.emplace_back(3, 16, 3, 2, 1, rng);
      fires_.push_back(Fire(16, 8, 16, rng));
      convs_.emplace_back(32, 32, 3, 2, 1, rng);
      fires_.push_back(Fire(32, 8, 24, rng));
      convs_.emplace_back(48, 64, 3, 2, 1, rng);
      fires_.push_back(Fire(64, 16, 32, rng));
      out_channels_ = 64;
    }
  }

  const BackboneConfig& config() const { return cfg_; }
  int out_channels() const override { return out_channels_; }

  Var encode(const Var& frame) const override {
    const int r = cfg_.input_resolution;
    if (frame.dims() != ad::Dims{3, r, r})
      throw DomainError("backbone expects {3," + std::to_string(r) + "," + std::to_string(r) + "} input, got " +
                        ad::dims_str(frame.dims()));
    Var x = frame;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      x = ad::relu(convs_[i](x));
      if (i < fires_.size()) x = fires_[i](x);
    }
    return x;
  }

  void collect(const std::string& prefix, nn::ParamList& out) const override {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].collect(prefix + "conv" + std::to_string(i) + ".", out);
      if (i < fires_.size()) fires_[i].collect(prefix + "fire" + std::to_string(i) + ".", out);
    }
  }

 private:
  struct Fire {
    nn::Conv2d squeeze, expand1, expand3;
    Fire(int in, int squeeze_ch, int expand_ch, std::mt19937_64& rng)
        : squeeze(in, squeeze_ch, 1, 1, 0, rng),
          expand1(squeeze_ch, expand_ch, 1, 1, 0, rng),
          expand3(squeeze_ch, expand_ch, 3, 1, 1, rng) {}
    Var operator()(const Var& x) const {
      Var s = ad::relu(squeeze(x));
      return ad::concat_channels(ad::relu(expand1(s)), ad::relu(expand3(s)));
    }
    void collect(const std::string& prefix, nn::ParamList& out) const {
      squeeze.collect(prefix + "squeeze.", out);
      expand1.collect(prefix + "expand1.", out);
      expand3.collect(prefix + "expand3.", out);
    }
  };

  BackboneConfig cfg_;
  std::vector<nn::Conv2d> convs_;
  std::vector<Fire> fires_;
  int out_channels_ = 0;
};

// Fully convolutional illuminant regressor: per-location RGB map, spatially
// pooled (average, or softmax-confidence weighted), made positive and
// unit-normalized.
class RegressorHead : public nn::Module {
 public:
  RegressorHead(int in_channels, bool confidence, std::mt19937_64& rng)
      : confidence_(confidence),
        hidden_(in_channels, 16, 3, 1, 1, rng),
        out_(16, confidence ? 4 : 3, 1, 1, 0, rng) {
    auto b = out_.bias().mutable_value();
    for (int j = 0; j < 3; ++j) b[j] = 1.0;
  }

  Var operator()(const Var& features) const {
    Var map = out_(ad::relu(hidden_(features)));
    Var pooled = confidence_
                     ? ad::confidence_pool(ad::slice_channels(map, 0, 3), ad::slice_channels(map, 3, 1))
                     : ad::global_avg_pool(map);
    return ad::normalize(ad::abs_floor(pooled, 1e-9));
  }

  void collect(const std::string& prefix, nn::ParamList& out) const override {
    hidden_.collect(prefix + "hidden.", out);
    out_.collect(prefix + "out.", out);
  }

 private:
  bool confidence_;
  nn::Conv2d hidden_, out_;
};

// Per-frame cascade: each stage regresses an illuminant from the original
// frame corrected by the cumulative estimate of the earlier stages. As an
// encoder the last stage keeps only its backbone and emits its feature map.
class C4 : public FrameEncoder {
 public:
  C4(const ModelConfig& cfg, bool encoder_only, std::mt19937_64& rng) : encoder_only_(encoder_only) {
    const int S = cfg.cascade.inner_c4_stages;
    if (S < 1) throw DomainError("C4 needs at least one stage");
    for (int i = 0; i < S; ++i) {
      backbones_.emplace_back(cfg.backbone, rng);
      if (!(encoder_only && i == S - 1))
        heads_.emplace_back(backbones_.back().out_channels(), cfg.confidence_pooling, rng);
    }
  }

  int stages() const { return static_cast<int>(backbones_.size()); }
  int out_channels() const override { return backbones_.back().out_channels(); }

  CascadeResult estimate(const Var& frame) const {
    if (encoder_only_) throw DomainError("C4 encoder has no regression head on its last stage");
    return run_cascade(stages(), [&](int i, const Var& divisor) { return stage_estimate(i, frame, divisor); });
  }

  Var encode(const Var& frame) const override {
    if (!encoder_only_) return backbones_.back().encode(frame);
    const int S = stages();
    if (S == 1) return backbones_[0].encode(frame);
    CascadeResult pre = run_cascade(S - 1, [&](int i, const Var& d) { return stage_estimate(i, frame, d); });
    return backbones_[S - 1].encode(ad::divide_channels(frame, pre.estimate));
  }

  void collect(const std::string& prefix, nn::ParamList& out) const override {
    for (std::size_t i = 0; i < backbones_.size(); ++i) {
      const std::string p = prefix + "stage" + std::to_string(i) + ".";
      backbones_[i].collect(p + "backbone.", out);
      if (i < heads_.size()) heads_[i].collect(p + "head.", out);
    }
  }

 private:
  Var stage_estimate(int i, const Var& frame, const Var& divisor) const {
    const Var input = divisor.defined() ? ad::divide_channels(frame, divisor) : frame;
    return heads_[i](backbones_[i].encode(input));
  }

  bool encoder_only_;
  std::vector<Backbone> backbones_;
  std::vector<RegressorHead> heads_;
};

// ---- ConvLSTM ------------------------------------------------------------

struct ConvLSTMState {
  Var hidden;  // {C_h, H', W'}
  Var cell;    // {C_h, H', W'}
};

// Gates i, f, o (logistic) and candidate g (tanh), each a sum of an
// input-to-state and a state-to-state convolution:
//   cell' = f * cell + i * g,  hidden' = o * tanh(cell').
class ConvLSTMCell : public nn::Module {
 public:
  ConvLSTMCell(int in_channels, int hidden, int kernel, std::mt19937_64& rng)
      : hidden_(hidden),
        input_(in_channels, 4 * hidden, kernel, 1, kernel / 2, rng),
        state_(hidden, 4 * hidden, kernel, 1, kernel / 2, rng, /*bias=*/false) {
    // Forget-gate bias 1 keeps early gradients flowing through the cell.
    auto b = input_.bias().mutable_value();
    for (int c = hidden; c < 2 * hidden; ++c) b[c] = 1.0;
  }

  int hidden_size() const { return hidden_; }
  nn::Conv2d& input_conv() { return input_; }
  nn::Conv2d& state_conv() { return state_; }

  ConvLSTMState initial_state(int height, int width) const {
    return {ad::zeros({hidden_, height, width}), ad::zeros({hidden_, height, width})};
  }

  ConvLSTMState step(const Var& x, const ConvLSTMState& s) const {
    if (x.dims().size() != 3 || s.hidden.dims() != s.cell.dims() ||
        x.dims()[1] != s.hidden.dims()[1] || x.dims()[2] != s.hidden.dims()[2] || s.hidden.dims()[0] != hidden_)
      throw ad::ShapeError("convlstm: input " + ad::dims_str(x.dims()) + " incompatible with state " +
                           ad::dims_str(s.hidden.dims()));
    Var gates = ad::add(input_(x), state_(s.hidden));
    Var i = ad::sigmoid(ad::slice_channels(gates, 0, hidden_));
    Var f = ad::sigmoid(ad::slice_channels(gates, hidden_, hidden_));
    Var o = ad::sigmoid(ad::slice_channels(gates, 2 * hidden_, hidden_));
    Var g = ad::tanh(ad::slice_channels(gates, 3 * hidden_, hidden_));
    Var cell = ad::add(ad::mul(f, s.cell), ad::mul(i, g));
    return {ad::mul(o, ad::tanh(cell)), cell};
  }

  // Runs over the whole sequence from a zero state; returns the final hidden map.
  Var run(std::span<const Var> inputs) const {
    if (inputs.empty()) throw DomainError("convlstm over empty sequence");
    ConvLSTMState s = initial_state(inputs[0].dims().at(1), inputs[0].dims().at(2));
    for (const auto& x : inputs) s = step(x, s);
    return s.hidden;
  }

  void collect(const std::string& prefix, nn::ParamList& out) const override {
    input_.collect(prefix + "input.", out);
    state_.collect(prefix + "state.", out);
  }

 private:
  int hidden_;
  nn::Conv2d input_, state_;
};

inline ConvLSTMState convlstm_step(const ConvLSTMCell& cell, const Var& input, const ConvLSTMState& state) {
  return cell.step(input, state);
}

// ---- temporal networks ---------------------------------------------------

// Anything that maps (original frames, pseudo-zoom frames) to an illuminant.
class TemporalEstimator : public nn::Module {
 public:
  virtual Var forward(std::span<const Var> frames, std::span<const Var> pz) const = 0;
};

// Two branches (original sequence, pseudo-zoom of the shot frame), each an
// encoder followed by a ConvLSTM; final hidden maps are concatenated,
// average-pooled and mapped to a positive unit 3-vector.
class TCCNet : public TemporalEstimator {
 public:
  TCCNet(const ModelConfig& cfg, bool c4_encoders, std::mt19937_64& rng) {
    for (auto* enc : {&temporal_encoder_, &shot_encoder_}) {
      if (c4_encoders)
        *enc = std::make_unique<C4>(cfg, /*encoder_only=*/true, rng);
      else
        *enc = std::make_unique<Backbone>(cfg.backbone, rng);
    }
    const int C = temporal_encoder_->out_channels();
    temporal_lstm_ = std::make_unique<ConvLSTMCell>(C, cfg.hidden_size, cfg.kernel_size, rng);
    shot_lstm_ = std::make_unique<ConvLSTMCell>(C, cfg.hidden_size, cfg.kernel_size, rng);
    head_ = nn::Linear(2 * cfg.hidden_size, 3, rng);
    auto b = head_.bias().mutable_value();
    for (int j = 0; j < 3; ++j) b[j] = 1.0;
  }

  Var forward(std::span<const Var> frames, std::span<const Var> pz) const override {
    if (frames.empty() || pz.empty()) throw DomainError("temporal network needs non-empty sequences");
    Var a = branch(*temporal_encoder_, *temporal_lstm_, frames);
    Var b = branch(*shot_encoder_, *shot_lstm_, pz);
    Var pooled = ad::global_avg_pool(ad::concat_channels(a, b));
    return ad::normalize(ad::abs_floor(head_(pooled), 1e-9));
  }

  void collect(const std::string& prefix, nn::ParamList& out) const override {
    temporal_encoder_->collect(prefix + "temporal.encoder.", out);
    temporal_lstm_->collect(prefix + "temporal.lstm.", out);
    shot_encoder_->collect(prefix + "shot.encoder.", out);
    shot_lstm_->collect(prefix + "shot.lstm.", out);
    head_.collect(prefix + "head.", out);
  }

 private:
  static Var branch(const FrameEncoder& enc, const ConvLSTMCell& lstm, std::span<const Var> frames) {
    std::vector<Var> codes;
    codes.reserve(frames.size());
    for (const auto& f : frames) codes.push_back(enc.encode(f));
    return lstm.run(codes);
  }

  std::unique_ptr<FrameEncoder> temporal_encoder_, shot_encoder_;
  std::unique_ptr<ConvLSTMCell> temporal_lstm_, shot_lstm_;
  nn::Linear head_;
};

// Observes the (already corrected) inputs handed to each stage.
using StageObserver = std::function<void(int stage, std::span<const Var> frames, std::span<const Var> pz)>;

// Cascade of temporal estimators. Stage i sees the ORIGINAL frames of both
// sequences divided by the cumulative estimate of stages 0..i-1.
class TemporalCascade : public nn::Module {
 public:
  TemporalCascade(std::vector<std::shared_ptr<const TemporalEstimator>> stages, bool tied)
      : stages_(std::move(stages)), tied_(tied) {
    if (stages_.empty()) throw DomainError("cascade needs at least one stage");
  }

  int stages() const { return static_cast<int>(stages_.size()); }
  bool tied() const { return tied_; }
  const TemporalEstimator& stage(int i) const { return *stages_.at(i); }

  CascadeResult forward(std::span<const Var> frames, std::span<const Var> pz,
                        const StageObserver& observer = {}) const {
    return run_cascade(stages(), [&](int i, const Var& divisor) {
      if (!divisor.defined()) {
        if (observer) observer(i, frames, pz);
        return stages_[i]->forward(frames, pz);
      }
      std::vector<Var> f, z;
      for (const auto& x : frames) f.push_back(ad::divide_channels(x, divisor));
      for (const auto& x : pz) z.push_back(ad::divide_channels(x, divisor));
      if (observer) observer(i, f, z);
      return stages_[i]->forward(f, z);
    });
  }

  void collect(const std::string& prefix, nn::ParamList& out) const override {
    if (tied_) {
      stages_[0]->collect(prefix + "shared.", out);
      return;
    }
    for (std::size_t i = 0; i < stages_.size(); ++i) stages_[i]->collect(prefix + "stage" + std::to_string(i) + ".", out);
  }

 private:
  std::vector<std::shared_ptr<const TemporalEstimator>> stages_;
  bool tied_;
};

// ---- top-level model -----------------------------------------------------

struct ModelInputs {
  std::vector<Var> frames;
  std::vector<Var> pz;
};

// Resizes frames to the model resolution and builds a pseudo-zoom sequence
// of the same length from the shot frame.
inline ModelInputs prepare_inputs(const FrameSequence& seq, int resolution, Rng& rng) {
  if (seq.frames.empty()) throw DomainError("sequence '" + seq.id + "' is empty");
  ModelInputs in;
  for (const auto& f : seq.frames) in.frames.push_back(to_tensor(resize(f, resolution, resolution)));
  for (auto& f : pseudo_zoom(seq.shot(), static_cast<int>(seq.length()), resolution, resolution, rng).frames)
    in.pz.push_back(to_tensor(f));
  return in;
}

class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.init_seed);
    switch (cfg_.kind) {
      case ModelKind::TCCNet: net_ = std::make_shared<TCCNet>(cfg_, false, rng); break;
      case ModelKind::TCCNetC4: net_ = std::make_shared<TCCNet>(cfg_, true, rng); break;
      case ModelKind::SingleFrameC4: c4_ = std::make_shared<C4>(cfg_, false, rng); break;
      case ModelKind::CTCCNet:
      case ModelKind::CTCCNetC4: {
        const bool c4 = cfg_.kind == ModelKind::CTCCNetC4;
        std::vector<std::shared_ptr<const TemporalEstimator>> stages;
        auto first = std::make_shared<TCCNet>(cfg_, c4, rng);
        stages.push_back(first);
        for (int i = 1; i < cfg_.cascade.stages; ++i)
          stages.push_back(cfg_.cascade.tied ? first : std::make_shared<TCCNet>(cfg_, c4, rng));
        cascade_ = std::make_shared<TemporalCascade>(std::move(stages), cfg_.cascade.tied);
        break;
      }
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ModelKind kind() const { return cfg_.kind; }
  int resolution() const { return cfg_.backbone.input_resolution; }

  CascadeResult predict(std::span<const Var> frames, std::span<const Var> pz,
                        const StageObserver& observer = {}) const {
    if (frames.empty()) throw DomainError("model input has no frames");
    if (c4_) return c4_->estimate(frames.back());
    if (cascade_) return cascade_->forward(frames, pz, observer);
    Var e = net_->forward(frames, pz);
    return run_cascade(1, [&](int, const Var&) { return e; });
  }

  CascadeResult predict(const ModelInputs& in) const { return predict(in.frames, in.pz); }

  // Inference without graph recording.
  Illuminant estimate(const FrameSequence& seq, Rng& rng) const {
    ad::NoGradGuard guard;
    ModelInputs in = prepare_inputs(seq, resolution(), rng);
    Var e = predict(in).estimate;
    return Illuminant(e[0], e[1], e[2]);
  }

  nn::ParamList parameters() const {
    if (c4_) return c4_->parameters();
    if (cascade_) return cascade_->parameters();
    return net_->parameters();
  }

  std::size_t parameter_count() const { return nn::parameter_count(parameters()); }

 private:
  ModelConfig cfg_;
  std::shared_ptr<TCCNet> net_;
  std::shared_ptr<TemporalCascade> cascade_;
  std::shared_ptr<C4> c4_;
};

}  // namespace tcc
