#pragma once

// Training loop: select -> augment -> pseudo-zoom -> forward -> loss ->
// RMSprop step, with best-validation model selection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcc/checkpoint.hpp"
#include "tcc/data.hpp"
#include "tcc/losses.hpp"
#include "tcc/models.hpp"
#include "tcc/optim.hpp"

namespace tcc {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 3e-5;
  int batch_size = 1;
  std::string optimizer = "rmsprop";
  double rmsprop_decay = 0.99;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 0;
  FrameSelection frame_selection = FrameSelection::full();
  bool augment = true;
  AugmentSpec augment_spec;

  void validate() const {
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
    if (batch_size < 1) throw DomainError("batch size must be >= 1");
    if (optimizer != "rmsprop") throw DomainError("unsupported optimizer '" + optimizer + "'");
    augment_spec.validate();
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;       // mean training loss, radians
  double val_error = 0.0;  // mean angular error, degrees
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_error = 0.0;
  double wall_seconds = 0.0;

  // "epoch,loss,val_error,seconds" records.
  void write_csv(std::ostream& out) const {
    out << "epoch,loss,val_error,seconds\n";
    out.precision(17);
    for (const auto& r : epochs) out << r.epoch << ',' << r.loss << ',' << r.val_error << ',' << r.seconds << '\n';
  }
};

struct TrainResult {
  Model model;  // best-validation weights
  std::vector<std::uint8_t> checkpoint;
  TrainReport report;
};

// Generator for one (seed, a, b) cell; independent across cells.
inline Rng derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

inline constexpr std::uint64_t kEvalSeed = 0x7cc5eedULL;

// Mean angular error in degrees; pseudo-zoom paths use a fixed seed per item
// so the value is deterministic.
inline double mean_angular_error(const Model& model, const std::vector<FrameSequence>& data,
                                 const FrameSelection& selection = FrameSelection::full()) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng = derived_rng(kEvalSeed, i);
    total += angular_error(model.estimate(select_frames(data[i], selection), rng), *data[i].ground_truth);
  }
  return total / static_cast<double>(data.size());
}

// Loss of one item. Cascading kinds receive the multiply-accumulate loss
// over their stage outputs; for single-stage kinds this is the angular loss.
inline ad::Var training_loss(const Model& model, const FrameSequence& seq, const TrainConfig& cfg, Rng& rng) {
  FrameSequence item = select_frames(seq, cfg.frame_selection);
  if (cfg.augment) item = augment(item, cfg.augment_spec, rng);
  const ModelInputs in = prepare_inputs(item, model.resolution(), rng);
  const CascadeResult res = model.predict(in);
  return mal_loss(res.stage_outputs, *seq.ground_truth);
}

inline std::vector<std::vector<double>> snapshot(const nn::ParamList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.var.value().begin(), p.var.value().end());
  return out;
}

inline void restore(nn::ParamList& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t k = 0; k < params.size(); ++k)
    std::copy(values[k].begin(), values[k].end(), params[k].var.mutable_value().begin());
}

// `init` optionally seeds a temporal cascade with a trained submodule (or a
// model of the same kind to resume from).
inline TrainResult train_model(const ModelConfig& model_cfg, const TrainConfig& cfg,
                               const std::vector<FrameSequence>& train_data,
                               const std::vector<FrameSequence>& val_data, const Model* init = nullptr,
                               std::ostream* progress = nullptr) {
  cfg.validate();
  if (train_data.empty()) throw DomainError("training data is empty");
  for (const auto& s : train_data)
    if (!s.ground_truth) throw DomainError("training sequence '" + s.id + "' lacks ground truth");
  const auto& val = val_data.empty() ? train_data : val_data;

  Model model = make_model(model_cfg);
  if (init) {
    if (init->kind() == model.kind()) {
      auto dst = model.parameters();
      restore(dst, snapshot(init->parameters()));
    } else {
      init_cascade_from(model, *init);
    }
  }

  auto params = model.parameters();
  RMSprop opt(params, {cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon});

  TrainReport report;
  std::vector<std::vector<double>> best;
  double best_err = std::numeric_limits<double>::infinity();
  const auto t_start = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(train_data.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = derived_rng(cfg.seed, static_cast<std::uint64_t>(epoch), 0xfeedULL);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    int pending = 0;
    opt.zero_grad();
    for (std::size_t n = 0; n < order.size(); ++n) {
      const auto& seq = train_data[order[n]];
      Rng rng = derived_rng(cfg.seed, static_cast<std::uint64_t>(epoch), order[n] + 1);
      const std::string where = "epoch " + std::to_string(epoch) + ", sequence '" + seq.id + "'";
      ad::Var loss;
      try {
        loss = training_loss(model, seq, cfg, rng);
      } catch (const std::exception& e) {
        throw TrainingError("training failed at " + where + ": " + e.what());
      }
      if (!std::isfinite(loss.item())) throw TrainingError("non-finite loss at " + where);
      ad::backward(loss);
      loss_sum += loss.item();
      if (++pending == cfg.batch_size || n + 1 == order.size()) {
        opt.step(static_cast<double>(pending));
        opt.zero_grad();
        pending = 0;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(train_data.size());
    rec.val_error = mean_angular_error(model, val, cfg.frame_selection);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    if (progress)
      *progress << "epoch " << epoch << " loss " << rec.loss << " val " << rec.val_error << " deg ("
                << rec.seconds << " s)\n";
    if (rec.val_error < best_err) {
      best_err = rec.val_error;
      best = snapshot(params);
      report.best_epoch = epoch;
    }
  }

  restore(params, best);
  report.best_val_error = best_err;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  auto bytes = save_checkpoint(model);
  return TrainResult{std::move(model), std::move(bytes), std::move(report)};
}

}  // namespace tcc
