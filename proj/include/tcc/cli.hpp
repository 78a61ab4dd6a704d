#pragma once

// Commands `synth`, `train`, `eval`, `compare` and `bench`. Every command
// writes its canonical configuration to <out>/config.txt. Exit status:
// 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcc/checkpoint.hpp"
#include "tcc/config.hpp"
#include "tcc/dataset_io.hpp"
#include "tcc/evaluation.hpp"
#include "tcc/train.hpp"

namespace tcc::cli {

namespace fs = std::filesystem;

class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kConfigFile = "config.txt";

namespace detail {

inline fs::path required_path(const RunConfig& c, const std::string& key) {
  const auto& v = c.str(key);
  if (v.empty()) throw UsageError(key + " is required");
  return v;
}

inline bool non_empty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw CommandError("cannot write " + path.string());
}

inline void write_config(const fs::path& dir, const RunConfig& c) { write_text(dir / kConfigFile, c.canonical()); }

template <typename Writer>
void write_report(const fs::path& path, Writer w) {
  std::ostringstream ss;
  w(ss);
  write_text(path, ss.str());
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CommandError("cannot read " + path.string());
  return in;
}

// "all" lists every split file under <root>/splits, sorted by name.
inline std::vector<std::string> split_names(const RunConfig& c, const fs::path& root) {
  const auto& v = c.str("data.splits");
  if (v != "all") return split_list(v);
  std::vector<std::string> names;
  if (fs::is_directory(root / "splits"))
    for (const auto& e : fs::directory_iterator(root / "splits"))
      if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw CommandError("no splits under " + (root / "splits").string());
  return names;
}

inline std::vector<FrameSequence> load_non_empty(const fs::path& root) {
  auto data = load_dataset(root);
  if (data.empty()) throw CommandError("dataset " + root.string() + " is empty");
  return data;
}

inline std::string substitute_split(std::string pattern, const std::string& split) {
  const std::string token = "{split}";
  for (auto pos = pattern.find(token); pos != std::string::npos; pos = pattern.find(token, pos + split.size()))
    pattern.replace(pos, token.size(), split);
  return pattern;
}

// A kind named explicitly in the config must match the checkpoint's.
inline Model load_model(const RunConfig& c, const fs::path& path) {
  Model m = load_checkpoint_file(path);
  if (c.is_explicit("model.kind") && model_kind_of(c) != m.kind())
    throw CommandError("checkpoint " + path.string() + " holds a " + to_string(m.kind()) + " model, expected " +
                       to_string(model_kind_of(c)));
  return m;
}

inline void print_summary_table(std::ostream& out, const std::vector<SummaryRecord>& rows) {
  out << std::left << std::setw(18) << "model" << std::setw(12) << "split" << std::right;
  for (const char* h : {"mean", "median", "trimean", "best25", "worst25", "worst5"}) out << std::setw(10) << h;
  out << '\n' << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << std::left << std::setw(18) << r.model << std::setw(12) << r.split << std::right;
    for (double v : {s.mean, s.median, s.trimean, s.best25, s.worst25, s.worst5}) out << std::setw(10) << v;
    out << '\n';
  }
  out << std::defaultfloat;
}

}  // namespace detail

// ---- synth -----------------------------------------------------------------------

inline void cmd_synth(const RunConfig& c, std::ostream& out) {
  const fs::path root = detail::required_path(c, "out");
  const long long count = c.integer("synth.count");
  if (count < 1) throw UsageError("synth.count must be >= 1");
  const int split_count = int_in(c, "synth.split_count", 0);
  const SynthConfig sc = synth_config_of(c);
  if (detail::non_empty_dir(root)) {
    if (!c.boolean("force")) throw CommandError("output directory " + root.string() + " is not empty (use --force)");
    for (const char* p : {"sequences", "splits", "groundtruth.json", "manifest.json", kConfigFile})
      fs::remove_all(root / p);
  }
  fs::create_directories(root);

  const std::uint64_t seed = c.seed();
  std::vector<FrameSequence> seqs;
  nlohmann::json manifest = {{"tool_version", kToolVersion}, {"seed", seed}, {"count", count}};
  nlohmann::json entries = nlohmann::json::array();
  for (long long i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "seq%04lld", i);
    Rng rng = derived_rng(seed, static_cast<std::uint64_t>(i));
    auto s = synth_sequence(sc, rng, id);
    const auto& g = *s.sequence.ground_truth;
    entries.push_back({{"id", id}, {"seed", seed}, {"stream", i}, {"frames", s.sequence.length()},
                       {"illuminant", {g.r(), g.g(), g.b()}}});
    seqs.push_back(std::move(s.sequence));
  }
  manifest["sequences"] = entries;
  write_dataset(root, seqs);

  std::vector<std::string> ids;
  for (const auto& s : seqs) ids.push_back(s.id);
  std::vector<std::string> split_files;
  if (split_count > 0) {
    for (const auto& sp : make_splits(ids, seed, split_count)) {
      write_split(root, sp);
      split_files.push_back(sp.name);
    }
  }
  manifest["splits"] = split_files;
  write_json(root / "manifest.json", manifest);
  detail::write_config(root, c);
  out << manifest.dump(2) << '\n';
}

// ---- train -----------------------------------------------------------------------

// Deterministic hold-out carved from the training ids; empty when the
// fraction leaves no room.
inline std::pair<std::vector<std::string>, std::vector<std::string>> carve_validation(std::vector<std::string> ids,
                                                                                       double fraction,
                                                                                       std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw UsageError("train.val_fraction must lie in [0, 1)");
  Rng rng = derived_rng(seed, 0xa11dULL);
  std::shuffle(ids.begin(), ids.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ids.size())));
  if (n_val >= ids.size()) n_val = 0;
  std::vector<std::string> val(ids.end() - static_cast<std::ptrdiff_t>(n_val), ids.end());
  ids.resize(ids.size() - n_val);
  return {ids, val};
}

inline void cmd_train(const RunConfig& c, std::ostream& out) {
  const fs::path dir = detail::required_path(c, "out");
  const fs::path root = detail::required_path(c, "data.root");
  const ModelConfig mc = model_config_of(c);
  const TrainConfig tc = train_config_of(c);
  const double val_fraction = c.real("train.val_fraction");
  if (fs::exists(dir / "model.ckpt") && !c.boolean("force"))
    throw CommandError(dir.string() + " already holds a checkpoint (use --force)");

  const auto data = detail::load_non_empty(root);
  const auto split = read_split(root, c.str("train.split"));
  const auto [train_ids, val_ids] = carve_validation(split.train_ids, val_fraction, c.seed());
  const auto train = subset(data, train_ids), val = subset(data, val_ids);

  std::optional<Model> init;
  if (const auto& p = c.str("train.init_from"); !p.empty()) init.emplace(load_checkpoint_file(p));

  out << "training " << to_string(mc.kind) << " on " << train.size() << " sequences (" << val.size()
      << " held out) for " << tc.epochs << " epochs\n";
  TrainResult r = train_model(mc, tc, train, val, init ? &*init : nullptr, &out);

  fs::create_directories(dir);
  write_file_bytes(dir / "model.ckpt", r.checkpoint);
  detail::write_report(dir / "train_report.csv", [&](std::ostream& o) { r.report.write_csv(o); });
  detail::write_config(dir, c);
  out << "best epoch " << r.report.best_epoch << ", validation error " << r.report.best_val_error << " deg\n";
}

// ---- eval ------------------------------------------------------------------------

inline constexpr const char* kErrorsHeader = "model,split,sequence,error";
inline constexpr const char* kAggregateHeader = "model,statistic,mean,sd";

inline void cmd_eval(const RunConfig& c, std::ostream& out) {
  const fs::path dir = detail::required_path(c, "out");
  const fs::path root = detail::required_path(c, "data.root");
  const std::string baseline = c.str("eval.baseline");
  const std::string ckpt_pattern = c.str("eval.checkpoint");
  if (!baseline.empty() && baseline != "gray_world") throw UsageError("eval.baseline: unknown baseline '" + baseline + "'");
  if (baseline.empty() == ckpt_pattern.empty()) throw UsageError("exactly one of eval.checkpoint and eval.baseline is required");
  const FrameSelection selection = frame_selection_of(c, "eval.frame_selection");

  const auto data = detail::load_non_empty(root);
  const auto names = detail::split_names(c, root);

  std::string model_name = c.str("eval.name");
  std::vector<SummaryRecord> rows;
  std::ostringstream errors;
  errors << kErrorsHeader << '\n' << std::setprecision(17);
  for (const auto& split_name : names) {
    const auto test = subset(data, read_split(root, split_name).test_ids);
    if (test.empty()) throw CommandError("split '" + split_name + "' has an empty test set");
    std::optional<Model> model;
    Estimator est;
    if (baseline.empty()) {
      model.emplace(detail::load_model(c, detail::substitute_split(ckpt_pattern, split_name)));
      est = model_estimator(*model);
      if (model_name.empty()) model_name = to_string(model->kind());
    } else {
      est = gray_world_estimator();
      if (model_name.empty()) model_name = baseline;
    }
    const auto errs = per_sequence_errors(est, test, selection);
    for (std::size_t i = 0; i < test.size(); ++i)
      errors << model_name << ',' << split_name << ',' << test[i].id << ',' << errs[i] << '\n';
    rows.push_back({model_name, split_name, stats::error_summary(errs)});
  }

  std::vector<stats::ErrorSummary> per_split;
  for (const auto& r : rows) per_split.push_back(r.summary);
  const auto agg = aggregate_splits(per_split);

  fs::create_directories(dir);
  detail::write_report(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, rows); });
  detail::write_text(dir / "errors.csv", errors.str());
  detail::write_report(dir / "aggregate.csv", [&](std::ostream& o) {
    o << kAggregateHeader << '\n' << std::setprecision(17);
    const std::pair<const char*, stats::MeanSd> fields[] = {{"mean", agg.mean},       {"median", agg.median},
                                                             {"trimean", agg.trimean}, {"best25", agg.best25},
                                                             {"worst25", agg.worst25}, {"worst5", agg.worst5}};
    for (const auto& [name, v] : fields) o << model_name << ',' << name << ',' << v.mean << ',' << v.sd << '\n';
  });
  detail::write_config(dir, c);

  detail::print_summary_table(out, rows);
  out << std::fixed << std::setprecision(2) << "across " << rows.size() << " splits: mean " << agg.mean.mean
      << " +/- " << agg.mean.sd << ", median " << agg.median.mean << " +/- " << agg.median.sd << ", trimean "
      << agg.trimean.mean << " +/- " << agg.trimean.sd << '\n'
      << std::defaultfloat;
}

// ---- compare ---------------------------------------------------------------------

// Per-split mean errors of the single model in a summary file, keyed by split.
inline std::pair<std::string, std::map<std::string, double>> read_split_means(const fs::path& path) {
  auto in = detail::open_in(path);
  const auto rows = read_summary_csv(in);
  if (rows.empty()) throw CommandError(path.string() + " holds no summary rows");
  std::map<std::string, double> means;
  for (const auto& r : rows) {
    if (r.model != rows.front().model) throw CommandError(path.string() + " mixes several models");
    if (!means.emplace(r.split, r.summary.mean).second)
      throw CommandError(path.string() + " repeats split '" + r.split + "'");
  }
  return {rows.front().model, means};
}

inline void cmd_compare(const RunConfig& c, std::ostream& out) {
  const fs::path dir = detail::required_path(c, "out");
  const auto base_path = detail::required_path(c, "compare.baseline");
  const auto challenger_paths = split_list(c.str("compare.challengers"));
  if (challenger_paths.empty()) throw UsageError("compare.challengers is required");

  const auto [base_name, base] = read_split_means(base_path);
  std::vector<double> base_vals;
  for (const auto& [split, v] : base) base_vals.push_back(v);

  std::vector<std::pair<std::string, std::vector<double>>> challengers;
  for (const auto& p : challenger_paths) {
    const auto [name, means] = read_split_means(p);
    std::vector<double> vals;
    for (const auto& [split, v] : base) {
      auto it = means.find(split);
      if (it == means.end()) throw CommandError("'" + name + "' has no result for split '" + split + "'");
      vals.push_back(it->second);
    }
    if (means.size() != base.size()) throw CommandError("'" + name + "' is not paired with '" + base_name + "' by split");
    challengers.emplace_back(name, vals);
  }

  const auto rows = compare_models(base_name, base_vals, challengers);
  fs::create_directories(dir);
  detail::write_report(dir / "stats.csv", [&](std::ostream& o) { write_stat_csv(o, rows); });
  detail::write_config(dir, c);

  out << std::left << std::setw(36) << "comparison" << std::right << std::setw(12) << "p_raw" << std::setw(12)
      << "p_adjusted" << std::setw(10) << "d" << "  label\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(36) << r.comparison << std::right << std::setprecision(4) << std::setw(12) << r.p_raw
        << std::setw(12) << r.p_adjusted << std::setw(10) << r.d << "  " << r.label
        << (r.degenerate ? " (degenerate)" : "") << '\n';
  }
  out << std::defaultfloat << std::setprecision(6);
}

// ---- bench -----------------------------------------------------------------------

inline void cmd_bench(const RunConfig& c, std::ostream& out) {
  const fs::path dir = detail::required_path(c, "out");
  const fs::path root = detail::required_path(c, "data.root");
  const auto ckpts = split_list(c.str("bench.checkpoints"));
  if (ckpts.empty()) throw UsageError("bench.checkpoints is required");
  std::vector<FrameSelection> selections;
  for (const auto& s : split_list(c.str("bench.selections")))
    selections.push_back(tcc::detail::as_usage("bench.selections", [&] { return FrameSelection::parse(s); }));
  if (selections.empty()) throw UsageError("bench.selections is empty");
  const int repeats = int_in(c, "bench.repeats", 1);

  auto data = detail::load_non_empty(root);
  if (const auto& s = c.str("bench.split"); !s.empty()) data = subset(data, read_split(root, s).test_ids);

  BenchReport report;
  for (const auto& p : ckpts) {
    const Model model = detail::load_model(c, p);
    for (const auto& sel : selections) report.rows.push_back(benchmark_inference(model, data, sel, repeats));
  }
  fs::create_directories(dir);
  detail::write_report(dir / "bench.csv", [&](std::ostream& o) { write_bench_csv(o, report); });
  detail::write_config(dir, c);

  out << std::left << std::setw(18) << "model" << std::setw(20) << "selection" << std::right << std::setw(14)
      << "s/sequence" << std::setw(12) << "bytes" << '\n';
  for (const auto& r : report.rows)
    out << std::left << std::setw(18) << r.model << std::setw(20) << r.selection << std::right << std::setw(14)
        << std::setprecision(5) << r.mean_seconds << std::setw(12) << r.model_bytes << '\n';
  out << std::setprecision(6);
}

// ---- entry point -----------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal colour constancy toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--force", force, "overwrite existing outputs");
  app.add_option("--set,-D", overrides, "key=value override (repeatable)");

  const std::map<std::string, std::pair<const char*, void (*)(const RunConfig&, std::ostream&)>> commands{
      {"synth", {"write a synthetic dataset", cmd_synth}},
      {"train", {"train a model on one split", cmd_train}},
      {"eval", {"evaluate a model or baseline over splits", cmd_eval}},
      {"compare", {"paired significance tests against a baseline", cmd_compare}},
      {"bench", {"time inference per frame-selection mode", cmd_bench}},
  };
  for (const auto& [name, cmd] : commands) app.add_subcommand(name, cmd.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& o : overrides) cfg.apply(o);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (!out_dir.empty()) cfg.set("out", out_dir);
    if (force) cfg.set("force", "true");
    commands.at(name).second(cfg, out);
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << name << " failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tcc::cli
