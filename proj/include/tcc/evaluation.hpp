#pragma once

// Per-sequence evaluation, split aggregation, model comparison and
// inference benchmarking, with their line-oriented report formats.

#include <chrono>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcc/checkpoint.hpp"
#include "tcc/data.hpp"
#include "tcc/models.hpp"
#include "tcc/stats.hpp"
#include "tcc/train.hpp"

namespace tcc {

using Estimator = std::function<Illuminant(const FrameSequence&, Rng&)>;

inline Estimator model_estimator(const Model& model) {
  return [&model](const FrameSequence& s, Rng& rng) { return model.estimate(s, rng); };
}

inline Estimator gray_world_estimator() {
  return [](const FrameSequence& s, Rng&) { return gray_world(s.shot()); };
}

// Angular errors in degrees, one per sequence, in input order.
inline std::vector<double> per_sequence_errors(const Estimator& est, const std::vector<FrameSequence>& data,
                                               const FrameSelection& selection = FrameSelection::full()) {
  std::vector<double> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].ground_truth) throw DomainError("sequence '" + data[i].id + "' lacks ground truth");
    Rng rng = derived_rng(kEvalSeed, i);
    out.push_back(angular_error(est(select_frames(data[i], selection), rng), *data[i].ground_truth));
  }
  return out;
}

// ---- summary records -----------------------------------------------------

struct SummaryRecord {
  std::string model;
  std::string split;
  stats::ErrorSummary summary;
};

inline constexpr const char* kSummaryHeader = "model,split,mean,median,trimean,best25,worst25,worst5";

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRecord>& rows) {
  out << kSummaryHeader << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << r.model << ',' << r.split << ',' << s.mean << ',' << s.median << ',' << s.trimean << ',' << s.best25
        << ',' << s.worst25 << ',' << s.worst5 << '\n';
  }
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

inline double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw LoadError("malformed number '" + s + "'");
  return v;
}

template <typename Row, typename Parse>
std::vector<Row> read_csv(std::istream& in, const std::string& header, std::size_t columns, Parse parse) {
  std::string line;
  if (!std::getline(in, line) || line != header) throw LoadError("unexpected header, wanted '" + header + "'");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != columns) throw LoadError("malformed record '" + line + "'");
    try {
      rows.push_back(parse(f));
    } catch (const std::invalid_argument&) {
      throw LoadError("malformed record '" + line + "'");
    } catch (const std::out_of_range&) {
      throw LoadError("malformed record '" + line + "'");
    }
  }
  return rows;
}
}  // namespace detail

inline std::vector<SummaryRecord> read_summary_csv(std::istream& in) {
  return detail::read_csv<SummaryRecord>(in, kSummaryHeader, 8, [](const auto& f) {
    SummaryRecord r;
    r.model = f[0];
    r.split = f[1];
    r.summary = {detail::to_double(f[2]), detail::to_double(f[3]), detail::to_double(f[4]),
                 detail::to_double(f[5]), detail::to_double(f[6]), detail::to_double(f[7])};
    return r;
  });
}

// Cross-split mean and sample sd of each statistic.
struct SplitAggregate {
  stats::MeanSd mean, median, trimean, best25, worst25, worst5;
};

inline SplitAggregate aggregate_splits(const std::vector<stats::ErrorSummary>& per_split) {
  auto field = [&](double stats::ErrorSummary::*m) {
    std::vector<double> v;
    for (const auto& s : per_split) v.push_back(s.*m);
    return stats::mean_sd(v);
  };
  using S = stats::ErrorSummary;
  return {field(&S::mean), field(&S::median), field(&S::trimean),
          field(&S::best25), field(&S::worst25), field(&S::worst5)};
}

// ---- comparison ------------------------------------------------------------

struct StatRecord {
  std::string comparison;
  double p_raw = 0, p_adjusted = 0, d = 0;
  std::string label;
  bool degenerate = false;
};

inline constexpr const char* kStatHeader = "comparison,p_raw,p_adjusted,d,label";

// Baseline against each challenger over paired per-split errors; BH across
// the challenger count.
inline std::vector<StatRecord> compare_models(const std::string& baseline_name, const std::vector<double>& baseline,
                                              const std::vector<std::pair<std::string, std::vector<double>>>& challengers) {
  if (challengers.empty()) throw DomainError("comparison needs at least one challenger");
  std::vector<StatRecord> rows;
  std::vector<double> raw;
  for (const auto& [name, errs] : challengers) {
    if (errs.size() != baseline.size())
      throw DomainError("'" + name + "' is not paired with '" + baseline_name + "'");
    const auto t = stats::paired_t_one_tailed(baseline, errs);
    const auto e = stats::cohens_d_paired(baseline, errs);
    StatRecord r;
    r.comparison = baseline_name + "_vs_" + name;
    r.p_raw = t.p;
    r.d = e.d;
    r.label = stats::effect_label(e.d);
    r.degenerate = t.degenerate;
    raw.push_back(t.p);
    rows.push_back(r);
  }
  const auto adj = stats::benjamini_hochberg(raw);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].p_adjusted = adj[i];
  return rows;
}

inline void write_stat_csv(std::ostream& out, const std::vector<StatRecord>& rows) {
  out << kStatHeader << '\n';
  out.precision(17);
  for (const auto& r : rows) out << r.comparison << ',' << r.p_raw << ',' << r.p_adjusted << ',' << r.d << ',' << r.label << '\n';
}

inline std::vector<StatRecord> read_stat_csv(std::istream& in) {
  return detail::read_csv<StatRecord>(in, kStatHeader, 5, [](const auto& f) {
    StatRecord r;
    r.comparison = f[0];
    r.p_raw = detail::to_double(f[1]);
    r.p_adjusted = detail::to_double(f[2]);
    r.d = detail::to_double(f[3]);
    r.label = f[4];
    return r;
  });
}

// ---- benchmarking ------------------------------------------------------------

struct BenchRecord {
  std::string model;
  std::string selection;
  double mean_seconds = 0;  // per sequence
  std::size_t model_bytes = 0;
  int repeats = 0;
};

struct BenchReport {
  std::vector<BenchRecord> rows;
};

inline constexpr const char* kBenchHeader = "model,selection,mean_seconds,model_bytes,repeats";

// One untimed warmup pass, then `repeats` timed passes over all sequences.
inline BenchRecord benchmark_inference(const Model& model, const std::vector<FrameSequence>& data,
                                       const FrameSelection& selection, int repeats) {
  if (repeats < 1) throw DomainError("benchmark needs repeats >= 1");
  if (data.empty()) throw DomainError("benchmark needs at least one sequence");
  std::vector<FrameSequence> selected;
  for (const auto& s : data) selected.push_back(select_frames(s, selection));
  auto pass = [&] {
    for (std::size_t i = 0; i < selected.size(); ++i) {
      Rng rng = derived_rng(kEvalSeed, i);
      (void)model.estimate(selected[i], rng);
    }
  };
  pass();
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) pass();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  BenchRecord rec;
  rec.model = to_string(model.kind());
  rec.selection = selection.to_string();
  rec.mean_seconds = std::max(total / (static_cast<double>(repeats) * static_cast<double>(selected.size())),
                              std::numeric_limits<double>::min());
  rec.model_bytes = model_size_bytes(model);
  rec.repeats = repeats;
  return rec;
}

inline void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << kBenchHeader << '\n';
  out.precision(17);
  for (const auto& r : report.rows)
    out << r.model << ',' << r.selection << ',' << r.mean_seconds << ',' << r.model_bytes << ',' << r.repeats << '\n';
}

inline BenchReport read_bench_csv(std::istream& in) {
  return {detail::read_csv<BenchRecord>(in, kBenchHeader, 5, [](const auto& f) {
    BenchRecord r;
    r.model = f[0];
    r.selection = f[1];
    r.mean_seconds = detail::to_double(f[2]);
    r.model_bytes = static_cast<std::size_t>(std::stoull(f[3]));
    r.repeats = std::stoi(f[4]);
    return r;
  })};
}

}  // namespace tcc
