#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tcc/tcc.hpp"

using namespace tcc;
using namespace tcc::stats;

namespace {

// Composite Simpson rule on [a, b] with n (even) panels.
template <typename F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double t_density(double x, double df) {
  const double c = std::exp(std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df)) / std::sqrt(df * M_PI);
  return c * std::pow(1.0 + x * x / df, -0.5 * (df + 1));
}

// P(T <= t) by quadrature of the density from 0.
double t_cdf_oracle(double t, double df) {
  const double half = simpson([df](double x) { return t_density(x, df); }, 0.0, std::abs(t));
  return t >= 0 ? 0.5 + half : 0.5 - half;
}

std::vector<double> random_errors(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> g(2.0, 1.5);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

void expect_all(const ErrorSummary& s, double x) {
  EXPECT_DOUBLE_EQ(s.mean, x);
  EXPECT_DOUBLE_EQ(s.median, x);
  EXPECT_DOUBLE_EQ(s.trimean, x);
  EXPECT_DOUBLE_EQ(s.best25, x);
  EXPECT_DOUBLE_EQ(s.worst25, x);
  EXPECT_DOUBLE_EQ(s.worst5, x);
}

}  // namespace

// ---- error summary ----------------------------------------------------------

TEST(ErrorSummary, HandComputedExample) {
  const std::vector<double> e{1, 2, 3, 4, 100};
  const auto s = error_summary(e);
  EXPECT_DOUBLE_EQ(s.mean, 22.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.trimean, 3.0);
  EXPECT_DOUBLE_EQ(s.best25, 1.0);
  EXPECT_DOUBLE_EQ(s.worst25, 100.0);
  EXPECT_DOUBLE_EQ(s.worst5, 100.0);
}

TEST(ErrorSummary, ConstantAndSingletonSamples) {
  expect_all(error_summary(std::vector<double>{5, 5, 5, 5}), 5.0);
  expect_all(error_summary(std::vector<double>{2.75}), 2.75);
}

TEST(ErrorSummary, EvenMedianIsMidpoint) {
  EXPECT_DOUBLE_EQ(error_summary(std::vector<double>{4, 1, 3, 2}).median, 2.5);
}

TEST(ErrorSummary, QuartilesInterpolateAtRankQTimesNMinusOne) {
  // n = 6: Q1 at rank 1.25, Q3 at rank 3.75.
  const std::vector<double> s{0, 10, 20, 30, 40, 50};
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.25), 12.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.75), 37.5);
  EXPECT_DOUBLE_EQ(error_summary(s).trimean, (12.5 + 2 * 25 + 37.5) / 4);
}

TEST(ErrorSummary, SliceSizeIsFloorWithFloorOfOne) {
  // n = 8: k25 = 2, k5 = max(1, 0) = 1.
  const std::vector<double> e{1, 2, 3, 4, 5, 6, 7, 8};
  const auto s = error_summary(e);
  EXPECT_DOUBLE_EQ(s.best25, 1.5);
  EXPECT_DOUBLE_EQ(s.worst25, 7.5);
  EXPECT_DOUBLE_EQ(s.worst5, 8.0);
}

TEST(ErrorSummary, EmptyThrows) { EXPECT_THROW(error_summary(std::vector<double>{}), DomainError); }

TEST(ErrorSummary, OrderingChainOnRandomSamples) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = error_summary(random_errors(rng, len(rng)));
    ASSERT_LE(s.best25, s.median);
    ASSERT_LE(s.median, s.worst25);
    ASSERT_LE(s.worst25, s.worst5);
    for (double v : {s.mean, s.median, s.trimean, s.best25, s.worst25, s.worst5}) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0);
    }
  }
}

// Only the median survives self-concatenation under the q(n-1) quartile
// rule; n = 3, s = (0, 0, 1) moves Q3 from 0.5 to 0.75.
TEST(ErrorSummary, SelfConcatenationPreservesMedian) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> len(1, 40);
  for (int trial = 0; trial < 500; ++trial) {
    auto v = random_errors(rng, len(rng));
    auto vv = v;
    vv.insert(vv.end(), v.begin(), v.end());
    ASSERT_DOUBLE_EQ(error_summary(v).median, error_summary(vv).median);
  }
}

TEST(ErrorSummary, SelfConcatenationCanMoveTrimean) {
  const std::vector<double> v{0, 0, 1}, vv{0, 0, 1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(error_summary(v).trimean, 0.125);
  EXPECT_DOUBLE_EQ(error_summary(vv).trimean, 0.1875);
}

// ---- paired t -------------------------------------------------------------

TEST(PairedT, HandExample) {
  const std::vector<double> a{1, 1, 2}, b{0, 0, 0};
  const auto r = paired_t_one_tailed(a, b);
  EXPECT_NEAR(r.t, 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.df, 2.0);
  EXPECT_FALSE(r.degenerate);
  // df = 2 upper tail in closed form: (1 - t / sqrt(t^2 + 2)) / 2.
  EXPECT_NEAR(r.p, 0.5 * (1 - 4.0 / std::sqrt(18.0)), 1e-10);
  EXPECT_NEAR(r.p, 0.0286, 0.002);
}

TEST(PairedT, MatchesQuadratureOracle) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 3 + trial;
    std::vector<double> a(len), b(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = n(rng);
      b[i] = n(rng) - 0.3;
    }
    const auto r = paired_t_one_tailed(a, b);
    EXPECT_NEAR(r.p, 1.0 - t_cdf_oracle(r.t, r.df), 1e-7) << "trial " << trial;
  }
}

TEST(PairedT, DegenerateCases) {
  const std::vector<double> a{1, 2, 3};
  const auto eq = paired_t_one_tailed(a, a);
  EXPECT_TRUE(eq.degenerate);
  EXPECT_DOUBLE_EQ(eq.p, 0.5);
  const std::vector<double> up{2, 3, 4}, down{0, 1, 2};
  EXPECT_DOUBLE_EQ(paired_t_one_tailed(up, a).p, 0.0);
  EXPECT_DOUBLE_EQ(paired_t_one_tailed(down, a).p, 1.0);
  EXPECT_TRUE(paired_t_one_tailed(down, a).degenerate);
}

TEST(PairedT, WrongDirectionAboveHalf) {
  const std::vector<double> a{1, 2, 3, 4}, b{1.5, 3.1, 3.2, 4.9};
  EXPECT_GT(paired_t_one_tailed(a, b).p, 0.5);
}

TEST(PairedT, SwappedArgumentsSumToOne) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
    }
    EXPECT_NEAR(paired_t_one_tailed(a, b).p + paired_t_one_tailed(b, a).p, 1.0, 1e-9);
  }
}

TEST(PairedT, InputErrors) {
  const std::vector<double> a{1, 2}, b{1}, c{1, 2, 3};
  EXPECT_THROW(paired_t_one_tailed(a, c), DomainError);
  EXPECT_THROW(paired_t_one_tailed(b, b), DomainError);
}

// ---- Benjamini-Hochberg ---------------------------------------------------------

TEST(BenjaminiHochberg, HandExample) {
  const auto adj = benjamini_hochberg(std::vector<double>{0.01, 0.02, 0.04});
  ASSERT_EQ(adj.size(), 3u);
  EXPECT_NEAR(adj[0], 0.03, 1e-15);
  EXPECT_NEAR(adj[1], 0.03, 1e-15);
  EXPECT_NEAR(adj[2], 0.04, 1e-15);
}

TEST(BenjaminiHochberg, KeepsInputOrder) {
  const auto adj = benjamini_hochberg(std::vector<double>{0.04, 0.01, 0.02});
  EXPECT_NEAR(adj[0], 0.04, 1e-15);
  EXPECT_NEAR(adj[1], 0.03, 1e-15);
  EXPECT_NEAR(adj[2], 0.03, 1e-15);
}

TEST(BenjaminiHochberg, SingleAndTiedValues) {
  EXPECT_DOUBLE_EQ(benjamini_hochberg(std::vector<double>{0.37})[0], 0.37);
  for (double p : benjamini_hochberg(std::vector<double>{0.2, 0.2, 0.2, 0.2})) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(BenjaminiHochberg, CappedAtOne) {
  for (double p : benjamini_hochberg(std::vector<double>{0.9, 0.95, 0.99})) EXPECT_LE(p, 1.0);
}

TEST(BenjaminiHochberg, OutOfRangeThrows) {
  EXPECT_THROW(benjamini_hochberg(std::vector<double>{0.1, 1.2}), DomainError);
  EXPECT_THROW(benjamini_hochberg(std::vector<double>{-0.01}), DomainError);
}

TEST(BenjaminiHochberg, MonotoneInRankAndNeverBelowRaw) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(len(rng));
    for (double& x : p) x = u(rng) * u(rng);
    const auto adj = benjamini_hochberg(p);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return p[x] < p[y]; });
    for (std::size_t i = 0; i < p.size(); ++i) ASSERT_GE(adj[i], p[i]);
    for (std::size_t r = 1; r < order.size(); ++r) ASSERT_LE(adj[order[r - 1]], adj[order[r]]);
  }
}

// ---- Cohen's d ----------------------------------------------------------------

TEST(CohensD, HandExample) {
  const std::vector<double> a{0.1, 0.2, 0.3, 0.2}, b{0, 0, 0, 0};
  const auto e = cohens_d_paired(a, b);
  EXPECT_FALSE(e.infinite);
  EXPECT_NEAR(e.d, 0.2 / std::sqrt(0.02 / 3), 1e-12);
  EXPECT_NEAR(e.d, 2.449, 1e-3);
}

TEST(CohensD, TranslationInvariant) {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> a(8), b(8);
  for (int i = 0; i < 8; ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
  }
  const double d0 = cohens_d_paired(a, b).d;
  for (double c : {-3.0, 0.5, 17.0}) {
    auto ac = a, bc = b;
    for (auto& x : ac) x += c;
    for (auto& x : bc) x += c;
    EXPECT_NEAR(cohens_d_paired(ac, bc).d, d0, 1e-9);
  }
}

TEST(CohensD, ZeroMeanDifferenceIsZero) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 1, 4, 3};
  EXPECT_DOUBLE_EQ(cohens_d_paired(a, b).d, 0.0);
}

TEST(CohensD, ZeroVarianceIsFlagged) {
  const std::vector<double> a{2, 3, 4}, b{1, 2, 3};
  EXPECT_TRUE(cohens_d_paired(a, b).infinite);
}

TEST(CohensD, LabelThresholds) {
  EXPECT_EQ(effect_label(0.8), "large");
  EXPECT_EQ(effect_label(2.4), "large");
  EXPECT_EQ(effect_label(0.79), "medium");
  EXPECT_EQ(effect_label(0.6), "medium");
  EXPECT_EQ(effect_label(0.59), "small");
  EXPECT_EQ(effect_label(-1.5), "small");
}

// ---- ANOVA / Tukey -------------------------------------------------------------

TEST(Anova, IdenticalGroups) {
  const std::vector<std::vector<double>> g{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
  const auto r = anova_tukey(g);
  EXPECT_DOUBLE_EQ(r.f, 0.0);
  EXPECT_NEAR(r.p, 1.0, 1e-12);
  ASSERT_EQ(r.pairwise.size(), 3u);
  for (const auto& c : r.pairwise) EXPECT_GT(c.p_adjusted, 0.05);
}

TEST(Anova, SeparatedGroups) {
  const std::vector<std::vector<double>> g{{1, 2, 3}, {101, 102, 103}};
  const auto r = anova_tukey(g);
  EXPECT_NEAR(r.f, 15000.0, 1e-8);
  EXPECT_DOUBLE_EQ(r.df_between, 1.0);
  EXPECT_DOUBLE_EQ(r.df_within, 4.0);
  // F(1, 4) = T(4)^2, so p = 2 P(T > sqrt(F)).
  EXPECT_NEAR(r.p, 2.0 * (1.0 - t_cdf_oracle(std::sqrt(15000.0), 4.0)), 1e-9);
  EXPECT_LT(r.p, 1e-4);
}

TEST(Anova, TwoGroupTukeyMatchesFTest) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> g(2, std::vector<double>(5));
    for (auto& x : g[0]) x = n(rng);
    for (auto& x : g[1]) x = n(rng) + 0.8;
    const auto r = anova_tukey(g);
    ASSERT_EQ(r.pairwise.size(), 1u);
    EXPECT_NEAR(r.pairwise[0].p_adjusted, r.p, 1e-6) << "trial " << trial;
  }
}

TEST(Anova, LabelPermutationLeavesFUnchanged) {
  const std::vector<std::vector<double>> g{{1, 4, 2}, {3, 7, 5, 6}, {0.5, 1.5}};
  const double f = anova_tukey(g).f;
  EXPECT_NEAR(anova_tukey({g[2], g[0], g[1]}).f, f, 1e-12);
  EXPECT_NEAR(anova_tukey({g[1], g[2], g[0]}).f, f, 1e-12);
}

TEST(Anova, InputErrors) {
  EXPECT_THROW(anova_tukey({{1, 2, 3}}), DomainError);
  EXPECT_THROW(anova_tukey({{1, 2, 3}, {4}}), DomainError);
}

TEST(Anova, ZeroWithinVarianceIsFlagged) {
  EXPECT_TRUE(anova_tukey({{1, 1}, {2, 2}}).degenerate);
}

// For k = 2 the studentized range reduces to |T| sqrt(2).
TEST(StudentizedRange, TwoGroupClosedForm) {
  for (double df : {3.0, 8.0, 30.0}) {
    for (double q : {0.5, 1.5, 3.0, 5.0}) {
      const double oracle = 2.0 * t_cdf_oracle(q / std::sqrt(2.0), df) - 1.0;
      EXPECT_NEAR(studentized_range_cdf(q, 2, df), oracle, 1e-6) << "q=" << q << " df=" << df;
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_NEAR(studentized_range_cdf(2.0, 2, inf), std::erf(2.0 / 2.0), 1e-8);
}

TEST(StudentizedRange, IncreasingInQAndDecreasingInK) {
  double prev = 0;
  for (double q = 0.25; q < 8; q += 0.25) {
    const double v = studentized_range_cdf(q, 4, 12);
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
  EXPECT_GT(studentized_range_cdf(3.0, 3, 20), studentized_range_cdf(3.0, 6, 20));
}

// ---- aggregation and comparison -------------------------------------------------------

TEST(Aggregate, FourSingleValueSplits) {
  std::vector<ErrorSummary> splits;
  for (double v : {1.0, 2.0, 3.0, 4.0}) splits.push_back(error_summary(std::vector<double>{v}));
  const auto a = aggregate_splits(splits);
  EXPECT_DOUBLE_EQ(a.mean.mean, 2.5);
  EXPECT_NEAR(a.mean.sd, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_NEAR(a.median.sd, 1.29, 5e-3);
}

TEST(Compare, ThreeChallengersUseBhWithMThree) {
  const std::vector<double> base{3.0, 3.2, 2.9, 3.1};
  const std::vector<std::pair<std::string, std::vector<double>>> ch{
      {"a", {2.0, 2.5, 2.1, 2.6}}, {"b", {2.9, 3.0, 3.0, 3.0}}, {"c", {3.5, 3.3, 3.0, 3.4}}};
  const auto rows = compare_models("tccnet", base, ch);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].comparison, "tccnet_vs_a");
  std::vector<double> raw;
  for (const auto& r : rows) raw.push_back(r.p_raw);
  const auto adj = benjamini_hochberg(raw);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(rows[i].p_adjusted, adj[i]);
    EXPECT_EQ(rows[i].label, effect_label(rows[i].d));
    EXPECT_DOUBLE_EQ(rows[i].p_raw, paired_t_one_tailed(base, ch[i].second).p);
  }
}

TEST(Compare, IdenticalChallengerIsDegenerate) {
  const std::vector<double> base{1.0, 2.0, 1.5};
  const auto rows = compare_models("x", base, {{"same", base}});
  EXPECT_DOUBLE_EQ(rows[0].p_raw, 0.5);
  EXPECT_TRUE(rows[0].degenerate);
  EXPECT_DOUBLE_EQ(rows[0].d, 0.0);
  EXPECT_EQ(rows[0].label, "small");
}

TEST(Compare, UnpairedThrows) {
  EXPECT_THROW(compare_models("x", {1, 2, 3}, {{"y", {1, 2}}}), DomainError);
}

// ---- report formats --------------------------------------------------------------

TEST(Reports, SummaryRoundTrip) {
  const std::vector<SummaryRecord> rows{{"tccnet", "split_0", error_summary(std::vector<double>{1, 2, 3, 4, 100})},
                                        {"gray_world", "split_1", error_summary(std::vector<double>{0.1, 1.0 / 3})}};
  std::stringstream ss;
  write_summary_csv(ss, rows);
  const auto back = read_summary_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].model, "gray_world");
  EXPECT_EQ(back[1].split, "split_1");
  EXPECT_EQ(back[1].summary.mean, rows[1].summary.mean);
  EXPECT_EQ(back[0].summary.worst5, 100.0);
}

TEST(Reports, StatRoundTrip) {
  const std::vector<StatRecord> rows{{"a_vs_b", 0.0123456789, 0.037, 1.25, "large", false}};
  std::stringstream ss;
  write_stat_csv(ss, rows);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kStatHeader);
  const auto back = read_stat_csv(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].p_raw, 0.0123456789);
  EXPECT_EQ(back[0].label, "large");
}

TEST(Reports, MalformedInputFailsLoudly) {
  std::stringstream bad_header("model,split\n");
  EXPECT_THROW(read_summary_csv(bad_header), LoadError);
  std::stringstream bad_row(std::string(kSummaryHeader) + "\nm,s,1,2,x,4,5,6\n");
  EXPECT_THROW(read_summary_csv(bad_row), LoadError);
  std::stringstream short_row(std::string(kBenchHeader) + "\nm,full,1\n");
  EXPECT_THROW(read_bench_csv(short_row), LoadError);
}

// ---- benchmarking -------------------------------------------------------------------

namespace {
std::vector<FrameSequence> bench_data() {
  SynthConfig sc;
  sc.frames = 8;
  return fixtures::synth_set(4, sc, 21);
}
}  // namespace

TEST(Bench, ThreeFrameModeFasterThanFull) {
  const Model model(ModelConfig::tiny(ModelKind::TCCNet, 3));
  const auto data = bench_data();
  const auto full = benchmark_inference(model, data, FrameSelection::full(), 3);
  const auto three = benchmark_inference(model, data, FrameSelection::first_median_shot(), 3);
  EXPECT_GT(full.mean_seconds, 0.0);
  EXPECT_GT(three.mean_seconds, 0.0);
  EXPECT_LT(three.mean_seconds, full.mean_seconds);
  EXPECT_EQ(three.selection, "first_median_shot");
}

TEST(Bench, SchemaIndependentOfRepeats) {
  const Model model(ModelConfig::tiny(ModelKind::SingleFrameC4, 3));
  const auto data = bench_data();
  BenchReport one{{benchmark_inference(model, data, FrameSelection::full(), 1)}};
  BenchReport ten{{benchmark_inference(model, data, FrameSelection::full(), 10)}};
  std::stringstream a, b;
  write_bench_csv(a, one);
  write_bench_csv(b, ten);
  const auto ra = read_bench_csv(a), rb = read_bench_csv(b);
  ASSERT_EQ(ra.rows.size(), rb.rows.size());
  EXPECT_EQ(ra.rows[0].model, rb.rows[0].model);
  EXPECT_EQ(ra.rows[0].selection, rb.rows[0].selection);
  EXPECT_EQ(ra.rows[0].model_bytes, rb.rows[0].model_bytes);
  EXPECT_EQ(ra.rows[0].repeats, 1);
  EXPECT_EQ(rb.rows[0].repeats, 10);
}

TEST(Bench, ModelSizeEqualsCheckpointFileLength) {
  const Model model(ModelConfig::tiny(ModelKind::CTCCNet, 4));
  const auto path = std::filesystem::temp_directory_path() / "tcc_bench_size.ckpt";
  save_checkpoint_file(model, path);
  EXPECT_EQ(model_size_bytes(model), std::filesystem::file_size(path));
  const auto rec = benchmark_inference(model, bench_data(), FrameSelection::full(), 1);
  EXPECT_EQ(rec.model_bytes, std::filesystem::file_size(path));
  std::filesystem::remove(path);
}

TEST(Bench, RoundTripIsLossless) {
  BenchReport r{{{"tccnet", "full", 0.0123456789012345, 12345, 3}, {"tccnet", "first_median_shot", 1e-5, 12345, 3}}};
  std::stringstream ss;
  write_bench_csv(ss, r);
  const auto back = read_bench_csv(ss);
  ASSERT_EQ(back.rows.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.rows[i].model, r.rows[i].model);
    EXPECT_EQ(back.rows[i].selection, r.rows[i].selection);
    EXPECT_EQ(back.rows[i].mean_seconds, r.rows[i].mean_seconds);
    EXPECT_EQ(back.rows[i].model_bytes, r.rows[i].model_bytes);
    EXPECT_EQ(back.rows[i].repeats, r.rows[i].repeats);
  }
}

TEST(Bench, InputErrors) {
  const Model model(ModelConfig::tiny(ModelKind::SingleFrameC4, 3));
  EXPECT_THROW(benchmark_inference(model, bench_data(), FrameSelection::full(), 0), DomainError);
  EXPECT_THROW(benchmark_inference(model, {}, FrameSelection::full(), 1), DomainError);
}

// ---- per-sequence evaluation --------------------------------------------------------

TEST(Evaluate, GroundTruthStubGivesZeroErrors) {
  const auto data = fixtures::synth_set(5, SynthConfig{}, 31);
  const Estimator oracle = [](const FrameSequence& s, Rng&) { return *s.ground_truth; };
  const auto s = error_summary(per_sequence_errors(oracle, data));
  expect_all(s, 0.0);
}

TEST(Evaluate, GrayWorldOnGrayMeanScenes) {
  SynthConfig sc;
  sc.gray_mean = true;
  const auto data = fixtures::synth_set(10, sc, 32);
  EXPECT_LT(error_summary(per_sequence_errors(gray_world_estimator(), data)).mean, 1.0);
}

TEST(Evaluate, MissingGroundTruthNamesSequence) {
  auto data = fixtures::synth_set(2, SynthConfig{}, 33);
  data[1].ground_truth.reset();
  try {
    per_sequence_errors(gray_world_estimator(), data);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("seq001"), std::string::npos);
  }
}

TEST(Evaluate, DeterministicModelErrors) {
  const Model model(ModelConfig::tiny(ModelKind::TCCNetC4, 5));
  const auto data = fixtures::synth_set(3, SynthConfig{}, 34);
  EXPECT_EQ(per_sequence_errors(model_estimator(model), data), per_sequence_errors(model_estimator(model), data));
}
