#pragma once

// Angular-error summaries and the significance tests used to compare models.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "tcc/color.hpp"

namespace tcc::stats {

// ---- error summary -------------------------------------------------------

struct ErrorSummary {
  double mean = 0, median = 0, trimean = 0, best25 = 0, worst25 = 0, worst5 = 0;
};

// Linear interpolation at zero-based rank q * (n - 1) of a sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ErrorSummary error_summary(std::span<const double> errors) {
  if (errors.empty()) throw DomainError("error summary of empty sample");
  std::vector<double> s(errors.begin(), errors.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  auto mean_of = [](auto first, auto last) {
    return std::accumulate(first, last, 0.0) / static_cast<double>(std::distance(first, last));
  };
  auto slice = [n](double fraction) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
  };
  ErrorSummary r;
  r.mean = mean_of(s.begin(), s.end());
  r.median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  r.trimean = (quantile_sorted(s, 0.25) + 2.0 * r.median + quantile_sorted(s, 0.75)) / 4.0;
  const std::size_t k25 = slice(0.25), k5 = slice(0.05);
  r.best25 = mean_of(s.begin(), s.begin() + k25);
  r.worst25 = mean_of(s.end() - k25, s.end());
  r.worst5 = mean_of(s.end() - k5, s.end());
  return r;
}

struct MeanSd {
  double mean = 0, sd = 0;
};

// Sample mean and (n-1) standard deviation; sd = 0 for a single value.
inline MeanSd mean_sd(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean of empty sample");
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() == 1) return {m, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0))};
}

// ---- paired comparisons --------------------------------------------------

struct TTestResult {
  double t = 0;
  double df = 0;
  double p = 0;
  bool degenerate = false;
};

namespace detail {
inline std::vector<double> differences(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("paired samples differ in length");
  if (a.size() < 2) throw DomainError("paired test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}
}  // namespace detail

// One-tailed paired t-test of H1: mean(a - b) > 0 (a baseline, b challenger).
inline TTestResult paired_t_one_tailed(std::span<const double> a, std::span<const double> b) {
  const auto d = detail::differences(a, b);
  const auto [m, sd] = mean_sd(d);
  TTestResult r;
  r.df = static_cast<double>(d.size() - 1);
  if (!(sd > 0.0)) {
    r.degenerate = true;
    r.t = m > 0 ? std::numeric_limits<double>::infinity() : m < 0 ? -std::numeric_limits<double>::infinity() : 0.0;
    r.p = m > 0 ? 0.0 : m < 0 ? 1.0 : 0.5;
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
  boost::math::students_t dist(r.df);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

// Step-up false-discovery-rate adjustment; output in input order.
inline std::vector<double> benjamini_hochberg(std::span<const double> p) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("p-values must lie in [0, 1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return p[x] < p[y]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    running = std::min(running, p[i] * (static_cast<double>(m) / static_cast<double>(r + 1)));
    adj[i] = std::min(running, 1.0);
  }
  return adj;
}

struct EffectSize {
  double d = 0;
  bool infinite = false;  // zero-variance differences with nonzero mean
};

// Mean paired difference over its sample standard deviation.
inline EffectSize cohens_d_paired(std::span<const double> a, std::span<const double> b) {
  const auto d = detail::differences(a, b);
  const auto [m, sd] = mean_sd(d);
  if (!(sd > 0.0)) {
    if (m == 0.0) return {0.0, false};
    return {m > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), true};
  }
  return {m / sd, false};
}

inline std::string effect_label(double d) {
  if (d >= 0.8) return "large";
  if (d >= 0.6) return "medium";
  return "small";
}

// ---- studentized range ---------------------------------------------------

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] via Newton iteration.
struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(int n) : x(n), w(n) {
    for (int i = 0; i < n; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = n * (z * p1 - p0) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-15) {
          x[i] = z;
          w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
          break;
        }
      }
    }
  }

  template <typename F>
  double integrate(F&& f, double a, double b, int panels) const {
    double total = 0.0;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double lo = a + p * h, mid = lo + h / 2;
      for (std::size_t i = 0; i < x.size(); ++i) total += w[i] * f(mid + x[i] * h / 2);
    }
    return total * h / 2;
  }
};

inline const GaussLegendre& gauss_legendre() {
  static const GaussLegendre gl(20);
  return gl;
}

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(range of k iid standard normals <= w).
inline double range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  const auto& gl = gauss_legendre();
  const double lo = -8.5, hi = 8.5;
  const double v = gl.integrate(
      [&](double z) {
        const double inner = Phi(z) - Phi(z - w);
        return phi(z) * std::pow(std::max(inner, 0.0), k - 1);
      },
      lo, hi, 48);
  return std::clamp(k * v, 0.0, 1.0);
}

}  // namespace detail

// CDF of the studentized range Q(k, df). Integrates the normal-range CDF
// against the density of s = chi_df / sqrt(df); df = inf gives the range CDF.
inline double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw DomainError("studentized range needs k >= 2");
  if (!(df > 0.0)) throw DomainError("studentized range needs df > 0");
  if (q <= 0.0) return 0.0;
  if (std::isinf(df)) return detail::range_cdf(q, k);
  // log density of s: log(2) + (df/2) log(df/2) - lgamma(df/2) + (df-1) log s - df s^2 / 2
  const double c = std::log(2.0) + 0.5 * df * std::log(0.5 * df) - std::lgamma(0.5 * df);
  auto density = [&](double s) { return s <= 0.0 ? 0.0 : std::exp(c + (df - 1.0) * std::log(s) - 0.5 * df * s * s); };
  // s concentrates near 1 with spread ~ 1/sqrt(2 df); cover generously.
  const double spread = 1.0 / std::sqrt(2.0 * df);
  const double lo = std::max(0.0, 1.0 - 12.0 * spread);
  const double hi = 1.0 + 14.0 * spread + (df < 10 ? 8.0 : 0.0);
  const auto& gl = detail::gauss_legendre();
  const double v = gl.integrate([&](double s) { return density(s) * detail::range_cdf(q * s, k); }, lo, hi, 64);
  return std::clamp(v, 0.0, 1.0);
}

// ---- one-way ANOVA with Tukey HSD -----------------------------------------

struct PairwiseComparison {
  std::size_t group_a = 0, group_b = 0;
  double mean_diff = 0;
  double q = 0;
  double p_adjusted = 1;
};

struct AnovaResult {
  double f = 0;
  double df_between = 0, df_within = 0;
  double p = 1;
  bool degenerate = false;  // zero within-group variance everywhere
  std::vector<PairwiseComparison> pairwise;
};

inline AnovaResult anova_tukey(const std::vector<std::vector<double>>& groups) {
  const std::size_t k = groups.size();
  if (k < 2) throw DomainError("ANOVA needs at least two groups");
  std::size_t N = 0;
  double grand = 0.0;
  std::vector<double> means(k);
  for (std::size_t g = 0; g < k; ++g) {
    if (groups[g].size() < 2) throw DomainError("ANOVA needs at least two observations per group");
    means[g] = std::accumulate(groups[g].begin(), groups[g].end(), 0.0) / static_cast<double>(groups[g].size());
    grand += std::accumulate(groups[g].begin(), groups[g].end(), 0.0);
    N += groups[g].size();
  }
  grand /= static_cast<double>(N);
  double ssb = 0.0, ssw = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    ssb += static_cast<double>(groups[g].size()) * (means[g] - grand) * (means[g] - grand);
    for (double x : groups[g]) ssw += (x - means[g]) * (x - means[g]);
  }
  AnovaResult r;
  r.df_between = static_cast<double>(k - 1);
  r.df_within = static_cast<double>(N - k);
  const double msb = ssb / r.df_between, msw = ssw / r.df_within;
  if (!(msw > 0.0)) {
    r.degenerate = true;
    const bool separated = ssb > 0.0;
    r.f = separated ? std::numeric_limits<double>::infinity() : 0.0;
    r.p = separated ? 0.0 : 1.0;
  } else {
    r.f = msb / msw;
    boost::math::fisher_f dist(r.df_between, r.df_within);
    r.p = r.f > 0.0 ? boost::math::cdf(boost::math::complement(dist, r.f)) : 1.0;
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      PairwiseComparison c;
      c.group_a = a;
      c.group_b = b;
      c.mean_diff = means[a] - means[b];
      const double se = std::sqrt(0.5 * msw * (1.0 / groups[a].size() + 1.0 / groups[b].size()));
      if (se > 0.0) {
        c.q = std::abs(c.mean_diff) / se;
        c.p_adjusted = 1.0 - studentized_range_cdf(c.q, static_cast<int>(k), r.df_within);
      } else {
        c.q = c.mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        c.p_adjusted = c.mean_diff == 0.0 ? 1.0 : 0.0;
      }
      r.pairwise.push_back(c);
    }
  return r;
}

}  // namespace tcc::stats
