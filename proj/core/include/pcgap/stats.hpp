#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace pcgap::stats {

enum class Method { kWilson, kFisher, kMannWhitney, kSummary };
std::string_view to_string(Method m);

struct StatResult {
  double estimate = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> p_value;
  Method method = Method::kSummary;
};

/// Standard normal CDF.
double normal_cdf(double z);
/// Standard normal quantile: Acklam's rational approximation followed by one
/// Halley step against erfc.
double normal_quantile(double p);

/// Wilson score interval for a binomial proportion.
StatResult wilson_ci(long successes, long n, double level = 0.95);

/// Fisher's exact test on [[a, b], [c, d]]. The two-sided p-value sums the
/// hypergeometric probabilities of every margin-preserving table whose point
/// probability does not exceed the observed one (relative slack 1e-12).
/// `estimate` is the sample odds ratio ad / (bc).
StatResult fisher_exact(long a, long b, long c, long d);

/// Hypergeometric point probability of the table with top-left cell x.
double hypergeometric_pmf(long x, long row1, long col1, long total);

struct MannWhitneyResult {
  /// U for the first sample: rank sum of x minus n(n+1)/2 (midranks for ties).
  double u = 0.0;
  double p_value = 1.0;
  bool exact = false;
  StatResult as_stat_result() const;
};

/// Two-sided Mann-Whitney U test. Uses the exact permutation distribution of
/// the (midranked) statistic when either sample has fewer than 8 values,
/// otherwise the normal approximation with tie-corrected variance and
/// continuity correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y);

/// Type-7 (linear interpolation) quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  /// Sample standard deviation (n - 1 denominator; 0 for a single value).
  double std_dev = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// (threshold, fraction strictly above).
  std::vector<std::pair<double, double>> frac_above;
  /// (threshold, fraction strictly below).
  std::vector<std::pair<double, double>> frac_below;

  StatResult as_stat_result() const;
};

Summary summarize(const std::vector<double>& values,
                  const std::vector<double>& above_thresholds = {},
                  const std::vector<double>& below_thresholds = {});

}  // namespace pcgap::stats
