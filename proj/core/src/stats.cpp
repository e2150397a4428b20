#include "pcgap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "pcgap/error.hpp"

namespace pcgap::stats {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kWilson: return "wilson";
    case Method::kFisher: return "fisher";
    case Method::kMannWhitney: return "mann_whitney";
    case Method::kSummary: return "summary";
  }
  return "summary";
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "normal quantile needs p in (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step brings the 1e-9 approximation to full precision.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

StatResult wilson_ci(long successes, long n, double level) {
  if (n < 1 || successes < 0 || successes > n) {
    throw Error(ErrorCode::kInvalidCount, "need 0 <= successes <= n and n >= 1 (got " +
                                              std::to_string(successes) + "/" +
                                              std::to_string(n) + ")");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "level must lie in (0, 1)");
  }
  const double z = normal_quantile(0.5 + 0.5 * level);
  const double nn = static_cast<double>(n);
  const double p = successes / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  StatResult r;
  r.method = Method::kWilson;
  r.estimate = p;
  r.ci_low = successes == 0 ? 0.0 : center - half;
  r.ci_high = successes == n ? 1.0 : center + half;
  return r;
}

double hypergeometric_pmf(long x, long row1, long col1, long total) {
  auto log_choose = [](long n, long k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  };
  const long lo = std::max(0L, col1 - (total - row1));
  const long hi = std::min(row1, col1);
  if (x < lo || x > hi) return 0.0;
  return std::exp(log_choose(row1, x) + log_choose(total - row1, col1 - x) -
                  log_choose(total, col1));
}

StatResult fisher_exact(long a, long b, long c, long d) {
  if (a < 0 || b < 0 || c < 0 || d < 0) {
    throw Error(ErrorCode::kInvalidCount, "table cells must be nonnegative");
  }
  const long row1 = a + b, row2 = c + d, col1 = a + c, col2 = b + d;
  if (row1 == 0 || row2 == 0 || col1 == 0 || col2 == 0) {
    throw Error(ErrorCode::kDegenerateTable, "a table margin is zero");
  }
  const long total = row1 + row2;
  const double observed = hypergeometric_pmf(a, row1, col1, total);
  const long lo = std::max(0L, col1 - row2);
  const long hi = std::min(row1, col1);
  double p = 0.0;
  for (long x = lo; x <= hi; ++x) {
    const double px = hypergeometric_pmf(x, row1, col1, total);
    if (px <= observed * (1.0 + 1e-12)) p += px;
  }
  StatResult r;
  r.method = Method::kFisher;
  const double num = static_cast<double>(a) * static_cast<double>(d);
  const double den = static_cast<double>(b) * static_cast<double>(c);
  r.estimate = den == 0.0 ? (num == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                        : std::numeric_limits<double>::infinity())
                          : num / den;
  r.p_value = std::clamp(p, std::numeric_limits<double>::min(), 1.0);
  return r;
}

StatResult MannWhitneyResult::as_stat_result() const {
  StatResult r;
  r.method = Method::kMannWhitney;
  r.estimate = u;
  r.p_value = p_value;
  return r;
}

namespace {

// Midranks (1-based) of the pooled sample, returned doubled so they are
// integers.
std::vector<long> doubled_midranks(const std::vector<double>& pooled, double* tie_term) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<long> ranks(n);
  *tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // Ranks i+1..j+1 share the midrank (i+j+2)/2; doubled: i+j+2.
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = static_cast<long>(i + j + 2);
    const double t = static_cast<double>(j - i + 1);
    *tie_term += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "Mann-Whitney needs two nonempty samples");
  }
  const std::size_t n = x.size(), m = y.size(), total = n + m;
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  double tie_term = 0.0;
  const std::vector<long> ranks2 = doubled_midranks(pooled, &tie_term);

  long rank_sum2 = 0;
  for (std::size_t i = 0; i < n; ++i) rank_sum2 += ranks2[i];
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  MannWhitneyResult out;
  out.u = 0.5 * static_cast<double>(rank_sum2) - nn * (nn + 1.0) / 2.0;
  const double mean_u = nn * mm / 2.0;
  const double observed_dev = std::abs(out.u - mean_u);

  if (std::min(n, m) < 8) {
    // Distribution of the doubled rank sum of a random n-subset, by DP over
    // (items chosen, sum).
    out.exact = true;
    const long max_sum = std::accumulate(ranks2.begin(), ranks2.end(), 0L);
    const std::size_t k_max = std::min(n, m);
    const bool choose_x = n <= m;
    std::vector<std::vector<double>> ways(k_max + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < total; ++i) {
      const long r = ranks2[i];
      for (std::size_t k = std::min(k_max, i + 1); k >= 1; --k) {
        auto& dst = ways[k];
        const auto& src = ways[k - 1];
        for (long s = max_sum; s >= r; --s) dst[s] += src[s - r];
      }
    }
    const double kk = static_cast<double>(k_max);
    double count_all = 0.0, count_extreme = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      const double w = ways[k_max][s];
      if (w == 0.0) continue;
      // U of the chosen subset, then mapped to U of x.
      double u_sub = 0.5 * static_cast<double>(s) - kk * (kk + 1.0) / 2.0;
      const double u_x = choose_x ? u_sub : nn * mm - u_sub;
      count_all += w;
      if (std::abs(u_x - mean_u) >= observed_dev - 1e-9) count_extreme += w;
    }
    out.p_value = std::min(1.0, count_extreme / count_all);
    return out;
  }

  const double big_n = static_cast<double>(total);
  const double var = nn * mm / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
  if (!(var > 0.0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, observed_dev - 0.5) / std::sqrt(var);
  out.p_value = std::clamp(std::erfc(z / std::numbers::sqrt2),
                           std::numeric_limits<double>::min(), 1.0);
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::kEmptyInput, "quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

StatResult Summary::as_stat_result() const {
  StatResult r;
  r.method = Method::kSummary;
  r.estimate = median;
  r.ci_low = q1;
  r.ci_high = q3;
  return r;
}

Summary summarize(const std::vector<double>& values,
                  const std::vector<double>& above_thresholds,
                  const std::vector<double>& below_thresholds) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "cannot summarize an empty vector");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  Summary s;
  s.n = sorted.size();
  const double n = static_cast<double>(s.n);
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
  s.std_dev = s.n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.min = sorted.front();
  s.max = sorted.back();
  for (double t : above_thresholds) {
    const auto count = std::count_if(sorted.begin(), sorted.end(), [t](double v) { return v > t; });
    s.frac_above.emplace_back(t, static_cast<double>(count) / n);
  }
  for (double t : below_thresholds) {
    const auto count = std::count_if(sorted.begin(), sorted.end(), [t](double v) { return v < t; });
    s.frac_below.emplace_back(t, static_cast<double>(count) / n);
  }
  return s;
}

}  // namespace pcgap::stats
