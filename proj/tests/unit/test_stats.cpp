#include <cmath>

#include <gtest/gtest.h>

#include "error_code.hpp"
#include "oracles.hpp"
#include "pcgap/rng.hpp"
#include "pcgap/stats.hpp"

using namespace pcgap;
using namespace pcgap::stats;

TEST(NormalQuantile, InvertsCdf) {
  for (double p : {1e-10, 1e-4, 0.025, 0.3, 0.5, 0.8, 0.975, 1 - 1e-6}) {
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-14 + 1e-12 * p);
  }
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
}

TEST(Wilson, PublishedIntervals) {
  const auto a = wilson_ci(28, 51);
  EXPECT_NEAR(*a.ci_low, 0.41, 0.005);
  EXPECT_NEAR(*a.ci_high, 0.68, 0.005);
  const auto b = wilson_ci(12, 49);
  EXPECT_NEAR(*b.ci_low, 0.15, 0.005);
  EXPECT_NEAR(*b.ci_high, 0.38, 0.005);
  EXPECT_DOUBLE_EQ(a.estimate, 28.0 / 51.0);
}

TEST(Wilson, EdgeCasesAndErrors) {
  const auto zero = wilson_ci(0, 10);
  EXPECT_EQ(*zero.ci_low, 0.0);
  EXPECT_GT(*zero.ci_high, 0.0);
  const auto all = wilson_ci(10, 10);
  EXPECT_EQ(*all.ci_high, 1.0);
  EXPECT_EQ(oracle::code_of([] { wilson_ci(3, 0); }), ErrorCode::kInvalidCount);
  EXPECT_EQ(oracle::code_of([] { wilson_ci(5, 4); }), ErrorCode::kInvalidCount);
}

TEST(Fisher, PublishedTable) {
  const auto r = fisher_exact(28, 23, 12, 37);
  EXPECT_NEAR(r.estimate, 3.75, 0.005);
  EXPECT_NEAR(*r.p_value / 2.3e-3, 1.0, 0.05);
}

TEST(Fisher, MatchesEnumerationForSmallTables) {
  int checked = 0;
  for (long total = 2; total <= 40; ++total) {
    for (long a = 0; a <= total; a += 1 + total / 12) {
      for (long b = 0; a + b <= total; b += 1 + total / 12) {
        for (long c = 0; a + b + c <= total; c += 1 + total / 12) {
          const long d = total - a - b - c;
          if (a + b == 0 || c + d == 0 || a + c == 0 || b + d == 0) continue;
          const double ours = *fisher_exact(a, b, c, d).p_value;
          const double ref = oracle::fisher_by_enumeration(a, b, c, d);
          ASSERT_NEAR(ours, ref, 1e-9 * std::max(1.0, ref)) << a << " " << b << " " << c << " " << d;
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Fisher, DegenerateAndInvalid) {
  EXPECT_EQ(oracle::code_of([] { fisher_exact(0, 0, 3, 4); }), ErrorCode::kDegenerateTable);
  EXPECT_EQ(oracle::code_of([] { fisher_exact(-1, 2, 3, 4); }), ErrorCode::kInvalidCount);
  EXPECT_TRUE(std::isinf(fisher_exact(3, 0, 2, 4).estimate));
}

TEST(MannWhitney, ExactMatchesPermutationEnumeration) {
  Rng rng(12, 0);
  int checked = 0;
  for (int total = 2; total <= 12; ++total) {
    for (int n = 1; n < total; ++n) {
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> x(n), y(total - n);
        // Rounded values force ties on some repetitions.
        for (double& v : x) v = std::round(rng.normal() * (rep == 0 ? 2.0 : 100.0));
        for (double& v : y) v = std::round(rng.normal() * (rep == 0 ? 2.0 : 100.0)) + rep;
        const auto r = mann_whitney_u(x, y);
        ASSERT_TRUE(r.exact);
        EXPECT_DOUBLE_EQ(r.u, oracle::u_by_pairs(x, y));
        EXPECT_NEAR(r.p_value, oracle::mann_whitney_by_permutation(x, y), 1e-12)
            << "n=" << n << " m=" << total - n << " rep=" << rep;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(MannWhitney, SeparatedSamplesAndApproximation) {
  const auto small = mann_whitney_u({1, 2, 3}, {4, 5, 6});
  EXPECT_EQ(small.u, 0.0);
  EXPECT_NEAR(small.p_value, 0.1, 1e-12);

  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i);
    y.push_back(i + 100);
  }
  const auto big = mann_whitney_u(x, y);
  EXPECT_FALSE(big.exact);
  EXPECT_LT(big.p_value, 1e-9);
  EXPECT_EQ(oracle::code_of([] { mann_whitney_u({}, {1.0}); }), ErrorCode::kInvalidArgument);
}

TEST(Summary, QuartilesAndFractions) {
  const auto s = summarize({4, 1, 3, 2, 5}, {2.5}, {2.0});
  EXPECT_EQ(s.n, 5u);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.q1, 2.0);
  EXPECT_DOUBLE_EQ(s.q3, 4.0);
  EXPECT_DOUBLE_EQ(s.std_dev, std::sqrt(2.5));
  EXPECT_DOUBLE_EQ(s.frac_above.front().second, 0.6);
  EXPECT_DOUBLE_EQ(s.frac_below.front().second, 0.2);
  EXPECT_EQ(summarize({7.0}).std_dev, 0.0);
  EXPECT_EQ(oracle::code_of([] { summarize({}); }), ErrorCode::kEmptyInput);
}

TEST(Quantile, Type7Interpolation) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
}
