#pragma once

// Brute-force reference computations shared by the unit and acceptance
// tests. They are deliberately naive so they do not share code paths with
// the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "pcgap/lingauss.hpp"
#include "pcgap/rng.hpp"

namespace pcgap::oracle {

/// Random stable 2D spec with moderate coupling and noise.
inline DynamicsSpec random_stable_2d(Rng& rng) {
  const double a_s = rng.uniform(-0.97, 0.97);
  const double a_e = rng.uniform(-0.97, 0.97);
  const double c = rng.uniform(-1.5, 1.5);
  const double q_s = rng.uniform(0.01, 1.0);
  const double q_e = rng.uniform(0.01, 1.0);
  return DynamicsSpec::two_dim(a_s, a_e, c, q_s, q_e);
}

struct CovarianceAgreement {
  /// Largest |empirical - analytic| / SE over all entries.
  double max_z = 0.0;
  int entries = 0;
};

/// Compares the analytic stationary covariance with the empirical covariance
/// of the final states of `count` independent trajectories. The SE of entry
/// (i, j) for Gaussian data is sqrt((S_ii S_jj + S_ij^2) / count).
inline CovarianceAgreement monte_carlo_covariance(const DynamicsSpec& spec,
                                                  const Eigen::MatrixXd& sigma, int count,
                                                  int length, std::uint64_t seed) {
  const TrajectoryBatch batch = sample_trajectories(spec, count, length, seed);
  const int n = spec.dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  for (const auto& traj : batch.states) {
    const Eigen::VectorXd x = traj.col(length - 1);
    acc += x * x.transpose();
  }
  // The mean is known to be zero, so the plain second moment is unbiased.
  const Eigen::MatrixXd emp = acc / count;
  CovarianceAgreement out;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double se =
          std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / count);
      out.max_z = std::max(out.max_z, std::abs(emp(i, j) - sigma(i, j)) / se);
      ++out.entries;
    }
  }
  return out;
}

inline long double binomial(long n, long k) {
  if (k < 0 || k > n) return 0.0L;
  long double r = 1.0L;
  for (long i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / i;
  return r;
}

/// Two-sided Fisher p-value by listing every table with the observed margins
/// and summing those no more probable than the observed one.
inline double fisher_by_enumeration(long a, long b, long c, long d) {
  const long r1 = a + b, r2 = c + d, c1 = a + c, total = a + b + c + d;
  const long double denom = binomial(total, c1);
  auto prob = [&](long x) { return binomial(r1, x) * binomial(r2, c1 - x) / denom; };
  const long double observed = prob(a);
  long double p = 0.0L;
  for (long x = 0; x <= r1; ++x) {
    if (c1 - x < 0 || c1 - x > r2) continue;
    const long double px = prob(x);
    if (px <= observed * (1.0L + 1e-9L)) p += px;
  }
  return static_cast<double>(p);
}

/// U of x against y by pair counting (ties count one half).
inline double u_by_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  double u = 0.0;
  for (double xi : x) {
    for (double yj : y) u += xi > yj ? 1.0 : (xi == yj ? 0.5 : 0.0);
  }
  return u;
}

/// Two-sided permutation p-value of U over every relabeling of the pooled
/// sample: the fraction with |U - nm/2| at least the observed deviation.
inline double mann_whitney_by_permutation(const std::vector<double>& x,
                                          const std::vector<double>& y) {
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  const std::size_t n = x.size(), total = pooled.size();
  const double centre = 0.5 * static_cast<double>(n * y.size());
  const double observed = std::abs(u_by_pairs(x, y) - centre);
  long extreme = 0, all = 0;
  for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < total; ++i) ((mask >> i) & 1u ? xs : ys).push_back(pooled[i]);
    ++all;
    extreme += std::abs(u_by_pairs(xs, ys) - centre) >= observed - 1e-9;
  }
  return static_cast<double>(extreme) / static_cast<double>(all);
}

}  // namespace pcgap::oracle
