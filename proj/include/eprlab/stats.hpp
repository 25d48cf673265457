#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "eprlab/errors.hpp"
#include "eprlab/random.hpp"

namespace eprlab {

inline double mean(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("mean: empty input");
  return pairwise_sum<double>(0, v.size(), [&](std::size_t i) { return v[i]; }) / double(v.size());
}

/// Unbiased (n-1) sample variance with pairwise summation.
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw InvalidArgument("sample_variance: need at least 2 values");
  const double m = mean(v);
  const double ss = pairwise_sum<double>(0, v.size(), [&](std::size_t i) {
    const double d = v[i] - m;
    return d * d;
  });
  return ss / double(v.size() - 1);
}

/// Normal-theory standard error of a sample variance: V sqrt(2/(n-1)).
inline double variance_standard_error(double variance, std::size_t n) {
  return variance * std::sqrt(2.0 / double(n - 1));
}

struct BootstrapResult {
  double estimate = 0.0;  // statistic on the original data
  double standard_error = 0.0;
  double ci_low = 0.0;    // 2.5th percentile
  double ci_high = 0.0;   // 97.5th percentile
  std::vector<double> replicates;
};

inline constexpr int kMinBootstrap = 100;

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * double(sorted.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Nonparametric bootstrap of a vector-valued statistic, resampling with
/// replacement inside each group. Replicate b draws from stream (seed, b), so
/// results do not depend on `workers`.
template <typename T, typename Stat>
std::vector<BootstrapResult> bootstrap_multi(const std::vector<std::vector<T>>& groups,
                                             int resamples, Stat&& stat, std::uint64_t seed,
                                             int workers = 1) {
  if (resamples < kMinBootstrap)
    throw InvalidArgument("bootstrap: at least " + std::to_string(kMinBootstrap) +
                          " resamples required");
  if (groups.empty()) throw InvalidArgument("bootstrap: no groups");
  for (const auto& g : groups)
    if (g.empty()) throw InvalidArgument("bootstrap: empty group");
  const std::vector<double> point = stat(groups);
  std::vector<std::vector<double>> reps(static_cast<std::size_t>(resamples));
  parallel_for(reps.size(), workers, [&](std::size_t b) {
    Rng rng = stream(seed, b);
    std::vector<std::vector<T>> res(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
      res[gi].reserve(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) res[gi].push_back(g[pick(rng)]);
    }
    reps[b] = stat(res);
  });
  std::vector<BootstrapResult> out(point.size());
  for (std::size_t q = 0; q < point.size(); ++q) {
    BootstrapResult& r = out[q];
    r.estimate = point[q];
    r.replicates.resize(reps.size());
    for (std::size_t b = 0; b < reps.size(); ++b) r.replicates[b] = reps[b].at(q);
    r.standard_error = std::sqrt(sample_variance(r.replicates));
    std::vector<double> sorted = r.replicates;
    std::sort(sorted.begin(), sorted.end());
    r.ci_low = detail::quantile_sorted(sorted, 0.025);
    r.ci_high = detail::quantile_sorted(sorted, 0.975);
  }
  return out;
}

template <typename T, typename Stat>
BootstrapResult bootstrap(const std::vector<std::vector<T>>& groups, int resamples, Stat&& stat,
                          std::uint64_t seed, int workers = 1) {
  auto wrapped = [&](const std::vector<std::vector<T>>& g) {
    return std::vector<double>{stat(g)};
  };
  return bootstrap_multi(groups, resamples, wrapped, seed, workers).front();
}

}  // namespace eprlab
