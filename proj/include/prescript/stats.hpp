#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "prescript/core.hpp"

namespace prescript {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

enum class Alternative { two_sided, greater, less };

inline std::string to_string(Alternative a) {
  switch (a) {
    case Alternative::two_sided: return "two_sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "two_sided";
}

struct WilcoxonResult {
  std::size_t n_used = 0;  // nonzero differences
  double w_plus = 0.0;     // rank sum of positive differences
  double w_minus = 0.0;
  double p_value = 1.0;
  bool exact = false;
  double z = 0.0;  // normal-approximation score (0 when exact)
};

// Average ranks (1-based) of the values; ties share the mean rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Paired signed-rank test on differences d_i. Zero differences are dropped.
// Exact null distribution (ties handled through doubled ranks) up to 25
// nonzero pairs; above that a normal approximation with tie and continuity
// corrections. `greater` tests whether differences tend to be positive.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs, Alternative alt = Alternative::two_sided,
                                           std::size_t exact_limit = 25) {
  std::vector<double> nz;
  for (double d : diffs)
    if (d != 0.0) nz.push_back(d);
  WilcoxonResult res;
  res.n_used = nz.size();
  if (nz.empty()) return res;
  std::vector<double> mag(nz.size());
  for (std::size_t i = 0; i < nz.size(); ++i) mag[i] = std::abs(nz[i]);
  const auto ranks = average_ranks(mag);
  for (std::size_t i = 0; i < nz.size(); ++i) (nz[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];
  const auto n = static_cast<double>(nz.size());

  if (nz.size() <= exact_limit) {
    res.exact = true;
    // distribution of 2*W+ under random signs
    std::vector<long> twice(nz.size());
    long total = 0;
    for (std::size_t i = 0; i < nz.size(); ++i) {
      twice[i] = std::lround(2.0 * ranks[i]);
      total += twice[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (long r : twice) {
      for (long s = reach; s >= 0; --s)
        if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
      reach += r;
    }
    const double all = std::ldexp(1.0, static_cast<int>(nz.size()));
    const long obs = std::lround(2.0 * res.w_plus);
    double upper = 0.0, lower = 0.0;
    for (long s = 0; s <= total; ++s) {
      if (s >= obs) upper += count[static_cast<std::size_t>(s)];
      if (s <= obs) lower += count[static_cast<std::size_t>(s)];
    }
    upper /= all;
    lower /= all;
    switch (alt) {
      case Alternative::greater: res.p_value = upper; break;
      case Alternative::less: res.p_value = lower; break;
      case Alternative::two_sided: res.p_value = std::min(1.0, 2.0 * std::min(upper, lower)); break;
    }
    return res;
  }

  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  {
    std::vector<double> sorted = mag;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      var -= (t * t * t - t) / 48.0;
      i = j + 1;
    }
  }
  const double sd = std::sqrt(std::max(var, 1e-300));
  const double diff = res.w_plus - mean;
  switch (alt) {
    case Alternative::greater:
      res.z = (diff - 0.5) / sd;
      res.p_value = normal_sf(res.z);
      break;
    case Alternative::less:
      res.z = (diff + 0.5) / sd;
      res.p_value = normal_cdf(res.z);
      break;
    case Alternative::two_sided:
      res.z = (std::abs(diff) - 0.5) / sd;
      res.p_value = std::min(1.0, 2.0 * normal_sf(std::max(0.0, res.z)));
      break;
  }
  res.p_value = std::clamp(res.p_value, 0.0, 1.0);
  return res;
}

inline double bonferroni(double p, std::size_t comparisons) {
  return std::min(1.0, p * static_cast<double>(std::max<std::size_t>(1, comparisons)));
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace prescript
