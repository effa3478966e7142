#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "csi_sentry/classify/dataset.hpp"
#include "csi_sentry/error.hpp"

namespace csi_sentry::classify {

using FeatureVector = std::vector<double>;

struct HaarDecomposition {
  std::vector<std::vector<double>> details;  // details[0] is the finest level
  std::vector<double> approximation;
};

// Orthonormal Haar analysis, `levels` deep. At each level an odd trailing
// sample is carried into the next approximation unchanged, so energy is
// preserved for any length.
inline HaarDecomposition haar_dwt(std::span<const double> x, std::size_t levels) {
  HaarDecomposition out;
  std::vector<double> approx(x.begin(), x.end());
  const double r = 1.0 / std::numbers::sqrt2;
  for (std::size_t j = 0; j < levels; ++j) {
    const std::size_t pairs = approx.size() / 2;
    std::vector<double> next;
    std::vector<double> detail;
    next.reserve(pairs + 1);
    detail.reserve(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
      const double a = approx[2 * i];
      const double b = approx[2 * i + 1];
      next.push_back((a + b) * r);
      detail.push_back((a - b) * r);
    }
    if (approx.size() % 2 == 1) next.push_back(approx.back());
    out.details.push_back(std::move(detail));
    approx = std::move(next);
  }
  out.approximation = std::move(approx);
  return out;
}

inline std::size_t default_dwt_levels(std::size_t steps) {
  if (steps < 2) return 0;
  return std::min<std::size_t>(4, static_cast<std::size_t>(std::bit_width(steps) - 1));
}

inline std::size_t feature_length(std::size_t levels, std::size_t channels) { return (3 * levels + 3) * channels; }

namespace detail {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  double energy = 0.0;
  double mean_abs = 0.0;
};

inline Moments moments(std::span<const double> v) {
  Moments m;
  if (v.empty()) return m;
  const double n = static_cast<double>(v.size());
  for (double x : v) {
    m.mean += x;
    m.energy += x * x;
    m.mean_abs += std::abs(x);
  }
  m.mean /= n;
  m.mean_abs /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / n);
  return m;
}

}  // namespace detail

// Per channel: for each detail level (finest first) log(1+energy), mean |d|,
// std d; then mean, std, log(1+energy) of the final approximation. Channel
// blocks are concatenated. levels == 0 picks min(4, floor(log2 T)).
inline FeatureVector dwt_features(const ActivitySample& sample, std::size_t levels = 0) {
  if (levels == 0) levels = default_dwt_levels(sample.steps);
  if (levels == 0 || levels >= 64 || sample.steps < (std::size_t{1} << levels)) {
    throw Error(Errc::TooShort, std::to_string(sample.steps) + " steps for " + std::to_string(levels) + " levels");
  }
  FeatureVector out;
  out.reserve(feature_length(levels, sample.channels));
  for (std::size_t f = 0; f < sample.channels; ++f) {
    const auto dec = haar_dwt(sample.channel(f), levels);
    for (const auto& d : dec.details) {
      const auto m = detail::moments(d);
      out.push_back(std::log1p(m.energy));
      out.push_back(m.mean_abs);
      out.push_back(m.std);
    }
    const auto a = detail::moments(dec.approximation);
    out.push_back(a.mean);
    out.push_back(a.std);
    out.push_back(std::log1p(a.energy));
  }
  return out;
}

}  // namespace csi_sentry::classify
