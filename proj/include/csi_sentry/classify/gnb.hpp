#pragma once

// Gaussian naive Bayes.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "csi_sentry/binary_io.hpp"
#include "csi_sentry/classify/tree.hpp"
#include "csi_sentry/error.hpp"

namespace csi_sentry::classify {

struct GnbModel {
  std::size_t n_features = 0;
  double epsilon = 0.0;
  std::array<double, kNumClasses> priors{};  // 0 for classes absent from training
  std::array<std::vector<double>, kNumClasses> means;
  std::array<std::vector<double>, kNumClasses> variances;

  bool present(std::size_t c) const { return priors[c] > 0.0; }
};

struct GnbPrediction {
  Activity label = Activity::LieDown;
  std::array<double, kNumClasses> posteriors{};
};

inline constexpr double kVarianceSmoothing = 1e-9;

inline GnbModel train_gnb(const std::vector<Example>& data) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "no training examples");
  const std::size_t nf = data.front().x.size();
  for (const auto& e : data) {
    if (e.x.size() != nf) throw Error(Errc::DimMismatch, "feature vectors differ in length");
  }

  GnbModel m;
  m.n_features = nf;
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& e : data) ++counts[index_of(e.label)];

  // Largest per-feature variance over the whole set sets the smoothing floor.
  double max_var = 0.0;
  for (std::size_t f = 0; f < nf; ++f) {
    double mean = 0.0;
    for (const auto& e : data) mean += e.x[f];
    mean /= static_cast<double>(data.size());
    double ss = 0.0;
    for (const auto& e : data) ss += (e.x[f] - mean) * (e.x[f] - mean);
    max_var = std::max(max_var, ss / static_cast<double>(data.size()));
  }
  // A dataset of constant features would otherwise get a zero floor.
  m.epsilon = kVarianceSmoothing * (max_var > 0.0 ? max_var : 1.0);

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0) continue;
    const double n = static_cast<double>(counts[c]);
    m.priors[c] = n / static_cast<double>(data.size());
    m.means[c].assign(nf, 0.0);
    m.variances[c].assign(nf, 0.0);
    for (const auto& e : data) {
      if (index_of(e.label) != c) continue;
      for (std::size_t f = 0; f < nf; ++f) m.means[c][f] += e.x[f];
    }
    for (auto& v : m.means[c]) v /= n;
    for (const auto& e : data) {
      if (index_of(e.label) != c) continue;
      for (std::size_t f = 0; f < nf; ++f) {
        const double d = e.x[f] - m.means[c][f];
        m.variances[c][f] += d * d;
      }
    }
    for (auto& v : m.variances[c]) v = v / n + m.epsilon;
  }
  return m;
}

inline GnbPrediction predict_gnb(const GnbModel& m, const FeatureVector& x) {
  if (x.size() != m.n_features) {
    throw Error(Errc::DimMismatch, std::to_string(x.size()) + " features, model has " + std::to_string(m.n_features));
  }
  std::array<double, kNumClasses> logp;
  logp.fill(-std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!m.present(c)) continue;
    double lp = std::log(m.priors[c]);
    for (std::size_t f = 0; f < m.n_features; ++f) {
      const double var = m.variances[c][f];
      const double d = x[f] - m.means[c][f];
      lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
    }
    logp[c] = lp;
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double lp : logp) z += std::exp(lp - top);
  const double log_norm = top + std::log(z);

  GnbPrediction out;
  std::size_t best = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.posteriors[c] = std::exp(logp[c] - log_norm);
    if (logp[c] > logp[best]) best = c;
  }
  out.label = activity_at(best);
  return out;
}

inline constexpr std::string_view kGnbMagic = "CSNB";
inline constexpr std::uint32_t kGnbVersion = 1;

inline void save_gnb(const GnbModel& m, const std::string& path) {
  binary_io::Writer w(kGnbMagic, kGnbVersion);
  w.u32(static_cast<std::uint32_t>(m.n_features));
  w.f64(m.epsilon);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    w.f64(m.priors[c]);
    if (!m.present(c)) continue;
    w.f64s(m.means[c]);
    w.f64s(m.variances[c]);
  }
  w.save(path);
}

inline GnbModel load_gnb(const std::string& path) {
  binary_io::Reader r(binary_io::read_file(path), kGnbMagic, kGnbVersion);
  GnbModel m;
  m.n_features = r.u32();
  m.epsilon = r.f64();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    m.priors[c] = r.f64();
    if (!m.present(c)) continue;
    m.means[c] = r.f64s(m.n_features);
    m.variances[c] = r.f64s(m.n_features);
  }
  r.expect_end();
  return m;
}

}  // namespace csi_sentry::classify
