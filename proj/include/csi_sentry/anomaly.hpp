#pragma once

// Shape-library anomaly detection.
//
// A series is cut into overlapping segments of length L (stride S), each
// tapered by a half-sine window so it starts and ends at exactly zero. k-means
// over the tapered segments yields a library of k shapes. To reconstruct a
// series, each tapered segment is replaced by its nearest shape, the shapes are
// overlap-added at their offsets, and the sum is divided pointwise by the
// overlap-added window. Regions the library cannot express leave a large
// reconstruction error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csi_sentry/binary_io.hpp"
#include "csi_sentry/error.hpp"

namespace csi_sentry::anomaly {

using Series = std::vector<double>;

struct SegmentConfig {
  std::size_t segment_len = 64;
  std::size_t stride = 32;
  std::size_t k = 8;
  std::size_t max_iters = 100;
  double tol = 1e-6;
  std::uint64_t seed = 1;

  void validate() const {
    if (segment_len < 4) throw Error(Errc::BadConfig, "segment length must be >= 4");
    if (stride < 2 || stride > segment_len) throw Error(Errc::BadConfig, "stride must be in [2, segment length]");
    if (k < 1) throw Error(Errc::BadConfig, "k must be >= 1");
  }
};

struct ShapeLibrary {
  std::vector<Series> centroids;
  double error_mean = 0.0;
  double error_std = 0.0;
  SegmentConfig config;

  double threshold(double c) const { return error_mean + c * error_std; }
};

struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive

  bool operator==(const Interval&) const = default;
};

struct AnomalyReport {
  std::vector<double> error_series;
  double threshold = 0.0;
  std::vector<Interval> intervals;
};

inline Series half_sine_window(std::size_t len) {
  Series w(len);
  for (std::size_t n = 0; n < len; ++n) {
    w[n] = std::sin(std::numbers::pi * static_cast<double>(n) / static_cast<double>(len - 1));
  }
  // sin(pi) is not exactly zero in floating point.
  w.front() = 0.0;
  w.back() = 0.0;
  return w;
}

inline std::size_t segment_count(std::size_t n, const SegmentConfig& cfg) {
  return n < cfg.segment_len ? 0 : (n - cfg.segment_len) / cfg.stride + 1;
}

inline std::vector<Series> segment_and_window(std::span<const double> series, const SegmentConfig& cfg) {
  cfg.validate();
  if (series.size() < cfg.segment_len) {
    throw Error(Errc::TooShort, "series of " + std::to_string(series.size()) + " samples, segment length " +
                                    std::to_string(cfg.segment_len));
  }
  const Series w = half_sine_window(cfg.segment_len);
  const std::size_t count = segment_count(series.size(), cfg);
  std::vector<Series> out(count, Series(cfg.segment_len));
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t off = s * cfg.stride;
    for (std::size_t n = 0; n < cfg.segment_len; ++n) out[s][n] = series[off + n] * w[n];
    // x * 0.0 is -0.0 for negative x; endpoints are pinned to +0.0.
    out[s].front() = 0.0;
    out[s].back() = 0.0;
  }
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    d += e * e;
  }
  return d;
}

// Index of the nearest centroid; ties go to the lowest index.
inline std::size_t nearest(std::span<const double> x, const std::vector<Series>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = squared_distance(x, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

struct KMeansTrace {
  std::vector<double> objective;  // within-cluster sum of squares after each iteration
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::size_t> assignment;
};

// Called with (iteration, centroids) after each Lloyd iteration.
using KMeansObserver = std::function<void(std::size_t, const std::vector<Series>&)>;

namespace detail {

inline std::vector<Series> kmeans_pp_init(const std::vector<Series>& pts, std::size_t k, std::mt19937_64& rng) {
  std::vector<Series> centroids;
  centroids.reserve(k);
  std::vector<bool> chosen(pts.size(), false);
  std::uniform_int_distribution<std::size_t> first(0, pts.size() - 1);
  std::size_t idx = first(rng);
  centroids.push_back(pts[idx]);
  chosen[idx] = true;
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(pts[i], centroids.back()));
      total += d2[i];
    }
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      idx = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          idx = i;
          break;
        }
      }
    } else {
      // Every point coincides with a chosen centroid; take the first unchosen one.
      idx = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    chosen[idx] = true;
    centroids.push_back(pts[idx]);
  }
  return centroids;
}

inline double wcss(const std::vector<Series>& pts, const std::vector<Series>& centroids,
                   const std::vector<std::size_t>& assignment) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += squared_distance(pts[i], centroids[assignment[i]]);
  return s;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Empty clusters are reseeded with
// the point farthest from its own centroid.
inline ShapeLibrary kmeans_fit(const std::vector<Series>& segments, const SegmentConfig& cfg,
                               KMeansTrace* trace = nullptr, const KMeansObserver& observer = {}) {
  cfg.validate();
  if (segments.size() < cfg.k) {
    throw Error(Errc::TooFewSegments,
                std::to_string(segments.size()) + " segments for k=" + std::to_string(cfg.k));
  }
  const std::size_t dim = segments.front().size();
  for (const auto& s : segments) {
    if (s.size() != dim) throw Error(Errc::DimMismatch, "segments differ in length");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<Series> centroids = detail::kmeans_pp_init(segments, cfg.k, rng);
  std::vector<std::size_t> assignment(segments.size(), 0);
  KMeansTrace local;
  KMeansTrace& tr = trace ? *trace : local;
  tr = {};

  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    for (std::size_t i = 0; i < segments.size(); ++i) assignment[i] = nearest(segments[i], centroids);

    std::vector<Series> next(cfg.k, Series(dim, 0.0));
    std::vector<std::size_t> counts(cfg.k, 0);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      auto& c = next[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) c[d] += segments[i][d];
      ++counts[assignment[i]];
    }
    for (std::size_t j = 0; j < cfg.k; ++j) {
      if (counts[j] == 0) {
        next[j] = centroids[j];
        continue;
      }
      for (double& v : next[j]) v /= static_cast<double>(counts[j]);
    }
    for (std::size_t j = 0; j < cfg.k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < segments.size(); ++i) {
        const double d = squared_distance(segments[i], next[assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[assignment[far]];
      assignment[far] = j;
      counts[j] = 1;
      next[j] = segments[far];
    }

    double shift = 0.0;
    for (std::size_t j = 0; j < cfg.k; ++j) shift = std::max(shift, std::sqrt(squared_distance(next[j], centroids[j])));
    centroids = std::move(next);
    tr.objective.push_back(detail::wcss(segments, centroids, assignment));
    tr.iterations = iter + 1;
    if (observer) observer(iter, centroids);
    if (shift < cfg.tol) {
      tr.converged = true;
      break;
    }
  }
  for (std::size_t i = 0; i < segments.size(); ++i) assignment[i] = nearest(segments[i], centroids);
  tr.assignment = assignment;

  ShapeLibrary lib;
  lib.centroids = std::move(centroids);
  lib.config = cfg;
  return lib;
}

struct Reconstruction {
  Series values;
  std::vector<bool> covered;  // false where the window sum is ~0; excluded from error
};

inline Reconstruction reconstruct_detailed(std::span<const double> series, const ShapeLibrary& lib) {
  const SegmentConfig& cfg = lib.config;
  const auto segments = segment_and_window(series, cfg);
  const Series w = half_sine_window(cfg.segment_len);
  Series acc(series.size(), 0.0);
  Series wsum(series.size(), 0.0);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Series& shape = lib.centroids[nearest(segments[s], lib.centroids)];
    const std::size_t off = s * cfg.stride;
    for (std::size_t n = 0; n < cfg.segment_len; ++n) {
      acc[off + n] += shape[n];
      wsum[off + n] += w[n];
    }
  }
  Reconstruction r{Series(series.size()), std::vector<bool>(series.size())};
  for (std::size_t t = 0; t < series.size(); ++t) {
    r.covered[t] = wsum[t] >= 1e-6;
    r.values[t] = r.covered[t] ? acc[t] / wsum[t] : series[t];
  }
  return r;
}

inline Series reconstruct(std::span<const double> series, const ShapeLibrary& lib) {
  return reconstruct_detailed(series, lib).values;
}

// Squared reconstruction error smoothed by a centered moving average of
// `window` samples over covered points. Uncovered points read 0.
inline std::vector<double> smoothed_error(std::span<const double> series, const Reconstruction& rec,
                                          std::size_t window) {
  const std::size_t n = series.size();
  std::vector<double> err(n, 0.0);
  std::vector<std::size_t> count(n + 1, 0);
  for (std::size_t t = 0; t < n; ++t) {
    if (rec.covered[t]) {
      const double e = series[t] - rec.values[t];
      err[t] = e * e;
    }
    count[t + 1] = count[t] + (rec.covered[t] ? 1 : 0);
  }
  std::vector<double> out(n, 0.0);
  const std::size_t half = window / 2;
  for (std::size_t t = 0; t < n; ++t) {
    if (!rec.covered[t]) continue;
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(n, lo + window);
    const std::size_t c = count[hi] - count[lo];
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += err[i];
    out[t] = c ? s / static_cast<double>(c) : 0.0;
  }
  return out;
}

struct Calibration {
  double threshold = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

// threshold = mean + c * population std.
inline Calibration calibrate_threshold(std::span<const double> train_error, double c = 3.0) {
  if (train_error.size() < 2) throw Error(Errc::TooFew, "need at least 2 error samples");
  double mean = 0.0;
  for (double e : train_error) mean += e;
  mean /= static_cast<double>(train_error.size());
  double ss = 0.0;
  for (double e : train_error) ss += (e - mean) * (e - mean);
  const double sd = std::sqrt(ss / static_cast<double>(train_error.size()));
  return {mean + c * sd, mean, sd};
}

inline std::vector<double> covered_values(const std::vector<double>& v, const std::vector<bool>& covered) {
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (covered[i]) out.push_back(v[i]);
  }
  return out;
}

// Segment, cluster, then record the library's own error statistics on the training series.
inline ShapeLibrary fit_library(std::span<const double> series, const SegmentConfig& cfg,
                                KMeansTrace* trace = nullptr) {
  ShapeLibrary lib = kmeans_fit(segment_and_window(series, cfg), cfg, trace);
  const Reconstruction rec = reconstruct_detailed(series, lib);
  const auto err = smoothed_error(series, rec, cfg.segment_len);
  const Calibration cal = calibrate_threshold(covered_values(err, rec.covered));
  lib.error_mean = cal.mean;
  lib.error_std = cal.std;
  return lib;
}

inline std::vector<Interval> runs_above(std::span<const double> values, double threshold) {
  std::vector<Interval> out;
  std::size_t t = 0;
  while (t < values.size()) {
    if (values[t] > threshold) {
      const std::size_t start = t;
      while (t + 1 < values.size() && values[t + 1] > threshold) ++t;
      out.push_back({start, t});
    }
    ++t;
  }
  return out;
}

inline AnomalyReport detect_anomalies(std::span<const double> series, const ShapeLibrary& lib, double c = 3.0) {
  const Reconstruction rec = reconstruct_detailed(series, lib);
  AnomalyReport report;
  report.error_series = smoothed_error(series, rec, lib.config.segment_len);
  report.threshold = lib.threshold(c);
  report.intervals = runs_above(report.error_series, report.threshold);
  return report;
}

// ---------------------------------------------------------------------------
// Files

inline constexpr std::string_view kLibraryMagic = "CSSL";
inline constexpr std::uint32_t kLibraryVersion = 1;

inline void save_library(const ShapeLibrary& lib, const std::string& path) {
  binary_io::Writer w(kLibraryMagic, kLibraryVersion);
  w.u32(static_cast<std::uint32_t>(lib.config.segment_len));
  w.u32(static_cast<std::uint32_t>(lib.config.stride));
  w.u32(static_cast<std::uint32_t>(lib.centroids.size()));
  w.f64(lib.error_mean);
  w.f64(lib.error_std);
  for (const auto& c : lib.centroids) w.f64s(c);
  w.save(path);
}

inline ShapeLibrary load_library(const std::string& path) {
  binary_io::Reader r(binary_io::read_file(path), kLibraryMagic, kLibraryVersion);
  ShapeLibrary lib;
  lib.config.segment_len = r.u32();
  lib.config.stride = r.u32();
  lib.config.k = r.u32();
  lib.error_mean = r.f64();
  lib.error_std = r.f64();
  lib.config.validate();
  for (std::size_t j = 0; j < lib.config.k; ++j) lib.centroids.push_back(r.f64s(lib.config.segment_len));
  r.expect_end();
  return lib;
}

inline void write_report_csv(const AnomalyReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path + " for writing");
  out << "sample_idx,error,above_threshold\n";
  char buf[64];
  for (std::size_t i = 0; i < report.error_series.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", report.error_series[i]);
    out << i << ',' << buf << ',' << (report.error_series[i] > report.threshold ? 1 : 0) << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "write failed on " + path);
}

}  // namespace csi_sentry::anomaly
