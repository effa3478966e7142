#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csi_sentry/error.hpp"
#include "csi_sentry/wire.hpp"

namespace csi_sentry::dsp {

struct AmplitudeRecord {
  std::uint64_t packet_id = 0;
  std::uint64_t timestamp_us = 0;
  double amplitude_db = 0.0;
  double amplitude_smoothed = 0.0;
  double variance = 0.0;

  bool operator==(const AmplitudeRecord&) const = default;
};

struct DspConfig {
  std::size_t variance_window = 20;
  std::size_t smoothing_window = 5;
  std::size_t subcarrier = 0;
  double db_floor = -100.0;

  void validate() const {
    if (variance_window < 2) throw Error(Errc::BadWindow, "variance window must be >= 2");
    if (smoothing_window < 1) throw Error(Errc::BadWindow, "smoothing window must be >= 1");
    if (subcarrier >= wire::kSubcarriers) throw Error(Errc::IndexOutOfRange, "subcarrier " + std::to_string(subcarrier));
  }
};

// Total received power in dBm from the per-antenna RSSI readings, AGC-corrected.
inline double total_rss_dbm(const wire::CsiHeader& h) {
  double linear = 0.0;
  for (std::uint8_t r : {h.rssi_a, h.rssi_b, h.rssi_c}) {
    if (r != 0) linear += std::pow(10.0, r / 10.0);
  }
  if (linear == 0.0) throw Error(Errc::InvalidScale, "all rssi fields are zero");
  return 10.0 * std::log10(linear) - 44.0 - h.agc;
}

inline double csi_power(const wire::CsiMatrix& m) {
  double p = 0.0;
  for (const auto& e : m.entries()) p += static_cast<double>(e.re) * e.re + static_cast<double>(e.im) * e.im;
  return p;
}

// Linear power factor mapping raw CSI to absolute units; scaled entry = raw * sqrt(scale).
inline double compute_scale(const wire::CsiHeader& header, const wire::CsiMatrix& matrix) {
  const double rss_dbm = total_rss_dbm(header);
  const double pwr = csi_power(matrix);
  if (pwr == 0.0) throw Error(Errc::ZeroPower, "CSI matrix has zero power");
  return std::pow(10.0, rss_dbm / 10.0) / (pwr / static_cast<double>(wire::kSubcarriers));
}

// Frobenius norm of the scaled subcarrier slice, in dB, clamped at db_floor.
inline double amplitude_db(const wire::CsiPacket& packet, const DspConfig& cfg = {}) {
  const double scale = compute_scale(packet.header, packet.matrix);
  const auto slice = wire::extract_subcarrier(packet, cfg.subcarrier);
  double sq = 0.0;
  for (const auto& v : slice.values) sq += std::norm(v);
  const double a = std::sqrt(sq * scale);
  if (a <= std::pow(10.0, cfg.db_floor / 20.0)) return cfg.db_floor;
  return 20.0 * std::log10(a);
}

// Causal moving average; the first window-1 outputs average the available prefix.
class MovingAverage {
 public:
  explicit MovingAverage(std::size_t window = 5) : ring_(window) {
    if (window < 1) throw Error(Errc::BadWindow, "moving average window must be >= 1");
  }

  double push(double x) {
    ring_[head_] = x;
    head_ = (head_ + 1) % ring_.size();
    if (count_ < ring_.size()) ++count_;
    // Offsets from one member keep a constant window exactly constant.
    const double ref = ring_[0];
    double sum = 0.0;
    for (std::size_t i = 0; i < count_; ++i) sum += ring_[i] - ref;
    return ref + sum / static_cast<double>(count_);
  }

 private:
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

// Population variance over the last W samples (fewer during warmup). Two-pass
// over the window on every push.
class SlidingVariance {
 public:
  explicit SlidingVariance(std::size_t window = 20) : ring_(window) {
    if (window < 2) throw Error(Errc::BadWindow, "variance window must be >= 2, got " + std::to_string(window));
  }

  double push(double x) {
    ring_[head_] = x;
    head_ = (head_ + 1) % ring_.size();
    if (count_ < ring_.size()) ++count_;
    const double n = static_cast<double>(count_);
    // Shifted two-pass: a constant window gives exactly 0.
    const double ref = ring_[0];
    double mean = 0.0;
    for (std::size_t i = 0; i < count_; ++i) mean += ring_[i] - ref;
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < count_; ++i) {
      const double d = (ring_[i] - ref) - mean;
      ss += d * d;
    }
    return ss / n;
  }

 private:
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

inline std::vector<double> moving_average(std::span<const double> in, std::size_t window = 5) {
  MovingAverage ma(window);
  std::vector<double> out;
  out.reserve(in.size());
  for (double x : in) out.push_back(ma.push(x));
  return out;
}

inline std::vector<double> windowed_variance(std::span<const double> in, std::size_t window = 20) {
  SlidingVariance sv(window);
  std::vector<double> out;
  out.reserve(in.size());
  for (double x : in) out.push_back(sv.push(x));
  return out;
}

// Packet -> AmplitudeRecord, keeping the smoothing and variance state of one stream.
class AmplitudeTracker {
 public:
  // Ids continue after `last_id`, so a tracker can resume an existing log.
  explicit AmplitudeTracker(DspConfig cfg = {}, std::uint64_t last_id = 0)
      : cfg_((cfg.validate(), cfg)), smoother_(cfg.smoothing_window), variance_(cfg.variance_window),
        first_id_(last_id + 1), last_id_(last_id) {}

  AmplitudeRecord process(const wire::CsiPacket& packet) {
    AmplitudeRecord rec;
    rec.amplitude_db = amplitude_db(packet, cfg_);
    rec.packet_id = ++last_id_;
    // The header tick is 32-bit; unwrap it so stored timestamps stay monotone.
    if (rec.packet_id > first_id_ && packet.header.timestamp < last_tick_) wraps_ += 1;
    last_tick_ = packet.header.timestamp;
    rec.timestamp_us = (wraps_ << 32) | packet.header.timestamp;
    rec.amplitude_smoothed = smoother_.push(rec.amplitude_db);
    rec.variance = variance_.push(rec.amplitude_db);
    return rec;
  }

  const DspConfig& config() const { return cfg_; }

 private:
  DspConfig cfg_;
  MovingAverage smoother_;
  SlidingVariance variance_;
  std::uint64_t first_id_ = 1;
  std::uint64_t last_id_ = 0;
  std::uint32_t last_tick_ = 0;
  std::uint64_t wraps_ = 0;
};

}  // namespace csi_sentry::dsp
