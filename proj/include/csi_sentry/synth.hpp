#pragma once

// Seeded synthetic CSI channel.
//
// A static complex channel H (30 x ntx x nrx) is drawn once per seed. Packet i
// at t = i / rate_hz carries
//
//   H * (1 + m(t)) + complex Gaussian noise,   m(t) = sum over covering events of a_m * sin(2 pi f_d t + phi)
//
// where phi is a per-entry phase drawn once from the seed. Entries are rounded
// and saturated to [-127, 127].

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "csi_sentry/classify/dataset.hpp"
#include "csi_sentry/error.hpp"
#include "csi_sentry/wire.hpp"

namespace csi_sentry::synth {

struct ChannelConfig {
  std::uint8_t ntx = 3;
  std::uint8_t nrx = 3;
  double base_amp_lo = 20.0;
  double base_amp_hi = 60.0;
  double noise_sigma = 1.0;
  double rate_hz = 100.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!wire::dims_valid(ntx, nrx)) throw Error(Errc::BadDims, "ntx/nrx must be in 1..3");
    if (!(base_amp_lo >= 0.0 && base_amp_lo <= base_amp_hi && base_amp_hi <= 90.0)) {
      throw Error(Errc::BadConfig, "base amplitude range must satisfy 0 <= lo <= hi <= 90");
    }
    if (!(noise_sigma >= 0.0)) throw Error(Errc::BadConfig, "noise_sigma must be >= 0");
    if (!(rate_hz > 0.0)) throw Error(Errc::BadConfig, "rate_hz must be > 0");
  }
};

struct MotionEvent {
  double t_start = 0.0;
  double t_end = 0.0;
  double depth = 0.5;
  double doppler_hz = 2.0;

  bool covers(double t) const { return t >= t_start && t < t_end; }
};

struct StaticChannel {
  std::uint8_t ntx = 0;
  std::uint8_t nrx = 0;
  std::vector<std::complex<double>> entries;  // same ordering as the wire payload
};

struct LabeledPacket {
  wire::CsiPacket packet;
  bool in_motion = false;
};

namespace detail {

// Independent, reproducible RNG streams derived from one user seed.
enum class Stream : std::uint64_t { Channel = 1, Phase = 2, Noise = 3, Activity = 4 };

inline std::mt19937_64 rng_for(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

inline std::int8_t saturate(double v) {
  return static_cast<std::int8_t>(std::clamp(std::round(v), -127.0, 127.0));
}

}  // namespace detail

inline StaticChannel gen_baseline(const ChannelConfig& cfg) {
  cfg.validate();
  auto rng = detail::rng_for(cfg.seed, detail::Stream::Channel);
  std::uniform_real_distribution<double> mag(cfg.base_amp_lo, cfg.base_amp_hi);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  StaticChannel ch{cfg.ntx, cfg.nrx, {}};
  const std::size_t n = wire::kSubcarriers * cfg.ntx * cfg.nrx;
  ch.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Degenerate ranges must give exactly lo, whatever the distribution does.
    const double m = cfg.base_amp_lo == cfg.base_amp_hi ? cfg.base_amp_lo : mag(rng);
    ch.entries.push_back(std::polar(m, phase(rng)));
  }
  return ch;
}

inline wire::CsiHeader synth_header(const ChannelConfig& cfg, std::size_t index) {
  wire::CsiHeader h;
  const double t_us = std::round(static_cast<double>(index) * 1e6 / cfg.rate_hz);
  h.timestamp = static_cast<std::uint32_t>(static_cast<std::uint64_t>(t_us) & 0xffffffffu);
  h.bfee_count = static_cast<std::uint16_t>(index & 0xffffu);
  h.nrx = cfg.nrx;
  h.ntx = cfg.ntx;
  h.rssi_a = h.rssi_b = h.rssi_c = 30;
  h.noise = -90;
  h.agc = 0;
  h.antenna_sel = 0;
  h.length = static_cast<std::uint16_t>(wire::payload_length(cfg.ntx, cfg.nrx));
  h.rate = 0x1c;
  return h;
}

inline std::size_t packet_count(double duration_s, double rate_hz) {
  return static_cast<std::size_t>(std::llround(duration_s * rate_hz));
}

inline std::vector<LabeledPacket> gen_stream(const ChannelConfig& cfg, double duration_s,
                                             const std::vector<MotionEvent>& events) {
  cfg.validate();
  if (!(duration_s >= 0.0)) throw Error(Errc::BadConfig, "duration must be >= 0");
  for (const auto& e : events) {
    if (!(e.t_start >= 0.0 && e.t_start < e.t_end && e.t_end <= duration_s)) {
      throw Error(Errc::EventOutOfRange, "event [" + std::to_string(e.t_start) + ", " + std::to_string(e.t_end) +
                                             "] outside [0, " + std::to_string(duration_s) + "]");
    }
    if (!(e.depth >= 0.0)) throw Error(Errc::BadConfig, "modulation depth must be >= 0");
  }

  const StaticChannel base = gen_baseline(cfg);
  const std::size_t n_entries = base.entries.size();

  auto phase_rng = detail::rng_for(cfg.seed, detail::Stream::Phase);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> entry_phase(n_entries);
  for (auto& p : entry_phase) p = phase(phase_rng);

  auto noise_rng = detail::rng_for(cfg.seed, detail::Stream::Noise);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n = packet_count(duration_s, cfg.rate_hz);
  std::vector<LabeledPacket> out;
  out.reserve(n);
  std::vector<const MotionEvent*> active;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / cfg.rate_hz;
    active.clear();
    for (const auto& e : events) {
      if (e.covers(t)) active.push_back(&e);
    }
    LabeledPacket lp{wire::make_packet(synth_header(cfg, i)), !active.empty()};
    auto entries = lp.packet.matrix.entries();
    for (std::size_t j = 0; j < n_entries; ++j) {
      double m = 0.0;
      for (const MotionEvent* e : active) {
        m += e->depth * std::sin(2.0 * std::numbers::pi * e->doppler_hz * t + entry_phase[j]);
      }
      const std::complex<double> h = base.entries[j] * (1.0 + m);
      // Always draw both components so the noise sequence does not depend on sigma.
      const double nr = noise(noise_rng);
      const double ni = noise(noise_rng);
      entries[j].re = detail::saturate(h.real() + cfg.noise_sigma * nr);
      entries[j].im = detail::saturate(h.imag() + cfg.noise_sigma * ni);
    }
    out.push_back(std::move(lp));
  }
  return out;
}

inline std::vector<wire::CsiPacket> packets_of(const std::vector<LabeledPacket>& stream) {
  std::vector<wire::CsiPacket> out;
  out.reserve(stream.size());
  for (const auto& lp : stream) out.push_back(lp.packet);
  return out;
}

// Sidecar CSV: timestamp_us,in_motion
inline void write_labels(const std::string& path, const std::vector<LabeledPacket>& stream) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path + " for writing");
  out << "timestamp_us,in_motion\n";
  for (const auto& lp : stream) out << lp.packet.header.timestamp << ',' << (lp.in_motion ? 1 : 0) << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed on " + path);
}

// ---------------------------------------------------------------------------
// Labeled activity windows

// Each class oscillates at its own frequency (cycles per sample), spread so
// that each lands in a different Haar band at the default four levels.
inline constexpr std::array<double, classify::kNumClasses> kActivityFrequencies = {0.02, 0.045, 0.09,
                                                                                   0.16, 0.26, 0.40};

struct ActivitySynthConfig {
  std::size_t per_class = 50;
  std::size_t steps = 64;
  std::size_t channels = 3;
  double noise_sigma = 0.3;
  std::uint64_t seed = 1;
};

// Samples cycle through the six classes in index order. Each channel is
// offset + A sin(2 pi f t + phi) + noise, with A, phi, offset and a +-5%
// frequency jitter drawn per sample and channel.
inline std::vector<classify::ActivitySample> gen_activity_dataset(const ActivitySynthConfig& cfg) {
  if (cfg.steps < classify::kMinSteps || cfg.channels == 0) {
    throw Error(Errc::BadConfig, "activity windows need >= 8 steps and >= 1 channel");
  }
  auto rng = detail::rng_for(cfg.seed, detail::Stream::Activity);
  std::uniform_real_distribution<double> amp(0.8, 1.2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> offset(-0.5, 0.5);
  std::uniform_real_distribution<double> jitter(0.95, 1.05);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<classify::ActivitySample> out;
  out.reserve(cfg.per_class * classify::kNumClasses);
  for (std::size_t i = 0; i < cfg.per_class * classify::kNumClasses; ++i) {
    classify::ActivitySample s;
    const std::size_t c = i % classify::kNumClasses;
    s.label = classify::activity_at(c);
    s.steps = cfg.steps;
    s.channels = cfg.channels;
    s.values.resize(cfg.steps * cfg.channels);
    for (std::size_t f = 0; f < cfg.channels; ++f) {
      const double a = amp(rng), ph = phase(rng), off = offset(rng);
      const double freq = kActivityFrequencies[c] * jitter(rng);
      for (std::size_t t = 0; t < cfg.steps; ++t) {
        s.values[t * cfg.channels + f] =
            off + a * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) + ph) +
            cfg.noise_sigma * noise(rng);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace csi_sentry::synth
