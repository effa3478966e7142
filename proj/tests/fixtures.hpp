#pragma once

// Seeded random inputs shared by the unit and acceptance suites.

#include <random>
#include <vector>

#include "csi_sentry/classify/dataset.hpp"
#include "csi_sentry/wire.hpp"

namespace fixtures {

inline csi_sentry::wire::CsiPacket random_packet(std::mt19937_64& rng) {
  using namespace csi_sentry::wire;
  std::uniform_int_distribution<int> dim(1, 3);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::uint32_t> u32;
  CsiHeader h;
  h.timestamp = u32(rng);
  h.bfee_count = static_cast<std::uint16_t>(u32(rng));
  h.ntx = static_cast<std::uint8_t>(dim(rng));
  h.nrx = static_cast<std::uint8_t>(dim(rng));
  h.rssi_a = static_cast<std::uint8_t>(byte(rng));
  h.rssi_b = static_cast<std::uint8_t>(byte(rng));
  h.rssi_c = static_cast<std::uint8_t>(byte(rng));
  h.noise = static_cast<std::int8_t>(byte(rng) - 128);
  h.agc = static_cast<std::uint8_t>(byte(rng));
  h.antenna_sel = static_cast<std::uint8_t>(byte(rng));
  h.rate = static_cast<std::uint16_t>(u32(rng));
  CsiPacket p = make_packet(h);
  for (auto& e : p.matrix.entries()) {
    e.re = static_cast<std::int8_t>(byte(rng) - 128);
    e.im = static_cast<std::int8_t>(byte(rng) - 128);
  }
  return p;
}

inline std::vector<double> random_series(std::mt19937_64& rng, std::size_t n, double lo = -50.0, double hi = 50.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline csi_sentry::classify::ActivitySample activity_sample(csi_sentry::classify::Activity label, std::size_t steps,
                                                            std::size_t channels, std::vector<double> values) {
  return {label, steps, channels, std::move(values)};
}

// One channel, two classes: level -1 (sit) or +1 (walk) plus small jitter.
inline std::vector<csi_sentry::classify::ActivitySample> toy_two_class(std::size_t per_class, std::uint64_t seed) {
  using csi_sentry::classify::Activity;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  std::vector<csi_sentry::classify::ActivitySample> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool up = i % 2;
    std::vector<double> v(16);
    for (auto& x : v) x = (up ? 1.0 : -1.0) + jitter(rng);
    out.push_back(activity_sample(up ? Activity::Walk : Activity::Sit, 16, 1, std::move(v)));
  }
  return out;
}

}  // namespace fixtures
