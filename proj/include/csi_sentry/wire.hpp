#pragma once

// CSI record codec.
//
// One record is a 20-byte little-endian header followed by the CSI payload:
//
//   offset  size  field         notes
//   0       4     timestamp     u32 microsecond tick
//   4       2     bfee_count    u16
//   6       1     (reserved)    written as 0, ignored on decode
//   7       1     nrx           1..3
//   8       1     ntx           1..3
//   9       1     rssi_a        u8 dB, 0 = antenna unused
//   10      1     rssi_b        u8
//   11      1     rssi_c        u8
//   12      1     noise         i8 dBm
//   13      1     agc           u8 dB
//   14      1     antenna_sel   u8
//   15      1     (reserved)    written as 0, ignored on decode
//   16      2     length        u16, == 2 * 30 * ntx * nrx
//   18      2     rate          u16
//   20      n     payload       (re, im) int8 pairs, subcarrier-major, then tx, then rx

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csi_sentry/error.hpp"

namespace csi_sentry::wire {

inline constexpr std::size_t kHeaderSize = 20;
inline constexpr std::size_t kSubcarriers = 30;
inline constexpr std::uint8_t kMaxAntennas = 3;
inline constexpr std::size_t kMaxRecordSize = kHeaderSize + 2 * kSubcarriers * kMaxAntennas * kMaxAntennas;

using Bytes = std::vector<std::uint8_t>;

struct CsiHeader {
  std::uint32_t timestamp = 0;
  std::uint16_t bfee_count = 0;
  std::uint8_t nrx = 1;
  std::uint8_t ntx = 1;
  std::uint8_t rssi_a = 0;
  std::uint8_t rssi_b = 0;
  std::uint8_t rssi_c = 0;
  std::int8_t noise = 0;
  std::uint8_t agc = 0;
  std::uint8_t antenna_sel = 0;
  std::uint16_t length = 0;
  std::uint16_t rate = 0;

  bool operator==(const CsiHeader&) const = default;
};

// One raw CSI entry exactly as the NIC reports it.
struct Iq {
  std::int8_t re = 0;
  std::int8_t im = 0;

  std::complex<double> value() const { return {static_cast<double>(re), static_cast<double>(im)}; }
  bool operator==(const Iq&) const = default;
};

constexpr std::size_t payload_length(std::size_t ntx, std::size_t nrx) { return 2 * kSubcarriers * ntx * nrx; }

constexpr bool dims_valid(unsigned ntx, unsigned nrx) {
  return ntx >= 1 && ntx <= kMaxAntennas && nrx >= 1 && nrx <= kMaxAntennas;
}

// 30 matrices of ntx x nrx complex entries.
class CsiMatrix {
 public:
  CsiMatrix() : CsiMatrix(1, 1) {}
  CsiMatrix(std::uint8_t ntx, std::uint8_t nrx) : ntx_(ntx), nrx_(nrx) {
    if (!dims_valid(ntx, nrx)) {
      throw Error(Errc::BadDims, "ntx=" + std::to_string(ntx) + " nrx=" + std::to_string(nrx));
    }
    entries_.resize(kSubcarriers * ntx * nrx);
  }

  std::uint8_t ntx() const { return ntx_; }
  std::uint8_t nrx() const { return nrx_; }

  Iq& at(std::size_t k, std::size_t tx, std::size_t rx) { return entries_[index(k, tx, rx)]; }
  const Iq& at(std::size_t k, std::size_t tx, std::size_t rx) const { return entries_[index(k, tx, rx)]; }

  std::span<Iq> entries() { return entries_; }
  std::span<const Iq> entries() const { return entries_; }

  std::size_t serialized_size() const { return 2 * entries_.size(); }

  bool operator==(const CsiMatrix&) const = default;

 private:
  std::size_t index(std::size_t k, std::size_t tx, std::size_t rx) const {
    if (k >= kSubcarriers || tx >= ntx_ || rx >= nrx_) {
      throw Error(Errc::IndexOutOfRange, "entry (" + std::to_string(k) + "," + std::to_string(tx) + "," +
                                             std::to_string(rx) + ")");
    }
    return (k * ntx_ + tx) * nrx_ + rx;
  }

  std::uint8_t ntx_;
  std::uint8_t nrx_;
  std::vector<Iq> entries_;
};

struct CsiPacket {
  CsiHeader header;
  CsiMatrix matrix;

  bool operator==(const CsiPacket&) const = default;
};

// Builds a packet with a zeroed matrix and a consistent length field.
inline CsiPacket make_packet(CsiHeader header) {
  CsiPacket p{header, CsiMatrix(header.ntx, header.nrx)};
  p.header.length = static_cast<std::uint16_t>(p.matrix.serialized_size());
  return p;
}

namespace detail {

inline std::uint16_t load_u16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

inline std::uint32_t load_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

inline void store_u16(Bytes& b, std::size_t off, std::uint16_t v) {
  b[off] = static_cast<std::uint8_t>(v & 0xff);
  b[off + 1] = static_cast<std::uint8_t>(v >> 8);
}

inline void store_u32(Bytes& b, std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[off + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace detail

inline CsiPacket decode_packet(std::span<const std::uint8_t> bytes) {
  using namespace detail;
  if (bytes.size() < kHeaderSize) {
    throw Error(Errc::Truncated, "record has " + std::to_string(bytes.size()) + " bytes, header needs 20");
  }
  CsiHeader h;
  h.timestamp = load_u32(bytes, 0);
  h.bfee_count = load_u16(bytes, 4);
  h.nrx = bytes[7];
  h.ntx = bytes[8];
  h.rssi_a = bytes[9];
  h.rssi_b = bytes[10];
  h.rssi_c = bytes[11];
  h.noise = static_cast<std::int8_t>(bytes[12]);
  h.agc = bytes[13];
  h.antenna_sel = bytes[14];
  h.length = load_u16(bytes, 16);
  h.rate = load_u16(bytes, 18);

  if (!dims_valid(h.ntx, h.nrx)) {
    throw Error(Errc::BadDims, "ntx=" + std::to_string(h.ntx) + " nrx=" + std::to_string(h.nrx));
  }
  const std::size_t expected = payload_length(h.ntx, h.nrx);
  if (h.length != expected) {
    throw Error(Errc::LengthMismatch,
                "length field " + std::to_string(h.length) + ", expected " + std::to_string(expected));
  }
  if (bytes.size() < kHeaderSize + expected) {
    throw Error(Errc::Truncated, "payload needs " + std::to_string(expected) + " bytes, have " +
                                     std::to_string(bytes.size() - kHeaderSize));
  }

  CsiPacket p{h, CsiMatrix(h.ntx, h.nrx)};
  auto entries = p.matrix.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].re = static_cast<std::int8_t>(bytes[kHeaderSize + 2 * i]);
    entries[i].im = static_cast<std::int8_t>(bytes[kHeaderSize + 2 * i + 1]);
  }
  return p;
}

inline Bytes encode_packet(const CsiPacket& packet) {
  using namespace detail;
  const CsiHeader& h = packet.header;
  if (!dims_valid(h.ntx, h.nrx) || h.ntx != packet.matrix.ntx() || h.nrx != packet.matrix.nrx() ||
      h.length != payload_length(h.ntx, h.nrx)) {
    throw Error(Errc::BadDims, "header does not match matrix (ntx=" + std::to_string(h.ntx) +
                                   " nrx=" + std::to_string(h.nrx) + " length=" + std::to_string(h.length) + ")");
  }
  Bytes out(kHeaderSize + h.length, 0);
  store_u32(out, 0, h.timestamp);
  store_u16(out, 4, h.bfee_count);
  out[7] = h.nrx;
  out[8] = h.ntx;
  out[9] = h.rssi_a;
  out[10] = h.rssi_b;
  out[11] = h.rssi_c;
  out[12] = static_cast<std::uint8_t>(h.noise);
  out[13] = h.agc;
  out[14] = h.antenna_sel;
  store_u16(out, 16, h.length);
  store_u16(out, 18, h.rate);
  auto entries = packet.matrix.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out[kHeaderSize + 2 * i] = static_cast<std::uint8_t>(entries[i].re);
    out[kHeaderSize + 2 * i + 1] = static_cast<std::uint8_t>(entries[i].im);
  }
  return out;
}

// ntx x nrx complex slice of one subcarrier, row-major (tx rows, rx columns).
struct SubcarrierSlice {
  std::size_t ntx = 0;
  std::size_t nrx = 0;
  std::vector<std::complex<double>> values;

  const std::complex<double>& operator()(std::size_t tx, std::size_t rx) const { return values[tx * nrx + rx]; }
};

inline SubcarrierSlice extract_subcarrier(const CsiPacket& packet, std::size_t k = 0) {
  if (k >= kSubcarriers) {
    throw Error(Errc::IndexOutOfRange, "subcarrier " + std::to_string(k) + " (valid 0..29)");
  }
  const CsiMatrix& m = packet.matrix;
  SubcarrierSlice s{m.ntx(), m.nrx(), {}};
  s.values.reserve(s.ntx * s.nrx);
  for (std::size_t t = 0; t < s.ntx; ++t) {
    for (std::size_t r = 0; r < s.nrx; ++r) s.values.push_back(m.at(k, t, r).value());
  }
  return s;
}

}  // namespace csi_sentry::wire
