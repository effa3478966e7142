#pragma once

// Little-endian flat-file helpers for model and library files:
// 4 magic bytes, u32 format version, then fields in declaration order.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csi_sentry/error.hpp"

namespace csi_sentry::binary_io {

class Writer {
 public:
  Writer(std::string_view magic, std::uint32_t version) {
    bytes_.insert(bytes_.end(), magic.begin(), magic.end());
    u32(version);
  }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw Error(Errc::IoFailure, "write failed on " + path);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Peeks the 4-byte magic of a file, empty if shorter.
inline std::string file_magic(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 4) return {};
  return std::string(bytes.begin(), bytes.begin() + 4);
}

class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string_view magic, std::uint32_t version)
      : bytes_(std::move(bytes)) {
    if (bytes_.size() < magic.size() || std::memcmp(bytes_.data(), magic.data(), magic.size()) != 0) {
      throw Error(Errc::BadFormat, "bad magic, expected " + std::string(magic));
    }
    pos_ = magic.size();
    const std::uint32_t v = u32();
    if (v != version) {
      throw Error(Errc::BadFormat, "unsupported format version " + std::to_string(v));
    }
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::size_t n) {
    need(8 * n);
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) throw Error(Errc::BadFormat, "trailing bytes after model data");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::BadFormat, "file truncated");
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace csi_sentry::binary_io
