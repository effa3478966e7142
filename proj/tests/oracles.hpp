#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library's numeric code; each function restates its definition in
// the most direct (and slowest) form.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "csi_sentry/error.hpp"

#define EXPECT_ERRC(stmt, errc)                                         \
  do {                                                                  \
    try {                                                               \
      stmt;                                                             \
      ADD_FAILURE() << "expected " << csi_sentry::errc_name(errc);      \
    } catch (const csi_sentry::Error& e_) {                             \
      EXPECT_EQ(e_.code(), errc) << e_.what();                          \
    }                                                                   \
  } while (0)

namespace oracle {

// Byte offset of payload entry (k, tx, rx) inside an encoded record.
inline std::size_t entry_offset(std::size_t k, std::size_t tx, std::size_t rx, std::size_t ntx, std::size_t nrx) {
  return 20 + 2 * (k * ntx * nrx + tx * nrx + rx);
}

inline std::complex<double> entry_at(const std::vector<std::uint8_t>& bytes, std::size_t k, std::size_t tx,
                                     std::size_t rx) {
  const std::size_t nrx = bytes[7];
  const std::size_t ntx = bytes[8];
  const std::size_t off = entry_offset(k, tx, rx, ntx, nrx);
  return {static_cast<double>(static_cast<std::int8_t>(bytes[off])),
          static_cast<double>(static_cast<std::int8_t>(bytes[off + 1]))};
}

// Mean of in[max(0, i-w+1) .. i], recomputed from scratch per index.
inline std::vector<double> windowed_mean(const std::vector<double>& in, std::size_t w) {
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += in[j];
    out[i] = s / static_cast<double>(i - lo + 1);
  }
  return out;
}

// Two-pass population variance of each trailing window.
inline std::vector<double> windowed_variance(const std::vector<double>& in, std::size_t w) {
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
    const double n = static_cast<double>(i - lo + 1);
    double mean = 0.0;
    for (std::size_t j = lo; j <= i; ++j) mean += in[j];
    mean /= n;
    double ss = 0.0;
    for (std::size_t j = lo; j <= i; ++j) ss += (in[j] - mean) * (in[j] - mean);
    out[i] = ss / n;
  }
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double population_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Probability that a random positive scores above a random negative, ties
// counting half. Quadratic on purpose: it is the definition.
inline double roc_auc_bruteforce(const std::vector<double>& score, const std::vector<bool>& label) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (!label[i]) continue;
    for (std::size_t j = 0; j < score.size(); ++j) {
      if (label[j]) continue;
      pairs += 1.0;
      if (score[i] > score[j]) wins += 1.0;
      else if (score[i] == score[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Same quantity by rank sums (average ranks for ties), for large inputs.
inline double roc_auc(const std::vector<double>& score, const std::vector<bool>& label) {
  const std::size_t n = score.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && score[idx[j + 1]] == score[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
    i = j + 1;
  }
  double pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i]) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "csi_sentry_test_XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
