#pragma once

// Append-only amplitude log.
//
// The log is a CSV text file: one header line, then one line per record,
//
//   packet_id,timestamp_us,amplitude_db,amplitude_smoothed,variance
//
// with doubles written at round-trip precision. Every append is a single
// write(2) of one complete line, so a reader (or a reopen after the writer was
// killed) sees a prefix of complete lines plus at most one unterminated tail,
// which is ignored.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "csi_sentry/dsp.hpp"
#include "csi_sentry/error.hpp"

namespace csi_sentry::store {

using dsp::AmplitudeRecord;

inline constexpr std::string_view kCsvHeader = "packet_id,timestamp_us,amplitude_db,amplitude_smoothed,variance";

namespace detail {

template <typename T>
bool parse_field(std::string_view& rest, T& out, bool last) {
  const auto comma = rest.find(',');
  if (last != (comma == std::string_view::npos)) return false;
  const std::string_view field = last ? rest : rest.substr(0, comma);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || ptr != field.data() + field.size()) return false;
  rest = last ? std::string_view() : rest.substr(comma + 1);
  return true;
}

inline std::optional<AmplitudeRecord> parse_row(std::string_view line) {
  AmplitudeRecord r;
  std::string_view rest = line;
  if (parse_field(rest, r.packet_id, false) && parse_field(rest, r.timestamp_us, false) &&
      parse_field(rest, r.amplitude_db, false) && parse_field(rest, r.amplitude_smoothed, false) &&
      parse_field(rest, r.variance, true)) {
    return r;
  }
  return std::nullopt;
}

inline std::string format_row(const AmplitudeRecord& r, int precision) {
  char buf[160];
  const int n = std::snprintf(buf, sizeof buf, "%llu,%llu,%.*g,%.*g,%.*g\n",
                              static_cast<unsigned long long>(r.packet_id),
                              static_cast<unsigned long long>(r.timestamp_us), precision, r.amplitude_db, precision,
                              r.amplitude_smoothed, precision, r.variance);
  return std::string(buf, static_cast<std::size_t>(n));
}

struct Loaded {
  std::vector<AmplitudeRecord> rows;
  std::size_t complete_bytes = 0;  // length of the prefix made of whole lines
  bool has_header = false;
};

inline Loaded load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Loaded out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // unterminated tail
    const std::string_view line(text.data() + pos, nl - pos);
    ++line_no;
    if (line_no == 1) {
      if (line != kCsvHeader) throw Error(Errc::BadFormat, path + ": unexpected header");
      out.has_header = true;
    } else {
      auto row = parse_row(line);
      if (!row) throw Error(Errc::BadFormat, path + ":" + std::to_string(line_no) + ": malformed row");
      if (!out.rows.empty() && row->packet_id <= out.rows.back().packet_id) {
        throw Error(Errc::BadFormat, path + ":" + std::to_string(line_no) + ": packet_id not increasing");
      }
      out.rows.push_back(*row);
    }
    pos = nl + 1;
  }
  out.complete_bytes = pos;
  return out;
}

inline void write_all(int fd, std::string_view data, const std::string& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::IoFailure, path + ": " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace detail

struct OpenOptions {
  // fsync after every append; without it an acknowledged row survives a
  // process kill but not a power loss.
  bool sync_each_append = false;
};

class RecordLog {
 public:
  // Opens (creating if needed) a log for appending. A partial trailing line
  // left by a killed writer is cut off.
  static RecordLog open(const std::string& path, OpenOptions options = {}) {
    RecordLog log(path, options);
    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(Errc::IoFailure, path + ": " + std::strerror(errno));
    log.fd_ = fd;
    auto loaded = detail::load(path);
    if (::ftruncate(fd, static_cast<off_t>(loaded.complete_bytes)) != 0 ||
        ::lseek(fd, 0, SEEK_END) < 0) {
      throw Error(Errc::IoFailure, path + ": " + std::strerror(errno));
    }
    if (!loaded.has_header) detail::write_all(fd, std::string(kCsvHeader) + "\n", path);
    log.rows_ = std::move(loaded.rows);
    return log;
  }

  // Read-only snapshot: every complete row currently in the file.
  static RecordLog open_read_only(const std::string& path) {
    RecordLog log(path, {});
    log.rows_ = detail::load(path).rows;
    return log;
  }

  RecordLog(RecordLog&& o) noexcept
      : path_(std::move(o.path_)), options_(o.options_), fd_(std::exchange(o.fd_, -1)), rows_(std::move(o.rows_)) {}
  RecordLog& operator=(RecordLog&& o) noexcept {
    if (this != &o) {
      close();
      path_ = std::move(o.path_);
      options_ = o.options_;
      fd_ = std::exchange(o.fd_, -1);
      rows_ = std::move(o.rows_);
    }
    return *this;
  }
  RecordLog(const RecordLog&) = delete;
  RecordLog& operator=(const RecordLog&) = delete;
  ~RecordLog() { close(); }

  // Returns once the row has been handed to the kernel (and synced, if asked).
  void append(const AmplitudeRecord& rec) {
    if (fd_ < 0) throw Error(Errc::IoFailure, path_ + ": log is read-only");
    if (!rows_.empty() && rec.packet_id <= rows_.back().packet_id) {
      throw Error(Errc::OutOfOrder, "packet_id " + std::to_string(rec.packet_id) + " after " +
                                        std::to_string(rows_.back().packet_id));
    }
    detail::write_all(fd_, detail::format_row(rec, 17), path_);
    if (options_.sync_each_append && ::fsync(fd_) != 0) {
      throw Error(Errc::IoFailure, path_ + ": fsync: " + std::strerror(errno));
    }
    rows_.push_back(rec);
  }

  // Records with t0 <= timestamp_us <= t1, in packet_id order.
  std::vector<AmplitudeRecord> query_range(std::uint64_t t0, std::uint64_t t1) const {
    if (t0 > t1) throw Error(Errc::BadRange, "t0 > t1");
    std::vector<AmplitudeRecord> out;
    for (const auto& r : rows_) {
      if (r.timestamp_us >= t0 && r.timestamp_us <= t1) out.push_back(r);
    }
    return out;
  }

  const std::vector<AmplitudeRecord>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  std::optional<std::uint64_t> last_packet_id() const {
    if (rows_.empty()) return std::nullopt;
    return rows_.back().packet_id;
  }
  const std::string& path() const { return path_; }

 private:
  RecordLog(std::string path, OpenOptions options) : path_(std::move(path)), options_(options) {}

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::string path_;
  OpenOptions options_;
  int fd_ = -1;
  std::vector<AmplitudeRecord> rows_;
};

// Same columns as the log, floats at 6 significant digits. Returns data rows written.
inline std::size_t export_csv(const RecordLog& log, const std::string& out_path) {
  std::string text(kCsvHeader);
  text += '\n';
  for (const auto& r : log.rows()) text += detail::format_row(r, 6);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + out_path + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "write failed on " + out_path);
  return log.size();
}

// Reads a CSV produced by export_csv (or a log file) back into records.
inline std::vector<AmplitudeRecord> import_csv(const std::string& path) { return detail::load(path).rows; }

}  // namespace csi_sentry::store
