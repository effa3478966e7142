#pragma once

// Activity dataset file: one sample per line,
//
//   label|v(0,0),v(0,1),...;v(1,0),v(1,1),...;...
//
// label, a pipe, then time steps separated by ';' with the F channel values of
// each step separated by ','. Blank lines are skipped.

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "csi_sentry/error.hpp"

namespace csi_sentry::classify {

// Index order is normative: confusion matrices and LSTM output slots use it.
enum class Activity : std::uint8_t { LieDown = 0, PickUp, Run, Sit, StandUp, Walk };

inline constexpr std::size_t kNumClasses = 6;
inline constexpr std::size_t kMinSteps = 8;

inline constexpr std::array<std::string_view, kNumClasses> kActivityNames = {"lie_down", "pick_up", "run",
                                                                              "sit",      "stand_up", "walk"};

constexpr std::size_t index_of(Activity a) { return static_cast<std::size_t>(a); }
constexpr Activity activity_at(std::size_t i) { return static_cast<Activity>(i); }
constexpr std::string_view activity_name(Activity a) { return kActivityNames[index_of(a)]; }

inline std::optional<Activity> parse_activity(std::string_view s) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kActivityNames[i] == s) return activity_at(i);
  }
  return std::nullopt;
}

// T x F real matrix, row-major.
struct ActivitySample {
  Activity label = Activity::LieDown;
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t f) const { return values[t * channels + f]; }
  std::vector<double> channel(std::size_t f) const {
    std::vector<double> out(steps);
    for (std::size_t t = 0; t < steps; ++t) out[t] = at(t, f);
    return out;
  }
};

namespace detail {

inline Error malformed(std::size_t line_no, const std::string& why) {
  return Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

}  // namespace detail

inline ActivitySample parse_sample_line(std::string_view line, std::size_t line_no) {
  const auto bar = line.find('|');
  if (bar == std::string_view::npos) throw detail::malformed(line_no, "missing '|'");
  const std::string_view label = line.substr(0, bar);
  const auto act = parse_activity(label);
  if (!act) throw Error(Errc::UnknownLabel, "line " + std::to_string(line_no) + ": '" + std::string(label) + "'");

  ActivitySample s;
  s.label = *act;
  std::string_view rest = line.substr(bar + 1);
  while (true) {
    const auto semi = rest.find(';');
    const std::string_view step = rest.substr(0, semi);
    std::size_t f = 0;
    std::string_view vals = step;
    while (true) {
      const auto comma = vals.find(',');
      const std::string_view tok = vals.substr(0, comma);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw detail::malformed(line_no, "bad value '" + std::string(tok) + "' at step " + std::to_string(s.steps));
      }
      s.values.push_back(v);
      ++f;
      if (comma == std::string_view::npos) break;
      vals = vals.substr(comma + 1);
    }
    if (s.steps == 0) {
      s.channels = f;
    } else if (f != s.channels) {
      throw detail::malformed(line_no, "step " + std::to_string(s.steps) + " has " + std::to_string(f) +
                                           " channels, expected " + std::to_string(s.channels));
    }
    ++s.steps;
    if (semi == std::string_view::npos) break;
    rest = rest.substr(semi + 1);
  }
  if (s.steps < kMinSteps) {
    throw detail::malformed(line_no, std::to_string(s.steps) + " time steps, need at least " + std::to_string(kMinSteps));
  }
  return s;
}

inline std::vector<ActivitySample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
  std::vector<ActivitySample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ActivitySample s = parse_sample_line(line, line_no);
    if (!out.empty() && s.channels != out.front().channels) {
      throw Error(Errc::InconsistentF, "line " + std::to_string(line_no) + ": " + std::to_string(s.channels) +
                                           " channels, earlier samples have " +
                                           std::to_string(out.front().channels));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void save_dataset(const std::string& path, const std::vector<ActivitySample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path + " for writing");
  char buf[32];
  for (const auto& s : samples) {
    out << activity_name(s.label) << '|';
    for (std::size_t t = 0; t < s.steps; ++t) {
      if (t) out << ';';
      for (std::size_t f = 0; f < s.channels; ++f) {
        if (f) out << ',';
        std::snprintf(buf, sizeof buf, "%.17g", s.at(t, f));
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "write failed on " + path);
}

inline std::array<std::size_t, kNumClasses> class_counts(const std::vector<ActivitySample>& samples) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& s : samples) ++counts[index_of(s.label)];
  return counts;
}

using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion{};  // rows = true class, columns = predicted
};

inline Evaluation evaluate(const std::function<Activity(const ActivitySample&)>& predict,
                           const std::vector<ActivitySample>& test) {
  if (test.empty()) throw Error(Errc::EmptyDataset, "empty test set");
  Evaluation ev;
  std::size_t correct = 0;
  for (const auto& s : test) {
    const Activity p = predict(s);
    ++ev.confusion[index_of(s.label)][index_of(p)];
    if (p == s.label) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return ev;
}

}  // namespace csi_sentry::classify
