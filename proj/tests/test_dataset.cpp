#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "csi_sentry/classify/dataset.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

using namespace csi_sentry;
using namespace csi_sentry::classify;

std::string steps_text(std::size_t steps, std::size_t channels, double base = 0.0) {
  std::string out;
  for (std::size_t t = 0; t < steps; ++t) {
    if (t) out += ';';
    for (std::size_t f = 0; f < channels; ++f) {
      if (f) out += ',';
      out += std::to_string(base + static_cast<double>(t) + 0.25 * static_cast<double>(f));
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

TEST(Dataset, ClassOrderIsFixed) {
  EXPECT_EQ(kActivityNames[0], "lie_down");
  EXPECT_EQ(kActivityNames[1], "pick_up");
  EXPECT_EQ(kActivityNames[2], "run");
  EXPECT_EQ(kActivityNames[3], "sit");
  EXPECT_EQ(kActivityNames[4], "stand_up");
  EXPECT_EQ(kActivityNames[5], "walk");
  EXPECT_EQ(parse_activity("walk"), Activity::Walk);
  EXPECT_EQ(parse_activity("Walk"), std::nullopt);
}

TEST(Dataset, ValidWalkLine) {
  const auto s = parse_sample_line("walk|" + steps_text(10, 2), 1);
  EXPECT_EQ(s.label, Activity::Walk);
  EXPECT_EQ(s.steps, 10u);
  EXPECT_EQ(s.channels, 2u);
  EXPECT_EQ(s.at(3, 1), 3.25);
  EXPECT_EQ(s.channel(0)[9], 9.0);
}

TEST(Dataset, UnknownLabel) {
  EXPECT_ERRC(parse_sample_line("jump|" + steps_text(8, 1), 1), Errc::UnknownLabel);
}

TEST(Dataset, MalformedLinesCarryLineNumber) {
  for (const std::string& bad : std::vector<std::string>{std::string("walk ") + steps_text(8, 1), "walk|" + steps_text(7, 1),
                                "walk|" + steps_text(8, 1) + ";", "walk|1,2;3;4,5;6,7;8,9;1,2;3,4;5,6",
                                "walk|" + steps_text(8, 1) + "x", std::string("walk|")}) {
    try {
      parse_sample_line(bad, 17);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedLine) << bad;
      EXPECT_NE(std::string(e.what()).find("line 17"), std::string::npos) << e.what();
    }
  }
}

TEST(Dataset, InconsistentChannelsAcrossLines) {
  oracle::TempDir dir;
  write_text(dir.file("d.txt"), "sit|" + steps_text(8, 2) + "\nrun|" + steps_text(8, 3) + "\n");
  EXPECT_ERRC(load_dataset(dir.file("d.txt")), Errc::InconsistentF);
}

TEST(Dataset, RaggedLengthsAllowedAndBlankLinesSkipped) {
  oracle::TempDir dir;
  write_text(dir.file("d.txt"), "sit|" + steps_text(8, 1) + "\n\n  \r\nrun|" + steps_text(20, 1) + "\r\n");
  const auto d = load_dataset(dir.file("d.txt"));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[1].steps, 20u);
}

TEST(Dataset, MissingFile) {
  oracle::TempDir dir;
  EXPECT_ERRC(load_dataset(dir.file("none.txt")), Errc::IoFailure);
}

TEST(Dataset, MixedFileCountsMatchLineCount) {
  oracle::TempDir dir;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> cls(0, kNumClasses - 1);
  std::uniform_int_distribution<std::size_t> len(8, 40);
  std::string text;
  for (int i = 0; i < 60; ++i) {
    text += std::string(kActivityNames[cls(rng)]) + "|" + steps_text(len(rng), 3, i) + "\n";
  }
  write_text(dir.file("d.txt"), text);
  const auto counts = class_counts(load_dataset(dir.file("d.txt")));
  std::istringstream lines(text);
  std::string line;
  std::array<std::size_t, kNumClasses> expected{};
  while (std::getline(lines, line)) {
    const std::string label = line.substr(0, line.find('|'));
    for (std::size_t c = 0; c < kNumClasses; ++c) expected[c] += label == kActivityNames[c];
  }
  EXPECT_EQ(counts, expected);
}

TEST(Dataset, SaveLoadRoundTrip) {
  oracle::TempDir dir;
  std::mt19937_64 rng(6);
  std::vector<ActivitySample> data;
  for (std::size_t i = 0; i < 12; ++i) {
    data.push_back(fixtures::activity_sample(activity_at(i % 6), 8 + i, 2, fixtures::random_series(rng, 2 * (8 + i))));
  }
  save_dataset(dir.file("d.txt"), data);
  const auto back = load_dataset(dir.file("d.txt"));
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].label, data[i].label);
    EXPECT_EQ(back[i].steps, data[i].steps);
    EXPECT_EQ(back[i].values, data[i].values);
  }
}

TEST(Evaluate, OraclePredictorIsPerfect) {
  const auto data = fixtures::toy_two_class(5, 1);
  const auto ev = evaluate([](const ActivitySample& s) { return s.label; }, data);
  EXPECT_EQ(ev.accuracy, 1.0);
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (r != c) {
        EXPECT_EQ(ev.confusion[r][c], 0u);
      }
    }
  }
  EXPECT_EQ(ev.confusion[index_of(Activity::Sit)][index_of(Activity::Sit)], 5u);
}

TEST(Evaluate, EmptyTestSet) {
  EXPECT_ERRC(evaluate([](const ActivitySample& s) { return s.label; }, {}), Errc::EmptyDataset);
}

TEST(Evaluate, FixedPredictionsMatchHandCount) {
  // True: sit walk sit walk sit walk sit walk; predicted always sit.
  const auto data = fixtures::toy_two_class(4, 1);
  const auto ev = evaluate([](const ActivitySample&) { return Activity::Sit; }, data);
  EXPECT_EQ(ev.accuracy, 0.5);
  EXPECT_EQ(ev.confusion[index_of(Activity::Walk)][index_of(Activity::Sit)], 4u);
  EXPECT_EQ(ev.confusion[index_of(Activity::Sit)][index_of(Activity::Sit)], 4u);
}

}  // namespace
