#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "csi_sentry/classify.hpp"
#include "fixtures.hpp"
#include "lstm_check.hpp"
#include "oracles.hpp"

namespace {

using namespace csi_sentry;
using namespace csi_sentry::classify;

TEST(Lstm, ParameterLayout) {
  const auto m = make_lstm(3, 5);
  EXPECT_EQ(m.param_count(), 4 * 5 * 3 + 4 * 5 * 5 + 4 * 5 + 6 * 5 + 6);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(m.params[m.b_off() + k], 0.0);
    EXPECT_EQ(m.params[m.b_off() + 5 + k], 1.0);
    EXPECT_EQ(m.params[m.b_off() + 10 + k], 0.0);
    EXPECT_EQ(m.params[m.b_off() + 15 + k], 0.0);
  }
  const double limit = std::sqrt(6.0 / 8.0);
  for (std::size_t i = m.w_off(); i < m.u_off(); ++i) EXPECT_LE(std::abs(m.params[i]), limit);
}

TEST(Lstm, BadConfig) {
  EXPECT_ERRC(make_lstm(0), Errc::BadConfig);
  EXPECT_ERRC(make_lstm(2, 0), Errc::BadConfig);
  EXPECT_ERRC(make_lstm(2, 4, 1.0), Errc::BadConfig);
}

TEST(Lstm, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const auto r = lstm_check::check(lstm_check::tiny_model(seed), lstm_check::tiny_batch(seed));
    EXPECT_EQ(r.checked, 4u * 3 * 2 + 4 * 3 * 3 + 4 * 3 + 6 * 3 + 6);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(Lstm, ZeroParametersGiveUniformOutput) {
  auto m = make_lstm(2, 4);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  for (const auto& s : lstm_check::tiny_batch()) {
    for (double p : lstm_predict(m, s)) EXPECT_DOUBLE_EQ(p, 1.0 / 6.0);
  }
}

TEST(Lstm, OutputOnSimplex) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto m = make_lstm(3, 6, 0.5, seed);
    const auto s = fixtures::activity_sample(Activity::Run, 12, 3, fixtures::random_series(rng, 36, -10.0, 10.0));
    double sum = 0.0;
    for (double p : lstm_predict(m, s)) {
      ASSERT_GE(p, 0.0);
      sum += p;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Lstm, InferenceIsBitStable) {
  const auto m = make_lstm(2, 8, 0.5, 5);
  const auto s = lstm_check::tiny_batch()[0];
  EXPECT_EQ(lstm_predict(m, s), lstm_predict(make_lstm(2, 8, 0.5, 5), s));
}

TEST(Lstm, ZeroLearningRateChangesNothing) {
  const auto data = fixtures::toy_two_class(8, 1);
  LstmTrainOptions opt;
  opt.epochs = 1;
  opt.lr = 0.0;
  const auto r = lstm_train(data, make_lstm(1, 4), opt);
  EXPECT_EQ(r.model.params, make_lstm(1, 4).params);
  ASSERT_EQ(r.loss_curve.size(), 1u);
  EXPECT_EQ(r.loss_curve[0], r.initial_loss);
}

TEST(Lstm, LossDecreasesOnSeparableToy) {
  const auto data = fixtures::toy_two_class(16, 2);
  LstmTrainOptions opt;
  opt.epochs = 50;
  const auto r = lstm_train(data, make_lstm(1, 8), opt);
  ASSERT_EQ(r.loss_curve.size(), 50u);
  EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
}

TEST(Lstm, TrainingDeterministicInSeed) {
  const auto data = fixtures::toy_two_class(10, 3);
  LstmTrainOptions opt;
  opt.epochs = 5;
  const auto a = lstm_train(data, make_lstm(1, 6, 0.5, 11), opt);
  const auto b = lstm_train(data, make_lstm(1, 6, 0.5, 11), opt);
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  const auto c = lstm_train(data, make_lstm(1, 6, 0.5, 12), opt);
  EXPECT_NE(a.model.params, c.model.params);
}

TEST(Lstm, MixedLengthsBucketed) {
  auto data = fixtures::toy_two_class(6, 4);
  for (auto s : fixtures::toy_two_class(6, 5)) {
    s.steps = 8;
    s.values.resize(8);
    data.push_back(s);
  }
  LstmTrainOptions opt;
  opt.epochs = 3;
  EXPECT_NO_THROW(lstm_train(data, make_lstm(1, 4), opt));
}

TEST(Lstm, Errors) {
  EXPECT_ERRC(lstm_train({}, make_lstm(1)), Errc::EmptyDataset);
  EXPECT_ERRC(lstm_train(lstm_check::tiny_batch(), make_lstm(3)), Errc::InconsistentF);
  EXPECT_ERRC(lstm_predict(make_lstm(3), lstm_check::tiny_batch()[0]), Errc::DimMismatch);
}

TEST(Lstm, SaveLoadRoundTrip) {
  oracle::TempDir dir;
  LstmTrainOptions opt;
  opt.epochs = 2;
  const auto m = lstm_train(fixtures::toy_two_class(5, 6), make_lstm(1, 5, 0.25, 9), opt).model;
  save_lstm(m, dir.file("m.bin"));
  const auto back = load_lstm(dir.file("m.bin"));
  EXPECT_EQ(back.input_dim, 1u);
  EXPECT_EQ(back.hidden, 5u);
  EXPECT_EQ(back.dropout, 0.25);
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.input_mean, m.input_mean);
  EXPECT_EQ(back.input_scale, m.input_scale);
  EXPECT_EQ(back.params, m.params);
  EXPECT_ERRC(load_gnb(dir.file("m.bin")), Errc::BadFormat);
}

TEST(Lstm, ToySetPerfect) {
  LstmTrainOptions opt;
  opt.epochs = 60;
  opt.lr = 1e-2;
  const auto m = lstm_train(fixtures::toy_two_class(20, 1), make_lstm(1, 8), opt).model;
  for (const auto& s : fixtures::toy_two_class(20, 2)) EXPECT_EQ(lstm_classify(m, s), s.label);
}

}  // namespace
