#pragma once

// Single-layer LSTM classifier: the final hidden state goes through inverted
// dropout and a dense layer to six softmax outputs.
//
//   z_t = W x_t + U h_{t-1} + b            (gate blocks i, f, g, o)
//   i, f, o = sigmoid(z_i, z_f, z_o);  g = tanh(z_g)
//   c_t = f * c_{t-1} + i * g;  h_t = o * tanh(c_t)
//   p = softmax(Wd (mask * h_T) + bd)
//
// Trained on mean cross-entropy with backpropagation through time, Adam, and
// global gradient-norm clipping.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "csi_sentry/binary_io.hpp"
#include "csi_sentry/classify/dataset.hpp"
#include "csi_sentry/error.hpp"

namespace csi_sentry::classify {

using Probabilities = std::array<double, kNumClasses>;

struct LstmModel {
  std::size_t input_dim = 0;
  std::size_t hidden = 32;
  double dropout = 0.5;
  std::uint64_t seed = 1;
  // Per-channel standardization applied to inputs: (x - mean) / scale.
  std::vector<double> input_mean;
  std::vector<double> input_scale;
  // W (4H x F), U (4H x H), b (4H), Wd (6 x H), bd (6), row-major, concatenated.
  std::vector<double> params;

  std::size_t w_off() const { return 0; }
  std::size_t u_off() const { return 4 * hidden * input_dim; }
  std::size_t b_off() const { return u_off() + 4 * hidden * hidden; }
  std::size_t wd_off() const { return b_off() + 4 * hidden; }
  std::size_t bd_off() const { return wd_off() + kNumClasses * hidden; }
  std::size_t param_count() const { return bd_off() + kNumClasses; }
};

// Xavier-uniform weights, zero biases except the forget gate at +1.
inline LstmModel make_lstm(std::size_t input_dim, std::size_t hidden = 32, double dropout = 0.5,
                           std::uint64_t seed = 1) {
  if (input_dim == 0 || hidden == 0) throw Error(Errc::BadConfig, "LSTM dims must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::BadConfig, "dropout must be in [0, 1)");
  LstmModel m;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.dropout = dropout;
  m.seed = seed;
  m.input_mean.assign(input_dim, 0.0);
  m.input_scale.assign(input_dim, 1.0);
  m.params.assign(m.param_count(), 0.0);

  std::mt19937_64 rng(seed);
  const auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < count; ++i) m.params[off + i] = u(rng);
  };
  fill(m.w_off(), 4 * hidden * input_dim, input_dim, hidden);
  fill(m.u_off(), 4 * hidden * hidden, hidden, hidden);
  fill(m.wd_off(), kNumClasses * hidden, hidden, kNumClasses);
  for (std::size_t k = 0; k < hidden; ++k) m.params[m.b_off() + hidden + k] = 1.0;
  return m;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmCache {
  std::size_t steps = 0;
  std::vector<double> x;      // T x F, standardized
  std::vector<double> gates;  // T x 4H, activated (i, f, g, o)
  std::vector<double> c;      // T x H
  std::vector<double> h;      // T x H
  std::vector<double> mask;   // H dropout multipliers on h_T
  std::vector<double> hd;     // H, h_T * mask
  Probabilities probs{};
};

inline void check_input(const LstmModel& m, const ActivitySample& s) {
  if (s.channels != m.input_dim) {
    throw Error(Errc::DimMismatch, std::to_string(s.channels) + " channels, model expects " +
                                       std::to_string(m.input_dim));
  }
  if (s.steps == 0) throw Error(Errc::TooShort, "empty sequence");
}

// Runs the forward pass, filling `cache`. An empty mask means no dropout.
inline void lstm_forward(const LstmModel& m, const ActivitySample& s, std::vector<double> mask, LstmCache& cache) {
  const std::size_t F = m.input_dim;
  const std::size_t H = m.hidden;
  const std::size_t T = s.steps;
  const double* W = m.params.data() + m.w_off();
  const double* U = m.params.data() + m.u_off();
  const double* b = m.params.data() + m.b_off();
  const double* Wd = m.params.data() + m.wd_off();
  const double* bd = m.params.data() + m.bd_off();

  cache.steps = T;
  cache.x.resize(T * F);
  cache.gates.resize(T * 4 * H);
  cache.c.resize(T * H);
  cache.h.resize(T * H);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) cache.x[t * F + f] = (s.at(t, f) - m.input_mean[f]) / m.input_scale[f];
  }

  std::vector<double> z(4 * H);
  for (std::size_t t = 0; t < T; ++t) {
    const double* xt = &cache.x[t * F];
    const double* hp = t ? &cache.h[(t - 1) * H] : nullptr;
    const double* cp = t ? &cache.c[(t - 1) * H] : nullptr;
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double acc = b[r];
      const double* wr = W + r * F;
      for (std::size_t f = 0; f < F; ++f) acc += wr[f] * xt[f];
      if (hp) {
        const double* ur = U + r * H;
        for (std::size_t k = 0; k < H; ++k) acc += ur[k] * hp[k];
      }
      z[r] = acc;
    }
    double* g = &cache.gates[t * 4 * H];
    double* ct = &cache.c[t * H];
    double* ht = &cache.h[t * H];
    for (std::size_t k = 0; k < H; ++k) {
      const double ig = sigmoid(z[k]);
      const double fg = sigmoid(z[H + k]);
      const double gg = std::tanh(z[2 * H + k]);
      const double og = sigmoid(z[3 * H + k]);
      g[k] = ig;
      g[H + k] = fg;
      g[2 * H + k] = gg;
      g[3 * H + k] = og;
      ct[k] = (cp ? fg * cp[k] : 0.0) + ig * gg;
      ht[k] = og * std::tanh(ct[k]);
    }
  }

  cache.mask = mask.empty() ? std::vector<double>(H, 1.0) : std::move(mask);
  cache.hd.resize(H);
  const double* hT = &cache.h[(T - 1) * H];
  for (std::size_t k = 0; k < H; ++k) cache.hd[k] = hT[k] * cache.mask[k];

  std::array<double, kNumClasses> logits{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double acc = bd[c];
    for (std::size_t k = 0; k < H; ++k) acc += Wd[c * H + k] * cache.hd[k];
    logits[c] = acc;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double zsum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    cache.probs[c] = std::exp(logits[c] - top);
    zsum += cache.probs[c];
  }
  for (auto& p : cache.probs) p /= zsum;
}

// Accumulates weight * dLoss/dparams for one sample into grad.
inline void lstm_backward(const LstmModel& m, const LstmCache& cache, Activity label, double weight,
                          std::vector<double>& grad) {
  const std::size_t F = m.input_dim;
  const std::size_t H = m.hidden;
  const std::size_t T = cache.steps;
  const double* U = m.params.data() + m.u_off();
  const double* Wd = m.params.data() + m.wd_off();
  double* gW = grad.data() + m.w_off();
  double* gU = grad.data() + m.u_off();
  double* gb = grad.data() + m.b_off();
  double* gWd = grad.data() + m.wd_off();
  double* gbd = grad.data() + m.bd_off();

  std::array<double, kNumClasses> dlogits{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    dlogits[c] = weight * (cache.probs[c] - (c == index_of(label) ? 1.0 : 0.0));
  }
  std::vector<double> dh(H, 0.0);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    gbd[c] += dlogits[c];
    for (std::size_t k = 0; k < H; ++k) {
      gWd[c * H + k] += dlogits[c] * cache.hd[k];
      dh[k] += Wd[c * H + k] * dlogits[c];
    }
  }
  for (std::size_t k = 0; k < H; ++k) dh[k] *= cache.mask[k];

  std::vector<double> dc(H, 0.0);
  std::vector<double> dz(4 * H);
  std::vector<double> dh_prev(H);
  for (std::size_t t = T; t-- > 0;) {
    const double* g = &cache.gates[t * 4 * H];
    const double* ct = &cache.c[t * H];
    const double* cp = t ? &cache.c[(t - 1) * H] : nullptr;
    const double* hp = t ? &cache.h[(t - 1) * H] : nullptr;
    const double* xt = &cache.x[t * F];
    for (std::size_t k = 0; k < H; ++k) {
      const double ig = g[k], fg = g[H + k], gg = g[2 * H + k], og = g[3 * H + k];
      const double tc = std::tanh(ct[k]);
      const double d_o = dh[k] * tc;
      dc[k] += dh[k] * og * (1.0 - tc * tc);
      const double d_i = dc[k] * gg;
      const double d_g = dc[k] * ig;
      const double d_f = cp ? dc[k] * cp[k] : 0.0;
      dz[k] = d_i * ig * (1.0 - ig);
      dz[H + k] = d_f * fg * (1.0 - fg);
      dz[2 * H + k] = d_g * (1.0 - gg * gg);
      dz[3 * H + k] = d_o * og * (1.0 - og);
      dc[k] *= fg;
    }
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double d = dz[r];
      gb[r] += d;
      double* gwr = gW + r * F;
      for (std::size_t f = 0; f < F; ++f) gwr[f] += d * xt[f];
      if (hp) {
        double* gur = gU + r * H;
        const double* ur = U + r * H;
        for (std::size_t k = 0; k < H; ++k) {
          gur[k] += d * hp[k];
          dh_prev[k] += ur[k] * d;
        }
      }
    }
    dh.swap(dh_prev);
  }
}

inline double cross_entropy(const Probabilities& p, Activity label) {
  return -std::log(std::max(p[index_of(label)], 1e-300));
}

}  // namespace detail

inline Probabilities lstm_predict(const LstmModel& model, const ActivitySample& sample) {
  detail::check_input(model, sample);
  detail::LstmCache cache;
  detail::lstm_forward(model, sample, {}, cache);
  return cache.probs;
}

inline Activity lstm_classify(const LstmModel& model, const ActivitySample& sample) {
  const Probabilities p = lstm_predict(model, sample);
  return activity_at(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
}

// Mean cross-entropy over `batch` and its gradient (overwrites grad). With a
// null rng dropout is off; otherwise masks are drawn from it.
inline double lstm_loss_and_gradient(const LstmModel& model, const std::vector<const ActivitySample*>& batch,
                                     std::vector<double>& grad, std::mt19937_64* rng = nullptr) {
  grad.assign(model.param_count(), 0.0);
  if (batch.empty()) return 0.0;
  const double w = 1.0 / static_cast<double>(batch.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  detail::LstmCache cache;
  double loss = 0.0;
  for (const ActivitySample* s : batch) {
    detail::check_input(model, *s);
    std::vector<double> mask;
    if (rng != nullptr && model.dropout > 0.0) {
      mask.resize(model.hidden);
      const double keep = 1.0 - model.dropout;
      for (auto& v : mask) v = unit(*rng) < keep ? 1.0 / keep : 0.0;
    }
    detail::lstm_forward(model, *s, std::move(mask), cache);
    loss += detail::cross_entropy(cache.probs, s->label);
    detail::lstm_backward(model, cache, s->label, w, grad);
  }
  return loss * w;
}

// Mean cross-entropy with dropout off.
inline double lstm_loss(const LstmModel& model, const std::vector<ActivitySample>& data) {
  double loss = 0.0;
  for (const auto& s : data) loss += detail::cross_entropy(lstm_predict(model, s), s.label);
  return data.empty() ? 0.0 : loss / static_cast<double>(data.size());
}

struct LstmTrainOptions {
  std::size_t epochs = 30;
  double lr = 1e-3;
  std::size_t batch = 16;
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Fit the per-channel input standardization from the training data.
  bool standardize = true;
};

struct LstmTrainResult {
  LstmModel model;
  double initial_loss = 0.0;
  std::vector<double> loss_curve;  // training-set loss (dropout off) after each epoch
};

// Fits per-channel mean and standard deviation over all time steps.
inline void fit_standardization(LstmModel& model, const std::vector<ActivitySample>& data) {
  const std::size_t F = model.input_dim;
  std::vector<double> sum(F, 0.0);
  std::size_t n = 0;
  for (const auto& s : data) {
    for (std::size_t t = 0; t < s.steps; ++t) {
      for (std::size_t f = 0; f < F; ++f) sum[f] += s.at(t, f);
    }
    n += s.steps;
  }
  std::vector<double> ss(F, 0.0);
  for (std::size_t f = 0; f < F; ++f) model.input_mean[f] = sum[f] / static_cast<double>(n);
  for (const auto& s : data) {
    for (std::size_t t = 0; t < s.steps; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        const double d = s.at(t, f) - model.input_mean[f];
        ss[f] += d * d;
      }
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    const double sd = std::sqrt(ss[f] / static_cast<double>(n));
    model.input_scale[f] = sd > 0.0 ? sd : 1.0;
  }
}

// Mini-batches hold samples of equal length only; batch order and membership
// are reshuffled every epoch from the model seed.
inline LstmTrainResult lstm_train(const std::vector<ActivitySample>& data, LstmModel model,
                                  const LstmTrainOptions& opt = {}) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  for (const auto& s : data) {
    if (s.channels != model.input_dim) {
      throw Error(Errc::InconsistentF, std::to_string(s.channels) + " channels, model expects " +
                                           std::to_string(model.input_dim));
    }
  }
  if (opt.batch == 0) throw Error(Errc::BadConfig, "batch size must be >= 1");
  if (opt.standardize) fit_standardization(model, data);

  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < data.size(); ++i) buckets[data[i].steps].push_back(i);

  std::mt19937_64 rng(model.seed ^ 0x9e3779b97f4a7c15ull);
  const std::size_t P = model.param_count();
  std::vector<double> m1(P, 0.0), m2(P, 0.0), grad;
  std::uint64_t step = 0;

  LstmTrainResult result;
  result.initial_loss = lstm_loss(model, data);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::vector<std::vector<const ActivitySample*>> batches;
    for (auto& [len, idx] : buckets) {
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < idx.size(); i += opt.batch) {
        std::vector<const ActivitySample*> b;
        for (std::size_t j = i; j < std::min(idx.size(), i + opt.batch); ++j) b.push_back(&data[idx[j]]);
        batches.push_back(std::move(b));
      }
    }
    std::shuffle(batches.begin(), batches.end(), rng);

    for (const auto& b : batches) {
      lstm_loss_and_gradient(model, b, grad, &rng);
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      const double clip = norm > opt.clip_norm ? opt.clip_norm / norm : 1.0;
      ++step;
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < P; ++p) {
        const double g = grad[p] * clip;
        m1[p] = opt.beta1 * m1[p] + (1.0 - opt.beta1) * g;
        m2[p] = opt.beta2 * m2[p] + (1.0 - opt.beta2) * g * g;
        model.params[p] -= opt.lr * (m1[p] / c1) / (std::sqrt(m2[p] / c2) + opt.adam_eps);
      }
    }
    result.loss_curve.push_back(lstm_loss(model, data));
  }
  result.model = std::move(model);
  return result;
}

inline constexpr std::string_view kLstmMagic = "CSLM";
inline constexpr std::uint32_t kLstmVersion = 1;

inline void save_lstm(const LstmModel& m, const std::string& path) {
  binary_io::Writer w(kLstmMagic, kLstmVersion);
  w.u32(static_cast<std::uint32_t>(m.input_dim));
  w.u32(static_cast<std::uint32_t>(m.hidden));
  w.u32(static_cast<std::uint32_t>(kNumClasses));
  w.f64(m.dropout);
  w.u64(m.seed);
  w.f64s(m.input_mean);
  w.f64s(m.input_scale);
  w.f64s(m.params);
  w.save(path);
}

inline LstmModel load_lstm(const std::string& path) {
  binary_io::Reader r(binary_io::read_file(path), kLstmMagic, kLstmVersion);
  LstmModel m;
  m.input_dim = r.u32();
  m.hidden = r.u32();
  if (r.u32() != kNumClasses) throw Error(Errc::BadFormat, path + ": unexpected class count");
  m.dropout = r.f64();
  m.seed = r.u64();
  m.input_mean = r.f64s(m.input_dim);
  m.input_scale = r.f64s(m.input_dim);
  m.params = r.f64s(m.param_count());
  r.expect_end();
  return m;
}

}  // namespace csi_sentry::classify
