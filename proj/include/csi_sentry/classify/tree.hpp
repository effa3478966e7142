#pragma once

// CART decision tree with Gini impurity.

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "csi_sentry/binary_io.hpp"
#include "csi_sentry/classify/dataset.hpp"
#include "csi_sentry/classify/dwt.hpp"
#include "csi_sentry/error.hpp"

namespace csi_sentry::classify {

struct Example {
  FeatureVector x;
  Activity label = Activity::LieDown;
};

inline std::vector<Example> feature_examples(const std::vector<ActivitySample>& samples, std::size_t levels = 0) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({dwt_features(s, levels), s.label});
  return out;
}

using ClassCounts = std::array<std::size_t, kNumClasses>;

struct TreeNode {
  static constexpr std::uint32_t kLeaf = 0xffffffffu;

  std::uint32_t feature = kLeaf;
  double threshold = 0.0;  // x[feature] <= threshold goes left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  ClassCounts counts{};

  bool is_leaf() const { return feature == kLeaf; }
};

struct TreeParams {
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_split = 2;
};

struct TreeModel {
  std::size_t n_features = 0;
  TreeParams params;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t depth() const { return depth_from(0); }

 private:
  std::size_t depth_from(std::size_t i) const {
    const TreeNode& n = nodes[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct Decision {
  std::size_t feature = 0;
  double threshold = 0.0;
  bool went_left = false;

  bool operator==(const Decision&) const = default;
};

struct TreePrediction {
  Activity label = Activity::LieDown;
  std::vector<Decision> path;
};

namespace detail {

inline double gini(const ClassCounts& c, std::size_t n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t k : c) {
    const double p = static_cast<double>(k) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

inline Activity majority(const ClassCounts& c) {
  return activity_at(static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin()));
}

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<Example>& data, TreeParams params, std::size_t n_features)
      : data_(data), params_(params), n_features_(n_features) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> idx(data_.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  ClassCounts count(const std::vector<std::size_t>& idx) const {
    ClassCounts c{};
    for (std::size_t i : idx) ++c[index_of(data_[i].label)];
    return c;
  }

  // Best split by impurity decrease. Features are scanned in ascending order
  // and thresholds ascending within a feature, so keeping only strictly better
  // candidates breaks ties toward the lowest feature, then lowest threshold.
  Split best_split(const std::vector<std::size_t>& idx, const ClassCounts& total) const {
    const std::size_t n = idx.size();
    const double parent = gini(total, n);
    Split best;
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < n_features_; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return data_[a].x[f] < data_[b].x[f]; });
      ClassCounts left{};
      for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        ++left[index_of(data_[order[pos]].label)];
        const double lo = data_[order[pos]].x[f];
        const double hi = data_[order[pos + 1]].x[f];
        if (!(lo < hi)) continue;
        ClassCounts right{};
        for (std::size_t k = 0; k < kNumClasses; ++k) right[k] = total[k] - left[k];
        const std::size_t nl = pos + 1;
        const std::size_t nr = n - nl;
        const double child = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                             static_cast<double>(n);
        const double decrease = parent - child;
        if (!best.found || decrease > best.decrease) {
          best = {true, f, std::midpoint(lo, hi), decrease};
        }
      }
    }
    return best;
  }

  std::uint32_t grow(const std::vector<std::size_t>& idx, std::size_t depth) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    const ClassCounts counts = count(idx);
    nodes_[id].counts = counts;

    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    const bool depth_capped = params_.max_depth != 0 && depth >= params_.max_depth;
    if (pure || depth_capped || idx.size() < params_.min_samples_split) return id;

    const Split split = best_split(idx, counts);
    if (!split.found) return id;  // all feature vectors identical

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : idx) (data_[i].x[split.feature] <= split.threshold ? left : right).push_back(i);
    if (left.empty() || right.empty()) return id;

    const std::uint32_t l = grow(left, depth + 1);
    const std::uint32_t r = grow(right, depth + 1);
    nodes_[id].feature = static_cast<std::uint32_t>(split.feature);
    nodes_[id].threshold = split.threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const std::vector<Example>& data_;
  TreeParams params_;
  std::size_t n_features_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

inline TreeModel train_tree(const std::vector<Example>& data, TreeParams params = {}) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "no training examples");
  const std::size_t nf = data.front().x.size();
  for (const auto& e : data) {
    if (e.x.size() != nf) throw Error(Errc::DimMismatch, "feature vectors differ in length");
  }
  TreeModel m;
  m.n_features = nf;
  m.params = params;
  m.nodes = detail::TreeBuilder(data, params, nf).build();
  return m;
}

inline TreePrediction predict_tree(const TreeModel& model, const FeatureVector& x) {
  if (x.size() != model.n_features) {
    throw Error(Errc::DimMismatch, std::to_string(x.size()) + " features, model has " +
                                       std::to_string(model.n_features));
  }
  TreePrediction out;
  std::size_t i = 0;
  while (!model.nodes[i].is_leaf()) {
    const TreeNode& n = model.nodes[i];
    const bool left = x[n.feature] <= n.threshold;
    out.path.push_back({n.feature, n.threshold, left});
    i = left ? n.left : n.right;
  }
  out.label = detail::majority(model.nodes[i].counts);
  return out;
}

inline constexpr std::string_view kTreeMagic = "CSDT";
inline constexpr std::uint32_t kTreeVersion = 1;

inline void save_tree(const TreeModel& m, const std::string& path) {
  binary_io::Writer w(kTreeMagic, kTreeVersion);
  w.u32(static_cast<std::uint32_t>(m.n_features));
  w.u32(static_cast<std::uint32_t>(m.params.max_depth));
  w.u32(static_cast<std::uint32_t>(m.params.min_samples_split));
  w.u32(static_cast<std::uint32_t>(m.nodes.size()));
  for (const auto& n : m.nodes) {
    w.u32(n.feature);
    w.u32(n.left);
    w.u32(n.right);
    w.f64(n.threshold);
    for (std::size_t c : n.counts) w.u64(c);
  }
  w.save(path);
}

inline TreeModel load_tree(const std::string& path) {
  binary_io::Reader r(binary_io::read_file(path), kTreeMagic, kTreeVersion);
  TreeModel m;
  m.n_features = r.u32();
  m.params.max_depth = r.u32();
  m.params.min_samples_split = r.u32();
  const std::size_t count = r.u32();
  for (std::size_t i = 0; i < count; ++i) {
    TreeNode n;
    n.feature = r.u32();
    n.left = r.u32();
    n.right = r.u32();
    n.threshold = r.f64();
    for (auto& c : n.counts) c = r.u64();
    if (!n.is_leaf() && (n.feature >= m.n_features || n.left <= i || n.right <= i || n.left >= count || n.right >= count)) {
      throw Error(Errc::BadFormat, path + ": node " + std::to_string(i) + " out of range");
    }
    m.nodes.push_back(n);
  }
  if (m.nodes.empty()) throw Error(Errc::BadFormat, path + ": empty tree");
  r.expect_end();
  return m;
}

}  // namespace csi_sentry::classify
