#include "vidhoc/qoe/forest.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "vidhoc/core/error.h"
#include "vidhoc/core/io.h"
#include "vidhoc/core/random.h"

namespace vidhoc::qoe {

namespace {

constexpr int kFormatVersion = 1;

int majority(const VoteCounts& counts) {
  int best = 0;
  for (int k = 1; k < kEngagementBuckets; ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<TrainingRow>& rows, const ForestConfig& config,
              std::size_t dimension, int features_per_split,
              std::uint64_t seed)
      : rows_(rows),
        config_(config),
        dimension_(dimension),
        features_per_split_(features_per_split),
        rng_(seed),
        feature_order_(dimension) {
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
  }

  DecisionTree build(std::vector<int> sample) {
    nodes_.clear();
    grow(sample, 0, static_cast<int>(sample.size()), 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  int grow(std::vector<int>& idx, int begin, int end, int depth) {
    VoteCounts counts{};
    for (int i = begin; i < end; ++i) counts[rows_[idx[i]].label] += 1;
    const int n = end - begin;
    const int node_id = static_cast<int>(nodes_.size());
    nodes_.push_back(DecisionTree::Node{-1, 0.0, -1, -1, majority(counts)});

    const bool pure = counts[majority(counts)] == n;
    if (pure || depth >= config_.max_depth || n < 2 * config_.min_leaf) {
      return node_id;
    }
    double parent_score = 0.0;
    for (int c : counts) parent_score += static_cast<double>(c) * c;
    parent_score /= n;

    const Split split = best_split(idx, begin, end, parent_score);
    if (split.feature < 0) return node_id;

    const auto mid_it = std::partition(
        idx.begin() + begin, idx.begin() + end, [&](int r) {
          return rows_[r].inputs[split.feature] <= split.threshold;
        });
    const int mid = static_cast<int>(mid_it - idx.begin());
    const int left = grow(idx, begin, mid, depth + 1);
    const int right = grow(idx, mid, end, depth + 1);
    auto& node = nodes_[node_id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
  }

  Split best_split(const std::vector<int>& idx, int begin, int end,
                   double parent_score) {
    const int n = end - begin;
    // Partial Fisher-Yates picks the candidate features for this node.
    const int k = std::min<int>(features_per_split_,
                                static_cast<int>(dimension_));
    for (int i = 0; i < k; ++i) {
      const std::size_t j =
          i + uniform_index(rng_, dimension_ - static_cast<std::size_t>(i));
      std::swap(feature_order_[i], feature_order_[j]);
    }
    Split best;
    best.score = parent_score + 1e-12;
    scratch_.resize(n);
    for (int fi = 0; fi < k; ++fi) {
      const int feature = feature_order_[fi];
      for (int i = 0; i < n; ++i) {
        const auto& row = rows_[idx[begin + i]];
        scratch_[i] = {row.inputs[feature], row.label};
      }
      std::sort(scratch_.begin(), scratch_.end());
      VoteCounts left{};
      VoteCounts right{};
      for (const auto& [v, label] : scratch_) right[label] += 1;
      double sq_left = 0.0;
      double sq_right = 0.0;
      for (int c : right) sq_right += static_cast<double>(c) * c;
      for (int i = 0; i + 1 < n; ++i) {
        const int label = scratch_[i].second;
        sq_left += 2.0 * left[label] + 1.0;
        sq_right -= 2.0 * right[label] - 1.0;
        left[label] += 1;
        right[label] -= 1;
        const int n_left = i + 1;
        const int n_right = n - n_left;
        if (n_left < config_.min_leaf || n_right < config_.min_leaf) continue;
        if (!(scratch_[i].first < scratch_[i + 1].first)) continue;
        const double score = sq_left / n_left + sq_right / n_right;
        if (score > best.score) {
          best.score = score;
          best.feature = feature;
          best.threshold =
              0.5 * (scratch_[i].first + scratch_[i + 1].first);
        }
      }
    }
    return best;
  }

  const std::vector<TrainingRow>& rows_;
  const ForestConfig& config_;
  std::size_t dimension_;
  int features_per_split_;
  Rng rng_;
  std::vector<int> feature_order_;
  std::vector<std::pair<double, int>> scratch_;
  std::vector<DecisionTree::Node> nodes_;
};

std::vector<int> bootstrap_sample(const std::vector<TrainingRow>& rows,
                                  Rng& rng) {
  const std::size_t n = rows.size();
  std::vector<int> sample(n);
  const bool uniform_weights =
      std::all_of(rows.begin(), rows.end(), [&](const TrainingRow& r) {
        return r.weight == rows.front().weight;
      });
  if (uniform_weights) {
    for (auto& s : sample) s = static_cast<int>(uniform_index(rng, n));
    return sample;
  }
  std::vector<double> cumulative(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rows[i].weight;
    cumulative[i] = total;
  }
  for (auto& s : sample) {
    const double u = uniform01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    s = static_cast<int>(std::min<std::size_t>(it - cumulative.begin(), n - 1));
  }
  return sample;
}

const char* mode_name(FeatureMode mode) {
  return mode == FeatureMode::kPerPart ? "per_part" : "aggregate";
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, "bad number in forest model: " + s);
  }
  return v;
}

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw Error(ErrorCode::kParse,
                "forest model: expected '" + want + "', got '" + got + "'");
  }
}

}  // namespace

DecisionTree::DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "tree has no nodes");
  }
  for (const auto& node : nodes_) {
    if (node.label < 0 || node.label >= kEngagementBuckets) {
      throw Error(ErrorCode::kInvalidArgument, "tree label out of range");
    }
    if (node.feature >= 0) {
      const auto count = static_cast<int>(nodes_.size());
      if (node.left <= 0 || node.right <= 0 || node.left >= count ||
          node.right >= count) {
        throw Error(ErrorCode::kInvalidArgument, "tree child out of range");
      }
    }
  }
}

int DecisionTree::classify(std::span<const double> x) const {
  int i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& node = nodes_[i];
    i = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[i].label;
}

int DecisionTree::depth() const {
  std::vector<int> depth(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    deepest = std::max(deepest, depth[i]);
    if (node.feature >= 0) {
      depth[node.left] = depth[i] + 1;
      depth[node.right] = depth[i] + 1;
    }
  }
  return deepest;
}

QoeForest::QoeForest(std::vector<DecisionTree> trees, std::uint64_t seed,
                     FeatureMode mode, std::size_t dimension)
    : trees_(std::move(trees)), seed_(seed), mode_(mode),
      dimension_(dimension) {}

QoeForest QoeForest::train(std::vector<TrainingRow> rows,
                           const ForestConfig& config, std::uint64_t seed) {
  if (rows.empty()) {
    throw Error(ErrorCode::kEmptyInput, "cannot train on an empty dataset");
  }
  if (config.num_trees < 1 || config.max_depth < 0 || config.min_leaf < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bad forest configuration");
  }
  const std::size_t dim = input_dimension(config.mode);
  for (const auto& r : rows) {
    if (r.inputs.size() != dim) {
      throw Error(ErrorCode::kInvalidArgument, "training row has wrong width");
    }
    if (r.label < 0 || r.label >= kEngagementBuckets || !(r.weight > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "bad training label/weight");
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const TrainingRow& a, const TrainingRow& b) {
              if (a.inputs != b.inputs) return a.inputs < b.inputs;
              if (a.label != b.label) return a.label < b.label;
              return a.weight < b.weight;
            });
  const int per_split =
      config.features_per_split > 0
          ? config.features_per_split
          : std::max(1, static_cast<int>(std::lround(
                            std::sqrt(static_cast<double>(dim)))));
  std::vector<DecisionTree> trees;
  trees.reserve(config.num_trees);
  for (int t = 0; t < config.num_trees; ++t) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(t)}));
    auto sample = bootstrap_sample(rows, rng);
    TreeBuilder builder(rows, config, dim, per_split, rng());
    trees.push_back(builder.build(std::move(sample)));
  }
  return QoeForest(std::move(trees), seed, config.mode, dim);
}

VoteCounts QoeForest::votes(std::span<const double> inputs) const {
  if (inputs.size() != dimension_) {
    throw Error(ErrorCode::kInvalidArgument, "input width mismatch");
  }
  VoteCounts v{};
  for (const auto& tree : trees_) v[tree.classify(inputs)] += 1;
  return v;
}

VoteCounts QoeForest::votes(const FeatureVector& f) const {
  std::array<double, kFeatureCount> buf{};
  std::span<double> in(buf.data(), dimension_);
  model_inputs(f, mode_, in);
  return votes(std::span<const double>(in));
}

void QoeForest::save(std::ostream& out) const {
  out << "vidhoc-forest " << kFormatVersion << '\n';
  out << "mode " << mode_name(mode_) << '\n';
  out << "dimension " << dimension_ << '\n';
  out << "seed " << seed_ << '\n';
  out << "trees " << trees_.size() << '\n';
  for (const auto& tree : trees_) {
    out << "tree " << tree.nodes().size() << '\n';
    for (const auto& n : tree.nodes()) {
      out << n.feature << ' ' << io::format_double(n.threshold) << ' '
          << n.left << ' ' << n.right << ' ' << n.label << '\n';
    }
  }
}

QoeForest QoeForest::load(std::istream& in) {
  expect_token(in, "vidhoc-forest");
  int version = 0;
  if (!(in >> version) || version != kFormatVersion) {
    throw Error(ErrorCode::kParse, "unsupported forest model version");
  }
  expect_token(in, "mode");
  std::string mode_str;
  in >> mode_str;
  FeatureMode mode;
  if (mode_str == "per_part") {
    mode = FeatureMode::kPerPart;
  } else if (mode_str == "aggregate") {
    mode = FeatureMode::kSessionAggregate;
  } else {
    throw Error(ErrorCode::kParse, "unknown feature mode " + mode_str);
  }
  std::size_t dimension = 0;
  std::uint64_t seed = 0;
  std::size_t tree_count = 0;
  expect_token(in, "dimension");
  in >> dimension;
  expect_token(in, "seed");
  in >> seed;
  expect_token(in, "trees");
  in >> tree_count;
  if (!in || dimension != input_dimension(mode) || tree_count == 0) {
    throw Error(ErrorCode::kParse, "corrupt forest header");
  }
  std::vector<DecisionTree> trees;
  trees.reserve(tree_count);
  for (std::size_t t = 0; t < tree_count; ++t) {
    expect_token(in, "tree");
    std::size_t node_count = 0;
    in >> node_count;
    std::vector<DecisionTree::Node> nodes(node_count);
    for (auto& n : nodes) {
      std::string threshold;
      in >> n.feature >> threshold >> n.left >> n.right >> n.label;
      if (!in) throw Error(ErrorCode::kParse, "truncated forest model");
      n.threshold = parse_double(threshold);
      if (n.feature >= static_cast<int>(dimension)) {
        throw Error(ErrorCode::kParse, "tree feature out of range");
      }
    }
    trees.emplace_back(std::move(nodes));
  }
  return QoeForest(std::move(trees), seed, mode, dimension);
}

void QoeForest::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kParse, "cannot write " + path);
  save(out);
}

QoeForest QoeForest::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path);
  return load(in);
}

int winning_bucket(const VoteCounts& votes) { return majority(votes); }

double predict_qoe(const VoteCounts& votes) {
  return bucket_median(winning_bucket(votes));
}

double uncertainty(const VoteCounts& votes) {
  int c1 = 0;
  int c2 = 0;
  int total = 0;
  for (int c : votes) {
    total += c;
    if (c > c1) {
      c2 = c1;
      c1 = c;
    } else if (c > c2) {
      c2 = c;
    }
  }
  if (total == 0) return 1.0;
  return 1.0 - static_cast<double>(c1 - c2) / total;
}

double predict_qoe(const QoeForest& forest, const FeatureVector& f) {
  return predict_qoe(forest.votes(f));
}

double uncertainty(const QoeForest& forest, const FeatureVector& f) {
  return uncertainty(forest.votes(f));
}

}  // namespace vidhoc::qoe
