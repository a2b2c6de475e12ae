#ifndef VIDHOC_QOE_FOREST_H_
#define VIDHOC_QOE_FOREST_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vidhoc/qoe/features.h"

namespace vidhoc::qoe {

struct ForestConfig {
  int num_trees = 100;
  int max_depth = 10;
  int min_leaf = 2;
  // 0 selects round(sqrt(dimension)).
  int features_per_split = 0;
  FeatureMode mode = FeatureMode::kPerPart;
};

// One labelled training example in model-input space.
struct TrainingRow {
  std::vector<double> inputs;
  int label = 0;
  double weight = 1.0;
};

using VoteCounts = std::array<int, kEngagementBuckets>;

class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;

    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes);

  int classify(std::span<const double> x) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<Node> nodes_;
};

// Random forest of CART classifiers over engagement buckets. Immutable once
// built; retraining produces a new forest.
class QoeForest {
 public:
  // Deterministic in (rows as a multiset, config, seed). Rows are put into a
  // canonical order first so the input order does not matter.
  static QoeForest train(std::vector<TrainingRow> rows,
                         const ForestConfig& config, std::uint64_t seed);

  VoteCounts votes(std::span<const double> inputs) const;
  VoteCounts votes(const FeatureVector& f) const;

  int num_trees() const { return static_cast<int>(trees_.size()); }
  std::uint64_t rng_seed() const { return seed_; }
  FeatureMode mode() const { return mode_; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  void save(std::ostream& out) const;
  static QoeForest load(std::istream& in);
  void save_file(const std::string& path) const;
  static QoeForest load_file(const std::string& path);

  bool operator==(const QoeForest&) const = default;

 private:
  QoeForest(std::vector<DecisionTree> trees, std::uint64_t seed,
            FeatureMode mode, std::size_t dimension);

  std::vector<DecisionTree> trees_;
  std::uint64_t seed_ = 0;
  FeatureMode mode_ = FeatureMode::kPerPart;
  std::size_t dimension_ = kFeatureCount;
};

// Winning bucket k maps to (k + 0.5) / 10; ties go to the lower bucket.
int winning_bucket(const VoteCounts& votes);
double predict_qoe(const VoteCounts& votes);
// Minimal margin: 1 - (c1 - c2) / T over the top two vote counts.
double uncertainty(const VoteCounts& votes);

double predict_qoe(const QoeForest& forest, const FeatureVector& f);
double uncertainty(const QoeForest& forest, const FeatureVector& f);

}  // namespace vidhoc::qoe

#endif  // VIDHOC_QOE_FOREST_H_
