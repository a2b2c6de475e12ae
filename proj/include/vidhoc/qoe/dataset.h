#ifndef VIDHOC_QOE_DATASET_H_
#define VIDHOC_QOE_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "vidhoc/core/io.h"
#include "vidhoc/core/types.h"
#include "vidhoc/qoe/features.h"
#include "vidhoc/qoe/forest.h"

namespace vidhoc::qoe {

enum class Provenance { kInitialShared, kUserObserved };

struct DatasetRow {
  FeatureVector features;
  double engagement = 0.0;
  Provenance provenance = Provenance::kUserObserved;

  bool operator==(const DatasetRow&) const = default;
};

struct DatasetConfig {
  ForestConfig forest;
  // Sampling weight of initial-shared rows relative to user rows.
  double initial_weight = 1.0;
};

class UserDataset {
 public:
  UserDataset() = default;
  explicit UserDataset(std::string user_id) : user_id_(std::move(user_id)) {}

  const std::string& user_id() const { return user_id_; }
  const std::vector<DatasetRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  std::size_t user_row_count() const;

  // Throws unless engagement is in [0,1].
  void add(const FeatureVector& features, double engagement,
           Provenance provenance);

  // Order-independent hash of the rows.
  std::uint64_t content_hash() const;

  std::vector<TrainingRow> training_rows(const DatasetConfig& config) const;

  // Rows in the qoe_dataset.csv schema.
  std::vector<io::QoeDatasetRow> to_csv_rows(const std::string& device) const;

 private:
  std::string user_id_;
  std::vector<DatasetRow> rows_;
};

// Seed from the dataset contents, user id and the number of user rows.
std::uint64_t training_seed(const UserDataset& dataset);

QoeForest train(const UserDataset& dataset, const DatasetConfig& config);
QoeForest train(const UserDataset& dataset, const DatasetConfig& config,
                std::uint64_t seed);

struct UpdateResult {
  UserDataset dataset;
  QoeForest forest;
};

// Appends the session as a user-observed row and retrains from scratch.
UpdateResult update_with_session(UserDataset dataset,
                                 const SessionRecord& record,
                                 const BitrateLadder& ladder,
                                 const DatasetConfig& config);

}  // namespace vidhoc::qoe

#endif  // VIDHOC_QOE_DATASET_H_
