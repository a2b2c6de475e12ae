#include "vidhoc/qoe/dataset.h"

#include <algorithm>
#include <bit>
#include <cstring>

#include "vidhoc/core/error.h"
#include "vidhoc/core/random.h"

namespace vidhoc::qoe {

namespace {

std::uint64_t row_hash(const DatasetRow& row) {
  std::uint64_t h = mix64(row.provenance == Provenance::kInitialShared ? 1 : 2);
  for (double v : row.features.values()) {
    h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  }
  return mix64(h ^ std::bit_cast<std::uint64_t>(row.engagement));
}

}  // namespace

std::size_t UserDataset::user_row_count() const {
  return static_cast<std::size_t>(
      std::count_if(rows_.begin(), rows_.end(), [](const DatasetRow& r) {
        return r.provenance == Provenance::kUserObserved;
      }));
}

void UserDataset::add(const FeatureVector& features, double engagement,
                      Provenance provenance) {
  if (!(engagement >= 0.0 && engagement <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "engagement must be in [0,1]");
  }
  rows_.push_back(DatasetRow{features, engagement, provenance});
}

std::uint64_t UserDataset::content_hash() const {
  // Wrapping sum keeps the hash independent of row order.
  std::uint64_t h = 0;
  for (const auto& row : rows_) h += row_hash(row);
  return mix64(h ^ rows_.size());
}

std::vector<TrainingRow> UserDataset::training_rows(
    const DatasetConfig& config) const {
  std::vector<TrainingRow> out;
  out.reserve(rows_.size());
  for (const auto& row : rows_) {
    TrainingRow t;
    t.inputs = model_inputs(row.features, config.forest.mode);
    t.label = bucketize_engagement(row.engagement);
    t.weight = row.provenance == Provenance::kInitialShared
                   ? config.initial_weight
                   : 1.0;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<io::QoeDatasetRow> UserDataset::to_csv_rows(
    const std::string& device) const {
  std::vector<io::QoeDatasetRow> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    io::QoeDatasetRow r;
    r.user = user_id_;
    r.device = device;
    r.video = "row" + std::to_string(i);
    r.features.assign(rows_[i].features.values().begin(),
                      rows_[i].features.values().end());
    r.qoe = rows_[i].engagement;
    out.push_back(std::move(r));
  }
  return out;
}

std::uint64_t training_seed(const UserDataset& dataset) {
  return derive_seed({dataset.content_hash(), hash_string(dataset.user_id()),
                      dataset.user_row_count()});
}

QoeForest train(const UserDataset& dataset, const DatasetConfig& config) {
  return train(dataset, config, training_seed(dataset));
}

QoeForest train(const UserDataset& dataset, const DatasetConfig& config,
                std::uint64_t seed) {
  if (dataset.size() == 0) {
    throw Error(ErrorCode::kEmptyInput, "cannot train on an empty dataset");
  }
  return QoeForest::train(dataset.training_rows(config), config.forest, seed);
}

UpdateResult update_with_session(UserDataset dataset,
                                 const SessionRecord& record,
                                 const BitrateLadder& ladder,
                                 const DatasetConfig& config) {
  record.validate();
  dataset.add(extract_features(record.pattern, ladder), record.engagement,
              Provenance::kUserObserved);
  QoeForest forest = train(dataset, config);
  return UpdateResult{std::move(dataset), std::move(forest)};
}

}  // namespace vidhoc::qoe
