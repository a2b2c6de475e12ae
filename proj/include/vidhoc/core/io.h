#ifndef VIDHOC_CORE_IO_H_
#define VIDHOC_CORE_IO_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidhoc/core/types.h"

namespace vidhoc {

using Json = nlohmann::json;

void to_json(Json& j, const PlayerState& s);
void from_json(const Json& j, PlayerState& s);
void to_json(Json& j, const StateBucket& b);
void from_json(const Json& j, StateBucket& b);
void to_json(Json& j, const SegmentQuality& q);
void from_json(const Json& j, SegmentQuality& q);
void to_json(Json& j, const BandwidthSchedule& s);
void from_json(const Json& j, BandwidthSchedule& s);

namespace io {

Json encode(const BitrateLadder& ladder);
Json encode(const VideoManifest& manifest);
Json encode(const QualityPattern& pattern);
Json encode(const SessionRecord& record);

BitrateLadder decode_ladder(const Json& j);
VideoManifest decode_manifest(const Json& j);
QualityPattern decode_pattern(const Json& j);
SessionRecord decode_session(const Json& j);

// One JSON object per line; blank lines are skipped on read.
std::vector<Json> read_jsonl(std::istream& in);
std::vector<Json> read_jsonl_file(const std::string& path);
void write_jsonl(std::ostream& out, const std::vector<Json>& rows);
void write_jsonl_file(const std::string& path, const std::vector<Json>& rows);

std::vector<VideoManifest> read_manifests(const std::string& path);
void write_manifests(const std::string& path,
                     const std::vector<VideoManifest>& manifests);
std::vector<SessionRecord> read_sessions(const std::string& path);
void write_sessions(std::ostream& out,
                    const std::vector<SessionRecord>& records);

// qoe_dataset.csv: user,device,video,feature_1..feature_60,qoe
struct QoeDatasetRow {
  std::string user;
  std::string device;
  std::string video;
  std::vector<double> features;
  double qoe = 0.0;

  bool operator==(const QoeDatasetRow&) const = default;
};

inline constexpr std::size_t kDatasetFeatureCount = 60;

std::vector<QoeDatasetRow> read_qoe_dataset(std::istream& in);
std::vector<QoeDatasetRow> read_qoe_dataset_file(const std::string& path);
void write_qoe_dataset(std::ostream& out,
                       const std::vector<QoeDatasetRow>& rows);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace io
}  // namespace vidhoc

#endif  // VIDHOC_CORE_IO_H_
