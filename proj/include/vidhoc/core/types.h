#ifndef VIDHOC_CORE_TYPES_H_
#define VIDHOC_CORE_TYPES_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vidhoc {

// Discrete encodings of a video. Levels are strictly increasing, in Kbps.
class BitrateLadder {
 public:
  BitrateLadder(std::vector<double> levels_kbps, double chunk_duration_s);

  // {200, 400, 600, 800, 1000} Kbps with 3 s chunks.
  static BitrateLadder default_ladder();

  const std::vector<double>& levels() const { return levels_; }
  double level(std::size_t i) const { return levels_.at(i); }
  std::size_t size() const { return levels_.size(); }
  double chunk_duration_s() const { return chunk_duration_s_; }
  double min_kbps() const { return levels_.front(); }
  double max_kbps() const { return levels_.back(); }

  // Index of the largest level <= kbps + slack, if any.
  std::optional<std::size_t> highest_at_most(double kbps,
                                             double slack = 0.0) const;
  // Index of the level closest to kbps (lower index on ties).
  std::size_t nearest(double kbps) const;

  bool operator==(const BitrateLadder&) const = default;

 private:
  std::vector<double> levels_;
  double chunk_duration_s_;
};

class VideoManifest {
 public:
  // chunk_bytes[level][chunk]; every size must be positive.
  VideoManifest(std::string video_id, BitrateLadder ladder,
                std::vector<std::vector<std::int64_t>> chunk_bytes);

  // Sizes taken straight from the nominal ladder bitrates.
  static VideoManifest constant_bitrate(std::string video_id,
                                        BitrateLadder ladder,
                                        std::size_t num_chunks);

  const std::string& video_id() const { return video_id_; }
  const BitrateLadder& ladder() const { return ladder_; }
  std::size_t num_chunks() const { return num_chunks_; }
  double duration_s() const {
    return static_cast<double>(num_chunks_) * ladder_.chunk_duration_s();
  }
  std::int64_t chunk_bytes(std::size_t level, std::size_t chunk) const;
  const std::vector<std::vector<std::int64_t>>& all_chunk_bytes() const {
    return chunk_bytes_;
  }

  bool operator==(const VideoManifest&) const = default;

 private:
  std::string video_id_;
  BitrateLadder ladder_;
  std::size_t num_chunks_;
  std::vector<std::vector<std::int64_t>> chunk_bytes_;
};

// Bitrate of one chunk derived from its byte size: bytes * 8 / (1000 * d).
double chunk_bitrate(const VideoManifest& manifest, std::size_t level,
                     std::size_t chunk);

struct PlayerState {
  double bitrate_kbps = 0.0;
  double buffer_s = 0.0;
  double bw_past_kbps = 0.0;  // mean over the trailing 20 s
  double bw_now_kbps = 0.0;
  double rebuf_window_s = 0.0;

  bool operator==(const PlayerState&) const = default;
};

struct StateBucket {
  int bitrate_idx = 0;
  int buffer_idx = 0;
  int bandwidth_idx = 0;
  int rebuf_idx = 0;

  auto operator<=>(const StateBucket&) const = default;
};

inline constexpr double kBitrateBucketKbps = 200.0;
inline constexpr double kBufferBucketS = 1.0;
inline constexpr double kBandwidthBucketKbps = 200.0;
inline constexpr double kRebufBucketS = 1.0;

// Half-open buckets [k*w, (k+1)*w). Throws kInvalidState on negative or
// non-finite fields.
StateBucket quantize_state(const PlayerState& state);
// Bucket midpoints; rebuf_window_s and bw_past_kbps use their bucket
// midpoints too (bw_past mirrors bw_now).
PlayerState dequantize_state(const StateBucket& bucket);
int bandwidth_bucket(double kbps);

struct SegmentQuality {
  double bitrate_kbps = 0.0;
  double rebuffer_s = 0.0;
  double switch_kbps = 0.0;

  bool operator==(const SegmentQuality&) const = default;
};

class QualityPattern {
 public:
  QualityPattern(std::vector<SegmentQuality> segments, int coalesce_factor);

  // Builds segments from bitrates and stalls; switches are absolute
  // differences between consecutive bitrates.
  static QualityPattern from_bitrates(const std::vector<double>& bitrates_kbps,
                                      const std::vector<double>& rebuffer_s,
                                      int coalesce_factor);

  const std::vector<SegmentQuality>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  int coalesce_factor() const { return coalesce_factor_; }
  double total_rebuffer_s() const;

  bool operator==(const QualityPattern&) const = default;

 private:
  std::vector<SegmentQuality> segments_;
  int coalesce_factor_;
};

struct BandwidthSchedule {
  std::vector<double> per_segment_kbps;
  int coalesce_factor = 1;

  // Throws if empty, any entry <= 0, or coalesce_factor < 1.
  void validate() const;
  bool operator==(const BandwidthSchedule&) const = default;
};

enum class Scheme { kVidhoc, kGreedyOpt, kGreedyPf, kNoOpt };

std::string_view scheme_name(Scheme scheme);
Scheme parse_scheme(std::string_view name);
inline constexpr Scheme kAllSchemes[] = {Scheme::kVidhoc, Scheme::kGreedyOpt,
                                         Scheme::kGreedyPf, Scheme::kNoOpt};

struct SessionRecord {
  std::string user_id;
  std::string video_id;
  Scheme scheme = Scheme::kNoOpt;
  QualityPattern pattern{{SegmentQuality{}}, 1};
  double engagement = 0.0;
  double bandwidth_limit_kbps = 0.0;
  std::map<std::string, std::string> context;

  // Harness bookkeeping; zero when not produced by an experiment run.
  int session_index = 0;         // 1-based over all of the user's sessions
  int scheme_session_index = 0;  // 1-based within the scheme
  double link_kbps = 0.0;
  double mean_throughput_kbps = 0.0;
  double selected_uncertainty = 0.0;
  int infeasible_decisions = 0;
  bool failed = false;

  void validate() const;
  bool operator==(const SessionRecord&) const = default;
};

// Number of coalesced segments: ceil(num_chunks / g).
std::size_t coalesce(std::size_t num_chunks, double chunk_duration_s, int g);
// Chunks in segment `segment` (the last one may be short).
std::size_t segment_chunk_count(std::size_t num_chunks, int g,
                                std::size_t segment);

}  // namespace vidhoc

#endif  // VIDHOC_CORE_TYPES_H_
