#include "vidhoc/core/types.h"

#include <algorithm>
#include <cmath>

#include "vidhoc/core/error.h"

namespace vidhoc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidState: return "invalid-state";
    case ErrorCode::kIndexOutOfRange: return "index-out-of-range";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kProfileGap: return "profile-gap";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kNoMatch: return "no-match";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kUndefined: return "undefined";
    case ErrorCode::kParse: return "parse";
  }
  return "unknown";
}

BitrateLadder::BitrateLadder(std::vector<double> levels_kbps,
                             double chunk_duration_s)
    : levels_(std::move(levels_kbps)), chunk_duration_s_(chunk_duration_s) {
  if (levels_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ladder has no levels");
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!std::isfinite(levels_[i]) || levels_[i] <= 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "ladder level must be > 0");
    }
    if (i > 0 && levels_[i] <= levels_[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "ladder levels must be strictly increasing");
    }
  }
  if (!std::isfinite(chunk_duration_s_) || chunk_duration_s_ <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "chunk duration must be > 0");
  }
}

BitrateLadder BitrateLadder::default_ladder() {
  return BitrateLadder({200, 400, 600, 800, 1000}, 3.0);
}

std::optional<std::size_t> BitrateLadder::highest_at_most(double kbps,
                                                          double slack) const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (levels_[i] <= kbps + slack) best = i;
  }
  return best;
}

std::size_t BitrateLadder::nearest(double kbps) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (std::abs(levels_[i] - kbps) < std::abs(levels_[best] - kbps)) best = i;
  }
  return best;
}

VideoManifest::VideoManifest(std::string video_id, BitrateLadder ladder,
                             std::vector<std::vector<std::int64_t>> chunk_bytes)
    : video_id_(std::move(video_id)),
      ladder_(std::move(ladder)),
      num_chunks_(0),
      chunk_bytes_(std::move(chunk_bytes)) {
  if (chunk_bytes_.size() != ladder_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "chunk_bytes needs one row per ladder level");
  }
  num_chunks_ = chunk_bytes_.front().size();
  if (num_chunks_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "manifest has no chunks");
  }
  for (const auto& row : chunk_bytes_) {
    if (row.size() != num_chunks_) {
      throw Error(ErrorCode::kInvalidArgument, "ragged chunk_bytes");
    }
    for (std::int64_t b : row) {
      if (b <= 0) {
        throw Error(ErrorCode::kInvalidArgument, "chunk size must be > 0");
      }
    }
  }
}

VideoManifest VideoManifest::constant_bitrate(std::string video_id,
                                              BitrateLadder ladder,
                                              std::size_t num_chunks) {
  std::vector<std::vector<std::int64_t>> bytes;
  for (double level : ladder.levels()) {
    auto size = static_cast<std::int64_t>(
        std::llround(level * 1000.0 * ladder.chunk_duration_s() / 8.0));
    bytes.emplace_back(num_chunks, size);
  }
  return VideoManifest(std::move(video_id), std::move(ladder),
                       std::move(bytes));
}

std::int64_t VideoManifest::chunk_bytes(std::size_t level,
                                        std::size_t chunk) const {
  if (level >= chunk_bytes_.size() || chunk >= num_chunks_) {
    throw Error(ErrorCode::kIndexOutOfRange, "chunk index out of range");
  }
  return chunk_bytes_[level][chunk];
}

double chunk_bitrate(const VideoManifest& manifest, std::size_t level,
                     std::size_t chunk) {
  const double bytes = static_cast<double>(manifest.chunk_bytes(level, chunk));
  return bytes * 8.0 / (1000.0 * manifest.ladder().chunk_duration_s());
}

namespace {

int bucket_of(double value, double width) {
  return static_cast<int>(std::floor(value / width));
}

void check_field(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw Error(ErrorCode::kInvalidState,
                std::string("player state field ") + name +
                    " must be finite and >= 0");
  }
}

}  // namespace

StateBucket quantize_state(const PlayerState& s) {
  check_field(s.bitrate_kbps, "bitrate_kbps");
  check_field(s.buffer_s, "buffer_s");
  check_field(s.bw_past_kbps, "bw_past_kbps");
  check_field(s.bw_now_kbps, "bw_now_kbps");
  check_field(s.rebuf_window_s, "rebuf_window_s");
  return StateBucket{bucket_of(s.bitrate_kbps, kBitrateBucketKbps),
                     bucket_of(s.buffer_s, kBufferBucketS),
                     bucket_of(s.bw_now_kbps, kBandwidthBucketKbps),
                     bucket_of(s.rebuf_window_s, kRebufBucketS)};
}

PlayerState dequantize_state(const StateBucket& b) {
  PlayerState s;
  s.bitrate_kbps = (b.bitrate_idx + 0.5) * kBitrateBucketKbps;
  s.buffer_s = (b.buffer_idx + 0.5) * kBufferBucketS;
  s.bw_now_kbps = (b.bandwidth_idx + 0.5) * kBandwidthBucketKbps;
  s.bw_past_kbps = s.bw_now_kbps;
  s.rebuf_window_s = (b.rebuf_idx + 0.5) * kRebufBucketS;
  return s;
}

int bandwidth_bucket(double kbps) {
  check_field(kbps, "bandwidth");
  return bucket_of(kbps, kBandwidthBucketKbps);
}

QualityPattern::QualityPattern(std::vector<SegmentQuality> segments,
                               int coalesce_factor)
    : segments_(std::move(segments)), coalesce_factor_(coalesce_factor) {
  if (segments_.empty()) {
    throw Error(ErrorCode::kEmptyInput, "quality pattern has no segments");
  }
  if (coalesce_factor_ < 1) {
    throw Error(ErrorCode::kInvalidArgument, "coalesce factor must be >= 1");
  }
  if (segments_.front().switch_kbps != 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "first segment cannot carry a switch");
  }
  for (const auto& seg : segments_) {
    if (!(seg.rebuffer_s >= 0.0) || !(seg.switch_kbps >= 0.0) ||
        !(seg.bitrate_kbps >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "segment quality fields must be >= 0");
    }
  }
}

QualityPattern QualityPattern::from_bitrates(
    const std::vector<double>& bitrates_kbps,
    const std::vector<double>& rebuffer_s, int coalesce_factor) {
  if (!rebuffer_s.empty() && rebuffer_s.size() != bitrates_kbps.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "rebuffer list must match bitrate list");
  }
  std::vector<SegmentQuality> segs;
  segs.reserve(bitrates_kbps.size());
  for (std::size_t i = 0; i < bitrates_kbps.size(); ++i) {
    SegmentQuality q;
    q.bitrate_kbps = bitrates_kbps[i];
    q.rebuffer_s = rebuffer_s.empty() ? 0.0 : rebuffer_s[i];
    q.switch_kbps = i == 0 ? 0.0 : std::abs(bitrates_kbps[i] -
                                            bitrates_kbps[i - 1]);
    segs.push_back(q);
  }
  return QualityPattern(std::move(segs), coalesce_factor);
}

double QualityPattern::total_rebuffer_s() const {
  double total = 0.0;
  for (const auto& s : segments_) total += s.rebuffer_s;
  return total;
}

void BandwidthSchedule::validate() const {
  if (per_segment_kbps.empty()) {
    throw Error(ErrorCode::kEmptyInput, "bandwidth schedule is empty");
  }
  if (coalesce_factor < 1) {
    throw Error(ErrorCode::kInvalidArgument, "coalesce factor must be >= 1");
  }
  for (double b : per_segment_kbps) {
    if (!(b > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "schedule bandwidths must be > 0");
    }
  }
}

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kVidhoc: return "vidhoc";
    case Scheme::kGreedyOpt: return "greedy_opt";
    case Scheme::kGreedyPf: return "greedy_pf";
    case Scheme::kNoOpt: return "no_opt";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  for (Scheme s : kAllSchemes) {
    if (scheme_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown scheme '" + std::string(name) + "'");
}

void SessionRecord::validate() const {
  if (!(engagement >= 0.0 && engagement <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "engagement must be in [0,1]");
  }
}

std::size_t coalesce(std::size_t num_chunks, double chunk_duration_s, int g) {
  if (g < 1 || num_chunks < 1 || !(chunk_duration_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "coalesce needs g >= 1, num_chunks >= 1, duration > 0");
  }
  const auto gg = static_cast<std::size_t>(g);
  return (num_chunks + gg - 1) / gg;
}

std::size_t segment_chunk_count(std::size_t num_chunks, int g,
                                std::size_t segment) {
  const auto gg = static_cast<std::size_t>(g);
  const std::size_t begin = segment * gg;
  if (begin >= num_chunks) return 0;
  return std::min(gg, num_chunks - begin);
}

}  // namespace vidhoc
