#include "vidhoc/qoe/features.h"

#include <algorithm>
#include <cmath>

#include "vidhoc/core/error.h"

namespace vidhoc::qoe {

FeatureVector::FeatureVector(std::span<const double> values) {
  if (values.size() != kFeatureCount) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature vector needs exactly 60 entries");
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      throw Error(ErrorCode::kInvalidArgument, "features must be >= 0");
    }
    values_[i] = values[i];
  }
}

double FeatureVector::mean_bitrate() const {
  double s = 0.0;
  for (int p = 0; p < kParts; ++p) s += bitrate(p);
  return s / kParts;
}

double FeatureVector::total_switch_kbps() const {
  double s = 0.0;
  for (int p = 0; p < kParts; ++p) s += switch_kbps(p);
  return s;
}

double FeatureVector::total_rebuffer_s() const {
  double s = 0.0;
  for (int p = 0; p < kParts; ++p) s += rebuffer_s(p);
  return s;
}

FeatureVector extract_features(const QualityPattern& pattern,
                               const BitrateLadder& ladder) {
  const auto& segs = pattern.segments();
  const std::size_t n = segs.size();
  std::array<double, kParts> bitrate_sum{};
  std::array<int, kParts> count{};
  FeatureVector f;
  for (std::size_t j = 0; j < n; ++j) {
    const auto part = static_cast<int>(j * kParts / n);
    bitrate_sum[part] += segs[j].bitrate_kbps;
    count[part] += 1;
    f.switch_kbps(part) += segs[j].switch_kbps;
    f.rebuffer_s(part) += segs[j].rebuffer_s;
  }
  double prev = 0.0;
  for (int p = 0; p < kParts; ++p) {
    if (count[p] > 0) {
      prev = std::clamp(bitrate_sum[p] / count[p], ladder.min_kbps(),
                        ladder.max_kbps());
    }
    f.bitrate(p) = prev;
  }
  return f;
}

std::size_t input_dimension(FeatureMode mode) {
  return mode == FeatureMode::kPerPart ? kFeatureCount : 3;
}

void model_inputs(const FeatureVector& f, FeatureMode mode,
                  std::span<double> out) {
  if (mode == FeatureMode::kPerPart) {
    std::copy(f.values().begin(), f.values().end(), out.begin());
    return;
  }
  out[0] = f.mean_bitrate();
  out[1] = f.total_switch_kbps();
  out[2] = f.total_rebuffer_s();
}

std::vector<double> model_inputs(const FeatureVector& f, FeatureMode mode) {
  std::vector<double> out(input_dimension(mode));
  model_inputs(f, mode, out);
  return out;
}

int bucketize_engagement(double engagement) {
  if (!(engagement >= 0.0 && engagement <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "engagement must be in [0,1]");
  }
  const int b = static_cast<int>(std::floor(engagement * kEngagementBuckets));
  return std::min(b, kEngagementBuckets - 1);
}

double bucket_median(int bucket) {
  return (bucket + 0.5) / kEngagementBuckets;
}

}  // namespace vidhoc::qoe
