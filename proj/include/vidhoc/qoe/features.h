#ifndef VIDHOC_QOE_FEATURES_H_
#define VIDHOC_QOE_FEATURES_H_

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "vidhoc/core/types.h"

namespace vidhoc::qoe {

inline constexpr int kParts = 20;
inline constexpr std::size_t kFeatureCount = 3 * kParts;
inline constexpr int kEngagementBuckets = 10;

// Per part p: [3p] mean bitrate Kbps, [3p+1] total switch Kbps,
// [3p+2] total rebuffer s.
class FeatureVector {
 public:
  FeatureVector() { values_.fill(0.0); }
  // Throws unless values has exactly 60 entries, all >= 0.
  explicit FeatureVector(std::span<const double> values);

  double bitrate(int part) const { return values_[3 * part]; }
  double switch_kbps(int part) const { return values_[3 * part + 1]; }
  double rebuffer_s(int part) const { return values_[3 * part + 2]; }
  double& bitrate(int part) { return values_[3 * part]; }
  double& switch_kbps(int part) { return values_[3 * part + 1]; }
  double& rebuffer_s(int part) { return values_[3 * part + 2]; }

  std::span<const double> values() const { return values_; }

  double mean_bitrate() const;
  double total_switch_kbps() const;
  double total_rebuffer_s() const;

  bool operator==(const FeatureVector&) const = default;

 private:
  std::array<double, kFeatureCount> values_;
};

// Segment j of N lands in part floor(j * 20 / N). Parts that receive no
// segment inherit the previous part's bitrate. Mean bitrates are clamped
// into the ladder's range.
FeatureVector extract_features(const QualityPattern& pattern,
                               const BitrateLadder& ladder);

enum class FeatureMode {
  kPerPart,           // all 60 entries
  kSessionAggregate,  // (mean bitrate, total switch, total rebuffer)
};

std::size_t input_dimension(FeatureMode mode);
// Writes the model inputs for `mode` into out (sized by input_dimension).
void model_inputs(const FeatureVector& f, FeatureMode mode,
                  std::span<double> out);
std::vector<double> model_inputs(const FeatureVector& f, FeatureMode mode);

// floor(e * 10) with 1.0 clamped into bucket 9.
int bucketize_engagement(double engagement);
// Bucket median (k + 0.5) / 10.
double bucket_median(int bucket);

}  // namespace vidhoc::qoe

#endif  // VIDHOC_QOE_FEATURES_H_
