#ifndef VIDHOC_HARNESS_SYNTHETIC_USER_H_
#define VIDHOC_HARNESS_SYNTHETIC_USER_H_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vidhoc/core/io.h"
#include "vidhoc/core/types.h"
#include "vidhoc/qoe/features.h"

namespace vidhoc::harness {

using TimeWeights = std::array<double, qoe::kParts>;

enum class TimeProfile { kFront, kBack, kFlat };

std::string_view time_profile_name(TimeProfile profile);
TimeProfile parse_time_profile(std::string_view name);

constexpr TimeWeights flat_time_weights() {
  TimeWeights w{};
  for (auto& x : w) x = 1.0 / qoe::kParts;
  return w;
}

// Weights proportional to exp(-skew * p / 19) for front, mirrored for back.
TimeWeights time_weights(TimeProfile profile, double skew = 2.0);

struct SyntheticUser {
  std::string user_id;
  // Engagement lost per stall second, per unit of (1 - bitrate / max) and
  // per unit of switch / max, before the part weights.
  double beta = 1.0;
  double gamma = 0.8;
  double delta = 0.6;
  TimeWeights time_weights = flat_time_weights();
  double sigma = 0.05;
  std::uint64_t rng_seed = 0;

  // Throws unless the sensitivities and sigma are >= 0 and the time weights
  // are >= 0 and sum to 1.
  void validate() const;
};

// Engagement before noise and clamping.
double expected_engagement(const SyntheticUser& user,
                           const QualityPattern& pattern,
                           const BitrateLadder& ladder);
// clamp(expected + eps, 0, 1) with eps ~ N(0, sigma^2) drawn from noise_seed.
double ground_truth_engagement(const SyntheticUser& user,
                               const QualityPattern& pattern,
                               const BitrateLadder& ladder,
                               std::uint64_t noise_seed);

// Cohort whose overall sensitivity scales evenly from 0.65 to 1.35. Users
// cycle which aspect they weigh double, and consecutive triples share a
// front, back or flat time profile.
std::vector<SyntheticUser> synthetic_cohort(int n, double sigma,
                                            std::uint64_t seed);
// Users with uniformly drawn sensitivities and time profiles, for the
// shared initial dataset.
std::vector<SyntheticUser> random_users(int n, double sigma,
                                        std::uint64_t seed,
                                        std::string_view prefix);

Json encode(const SyntheticUser& user);

}  // namespace vidhoc::harness

#endif  // VIDHOC_HARNESS_SYNTHETIC_USER_H_
