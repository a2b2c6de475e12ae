#include "vidhoc/harness/synthetic_user.h"

#include <algorithm>
#include <cmath>

#include "vidhoc/core/error.h"
#include "vidhoc/core/random.h"

namespace vidhoc::harness {

std::string_view time_profile_name(TimeProfile profile) {
  switch (profile) {
    case TimeProfile::kFront:
      return "front";
    case TimeProfile::kBack:
      return "back";
    case TimeProfile::kFlat:
      return "flat";
  }
  return "?";
}

TimeProfile parse_time_profile(std::string_view name) {
  for (auto p : {TimeProfile::kFront, TimeProfile::kBack, TimeProfile::kFlat}) {
    if (time_profile_name(p) == name) return p;
  }
  throw Error(ErrorCode::kParse, "unknown time profile: " + std::string(name));
}

TimeWeights time_weights(TimeProfile profile, double skew) {
  if (profile == TimeProfile::kFlat) return flat_time_weights();
  TimeWeights w{};
  double total = 0.0;
  for (int p = 0; p < qoe::kParts; ++p) {
    const int pos = profile == TimeProfile::kFront ? p : qoe::kParts - 1 - p;
    w[p] = std::exp(-skew * pos / (qoe::kParts - 1));
    total += w[p];
  }
  for (auto& x : w) x /= total;
  return w;
}

void SyntheticUser::validate() const {
  if (beta < 0 || gamma < 0 || delta < 0 || sigma < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic user " + user_id + ": negative parameter");
  }
  double total = 0.0;
  for (double w : time_weights) {
    if (w < 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "synthetic user " + user_id + ": negative time weight");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic user " + user_id + ": time weights must sum to 1");
  }
}

double expected_engagement(const SyntheticUser& user,
                           const QualityPattern& pattern,
                           const BitrateLadder& ladder) {
  const auto f = qoe::extract_features(pattern, ladder);
  const double max_kbps = ladder.max_kbps();
  double loss = 0.0;
  for (int p = 0; p < qoe::kParts; ++p) {
    loss += user.time_weights[p] *
            (user.beta * f.rebuffer_s(p) +
             user.gamma * (1.0 - f.bitrate(p) / max_kbps) +
             user.delta * f.switch_kbps(p) / max_kbps);
  }
  return 1.0 - loss;
}

double ground_truth_engagement(const SyntheticUser& user,
                               const QualityPattern& pattern,
                               const BitrateLadder& ladder,
                               std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  const double eps = gaussian(rng, user.sigma);
  return std::clamp(expected_engagement(user, pattern, ladder) + eps, 0.0, 1.0);
}

std::vector<SyntheticUser> synthetic_cohort(int n, double sigma,
                                            std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "cohort needs users");
  std::vector<SyntheticUser> users;
  const TimeProfile profiles[] = {TimeProfile::kFront, TimeProfile::kBack,
                                  TimeProfile::kFlat};
  for (int i = 0; i < n; ++i) {
    SyntheticUser u;
    u.user_id = "user" + std::to_string(i);
    const double scale = n == 1 ? 1.0 : 0.65 + 0.7 * i / (n - 1);
    u.beta = 0.6 * scale;
    u.gamma = 0.5 * scale;
    u.delta = 0.4 * scale;
    switch (i % 3) {
      case 0:
        u.beta *= 2;
        break;
      case 1:
        u.gamma *= 2;
        break;
      default:
        u.delta *= 2;
        break;
    }
    u.time_weights = time_weights(profiles[(i / 3) % 3]);
    u.sigma = sigma;
    u.rng_seed = derive_seed({seed, static_cast<std::uint64_t>(i)});
    users.push_back(u);
  }
  return users;
}

std::vector<SyntheticUser> random_users(int n, double sigma,
                                        std::uint64_t seed,
                                        std::string_view prefix) {
  Rng rng(seed);
  std::vector<SyntheticUser> users;
  for (int i = 0; i < n; ++i) {
    SyntheticUser u;
    u.user_id = std::string(prefix) + std::to_string(i);
    u.beta = uniform(rng, 0.3, 1.2);
    u.gamma = uniform(rng, 0.25, 1.0);
    u.delta = uniform(rng, 0.2, 0.8);
    u.time_weights = time_weights(static_cast<TimeProfile>(uniform_index(rng, 3)));
    u.sigma = sigma;
    u.rng_seed = derive_seed({seed, static_cast<std::uint64_t>(i), 1});
    users.push_back(u);
  }
  return users;
}

Json encode(const SyntheticUser& u) {
  return Json{{"user", u.user_id},          {"beta", u.beta},
              {"gamma", u.gamma},           {"delta", u.delta},
              {"time_weights", u.time_weights}, {"sigma", u.sigma},
              {"rng_seed", u.rng_seed}};
}

}  // namespace vidhoc::harness
