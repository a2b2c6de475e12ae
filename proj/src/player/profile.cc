#include "vidhoc/player/profile.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "vidhoc/core/error.h"
#include "vidhoc/core/io.h"
#include "vidhoc/core/random.h"

namespace vidhoc::player {

namespace {

constexpr double kProbabilityTolerance = 1e-6;

std::uint64_t bucket_hash(const StateBucket& s) {
  return derive_seed({static_cast<std::uint64_t>(s.bitrate_idx),
                      static_cast<std::uint64_t>(s.buffer_idx),
                      static_cast<std::uint64_t>(s.bandwidth_idx),
                      static_cast<std::uint64_t>(s.rebuf_idx)});
}

void sort_outcomes(std::vector<ProfileOutcome>& outcomes) {
  std::sort(outcomes.begin(), outcomes.end(),
            [](const ProfileOutcome& a, const ProfileOutcome& b) {
              return a.s2 < b.s2;
            });
}

}  // namespace

TransitionProfile::TransitionProfile(double window_s, int trials)
    : window_s_(window_s), trials_(trials) {
  if (!(window_s_ > 0.0) || trials_ < 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad profile parameters");
  }
}

StateBucket TransitionProfile::normalize(StateBucket s1) {
  s1.rebuf_idx = 0;
  return s1;
}

TransitionProfile::Key TransitionProfile::key(const StateBucket& s1,
                                              double bandwidth_kbps) {
  return {normalize(s1), std::llround(bandwidth_kbps * 1000.0)};
}

void TransitionProfile::insert(const StateBucket& s1, double bandwidth_kbps,
                               std::vector<ProfileOutcome> outcomes) {
  if (outcomes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "profile cell has no outcomes");
  }
  double total = 0.0;
  for (const auto& o : outcomes) {
    if (!(o.p > 0.0) || !(o.rebuffer_s >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "bad profile outcome");
    }
    total += o.p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "outcome probabilities must sum to 1");
  }
  sort_outcomes(outcomes);
  cells_[key(s1, bandwidth_kbps)] = std::move(outcomes);
}

bool TransitionProfile::contains(const StateBucket& s1,
                                 double bandwidth_kbps) const {
  return cells_.count(key(s1, bandwidth_kbps)) > 0;
}

const std::vector<ProfileOutcome>& TransitionProfile::lookup(
    const StateBucket& s1, double bandwidth_kbps) const {
  const auto it = cells_.find(key(s1, bandwidth_kbps));
  if (it == cells_.end()) {
    throw Error(ErrorCode::kProfileGap,
                "no profile entry for state (" +
                    std::to_string(s1.bitrate_idx) + "," +
                    std::to_string(s1.buffer_idx) + "," +
                    std::to_string(s1.bandwidth_idx) + ") at " +
                    io::format_double(bandwidth_kbps) + " Kbps");
  }
  return it->second;
}

std::map<std::size_t, std::size_t> TransitionProfile::branching_histogram()
    const {
  std::map<std::size_t, std::size_t> out;
  for (const auto& [cell, outcomes] : cells_) ++out[outcomes.size()];
  return out;
}

TransitionProfile TransitionProfile::top_k(std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  TransitionProfile out(window_s_, trials_);
  for (const auto& [cell, outcomes] : cells_) {
    std::vector<ProfileOutcome> kept = outcomes;
    std::stable_sort(kept.begin(), kept.end(),
                     [](const ProfileOutcome& a, const ProfileOutcome& b) {
                       return a.p > b.p;
                     });
    if (kept.size() > k) kept.resize(k);
    double mass = 0.0;
    for (const auto& o : kept) mass += o.p;
    for (auto& o : kept) o.p /= mass;
    sort_outcomes(kept);
    out.cells_[cell] = std::move(kept);
  }
  return out;
}

void TransitionProfile::save(std::ostream& out) const {
  for (const auto& [cell, outcomes] : cells_) {
    Json row;
    row["s1"] = cell.first;
    row["b"] = static_cast<double>(cell.second) / 1000.0;
    row["window_s"] = window_s_;
    row["trials"] = trials_;
    Json list = Json::array();
    for (const auto& o : outcomes) {
      list.push_back(Json{{"s2", o.s2}, {"p", o.p}, {"rebuf_s", o.rebuffer_s}});
    }
    row["outcomes"] = std::move(list);
    out << row.dump() << '\n';
  }
}

TransitionProfile TransitionProfile::load(std::istream& in) {
  TransitionProfile profile;
  bool first = true;
  for (const auto& row : io::read_jsonl(in)) {
    try {
      const double window = row.at("window_s").get<double>();
      const int trials = row.at("trials").get<int>();
      if (first) {
        profile = TransitionProfile(window, trials);
        first = false;
      } else if (window != profile.window_s_ || trials != profile.trials_) {
        throw Error(ErrorCode::kParse, "inconsistent profile rows");
      }
      std::vector<ProfileOutcome> outcomes;
      for (const auto& o : row.at("outcomes")) {
        outcomes.push_back({o.at("s2").get<StateBucket>(),
                            o.at("p").get<double>(),
                            o.value("rebuf_s", 0.0)});
      }
      profile.insert(row.at("s1").get<StateBucket>(),
                     row.at("b").get<double>(), std::move(outcomes));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("bad profile row: ") + e.what());
    }
  }
  return profile;
}

void TransitionProfile::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  save(out);
}

TransitionProfile TransitionProfile::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read " + path);
  return load(in);
}

SimProfiledPlayer::SimProfiledPlayer(VideoManifest manifest,
                                     PlayerConfig config)
    : player_(std::move(manifest), config, 0) {}

void SimProfiledPlayer::reset(const PlayerState& state, std::uint64_t seed) {
  player_.reset(state, seed);
}

PlayerState SimProfiledPlayer::run_window(double bandwidth_kbps,
                                          double window_s) {
  player_.begin_window();
  player_.step(bandwidth_kbps, window_s);
  return player_.state();
}

PlayerFactory sim_player_factory(const BitrateLadder& ladder,
                                 const PlayerConfig& config,
                                 std::size_t num_chunks) {
  return [ladder, config, num_chunks]() -> std::unique_ptr<ProfiledPlayer> {
    return std::make_unique<SimProfiledPlayer>(
        VideoManifest::constant_bitrate("profile", ladder, num_chunks), config);
  };
}

StateBucket session_start_bucket(const BitrateLadder& ladder) {
  PlayerState s;
  s.bitrate_kbps = ladder.min_kbps();
  return quantize_state(s);
}

double bucket_bitrate_kbps(int bitrate_idx, const BitrateLadder& ladder) {
  const double lo = bitrate_idx * kBitrateBucketKbps;
  const double hi = lo + kBitrateBucketKbps;
  for (double level : ladder.levels()) {
    if (level >= lo && level < hi) return level;
  }
  return lo + kBitrateBucketKbps / 2.0;
}

namespace {

double bucket_bandwidth_kbps(int bandwidth_idx, const ProfileSpec& spec) {
  if (bandwidth_idx == 0) return 0.0;
  for (double b : spec.bandwidths_kbps) {
    if (bandwidth_bucket(b) == bandwidth_idx) return b;
  }
  return (bandwidth_idx + 0.5) * kBandwidthBucketKbps;
}

}  // namespace

std::vector<StateBucket> reachable_start_buckets(const ProfileSpec& spec) {
  std::vector<StateBucket> out{session_start_bucket(spec.ladder)};
  std::vector<int> bw_buckets;
  for (double b : spec.bandwidths_kbps) bw_buckets.push_back(bandwidth_bucket(b));
  std::sort(bw_buckets.begin(), bw_buckets.end());
  bw_buckets.erase(std::unique(bw_buckets.begin(), bw_buckets.end()),
                   bw_buckets.end());
  const int max_buffer_idx =
      static_cast<int>(std::floor(spec.max_buffer_s / kBufferBucketS));
  for (double level : spec.ladder.levels()) {
    const int br = static_cast<int>(std::floor(level / kBitrateBucketKbps));
    for (int buf = 0; buf <= max_buffer_idx; ++buf) {
      for (int bw : bw_buckets) {
        if (bw == 0) continue;
        out.push_back({br, buf, bw, 0});
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PlayerState sample_start_state(const StateBucket& s1, const ProfileSpec& spec,
                               Rng& rng) {
  PlayerState s;
  s.bitrate_kbps = bucket_bitrate_kbps(s1.bitrate_idx, spec.ladder);
  const double bw = bucket_bandwidth_kbps(s1.bandwidth_idx, spec);
  s.bw_now_kbps = bw;
  s.bw_past_kbps = bw;
  if (s1.bandwidth_idx == 0 && s1.buffer_idx == 0) {
    s.buffer_s = 0.0;
    return s;
  }
  const double lo = s1.buffer_idx * kBufferBucketS;
  s.buffer_s = std::min(uniform(rng, lo, lo + kBufferBucketS), spec.max_buffer_s);
  return s;
}

TransitionProfile build_transition_profile(
    const PlayerFactory& factory, const ProfileSpec& spec,
    const std::vector<StateBucket>& s1s) {
  if (spec.trials < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  }
  if (spec.bandwidths_kbps.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no bandwidths to profile");
  }
  TransitionProfile profile(spec.window_s, spec.trials);
  std::unique_ptr<ProfiledPlayer> player = factory();
  struct Tally {
    int count = 0;
    double rebuffer_s = 0.0;
  };
  for (const auto& raw_s1 : s1s) {
    const StateBucket s1 = TransitionProfile::normalize(raw_s1);
    for (double b : spec.bandwidths_kbps) {
      std::map<StateBucket, Tally> tallies;
      for (int trial = 0; trial < spec.trials; ++trial) {
        const std::uint64_t seed = derive_seed(
            {spec.seed, bucket_hash(s1),
             static_cast<std::uint64_t>(std::llround(b * 1000.0)),
             static_cast<std::uint64_t>(trial)});
        Rng rng(seed);
        player->reset(sample_start_state(s1, spec, rng), mix64(seed));
        const PlayerState end = player->run_window(b, spec.window_s);
        Tally& t = tallies[quantize_state(end)];
        ++t.count;
        t.rebuffer_s += end.rebuf_window_s;
      }
      std::vector<ProfileOutcome> outcomes;
      for (const auto& [s2, t] : tallies) {
        outcomes.push_back({s2, static_cast<double>(t.count) / spec.trials,
                            t.rebuffer_s / t.count});
      }
      profile.insert(s1, b, std::move(outcomes));
    }
  }
  return profile;
}

}  // namespace vidhoc::player
