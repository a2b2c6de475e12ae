#ifndef VIDHOC_PLAYER_PROFILE_H_
#define VIDHOC_PLAYER_PROFILE_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vidhoc/core/types.h"
#include "vidhoc/player/sim_player.h"

namespace vidhoc::player {

struct ProfileOutcome {
  StateBucket s2;
  double p = 0.0;
  // Mean stall seconds over the trials that landed in s2.
  double rebuffer_s = 0.0;

  bool operator==(const ProfileOutcome&) const = default;
};

// Empirical distribution of the next state bucket given the current bucket
// and the bandwidth applied for one window. The rebuffer component of the
// starting bucket is not part of the key.
class TransitionProfile {
 public:
  TransitionProfile() = default;
  TransitionProfile(double window_s, int trials);

  double window_s() const { return window_s_; }
  int trials() const { return trials_; }
  std::size_t size() const { return cells_.size(); }

  static StateBucket normalize(StateBucket s1);

  // Outcomes must be non-empty with probabilities summing to 1.
  void insert(const StateBucket& s1, double bandwidth_kbps,
              std::vector<ProfileOutcome> outcomes);
  bool contains(const StateBucket& s1, double bandwidth_kbps) const;
  // Throws kProfileGap when the cell was never profiled.
  const std::vector<ProfileOutcome>& lookup(const StateBucket& s1,
                                            double bandwidth_kbps) const;

  // Keeps the k most likely outcomes of every cell, renormalized.
  TransitionProfile top_k(std::size_t k) const;
  // Number of cells per outcome count.
  std::map<std::size_t, std::size_t> branching_histogram() const;

  void save(std::ostream& out) const;
  static TransitionProfile load(std::istream& in);
  void save_file(const std::string& path) const;
  static TransitionProfile load_file(const std::string& path);

  bool operator==(const TransitionProfile&) const = default;

 private:
  using Key = std::pair<StateBucket, std::int64_t>;
  static Key key(const StateBucket& s1, double bandwidth_kbps);

  double window_s_ = 12.0;
  int trials_ = 0;
  std::map<Key, std::vector<ProfileOutcome>> cells_;
};

// Player view used while profiling.
class ProfiledPlayer {
 public:
  virtual ~ProfiledPlayer() = default;
  virtual void reset(const PlayerState& state, std::uint64_t seed) = 0;
  // Plays window_s at a constant bandwidth and returns the final state, with
  // rebuf_window_s covering this window only.
  virtual PlayerState run_window(double bandwidth_kbps, double window_s) = 0;
};

class SimProfiledPlayer : public ProfiledPlayer {
 public:
  SimProfiledPlayer(VideoManifest manifest, PlayerConfig config);
  void reset(const PlayerState& state, std::uint64_t seed) override;
  PlayerState run_window(double bandwidth_kbps, double window_s) override;

 private:
  SimPlayer player_;
};

struct ProfileSpec {
  BitrateLadder ladder = BitrateLadder::default_ladder();
  std::vector<double> bandwidths_kbps;
  double window_s = 12.0;
  int trials = 100;
  double max_buffer_s = 30.0;
  std::uint64_t seed = 0;
};

// Session-start bucket: lowest level, empty buffer, no bandwidth signal.
StateBucket session_start_bucket(const BitrateLadder& ladder);

// Start buckets reachable during a session: the session start plus every
// ladder level x buffer bucket x bandwidth bucket of the grid.
std::vector<StateBucket> reachable_start_buckets(const ProfileSpec& spec);

// Draws a concrete state inside s1: the ladder level in the bitrate bucket,
// a uniform buffer within the bucket, and the grid bandwidth of the
// bandwidth bucket for both bandwidth fields.
PlayerState sample_start_state(const StateBucket& s1, const ProfileSpec& spec,
                               Rng& rng);

using PlayerFactory = std::function<std::unique_ptr<ProfiledPlayer>()>;

// SimPlayer over a long constant-bitrate video, so no window reaches the end.
PlayerFactory sim_player_factory(const BitrateLadder& ladder,
                                 const PlayerConfig& config,
                                 std::size_t num_chunks = 100);

// Runs spec.trials windows per (s1, b) cell. Every trial reseeds the player
// from (spec.seed, s1, b, trial).
TransitionProfile build_transition_profile(const PlayerFactory& factory,
                                           const ProfileSpec& spec,
                                           const std::vector<StateBucket>& s1s);

// Representative bitrate of a bitrate bucket: the ladder level inside it,
// else the bucket midpoint.
double bucket_bitrate_kbps(int bitrate_idx, const BitrateLadder& ladder);

}  // namespace vidhoc::player

#endif  // VIDHOC_PLAYER_PROFILE_H_
