#ifndef VIDHOC_PLAYER_SIM_PLAYER_H_
#define VIDHOC_PLAYER_SIM_PLAYER_H_

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "vidhoc/core/random.h"
#include "vidhoc/core/types.h"

namespace vidhoc::player {

struct AbrConfig {
  // Picks the largest level <= safety * trailing throughput.
  double safety = 0.9;
  double window_s = 20.0;
  // Up-switches need at least this many chunks buffered.
  int upswitch_buffer_chunks = 2;
};

struct PlayerConfig {
  AbrConfig abr;
  double max_buffer_s = 30.0;
  // After each change of the bandwidth signal the ABR keeps its current
  // level for a delay drawn from U[min, max].
  double reaction_delay_min_s = 5.0;
  double reaction_delay_max_s = 30.0;
};

struct RequestContext {
  double now_s = 0.0;
  std::size_t chunk = 0;
  std::int64_t bytes = 0;
  double buffer_s = 0.0;
  // Media seconds not yet downloaded, excluding this chunk.
  double remaining_media_s = 0.0;
};

struct TransferPlan {
  double hold_s = 0.0;
  double rate_kbps = 0.0;
};

class Network {
 public:
  virtual ~Network() = default;
  virtual TransferPlan plan(const RequestContext& request) = 0;
  // Called once a transfer finishes; raw_s excludes the hold.
  virtual void completed(const RequestContext& request, double hold_s,
                         double raw_s) {
    (void)request;
    (void)hold_s;
    (void)raw_s;
  }
};

// Delivers at a fixed rate with no hold.
class ConstantNetwork : public Network {
 public:
  explicit ConstantNetwork(double kbps) : kbps_(kbps) {}
  void set_rate(double kbps) { kbps_ = kbps; }
  TransferPlan plan(const RequestContext&) override { return {0.0, kbps_}; }

 private:
  double kbps_;
};

struct ChunkLog {
  std::size_t chunk = 0;
  std::size_t level = 0;
  double bitrate_kbps = 0.0;
  std::int64_t bytes = 0;
  double request_s = 0.0;
  double hold_s = 0.0;
  double complete_s = 0.0;
  // Playback stall while this chunk was outstanding.
  double stall_s = 0.0;
};

struct StepEvents {
  double stall_s = 0.0;
  std::vector<std::size_t> completed_chunks;
};

// Chunk-level continuous-time player.
class SimPlayer {
 public:
  SimPlayer(VideoManifest manifest, PlayerConfig config, std::uint64_t seed);

  // Restarts playback from the first chunk at the given state. A state with
  // zero buffer and no bandwidth signal is a fresh session start.
  void reset(const PlayerState& state, std::uint64_t seed);

  // Changes the bandwidth signal; a real change starts a reaction delay.
  void set_bandwidth(double kbps);

  StepEvents advance(double dt_s, Network& network);
  // Constant-rate delivery at bandwidth_kbps for dt_s.
  StepEvents step(double bandwidth_kbps, double dt_s);

  // Zeroes the stall counter reported as rebuf_window_s.
  void begin_window() { window_stall_s_ = 0.0; }

  PlayerState state() const;
  bool download_complete() const {
    return !in_flight_ && next_chunk_ >= manifest_.num_chunks();
  }
  bool finished() const { return finished_; }
  double now_s() const { return now_s_; }
  double total_stall_s() const { return total_stall_s_; }
  double played_s() const { return played_s_; }
  double delivered_bits() const { return delivered_bits_; }
  // Media seconds still to download, excluding any chunk in flight.
  double remaining_media_s() const;
  const std::vector<ChunkLog>& chunk_log() const { return log_; }
  const VideoManifest& manifest() const { return manifest_; }
  const PlayerConfig& config() const { return config_; }

  double throughput_estimate_kbps() const;

 private:
  struct Transfer {
    ChunkLog log;
    double hold_left_s = 0.0;
    double kbits_left = 0.0;
    double rate_kbps = 0.0;
    RequestContext context;
  };
  struct Sample {
    double start_s;
    double end_s;
    double kbits;
  };

  std::size_t choose_level() const;
  void start_request(Network& network);
  void finish_transfer(Network& network);
  void elapse(double dt_s, StepEvents& events);

  VideoManifest manifest_;
  PlayerConfig config_;
  Rng rng_;

  double now_s_ = 0.0;
  double buffer_s_ = 0.0;
  std::size_t next_chunk_ = 0;
  std::optional<std::size_t> level_;
  std::optional<Transfer> in_flight_;
  bool started_ = false;
  bool finished_ = false;
  double played_s_ = 0.0;
  double total_stall_s_ = 0.0;
  double window_stall_s_ = 0.0;
  double delivered_bits_ = 0.0;
  double last_bitrate_kbps_ = 0.0;
  std::optional<double> bw_signal_;
  double frozen_until_s_ = -std::numeric_limits<double>::infinity();
  std::deque<Sample> samples_;
  std::vector<ChunkLog> log_;
};

}  // namespace vidhoc::player

#endif  // VIDHOC_PLAYER_SIM_PLAYER_H_
