#include "vidhoc/player/sim_player.h"

#include <algorithm>
#include <cmath>

#include "vidhoc/core/error.h"

namespace vidhoc::player {

namespace {

constexpr double kTimeEps = 1e-12;

}  // namespace

SimPlayer::SimPlayer(VideoManifest manifest, PlayerConfig config,
                     std::uint64_t seed)
    : manifest_(std::move(manifest)), config_(config), rng_(seed) {
  if (!(config_.abr.safety > 0.0) || !(config_.abr.window_s > 0.0) ||
      config_.abr.upswitch_buffer_chunks < 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad ABR configuration");
  }
  if (config_.max_buffer_s < manifest_.ladder().chunk_duration_s()) {
    throw Error(ErrorCode::kInvalidArgument,
                "max buffer must hold at least one chunk");
  }
  if (config_.reaction_delay_min_s < 0.0 ||
      config_.reaction_delay_max_s < config_.reaction_delay_min_s) {
    throw Error(ErrorCode::kInvalidArgument, "bad reaction delay range");
  }
  last_bitrate_kbps_ = manifest_.ladder().min_kbps();
}

void SimPlayer::reset(const PlayerState& state, std::uint64_t seed) {
  if (!(state.buffer_s >= 0.0) || !(state.bw_now_kbps >= 0.0) ||
      !(state.bw_past_kbps >= 0.0) || !(state.bitrate_kbps >= 0.0)) {
    throw Error(ErrorCode::kInvalidState, "negative player state");
  }
  rng_.seed(seed);
  now_s_ = 0.0;
  buffer_s_ = std::min(state.buffer_s, config_.max_buffer_s);
  next_chunk_ = 0;
  in_flight_.reset();
  finished_ = false;
  played_s_ = 0.0;
  total_stall_s_ = 0.0;
  window_stall_s_ = 0.0;
  delivered_bits_ = 0.0;
  frozen_until_s_ = -std::numeric_limits<double>::infinity();
  samples_.clear();
  log_.clear();
  const bool fresh = state.buffer_s == 0.0 && state.bw_now_kbps == 0.0;
  if (fresh) {
    level_.reset();
    started_ = false;
    bw_signal_.reset();
    last_bitrate_kbps_ = manifest_.ladder().min_kbps();
    return;
  }
  level_ = manifest_.ladder().nearest(state.bitrate_kbps);
  last_bitrate_kbps_ = manifest_.ladder().level(*level_);
  started_ = true;
  if (state.bw_now_kbps > 0.0) {
    bw_signal_ = state.bw_now_kbps;
  } else {
    bw_signal_.reset();
  }
  if (state.bw_past_kbps > 0.0) {
    const double w = config_.abr.window_s;
    samples_.push_back({-w, 0.0, state.bw_past_kbps * w});
  }
}

void SimPlayer::set_bandwidth(double kbps) {
  if (!(kbps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bandwidth must be > 0");
  }
  if (bw_signal_ && std::abs(kbps - *bw_signal_) > 1e-9) {
    const double lo = config_.reaction_delay_min_s;
    const double hi = config_.reaction_delay_max_s;
    const double delay = hi > lo ? uniform(rng_, lo, hi) : lo;
    frozen_until_s_ = now_s_ + delay;
  }
  bw_signal_ = kbps;
}

double SimPlayer::throughput_estimate_kbps() const {
  if (samples_.empty()) return 0.0;
  const double from = now_s_ - config_.abr.window_s;
  double kbits = 0.0;
  double seconds = 0.0;
  for (const auto& s : samples_) {
    if (s.end_s <= from) continue;
    kbits += s.kbits;
    seconds += s.end_s - s.start_s;
  }
  if (seconds <= 0.0) {
    const auto& last = samples_.back();
    const double d = last.end_s - last.start_s;
    return d > 0.0 ? last.kbits / d : 0.0;
  }
  return kbits / seconds;
}

double SimPlayer::remaining_media_s() const {
  std::size_t pending = manifest_.num_chunks() - next_chunk_;
  if (in_flight_) --pending;
  return static_cast<double>(pending) * manifest_.ladder().chunk_duration_s();
}

std::size_t SimPlayer::choose_level() const {
  if (!level_) return 0;
  if (now_s_ < frozen_until_s_ || samples_.empty()) return *level_;
  const auto& ladder = manifest_.ladder();
  const double est = throughput_estimate_kbps();
  const std::size_t target =
      ladder.highest_at_most(config_.abr.safety * est, 1e-9).value_or(0);
  const double upswitch_buffer =
      config_.abr.upswitch_buffer_chunks * ladder.chunk_duration_s();
  if (target > *level_ && buffer_s_ < upswitch_buffer - 1e-9) return *level_;
  return target;
}

void SimPlayer::start_request(Network& network) {
  const std::size_t level = choose_level();
  level_ = level;
  Transfer t;
  t.context.now_s = now_s_;
  t.context.chunk = next_chunk_;
  t.context.bytes = manifest_.chunk_bytes(level, next_chunk_);
  t.context.buffer_s = buffer_s_;
  t.context.remaining_media_s =
      static_cast<double>(manifest_.num_chunks() - next_chunk_ - 1) *
      manifest_.ladder().chunk_duration_s();
  const TransferPlan plan = network.plan(t.context);
  if (!(plan.rate_kbps > 0.0) || !(plan.hold_s >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "network returned a bad plan");
  }
  t.hold_left_s = plan.hold_s;
  t.rate_kbps = plan.rate_kbps;
  t.kbits_left = static_cast<double>(t.context.bytes) * 8.0 / 1000.0;
  t.log.chunk = next_chunk_;
  t.log.level = level;
  t.log.bitrate_kbps = manifest_.ladder().level(level);
  t.log.bytes = t.context.bytes;
  t.log.request_s = now_s_;
  t.log.hold_s = plan.hold_s;
  in_flight_ = std::move(t);
}

void SimPlayer::finish_transfer(Network& network) {
  Transfer t = std::move(*in_flight_);
  in_flight_.reset();
  t.log.complete_s = now_s_;
  const double kbits = static_cast<double>(t.log.bytes) * 8.0 / 1000.0;
  buffer_s_ += manifest_.ladder().chunk_duration_s();
  started_ = true;
  delivered_bits_ += kbits * 1000.0;
  last_bitrate_kbps_ = t.log.bitrate_kbps;
  samples_.push_back({t.log.request_s, now_s_, kbits});
  const double from = now_s_ - config_.abr.window_s;
  while (samples_.size() > 1 && samples_.front().end_s <= from) {
    samples_.pop_front();
  }
  const double raw_s = now_s_ - t.log.request_s - t.log.hold_s;
  network.completed(t.context, t.log.hold_s, std::max(0.0, raw_s));
  log_.push_back(t.log);
  ++next_chunk_;
}

void SimPlayer::elapse(double dt_s, StepEvents& events) {
  if (started_ && buffer_s_ > 0.0) {
    buffer_s_ -= dt_s;
    if (buffer_s_ < kTimeEps) buffer_s_ = 0.0;
    played_s_ += dt_s;
  } else {
    total_stall_s_ += dt_s;
    window_stall_s_ += dt_s;
    events.stall_s += dt_s;
    if (in_flight_) in_flight_->log.stall_s += dt_s;
  }
  now_s_ += dt_s;
}

StepEvents SimPlayer::advance(double dt_s, Network& network) {
  if (!(dt_s >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dt must be >= 0");
  }
  StepEvents events;
  double remaining = dt_s;
  const std::size_t n = manifest_.num_chunks();
  const double idle_threshold =
      config_.max_buffer_s - manifest_.ladder().chunk_duration_s();
  while (remaining > kTimeEps && !finished_) {
    if (!in_flight_ && next_chunk_ < n) {
      if (buffer_s_ > idle_threshold + 1e-9) {
        const double wait = std::min(remaining, buffer_s_ - idle_threshold);
        elapse(wait, events);
        remaining -= wait;
        continue;
      }
      start_request(network);
    }
    if (in_flight_) {
      Transfer& t = *in_flight_;
      const bool holding = t.hold_left_s > 0.0;
      const double to_event =
          holding ? t.hold_left_s : t.kbits_left / t.rate_kbps;
      double d = std::min(remaining, to_event);
      if (started_ && buffer_s_ > 0.0) d = std::min(d, buffer_s_);
      const bool reached = d == to_event;
      elapse(d, events);
      remaining -= d;
      if (holding) {
        t.hold_left_s = reached ? 0.0 : t.hold_left_s - d;
      } else if (reached) {
        t.kbits_left = 0.0;
        const std::size_t chunk = t.log.chunk;
        finish_transfer(network);
        events.completed_chunks.push_back(chunk);
      } else {
        t.kbits_left = std::max(0.0, t.kbits_left - t.rate_kbps * d);
      }
      continue;
    }
    const double d = std::min(remaining, buffer_s_);
    elapse(d, events);
    remaining -= d;
    if (buffer_s_ <= kTimeEps) {
      buffer_s_ = 0.0;
      finished_ = true;
    }
  }
  return events;
}

StepEvents SimPlayer::step(double bandwidth_kbps, double dt_s) {
  set_bandwidth(bandwidth_kbps);
  if (in_flight_) in_flight_->rate_kbps = bandwidth_kbps;
  ConstantNetwork network(bandwidth_kbps);
  return advance(dt_s, network);
}

PlayerState SimPlayer::state() const {
  PlayerState s;
  s.bitrate_kbps = last_bitrate_kbps_;
  s.buffer_s = buffer_s_;
  s.bw_past_kbps = throughput_estimate_kbps();
  s.bw_now_kbps = bw_signal_.value_or(0.0);
  s.rebuf_window_s = window_stall_s_;
  return s;
}

}  // namespace vidhoc::player
