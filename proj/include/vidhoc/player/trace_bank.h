#ifndef VIDHOC_PLAYER_TRACE_BANK_H_
#define VIDHOC_PLAYER_TRACE_BANK_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "vidhoc/core/random.h"
#include "vidhoc/core/types.h"

namespace vidhoc::player {

// One observed window: the state when it began (bw_now is the bandwidth
// applied during the window) and the state when it ended.
struct TraceStep {
  double time_s = 0.0;
  PlayerState state;
  PlayerState next;

  bool operator==(const TraceStep&) const = default;
};

struct TraceSession {
  std::string session_id;
  std::vector<TraceStep> steps;

  bool operator==(const TraceSession&) const = default;
};

struct MatchThresholds {
  double bitrate_kbps = 200.0;
  double buffer_s = 5.0;
  double bw_past_kbps = 200.0;
  double bw_now_kbps = 200.0;
};

class TraceBank {
 public:
  TraceBank() = default;
  explicit TraceBank(MatchThresholds thresholds) : thresholds_(thresholds) {}

  // Steps must be strictly increasing in time.
  void add_session(TraceSession session);
  const std::vector<TraceSession>& sessions() const { return sessions_; }
  std::size_t step_count() const;

  // Steps whose starting state is within every threshold (strictly) of s.
  std::vector<const TraceStep*> matches(const PlayerState& s) const;

  // Next state of a uniformly drawn matching step; throws kNoMatch.
  PlayerState trace_step(const PlayerState& s, Rng& rng) const;

  void save(std::ostream& out) const;
  static TraceBank load(std::istream& in, MatchThresholds thresholds = {});
  void save_file(const std::string& path) const;
  static TraceBank load_file(const std::string& path,
                             MatchThresholds thresholds = {});

 private:
  MatchThresholds thresholds_;
  std::vector<TraceSession> sessions_;
};

}  // namespace vidhoc::player

#endif  // VIDHOC_PLAYER_TRACE_BANK_H_
