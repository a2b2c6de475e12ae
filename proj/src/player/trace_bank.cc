#include "vidhoc/player/trace_bank.h"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "vidhoc/core/error.h"
#include "vidhoc/core/io.h"

namespace vidhoc::player {

void TraceBank::add_session(TraceSession session) {
  for (std::size_t i = 1; i < session.steps.size(); ++i) {
    if (!(session.steps[i].time_s > session.steps[i - 1].time_s)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "trace steps of " + session.session_id +
                      " are not time-ordered");
    }
  }
  sessions_.push_back(std::move(session));
}

std::size_t TraceBank::step_count() const {
  std::size_t n = 0;
  for (const auto& s : sessions_) n += s.steps.size();
  return n;
}

std::vector<const TraceStep*> TraceBank::matches(const PlayerState& s) const {
  std::vector<const TraceStep*> out;
  for (const auto& session : sessions_) {
    for (const auto& step : session.steps) {
      const PlayerState& t = step.state;
      if (std::abs(t.bitrate_kbps - s.bitrate_kbps) < thresholds_.bitrate_kbps &&
          std::abs(t.buffer_s - s.buffer_s) < thresholds_.buffer_s &&
          std::abs(t.bw_past_kbps - s.bw_past_kbps) < thresholds_.bw_past_kbps &&
          std::abs(t.bw_now_kbps - s.bw_now_kbps) < thresholds_.bw_now_kbps) {
        out.push_back(&step);
      }
    }
  }
  return out;
}

PlayerState TraceBank::trace_step(const PlayerState& s, Rng& rng) const {
  const auto candidates = matches(s);
  if (candidates.empty()) {
    throw Error(ErrorCode::kNoMatch, "no trace step matches the state");
  }
  return candidates[uniform_index(rng, candidates.size())]->next;
}

void TraceBank::save(std::ostream& out) const {
  for (const auto& session : sessions_) {
    Json steps = Json::array();
    for (const auto& step : session.steps) {
      steps.push_back(
          Json{{"t_s", step.time_s}, {"state", step.state}, {"next", step.next}});
    }
    out << Json{{"session", session.session_id}, {"steps", steps}}.dump()
        << '\n';
  }
}

TraceBank TraceBank::load(std::istream& in, MatchThresholds thresholds) {
  TraceBank bank(thresholds);
  for (const auto& row : io::read_jsonl(in)) {
    try {
      TraceSession session;
      session.session_id = row.at("session").get<std::string>();
      for (const auto& s : row.at("steps")) {
        session.steps.push_back({s.at("t_s").get<double>(),
                                 s.at("state").get<PlayerState>(),
                                 s.at("next").get<PlayerState>()});
      }
      bank.add_session(std::move(session));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("bad trace row: ") + e.what());
    }
  }
  return bank;
}

void TraceBank::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  save(out);
}

TraceBank TraceBank::load_file(const std::string& path,
                               MatchThresholds thresholds) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read " + path);
  return load(in, thresholds);
}

}  // namespace vidhoc::player
