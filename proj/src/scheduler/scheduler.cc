#include "vidhoc/scheduler/scheduler.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vidhoc/core/error.h"
#include "vidhoc/qoe/features.h"

namespace vidhoc::scheduler {

namespace {

constexpr double kTieTolerance = 1e-12;

void append_segment(std::vector<SegmentQuality>& segs, double bitrate,
                    double rebuffer) {
  const double sw = segs.empty() ? 0.0 : std::abs(bitrate - segs.back().bitrate_kbps);
  segs.push_back({bitrate, rebuffer, sw});
}

double adapted_level(const BitrateLadder& ladder, double kbps) {
  return ladder.level(ladder.highest_at_most(kbps, 1e-9).value_or(0));
}

// Orders candidates: objective, then QoE, then lower usage, then the
// lexicographically smaller key.
struct Candidate {
  double value = 0.0;
  double qoe = 0.0;
  double usage = 0.0;
  std::vector<double> key;

  bool better_than(const Candidate& o) const {
    if (std::abs(value - o.value) > kTieTolerance) return value > o.value;
    if (std::abs(qoe - o.qoe) > kTieTolerance) return qoe > o.qoe;
    if (std::abs(usage - o.usage) > kTieTolerance) return usage < o.usage;
    return key < o.key;
  }
};

// Advances a mixed-radix counter; false once it wraps.
bool next_combination(std::vector<std::size_t>& idx, std::size_t radix) {
  for (std::size_t i = idx.size(); i-- > 0;) {
    if (++idx[i] < radix) return true;
    idx[i] = 0;
  }
  return false;
}

std::size_t remaining_segments(const VideoManifest& video,
                               const SchedulerConfig& config,
                               std::size_t realized) {
  const std::size_t total = total_segments(video, config);
  if (realized >= total) {
    throw Error(ErrorCode::kInvalidArgument, "no segments left to schedule");
  }
  return total - realized;
}

}  // namespace

void SchedulerConfig::validate() const {
  if (horizon_segments < 1) {
    throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
  }
  if (coalesce_factor < 1) {
    throw Error(ErrorCode::kInvalidArgument, "coalesce factor must be >= 1");
  }
  if (!(bandwidth_limit_kbps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bandwidth limit must be > 0");
  }
  if (!(lambda >= 0.0) || !(usage_epsilon_kbps >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad objective parameters");
  }
  for (double b : bandwidth_grid) {
    if (!(b > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "grid bandwidths must be > 0");
    }
  }
}

std::vector<double> SchedulerConfig::grid(const BitrateLadder& ladder) const {
  return bandwidth_grid.empty() ? ladder.levels() : bandwidth_grid;
}

ObjectiveWeights weights_for(Scheme scheme, const SchedulerConfig& config,
                             int scheme_session_index) {
  switch (scheme) {
    case Scheme::kVidhoc:
      return {1.0, config.lambda};
    case Scheme::kGreedyOpt:
      return {1.0, 0.0};
    case Scheme::kGreedyPf:
      if (scheme_session_index <= config.greedy_pf_window) return {0.0, 1.0};
      return {1.0, 0.0};
    case Scheme::kNoOpt:
      break;
  }
  throw Error(ErrorCode::kInvalidArgument, "no_opt has no objective");
}

Objective evaluate_pattern(const qoe::QoeForest& forest,
                           const QualityPattern& pattern,
                           const BitrateLadder& ladder, double lambda) {
  const auto votes = forest.votes(qoe::extract_features(pattern, ladder));
  return Objective{qoe::predict_qoe(votes), qoe::uncertainty(votes), lambda};
}

double objective_value(const qoe::QoeForest& forest,
                       const QualityPattern& pattern,
                       const BitrateLadder& ladder, double lambda) {
  return evaluate_pattern(forest, pattern, ladder, lambda).value();
}

double bandwidth_usage(const QualityPattern& pattern, double predicted_qoe,
                       const VideoManifest& video) {
  if (!(predicted_qoe >= 0.0 && predicted_qoe <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "predicted QoE must be in [0,1]");
  }
  const std::size_t n = video.num_chunks();
  const double d = video.ladder().chunk_duration_s();
  const int g = pattern.coalesce_factor();
  if (pattern.size() != coalesce(n, d, g)) {
    throw Error(ErrorCode::kInvalidArgument,
                "pattern does not cover the video's segments");
  }
  if (predicted_qoe == 0.0) return 0.0;
  const double watched_s = predicted_qoe * static_cast<double>(n) * d;
  double kbits = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double overlap =
        std::clamp(watched_s - static_cast<double>(i) * d, 0.0, d);
    if (overlap <= 0.0) break;
    kbits += pattern.segments()[i / g].bitrate_kbps * overlap;
  }
  return kbits / watched_s;
}

PatternEvaluator::Score PatternEvaluator::score(const QualityPattern& pattern) {
  std::string key(pattern.size() * 3 * sizeof(double) + sizeof(int), '\0');
  char* out = key.data();
  for (const auto& s : pattern.segments()) {
    std::memcpy(out, &s.bitrate_kbps, sizeof(double));
    std::memcpy(out + sizeof(double), &s.rebuffer_s, sizeof(double));
    std::memcpy(out + 2 * sizeof(double), &s.switch_kbps, sizeof(double));
    out += 3 * sizeof(double);
  }
  const int g = pattern.coalesce_factor();
  std::memcpy(out, &g, sizeof(int));
  const auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  ++forest_calls_;
  const auto votes = forest_.votes(qoe::extract_features(pattern, ladder_));
  const Score s{qoe::predict_qoe(votes), qoe::uncertainty(votes)};
  cache_.emplace(std::move(key), s);
  return s;
}

std::size_t total_segments(const VideoManifest& video,
                           const SchedulerConfig& config) {
  return coalesce(video.num_chunks(), video.ladder().chunk_duration_s(),
                  config.coalesce_factor);
}

double pinned_level_kbps(const BitrateLadder& ladder,
                         const SchedulerConfig& config) {
  const auto idx = ladder.highest_at_most(config.bandwidth_limit_kbps,
                                          config.usage_epsilon_kbps);
  if (!idx) {
    throw Error(ErrorCode::kInfeasible,
                "bandwidth limit is below the lowest ladder level");
  }
  return ladder.level(*idx);
}

PatternChoice select_quality_pattern(
    const qoe::QoeForest& forest, const VideoManifest& video,
    const SchedulerConfig& config,
    const std::vector<SegmentQuality>& realized) {
  return select_quality_pattern(forest, video, config, realized,
                                ObjectiveWeights{1.0, config.lambda});
}

PatternChoice select_quality_pattern(
    const qoe::QoeForest& forest, const VideoManifest& video,
    const SchedulerConfig& config, const std::vector<SegmentQuality>& realized,
    const ObjectiveWeights& weights) {
  config.validate();
  const auto& ladder = video.ladder();
  const std::size_t remaining =
      remaining_segments(video, config, realized.size());
  const int h = static_cast<int>(
      std::min<std::size_t>(config.horizon_segments, remaining));
  const double pinned = pinned_level_kbps(ladder, config);
  const double limit = config.bandwidth_limit_kbps + config.usage_epsilon_kbps;

  PatternEvaluator evaluator(forest, ladder);
  std::vector<std::size_t> idx(h, 0);
  std::optional<Candidate> best;
  std::optional<PatternChoice> best_choice;
  std::size_t candidates = 0;
  do {
    std::vector<SegmentQuality> segs = realized;
    Candidate c;
    for (int k = 0; k < h; ++k) {
      append_segment(segs, ladder.level(idx[k]), 0.0);
      c.key.push_back(ladder.level(idx[k]));
    }
    for (std::size_t k = h; k < remaining; ++k) append_segment(segs, pinned, 0.0);
    QualityPattern pattern(std::move(segs), config.coalesce_factor);
    const auto s = evaluator.score(pattern);
    ++candidates;
    c.qoe = s.qoe;
    c.value = weights.qoe * s.qoe + weights.uncertainty * s.uncertainty;
    c.usage = bandwidth_usage(pattern, s.qoe, video);
    if (c.usage > limit) continue;
    if (!best || c.better_than(*best)) {
      best = c;
      PatternChoice choice;
      choice.pattern = std::move(pattern);
      choice.objective = Objective{s.qoe, s.uncertainty, weights.uncertainty};
      choice.usage_kbps = c.usage;
      choice.value = c.value;
      best_choice = std::move(choice);
    }
  } while (next_combination(idx, ladder.size()));
  if (!best_choice) {
    throw Error(ErrorCode::kInfeasible, "no quality pattern fits the limit");
  }
  if (best_choice->usage_kbps > limit) {
    throw Error(ErrorCode::kInvalidState, "selected pattern violates limit");
  }
  best_choice->candidates = candidates;
  return *best_choice;
}

ScheduleEvaluation evaluate_schedule(const BandwidthSchedule& schedule,
                                     const player::TransitionProfile& profile,
                                     PatternEvaluator& evaluator,
                                     const VideoManifest& video,
                                     const PlanningState& state,
                                     const SchedulerConfig& config,
                                     const ObjectiveWeights& weights) {
  schedule.validate();
  const auto& ladder = video.ladder();
  const std::size_t remaining =
      remaining_segments(video, config, state.realized.size());
  if (schedule.per_segment_kbps.size() != remaining) {
    throw Error(ErrorCode::kInvalidArgument,
                "schedule must cover every remaining segment");
  }
  const auto h = std::min<std::size_t>(config.horizon_segments, remaining);
  const auto& b = schedule.per_segment_kbps;

  ScheduleEvaluation eval;
  std::vector<SegmentQuality> segs = state.realized;
  segs.reserve(state.realized.size() + remaining);

  auto leaf = [&](double p) {
    const std::size_t mark = segs.size();
    for (std::size_t k = h; k < remaining; ++k) {
      append_segment(segs, adapted_level(ladder, b[k]), 0.0);
    }
    const QualityPattern pattern(segs, config.coalesce_factor);
    segs.resize(mark);
    const auto s = evaluator.score(pattern);
    eval.objective +=
        p * (weights.qoe * s.qoe + weights.uncertainty * s.uncertainty);
    eval.qoe += p * s.qoe;
    eval.uncertainty += p * s.uncertainty;
    eval.usage_kbps += p * bandwidth_usage(pattern, s.qoe, video);
    eval.probability += p;
    ++eval.outcome_paths;
  };

  auto recurse = [&](auto& self, std::size_t k, const StateBucket& bucket,
                     double p) -> void {
    if (k == h) {
      leaf(p);
      return;
    }
    for (const auto& o : profile.lookup(bucket, b[k])) {
      append_segment(segs,
                     player::bucket_bitrate_kbps(o.s2.bitrate_idx, ladder),
                     o.rebuffer_s);
      self(self, k + 1, o.s2, p * o.p);
      segs.pop_back();
    }
  };
  recurse(recurse, 0, state.bucket, 1.0);
  return eval;
}

double expected_objective(const BandwidthSchedule& schedule,
                          const player::TransitionProfile& profile,
                          const qoe::QoeForest& forest,
                          const PlanningState& state,
                          const VideoManifest& video,
                          const SchedulerConfig& config) {
  PatternEvaluator evaluator(forest, video.ladder());
  return evaluate_schedule(schedule, profile, evaluator, video, state, config,
                           ObjectiveWeights{1.0, config.lambda})
      .objective;
}

ScheduleChoice select_bandwidth_schedule(
    const qoe::QoeForest& forest, const player::TransitionProfile& profile,
    const VideoManifest& video, const PlanningState& state,
    const SchedulerConfig& config) {
  return select_bandwidth_schedule(forest, profile, video, state, config,
                                   ObjectiveWeights{1.0, config.lambda});
}

ScheduleChoice select_bandwidth_schedule(
    const qoe::QoeForest& forest, const player::TransitionProfile& profile,
    const VideoManifest& video, const PlanningState& state,
    const SchedulerConfig& config, const ObjectiveWeights& weights) {
  config.validate();
  const auto& ladder = video.ladder();
  const std::size_t remaining =
      remaining_segments(video, config, state.realized.size());
  const int h = static_cast<int>(
      std::min<std::size_t>(config.horizon_segments, remaining));
  const double pinned = pinned_level_kbps(ladder, config);
  const double limit = config.bandwidth_limit_kbps + config.usage_epsilon_kbps;
  const auto grid = config.grid(ladder);

  PatternEvaluator evaluator(forest, ladder);
  std::vector<std::size_t> idx(h, 0);
  std::optional<Candidate> best;
  ScheduleChoice choice;
  do {
    BandwidthSchedule schedule{std::vector<double>(remaining, pinned),
                               config.coalesce_factor};
    Candidate c;
    for (int k = 0; k < h; ++k) {
      schedule.per_segment_kbps[k] = grid[idx[k]];
      c.key.push_back(grid[idx[k]]);
    }
    const auto eval = evaluate_schedule(schedule, profile, evaluator, video,
                                        state, config, weights);
    ++choice.schedules_considered;
    choice.candidates += eval.outcome_paths;
    c.value = eval.objective;
    c.qoe = eval.qoe;
    c.usage = eval.usage_kbps;
    if (c.usage > limit) continue;
    if (!best || c.better_than(*best)) {
      best = c;
      choice.schedule = std::move(schedule);
      choice.evaluation = eval;
    }
  } while (next_combination(idx, grid.size()));
  if (!best) {
    throw Error(ErrorCode::kInfeasible, "no bandwidth schedule fits the limit");
  }
  if (choice.evaluation.usage_kbps > limit) {
    throw Error(ErrorCode::kInvalidState, "selected schedule violates limit");
  }
  return choice;
}

BandwidthSchedule no_opt_schedule(const VideoManifest& video,
                                  const PlanningState& state,
                                  const SchedulerConfig& config) {
  config.validate();
  const std::size_t remaining =
      remaining_segments(video, config, state.realized.size());
  return BandwidthSchedule{
      std::vector<double>(remaining, config.bandwidth_limit_kbps),
      config.coalesce_factor};
}

ScheduleChoice plan_schedule(Scheme scheme, const qoe::QoeForest* forest,
                             const player::TransitionProfile& profile,
                             const VideoManifest& video,
                             const PlanningState& state,
                             const SchedulerConfig& config) {
  if (scheme == Scheme::kNoOpt) {
    ScheduleChoice choice;
    choice.schedule = no_opt_schedule(video, state, config);
    choice.schedules_considered = 1;
    return choice;
  }
  if (forest == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "scheme needs a QoE model");
  }
  return select_bandwidth_schedule(
      *forest, profile, video, state, config,
      weights_for(scheme, config, state.scheme_session_index));
}

ScheduleChoice baseline_policy(std::string_view name,
                               const qoe::QoeForest* forest,
                               const player::TransitionProfile& profile,
                               const VideoManifest& video,
                               const PlanningState& state,
                               const SchedulerConfig& config) {
  const Scheme scheme = parse_scheme(name);
  if (scheme == Scheme::kVidhoc) {
    throw Error(ErrorCode::kInvalidArgument,
                "baseline must be greedy_opt, greedy_pf or no_opt");
  }
  return plan_schedule(scheme, forest, profile, video, state, config);
}

Json encode(const DecisionRecord& r) {
  return Json{{"session", r.session},
              {"segment", r.segment},
              {"candidates", r.candidates},
              {"chosen", r.chosen},
              {"objective", r.objective},
              {"expected_usage", r.expected_usage_kbps},
              {"fallback", r.fallback}};
}

DecisionRecord decode_decision(const Json& j) {
  try {
    DecisionRecord r;
    r.session = j.at("session").get<std::string>();
    r.segment = j.at("segment").get<std::size_t>();
    r.candidates = j.at("candidates").get<std::size_t>();
    r.chosen = j.at("chosen").get<std::vector<double>>();
    r.objective = j.at("objective").get<double>();
    r.expected_usage_kbps = j.at("expected_usage").get<double>();
    r.fallback = j.value("fallback", false);
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad decision row: ") + e.what());
  }
}

}  // namespace vidhoc::scheduler
