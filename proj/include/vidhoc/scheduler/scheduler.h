#ifndef VIDHOC_SCHEDULER_SCHEDULER_H_
#define VIDHOC_SCHEDULER_SCHEDULER_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vidhoc/core/io.h"
#include "vidhoc/core/types.h"
#include "vidhoc/player/profile.h"
#include "vidhoc/qoe/forest.h"

namespace vidhoc::scheduler {

struct Objective {
  double qoe = 0.0;
  double uncertainty = 0.0;
  double lambda = 1.0;

  double value() const { return qoe + lambda * uncertainty; }
};

struct SchedulerConfig {
  int horizon_segments = 2;
  int coalesce_factor = 4;
  double bandwidth_limit_kbps = 0.0;
  // Candidate bandwidths per horizon segment; empty means the ladder levels.
  std::vector<double> bandwidth_grid;
  Scheme scheme = Scheme::kVidhoc;
  double lambda = 1.0;
  // Feasibility slack on usage <= limit.
  double usage_epsilon_kbps = 1.0;
  // GreedyPF profiles for this many of its sessions.
  int greedy_pf_window = 30;

  void validate() const;
  std::vector<double> grid(const BitrateLadder& ladder) const;
};

// Linear weights of the two objective terms.
struct ObjectiveWeights {
  double qoe = 1.0;
  double uncertainty = 1.0;
};

// Weights a scheme optimizes with; greedy_pf switches from uncertainty only
// to QoE only after its profiling window. Throws for no_opt.
ObjectiveWeights weights_for(Scheme scheme, const SchedulerConfig& config,
                             int scheme_session_index);

// predict_qoe + lambda * uncertainty of the pattern's features.
double objective_value(const qoe::QoeForest& forest,
                       const QualityPattern& pattern,
                       const BitrateLadder& ladder, double lambda);
Objective evaluate_pattern(const qoe::QoeForest& forest,
                           const QualityPattern& pattern,
                           const BitrateLadder& ladder, double lambda);

// Mean bitrate over the first predicted_qoe * duration seconds of the
// video, with the last watched chunk counted for the fraction watched.
// Zero when predicted_qoe is 0.
double bandwidth_usage(const QualityPattern& pattern, double predicted_qoe,
                       const VideoManifest& video);

// Memoized forest scoring of candidate patterns.
class PatternEvaluator {
 public:
  struct Score {
    double qoe = 0.0;
    double uncertainty = 0.0;
  };

  PatternEvaluator(const qoe::QoeForest& forest, const BitrateLadder& ladder)
      : forest_(forest), ladder_(ladder) {}

  Score score(const QualityPattern& pattern);
  std::size_t forest_calls() const { return forest_calls_; }

 private:
  const qoe::QoeForest& forest_;
  const BitrateLadder& ladder_;
  std::unordered_map<std::string, Score> cache_;
  std::size_t forest_calls_ = 0;
};

// Where a session stands when a decision is made.
struct PlanningState {
  StateBucket bucket;
  // Whole segments already downloaded, in order.
  std::vector<SegmentQuality> realized;
  int scheme_session_index = 1;
};

std::size_t total_segments(const VideoManifest& video,
                           const SchedulerConfig& config);
// Largest ladder level whose constant streaming respects the limit.
double pinned_level_kbps(const BitrateLadder& ladder,
                         const SchedulerConfig& config);

struct PatternChoice {
  QualityPattern pattern{{SegmentQuality{}}, 1};
  Objective objective;
  // Weighted objective the choice maximized.
  double value = 0.0;
  double usage_kbps = 0.0;
  std::size_t candidates = 0;
};

// Enumerates ladder levels over the horizon segments after `realized`,
// pins the rest, and returns the feasible argmax of the weighted objective.
// Throws kInfeasible when nothing fits under the limit.
PatternChoice select_quality_pattern(
    const qoe::QoeForest& forest, const VideoManifest& video,
    const SchedulerConfig& config,
    const std::vector<SegmentQuality>& realized = {});
PatternChoice select_quality_pattern(
    const qoe::QoeForest& forest, const VideoManifest& video,
    const SchedulerConfig& config, const std::vector<SegmentQuality>& realized,
    const ObjectiveWeights& weights);

struct ScheduleEvaluation {
  double objective = 0.0;
  double qoe = 0.0;
  double uncertainty = 0.0;
  double usage_kbps = 0.0;
  double probability = 0.0;
  std::size_t outcome_paths = 0;
};

// Chains profile transitions over the horizon part of `schedule`, which
// covers every remaining segment. Beyond the horizon each segment plays
// the largest level under its bandwidth without stalls.
ScheduleEvaluation evaluate_schedule(const BandwidthSchedule& schedule,
                                     const player::TransitionProfile& profile,
                                     PatternEvaluator& evaluator,
                                     const VideoManifest& video,
                                     const PlanningState& state,
                                     const SchedulerConfig& config,
                                     const ObjectiveWeights& weights);

double expected_objective(const BandwidthSchedule& schedule,
                          const player::TransitionProfile& profile,
                          const qoe::QoeForest& forest,
                          const PlanningState& state,
                          const VideoManifest& video,
                          const SchedulerConfig& config);

struct ScheduleChoice {
  BandwidthSchedule schedule;
  ScheduleEvaluation evaluation;
  std::size_t schedules_considered = 0;
  // Outcome patterns evaluated over all candidate schedules.
  std::size_t candidates = 0;
};

ScheduleChoice select_bandwidth_schedule(
    const qoe::QoeForest& forest, const player::TransitionProfile& profile,
    const VideoManifest& video, const PlanningState& state,
    const SchedulerConfig& config);
ScheduleChoice select_bandwidth_schedule(
    const qoe::QoeForest& forest, const player::TransitionProfile& profile,
    const VideoManifest& video, const PlanningState& state,
    const SchedulerConfig& config, const ObjectiveWeights& weights);

// Flat schedule at the limit over the remaining segments.
BandwidthSchedule no_opt_schedule(const VideoManifest& video,
                                  const PlanningState& state,
                                  const SchedulerConfig& config);

// Decision of `scheme`; forest may be null only for no_opt.
ScheduleChoice plan_schedule(Scheme scheme, const qoe::QoeForest* forest,
                             const player::TransitionProfile& profile,
                             const VideoManifest& video,
                             const PlanningState& state,
                             const SchedulerConfig& config);

// name is one of greedy_opt, greedy_pf, no_opt.
ScheduleChoice baseline_policy(std::string_view name,
                               const qoe::QoeForest* forest,
                               const player::TransitionProfile& profile,
                               const VideoManifest& video,
                               const PlanningState& state,
                               const SchedulerConfig& config);

struct DecisionRecord {
  std::string session;
  std::size_t segment = 0;
  std::size_t candidates = 0;
  std::vector<double> chosen;
  double objective = 0.0;
  double expected_usage_kbps = 0.0;
  // The policy failed and the lowest level was applied instead.
  bool fallback = false;
};

Json encode(const DecisionRecord& record);
DecisionRecord decode_decision(const Json& j);

}  // namespace vidhoc::scheduler

#endif  // VIDHOC_SCHEDULER_SCHEDULER_H_
