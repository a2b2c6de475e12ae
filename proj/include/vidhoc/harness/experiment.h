#ifndef VIDHOC_HARNESS_EXPERIMENT_H_
#define VIDHOC_HARNESS_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "vidhoc/core/io.h"
#include "vidhoc/core/random.h"
#include "vidhoc/analysis/heterogeneity.h"
#include "vidhoc/core/types.h"
#include "vidhoc/harness/synthetic_user.h"
#include "vidhoc/player/profile.h"
#include "vidhoc/player/sim_player.h"
#include "vidhoc/player/trace_bank.h"
#include "vidhoc/qoe/dataset.h"
#include "vidhoc/ratelimit/throttle.h"
#include "vidhoc/scheduler/scheduler.h"

namespace vidhoc::harness {

// Gaussian noise on the state the scheduler observes.
struct NoiseConfig {
  double bitrate_sigma_kbps = 0.0;
  double buffer_sigma_s = 0.0;
};

struct ExperimentConfig {
  std::vector<Scheme> schemes{std::begin(kAllSchemes), std::end(kAllSchemes)};
  int users = 15;
  // Every user watches this many sessions per scheme on average; the scheme
  // of each session is drawn uniformly.
  int sessions_per_scheme = 60;
  // Per-session link rate ~ U[min, max] times the multiplier.
  double link_min_kbps = 900.0;
  double link_max_kbps = 1500.0;
  double bandwidth_multiplier = 1.0;
  double alpha = 0.6;
  double ewma_weight = 1.0;
  scheduler::SchedulerConfig scheduler;
  // Outcomes kept per profile cell.
  int top_k = 3;
  NoiseConfig noise;
  double user_sigma = 0.05;
  int seed_users = 10;
  int seed_sessions = 12;
  int video_count = 12;
  double video_min_s = 30.0;
  double video_max_s = 180.0;
  BitrateLadder ladder = BitrateLadder::default_ladder();
  double window_s = 12.0;
  int profile_trials = 100;
  player::PlayerConfig player;
  qoe::DatasetConfig dataset;
  std::uint64_t seed = 2021;

  void validate() const;
  int sessions_per_user() const {
    return sessions_per_scheme * static_cast<int>(schemes.size());
  }
};

// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config_file(const std::string& path);
Json encode(const ExperimentConfig& config);

// Constant-bitrate videos with lengths spread over [min, max] seconds.
std::vector<VideoManifest> video_pool(const ExperimentConfig& config);

// Profile over the ladder-level grid, pruned to the top_k outcomes.
player::TransitionProfile build_profile(const ExperimentConfig& config);

// Throttles chunk transfers to the active target and holds requests so the
// session's mean throughput stays under alpha * link.
class CappedThrottleNetwork : public player::Network {
 public:
  CappedThrottleNetwork(double link_kbps, double alpha, double ewma_weight,
                        double chunk_duration_s);

  void set_target(double kbps) { throttle_.set_target(kbps); }
  void set_window(std::size_t window) { window_ = window; }

  player::TransferPlan plan(const player::RequestContext& request) override;
  void completed(const player::RequestContext& request, double hold_s,
                 double raw_s) override;

  double delivered_bits() const { return delivered_bits_; }
  std::vector<ratelimit::SegmentThroughput> throughput() const;

 private:
  struct WindowStats {
    double target_kbps = 0.0;
    double kbits = 0.0;
    double busy_s = 0.0;
  };
  double link_kbps_;
  double chunk_duration_s_;
  ratelimit::ThrottleState throttle_;
  ratelimit::ThroughputCap cap_;
  double delivered_bits_ = 0.0;
  std::size_t window_ = 0;
  std::map<std::size_t, WindowStats> windows_;
};

// Chooses the schedule for the remaining segments.
using Policy = std::function<scheduler::ScheduleChoice(
    const scheduler::PlanningState&, const scheduler::SchedulerConfig&)>;

struct SessionSetup {
  std::string session_id;
  const VideoManifest* video = nullptr;
  double link_kbps = 0.0;
  double alpha = 0.6;
  double ewma_weight = 1.0;
  double window_s = 12.0;
  int scheme_session_index = 1;
  scheduler::SchedulerConfig scheduler;  // limit already set
  player::PlayerConfig player;
  NoiseConfig noise;
  std::uint64_t player_seed = 0;
  std::uint64_t noise_seed = 0;
};

struct SessionRun {
  QualityPattern chunk_pattern{{SegmentQuality{}}, 1};
  QualityPattern segment_pattern{{SegmentQuality{}}, 1};
  std::vector<scheduler::DecisionRecord> decisions;
  player::TraceSession trace;
  std::vector<ratelimit::SegmentThroughput> throughput;
  double mean_throughput_kbps = 0.0;
  double duration_s = 0.0;
  double selected_uncertainty = 0.0;
  int infeasible_decisions = 0;
  double decision_seconds = 0.0;
};

// What the scheduler sees: the session-start bucket before the first chunk,
// else the noisy state snapped into the profiled domain.
StateBucket observed_bucket(const PlayerState& state, bool started,
                            double applied_kbps,
                            const std::vector<double>& grid,
                            const BitrateLadder& ladder, double max_buffer_s,
                            const NoiseConfig& noise, Rng& noise_rng);

// Plays one session, re-planning at every window until all segments are
// downloaded. An infeasible or failing decision falls back to the lowest
// grid level and is counted.
SessionRun run_session(const SessionSetup& setup, const Policy& policy);

// Per-chunk stalls and levels grouped into segments of g chunks.
QualityPattern segment_pattern(const std::vector<player::ChunkLog>& log, int g);

struct ExperimentWorld {
  ExperimentConfig config;
  std::vector<VideoManifest> videos;
  std::vector<SyntheticUser> users;
  player::TransitionProfile profile;
  qoe::UserDataset initial;
};

ExperimentWorld build_world(const ExperimentConfig& config);
// The shared initial dataset: seed users watching either one random grid
// level throughout or a level redrawn every window.
qoe::UserDataset initial_dataset(const ExperimentConfig& config,
                                 const std::vector<VideoManifest>& videos);

struct ExperimentResult {
  ExperimentWorld world;
  std::vector<SessionRecord> sessions;
  std::vector<scheduler::DecisionRecord> decisions;
  std::vector<player::TraceSession> traces;
  std::vector<std::pair<std::string, std::vector<ratelimit::SegmentThroughput>>>
      throughput;
  // Rows per "user/scheme" dataset at the end of the run.
  std::map<std::string, std::size_t> dataset_rows;
  // Final model of each "user/scheme".
  std::map<std::string, qoe::QoeForest> forests;
  double decision_seconds = 0.0;
  std::size_t decision_count = 0;
};

// Scheme of each of the user's sessions, drawn uniformly per session.
std::vector<Scheme> scheme_assignments(const ExperimentConfig& config,
                                       std::size_t user_index);

ExperimentResult run_ab_experiment(const ExperimentConfig& config);
ExperimentResult run_ab_experiment(ExperimentWorld world);

struct CurvePoint {
  Scheme scheme = Scheme::kNoOpt;
  int scheme_session_index = 0;
  int sessions = 0;
  double mean_engagement = 0.0;
  double cumulative_mean_engagement = 0.0;
  double mean_uncertainty = 0.0;
  double mean_throughput_kbps = 0.0;
};

// Mean over users at each scheme session index.
std::vector<CurvePoint> engagement_curves(
    const std::vector<SessionRecord>& sessions);
void write_summary(std::ostream& out, const std::vector<CurvePoint>& curves);

// Mean engagement of `a` minus `b` over scheme session indices
// [first, last], with users as the resampling unit. Each user contributes
// the difference of their own two scheme means; users missing either
// scheme in the window are left out.
analysis::BootstrapResult engagement_gap(
    const std::vector<SessionRecord>& sessions, Scheme a, Scheme b, int first,
    int last, int reps, std::uint64_t seed);

// Writes every artifact of the run into dir (created if missing).
void write_outputs(const ExperimentResult& result, const std::string& dir);

struct MicrobenchRow {
  std::string sweep;
  std::string value;
  Scheme scheme = Scheme::kVidhoc;
  double mean_engagement = 0.0;
  double mean_latency_ms = 0.0;
  double mean_candidates = 0.0;
  std::size_t decisions = 0;
};

// Sweeps horizon, state noise, the GreedyPF window and the aggregate
// feature mode around `base`, one experiment per cell.
std::vector<MicrobenchRow> microbenchmarks(const ExperimentConfig& base);
void write_microbench(std::ostream& out, const std::vector<MicrobenchRow>& rows);

}  // namespace vidhoc::harness

#endif  // VIDHOC_HARNESS_EXPERIMENT_H_
