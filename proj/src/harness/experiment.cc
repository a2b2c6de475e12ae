#include "vidhoc/harness/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <span>

#include "vidhoc/analysis/heterogeneity.h"
#include "vidhoc/core/error.h"

namespace vidhoc::harness {

namespace {

std::uint64_t tag(std::string_view s) { return hash_string(s); }

void check_keys(const Json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kParse, where + ": expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorCode::kParse, where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_key(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

const char* mode_name(qoe::FeatureMode mode) {
  return mode == qoe::FeatureMode::kPerPart ? "per_part" : "aggregate";
}

qoe::FeatureMode parse_mode(const std::string& s) {
  if (s == "per_part") return qoe::FeatureMode::kPerPart;
  if (s == "aggregate") return qoe::FeatureMode::kSessionAggregate;
  throw Error(ErrorCode::kParse, "unknown feature mode: " + s);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "experiment config: " + what);
  };
  if (schemes.empty()) bad("schemes must be non-empty");
  if (users < 1) bad("users must be >= 1");
  if (sessions_per_scheme < 1) bad("sessions must be >= 1");
  if (!(link_min_kbps > 0) || link_max_kbps < link_min_kbps) {
    bad("link range must be positive and ordered");
  }
  if (!(bandwidth_multiplier > 0)) bad("bandwidth multiplier must be > 0");
  if (!(alpha > 0) || alpha > 1) bad("alpha must be in (0, 1]");
  if (top_k < 1) bad("top_k must be >= 1");
  if (noise.bitrate_sigma_kbps < 0 || noise.buffer_sigma_s < 0) {
    bad("noise must be >= 0");
  }
  if (user_sigma < 0) bad("user sigma must be >= 0");
  if (seed_users < 1 || seed_sessions < 1) bad("seed data must be non-empty");
  if (video_count < 1 || !(video_min_s > 0) || video_max_s < video_min_s) {
    bad("video pool must be non-empty with ordered lengths");
  }
  if (!(window_s > 0) || profile_trials < 1) bad("bad profiling window");
  if (scheduler.horizon_segments < 1 || scheduler.coalesce_factor < 1) {
    bad("horizon and coalesce factor must be >= 1");
  }
}

namespace {

ExperimentConfig parse_config_fields(const Json& j) {
  check_keys(j,
             {"schemes", "users", "sessions_per_scheme", "link_min_kbps",
              "link_max_kbps", "bandwidth_multiplier", "alpha", "ewma_weight",
              "top_k", "user_sigma", "seed_users", "seed_sessions",
              "video_count", "video_min_s", "video_max_s", "ladder",
              "window_s", "profile_trials", "seed", "scheduler", "noise",
              "player", "model"},
             "config");
  ExperimentConfig c;
  if (j.contains("schemes")) {
    c.schemes.clear();
    for (const auto& s : j.at("schemes")) {
      c.schemes.push_back(parse_scheme(s.get<std::string>()));
    }
  }
  read_key(j, "users", c.users);
  read_key(j, "sessions_per_scheme", c.sessions_per_scheme);
  read_key(j, "link_min_kbps", c.link_min_kbps);
  read_key(j, "link_max_kbps", c.link_max_kbps);
  read_key(j, "bandwidth_multiplier", c.bandwidth_multiplier);
  read_key(j, "alpha", c.alpha);
  read_key(j, "ewma_weight", c.ewma_weight);
  read_key(j, "top_k", c.top_k);
  read_key(j, "user_sigma", c.user_sigma);
  read_key(j, "seed_users", c.seed_users);
  read_key(j, "seed_sessions", c.seed_sessions);
  read_key(j, "video_count", c.video_count);
  read_key(j, "video_min_s", c.video_min_s);
  read_key(j, "video_max_s", c.video_max_s);
  if (j.contains("ladder")) c.ladder = io::decode_ladder(j.at("ladder"));
  read_key(j, "window_s", c.window_s);
  read_key(j, "profile_trials", c.profile_trials);
  read_key(j, "seed", c.seed);
  if (j.contains("scheduler")) {
    const auto& s = j.at("scheduler");
    check_keys(s,
               {"horizon_segments", "coalesce_factor", "lambda",
                "greedy_pf_window", "bandwidth_grid", "usage_epsilon_kbps"},
               "scheduler");
    read_key(s, "horizon_segments", c.scheduler.horizon_segments);
    read_key(s, "coalesce_factor", c.scheduler.coalesce_factor);
    read_key(s, "lambda", c.scheduler.lambda);
    read_key(s, "greedy_pf_window", c.scheduler.greedy_pf_window);
    read_key(s, "bandwidth_grid", c.scheduler.bandwidth_grid);
    read_key(s, "usage_epsilon_kbps", c.scheduler.usage_epsilon_kbps);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, {"bitrate_sigma_kbps", "buffer_sigma_s"}, "noise");
    read_key(n, "bitrate_sigma_kbps", c.noise.bitrate_sigma_kbps);
    read_key(n, "buffer_sigma_s", c.noise.buffer_sigma_s);
  }
  if (j.contains("player")) {
    const auto& p = j.at("player");
    check_keys(p,
               {"safety", "abr_window_s", "upswitch_buffer_chunks",
                "max_buffer_s", "reaction_delay_min_s", "reaction_delay_max_s"},
               "player");
    read_key(p, "safety", c.player.abr.safety);
    read_key(p, "abr_window_s", c.player.abr.window_s);
    read_key(p, "upswitch_buffer_chunks", c.player.abr.upswitch_buffer_chunks);
    read_key(p, "max_buffer_s", c.player.max_buffer_s);
    read_key(p, "reaction_delay_min_s", c.player.reaction_delay_min_s);
    read_key(p, "reaction_delay_max_s", c.player.reaction_delay_max_s);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m,
               {"num_trees", "max_depth", "min_leaf", "features_per_split",
                "mode", "initial_weight"},
               "model");
    read_key(m, "num_trees", c.dataset.forest.num_trees);
    read_key(m, "max_depth", c.dataset.forest.max_depth);
    read_key(m, "min_leaf", c.dataset.forest.min_leaf);
    read_key(m, "features_per_split", c.dataset.forest.features_per_split);
    if (m.contains("mode")) {
      c.dataset.forest.mode = parse_mode(m.at("mode").get<std::string>());
    }
    read_key(m, "initial_weight", c.dataset.initial_weight);
  }
  return c;
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
  ExperimentConfig c;
  try {
    c = parse_config_fields(j);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
  return parse_config(j);
}

Json encode(const ExperimentConfig& c) {
  Json schemes = Json::array();
  for (auto s : c.schemes) schemes.push_back(std::string(scheme_name(s)));
  return Json{
      {"schemes", schemes},
      {"users", c.users},
      {"sessions_per_scheme", c.sessions_per_scheme},
      {"link_min_kbps", c.link_min_kbps},
      {"link_max_kbps", c.link_max_kbps},
      {"bandwidth_multiplier", c.bandwidth_multiplier},
      {"alpha", c.alpha},
      {"ewma_weight", c.ewma_weight},
      {"top_k", c.top_k},
      {"user_sigma", c.user_sigma},
      {"seed_users", c.seed_users},
      {"seed_sessions", c.seed_sessions},
      {"video_count", c.video_count},
      {"video_min_s", c.video_min_s},
      {"video_max_s", c.video_max_s},
      {"ladder", io::encode(c.ladder)},
      {"window_s", c.window_s},
      {"profile_trials", c.profile_trials},
      {"seed", c.seed},
      {"scheduler",
       {{"horizon_segments", c.scheduler.horizon_segments},
        {"coalesce_factor", c.scheduler.coalesce_factor},
        {"lambda", c.scheduler.lambda},
        {"greedy_pf_window", c.scheduler.greedy_pf_window},
        {"bandwidth_grid", c.scheduler.bandwidth_grid},
        {"usage_epsilon_kbps", c.scheduler.usage_epsilon_kbps}}},
      {"noise",
       {{"bitrate_sigma_kbps", c.noise.bitrate_sigma_kbps},
        {"buffer_sigma_s", c.noise.buffer_sigma_s}}},
      {"player",
       {{"safety", c.player.abr.safety},
        {"abr_window_s", c.player.abr.window_s},
        {"upswitch_buffer_chunks", c.player.abr.upswitch_buffer_chunks},
        {"max_buffer_s", c.player.max_buffer_s},
        {"reaction_delay_min_s", c.player.reaction_delay_min_s},
        {"reaction_delay_max_s", c.player.reaction_delay_max_s}}},
      {"model",
       {{"num_trees", c.dataset.forest.num_trees},
        {"max_depth", c.dataset.forest.max_depth},
        {"min_leaf", c.dataset.forest.min_leaf},
        {"features_per_split", c.dataset.forest.features_per_split},
        {"mode", mode_name(c.dataset.forest.mode)},
        {"initial_weight", c.dataset.initial_weight}}},
  };
}

std::vector<VideoManifest> video_pool(const ExperimentConfig& config) {
  std::vector<VideoManifest> out;
  const double chunk = config.ladder.chunk_duration_s();
  for (int i = 0; i < config.video_count; ++i) {
    const double len =
        config.video_count == 1
            ? config.video_min_s
            : config.video_min_s + (config.video_max_s - config.video_min_s) *
                                       i / (config.video_count - 1);
    const auto chunks =
        static_cast<std::size_t>(std::max(1.0, std::round(len / chunk)));
    out.push_back(VideoManifest::constant_bitrate("video" + std::to_string(i),
                                                  config.ladder, chunks));
  }
  return out;
}

player::TransitionProfile build_profile(const ExperimentConfig& config) {
  player::ProfileSpec spec;
  spec.ladder = config.ladder;
  spec.bandwidths_kbps = config.scheduler.grid(config.ladder);
  spec.window_s = config.window_s;
  spec.trials = config.profile_trials;
  spec.max_buffer_s = config.player.max_buffer_s;
  spec.seed = derive_seed({config.seed, tag("profile")});
  const auto full = player::build_transition_profile(
      player::sim_player_factory(config.ladder, config.player), spec,
      player::reachable_start_buckets(spec));
  return full.top_k(static_cast<std::size_t>(config.top_k));
}

CappedThrottleNetwork::CappedThrottleNetwork(double link_kbps, double alpha,
                                             double ewma_weight,
                                             double chunk_duration_s)
    : link_kbps_(link_kbps),
      chunk_duration_s_(chunk_duration_s),
      throttle_(link_kbps, link_kbps, alpha, ewma_weight),
      cap_(alpha, link_kbps) {}

player::TransferPlan CappedThrottleNetwork::plan(
    const player::RequestContext& r) {
  const double throttle_hold = throttle_.hold_for(static_cast<double>(r.bytes));
  const double projected_end =
      r.now_s + r.buffer_s + chunk_duration_s_ + r.remaining_media_s;
  const double extra = cap_.required_stall_s(
      delivered_bits_, static_cast<double>(r.bytes) * 8.0, projected_end);
  // Holding through the buffer is free for the end bound; only the stall
  // beyond it moves the end.
  const double cap_hold = extra > 0.0 ? r.buffer_s + extra : 0.0;
  return {std::max(throttle_hold, cap_hold), link_kbps_};
}

void CappedThrottleNetwork::completed(const player::RequestContext& r,
                                      double hold_s, double raw_s) {
  delivered_bits_ += static_cast<double>(r.bytes) * 8.0;
  if (raw_s > 0.0) throttle_.record_transfer({r.bytes, raw_s});
  auto& w = windows_[window_];
  w.target_kbps = throttle_.target_bw_kbps();
  w.kbits += static_cast<double>(r.bytes) * 8.0 / 1000.0;
  w.busy_s += hold_s + raw_s;
}

std::vector<ratelimit::SegmentThroughput> CappedThrottleNetwork::throughput()
    const {
  std::vector<ratelimit::SegmentThroughput> out;
  for (const auto& [window, w] : windows_) {
    if (w.busy_s > 0.0) out.push_back({window, w.target_kbps, w.kbits / w.busy_s});
  }
  return out;
}

StateBucket observed_bucket(const PlayerState& state, bool started,
                            double applied_kbps,
                            const std::vector<double>& grid,
                            const BitrateLadder& ladder, double max_buffer_s,
                            const NoiseConfig& noise, Rng& noise_rng) {
  if (!started) return player::session_start_bucket(ladder);
  PlayerState s = state;
  const double noisy_bitrate =
      state.bitrate_kbps + gaussian(noise_rng, noise.bitrate_sigma_kbps);
  const double noisy_buffer =
      state.buffer_s + gaussian(noise_rng, noise.buffer_sigma_s);
  s.bitrate_kbps = ladder.level(ladder.nearest(noisy_bitrate));
  s.buffer_s = std::clamp(noisy_buffer, 0.0, max_buffer_s);
  double nearest = grid.front();
  for (double g : grid) {
    if (std::abs(g - applied_kbps) < std::abs(nearest - applied_kbps)) {
      nearest = g;
    }
  }
  s.bw_now_kbps = nearest;
  s.bw_past_kbps = nearest;
  return quantize_state(s);
}

QualityPattern segment_pattern(const std::vector<player::ChunkLog>& log,
                               int g) {
  if (log.empty()) {
    throw Error(ErrorCode::kEmptyInput, "segment_pattern: no chunks");
  }
  std::vector<double> bitrates, stalls;
  for (std::size_t start = 0; start < log.size();
       start += static_cast<std::size_t>(g)) {
    const std::size_t end =
        std::min(log.size(), start + static_cast<std::size_t>(g));
    double br = 0.0, st = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      br += log[i].bitrate_kbps;
      st += log[i].stall_s;
    }
    bitrates.push_back(br / static_cast<double>(end - start));
    stalls.push_back(st);
  }
  return QualityPattern::from_bitrates(bitrates, stalls, g);
}

SessionRun run_session(const SessionSetup& setup, const Policy& policy) {
  if (setup.video == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "run_session: no video");
  }
  const VideoManifest& video = *setup.video;
  const BitrateLadder& ladder = video.ladder();
  const int g = setup.scheduler.coalesce_factor;
  const auto grid = setup.scheduler.grid(ladder);
  const double lowest = *std::min_element(grid.begin(), grid.end());

  player::SimPlayer player(video, setup.player, setup.player_seed);
  player.reset(PlayerState{}, setup.player_seed);
  CappedThrottleNetwork net(setup.link_kbps, setup.alpha, setup.ewma_weight,
                            ladder.chunk_duration_s());
  Rng noise_rng(setup.noise_seed);

  SessionRun run;
  run.trace.session_id = setup.session_id;
  double applied = 0.0;
  double uncertainty_sum = 0.0;
  const std::size_t max_windows =
      static_cast<std::size_t>(
          std::ceil(10.0 * (video.duration_s() + 120.0) / setup.window_s)) +
      10;
  for (std::size_t window = 0; !player.finished(); ++window) {
    if (window > max_windows) {
      throw Error(ErrorCode::kInvalidState,
                  "run_session: " + setup.session_id + " did not finish");
    }
    const double t0 = player.now_s();
    if (!player.download_complete()) {
      scheduler::PlanningState ps;
      const auto& log = player.chunk_log();
      const std::size_t full = log.size() / static_cast<std::size_t>(g);
      if (full > 0) {
        std::vector<player::ChunkLog> done(
            log.begin(), log.begin() + static_cast<std::ptrdiff_t>(full * g));
        ps.realized = segment_pattern(done, g).segments();
      }
      ps.scheme_session_index = setup.scheme_session_index;
      ps.bucket = observed_bucket(player.state(), !log.empty(), applied, grid,
                                  ladder, setup.player.max_buffer_s,
                                  setup.noise, noise_rng);
      scheduler::ScheduleChoice choice;
      const auto t_start = std::chrono::steady_clock::now();
      bool ok = true;
      try {
        choice = policy(ps, setup.scheduler);
        choice.schedule.validate();
      } catch (const Error&) {
        ok = false;
      }
      run.decision_seconds += std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - t_start)
                                  .count();
      if (!ok) {
        ++run.infeasible_decisions;
        const std::size_t remaining =
            coalesce(video.num_chunks(), ladder.chunk_duration_s(), g) -
            ps.realized.size();
        choice = {};
        choice.schedule = {std::vector<double>(std::max<std::size_t>(1, remaining),
                                               lowest),
                           g};
      }
      const auto& sched = choice.schedule.per_segment_kbps;
      applied = std::min(sched.front(), setup.link_kbps);
      const bool evaluated = choice.evaluation.probability > 0.0;
      run.decisions.push_back(
          {setup.session_id, ps.realized.size(), choice.candidates, sched,
           choice.evaluation.objective,
           evaluated ? choice.evaluation.usage_kbps : mean_of(sched), !ok});
      uncertainty_sum += choice.evaluation.uncertainty;
    }
    net.set_target(applied);
    net.set_window(window);
    player.set_bandwidth(applied);
    const PlayerState before = player.state();
    player.begin_window();
    player.advance(setup.window_s, net);
    run.trace.steps.push_back({t0, before, player.state()});
  }

  const auto& log = player.chunk_log();
  std::vector<double> bitrates, stalls;
  for (const auto& c : log) {
    bitrates.push_back(c.bitrate_kbps);
    stalls.push_back(c.stall_s);
  }
  run.chunk_pattern = QualityPattern::from_bitrates(bitrates, stalls, 1);
  run.segment_pattern = segment_pattern(log, g);
  run.throughput = net.throughput();
  run.duration_s = player.now_s();
  run.mean_throughput_kbps =
      run.duration_s > 0.0 ? net.delivered_bits() / 1000.0 / run.duration_s : 0.0;
  if (!run.decisions.empty()) {
    run.selected_uncertainty =
        uncertainty_sum / static_cast<double>(run.decisions.size());
  }
  return run;
}

qoe::UserDataset initial_dataset(const ExperimentConfig& config,
                                 const std::vector<VideoManifest>& videos) {
  const auto seeds = random_users(config.seed_users, config.user_sigma,
                                  derive_seed({config.seed, tag("seed-users")}),
                                  "seed");
  qoe::UserDataset dataset("initial");
  for (std::size_t u = 0; u < seeds.size(); ++u) {
    for (int k = 0; k < config.seed_sessions; ++k) {
      Rng rng(derive_seed({config.seed, tag("seed-session"), u,
                           static_cast<std::uint64_t>(k)}));
      SessionSetup setup;
      setup.session_id = seeds[u].user_id + "/s" + std::to_string(k + 1);
      setup.video = &videos[uniform_index(rng, videos.size())];
      setup.link_kbps = uniform(rng, config.link_min_kbps, config.link_max_kbps) *
                        config.bandwidth_multiplier;
      setup.alpha = config.alpha;
      setup.ewma_weight = config.ewma_weight;
      setup.window_s = config.window_s;
      setup.scheduler = config.scheduler;
      setup.scheduler.bandwidth_limit_kbps = config.alpha * setup.link_kbps;
      setup.player = config.player;
      setup.player_seed = rng();
      const auto grid = config.scheduler.grid(config.ladder);
      Rng policy_rng(rng());
      const VideoManifest& video = *setup.video;
      // Even sessions hold one level throughout, odd ones redraw per window.
      const bool steady = k % 2 == 0;
      const double steady_kbps = grid[uniform_index(policy_rng, grid.size())];
      Policy random_policy = [&](const scheduler::PlanningState& ps,
                                 const scheduler::SchedulerConfig& cfg) {
        scheduler::ScheduleChoice c;
        const std::size_t remaining = scheduler::total_segments(video, cfg) -
                                      ps.realized.size();
        std::vector<double> b(std::max<std::size_t>(1, remaining), steady_kbps);
        if (!steady) {
          for (auto& x : b) x = grid[uniform_index(policy_rng, grid.size())];
        }
        c.schedule = {b, cfg.coalesce_factor};
        return c;
      };
      const auto run = run_session(setup, random_policy);
      const double e = ground_truth_engagement(
          seeds[u], run.chunk_pattern, config.ladder,
          derive_seed({seeds[u].rng_seed, static_cast<std::uint64_t>(k)}));
      dataset.add(qoe::extract_features(run.segment_pattern, config.ladder), e,
                  qoe::Provenance::kInitialShared);
    }
  }
  return dataset;
}

ExperimentWorld build_world(const ExperimentConfig& config) {
  config.validate();
  ExperimentWorld w;
  w.config = config;
  w.videos = video_pool(config);
  w.users = synthetic_cohort(config.users, config.user_sigma,
                             derive_seed({config.seed, tag("users")}));
  w.profile = build_profile(config);
  w.initial = initial_dataset(config, w.videos);
  return w;
}

std::vector<Scheme> scheme_assignments(const ExperimentConfig& config,
                                       std::size_t user_index) {
  Rng rng(derive_seed({config.seed, tag("assign"), user_index}));
  std::vector<Scheme> out(config.sessions_per_user());
  for (auto& s : out) s = config.schemes[uniform_index(rng, config.schemes.size())];
  return out;
}

ExperimentResult run_ab_experiment(const ExperimentConfig& config) {
  return run_ab_experiment(build_world(config));
}

ExperimentResult run_ab_experiment(ExperimentWorld world) {
  const ExperimentConfig& config = world.config;
  config.validate();
  ExperimentResult result;
  const BitrateLadder& ladder = config.ladder;

  for (std::size_t ui = 0; ui < world.users.size(); ++ui) {
    const SyntheticUser& user = world.users[ui];
    const std::size_t n_schemes = std::size(kAllSchemes);
    std::vector<std::optional<qoe::UserDataset>> datasets(n_schemes);
    std::vector<std::optional<qoe::QoeForest>> forests(n_schemes);
    std::vector<int> counts(n_schemes, 0);
    qoe::UserDataset base(user.user_id);
    for (const auto& row : world.initial.rows()) {
      base.add(row.features, row.engagement, row.provenance);
    }
    std::optional<qoe::QoeForest> base_forest;
    for (auto s : config.schemes) {
      const auto si = static_cast<std::size_t>(s);
      if (s == Scheme::kNoOpt || datasets[si]) continue;
      datasets[si] = base;
      if (!base_forest) base_forest = qoe::train(base, config.dataset);
      forests[si] = *base_forest;
    }

    const auto assigned = scheme_assignments(config, ui);
    for (int n = 1; n <= config.sessions_per_user(); ++n) {
      const Scheme scheme = assigned[n - 1];
      const auto si = static_cast<std::size_t>(scheme);
      const int m = ++counts[si];
      Rng srng(derive_seed({config.seed, tag("session"), ui,
                            static_cast<std::uint64_t>(n)}));
      const VideoManifest& video = world.videos[uniform_index(srng, world.videos.size())];
      const double link =
          uniform(srng, config.link_min_kbps, config.link_max_kbps) *
          config.bandwidth_multiplier;

      SessionSetup setup;
      setup.session_id = user.user_id + "/s" + std::to_string(n);
      setup.video = &video;
      setup.link_kbps = link;
      setup.alpha = config.alpha;
      setup.ewma_weight = config.ewma_weight;
      setup.window_s = config.window_s;
      setup.scheme_session_index = m;
      setup.scheduler = config.scheduler;
      setup.scheduler.scheme = scheme;
      setup.scheduler.bandwidth_limit_kbps = config.alpha * link;
      setup.player = config.player;
      setup.noise = config.noise;
      setup.player_seed = derive_seed({config.seed, tag("player"), ui,
                                       static_cast<std::uint64_t>(n)});
      setup.noise_seed = derive_seed({config.seed, tag("noise"), ui,
                                      static_cast<std::uint64_t>(n)});
      const qoe::QoeForest* forest = forests[si] ? &*forests[si] : nullptr;
      Policy policy = [&](const scheduler::PlanningState& ps,
                          const scheduler::SchedulerConfig& cfg) {
        return scheduler::plan_schedule(scheme, forest, world.profile, video,
                                        ps, cfg);
      };
      auto run = run_session(setup, policy);

      SessionRecord record;
      record.user_id = user.user_id;
      record.video_id = video.video_id();
      record.scheme = scheme;
      record.pattern = run.segment_pattern;
      record.engagement = ground_truth_engagement(
          user, run.chunk_pattern, ladder,
          derive_seed({user.rng_seed, static_cast<std::uint64_t>(n)}));
      record.bandwidth_limit_kbps = setup.scheduler.bandwidth_limit_kbps;
      record.context = {{"device", "sim"}};
      record.session_index = n;
      record.scheme_session_index = m;
      record.link_kbps = link;
      record.mean_throughput_kbps = run.mean_throughput_kbps;
      record.selected_uncertainty = run.selected_uncertainty;
      record.infeasible_decisions = run.infeasible_decisions;
      record.failed = run.infeasible_decisions > 0;

      if (scheme != Scheme::kNoOpt) {
        auto up = qoe::update_with_session(std::move(*datasets[si]), record,
                                           ladder, config.dataset);
        datasets[si] = std::move(up.dataset);
        forests[si] = std::move(up.forest);
      }
      result.decision_seconds += run.decision_seconds;
      result.decision_count += run.decisions.size();
      for (auto& d : run.decisions) result.decisions.push_back(std::move(d));
      result.traces.push_back(std::move(run.trace));
      result.throughput.emplace_back(setup.session_id, std::move(run.throughput));
      result.sessions.push_back(std::move(record));
    }
    for (auto s : config.schemes) {
      const auto si = static_cast<std::size_t>(s);
      if (!datasets[si]) continue;
      const std::string key = user.user_id + "/" + std::string(scheme_name(s));
      result.dataset_rows[key] = datasets[si]->size();
      result.forests.insert_or_assign(key, *forests[si]);
    }
  }
  result.world = std::move(world);
  return result;
}

std::vector<CurvePoint> engagement_curves(
    const std::vector<SessionRecord>& sessions) {
  struct Acc {
    int n = 0;
    double e = 0, u = 0, t = 0;
  };
  std::map<std::pair<int, int>, Acc> acc;
  for (const auto& s : sessions) {
    auto& a = acc[{static_cast<int>(s.scheme), s.scheme_session_index}];
    a.n += 1;
    a.e += s.engagement;
    a.u += s.selected_uncertainty;
    a.t += s.mean_throughput_kbps;
  }
  std::vector<CurvePoint> out;
  int current = -1;
  double cum_e = 0.0;
  int cum_n = 0;
  for (const auto& [key, a] : acc) {
    if (key.first != current) {
      current = key.first;
      cum_e = 0.0;
      cum_n = 0;
    }
    cum_e += a.e;
    cum_n += a.n;
    out.push_back({static_cast<Scheme>(key.first), key.second, a.n, a.e / a.n,
                   cum_e / cum_n, a.u / a.n, a.t / a.n});
  }
  return out;
}

analysis::BootstrapResult engagement_gap(
    const std::vector<SessionRecord>& sessions, Scheme a, Scheme b, int first,
    int last, int reps, std::uint64_t seed) {
  struct Sums {
    double a = 0, b = 0;
    int na = 0, nb = 0;
  };
  std::map<std::string, Sums> by_user;
  for (const auto& s : sessions) {
    if (s.scheme_session_index < first || s.scheme_session_index > last) continue;
    auto& u = by_user[s.user_id];
    if (s.scheme == a) {
      u.a += s.engagement;
      ++u.na;
    } else if (s.scheme == b) {
      u.b += s.engagement;
      ++u.nb;
    }
  }
  std::vector<double> gaps;
  for (const auto& [id, u] : by_user) {
    if (u.na > 0 && u.nb > 0) gaps.push_back(u.a / u.na - u.b / u.nb);
  }
  if (gaps.empty()) {
    throw Error(ErrorCode::kInsufficientData,
                "engagement_gap: no user ran both schemes");
  }
  const std::function<double(std::span<const double>)> mean =
      [](std::span<const double> xs) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        return sum / static_cast<double>(xs.size());
      };
  return analysis::bootstrap_ci<double>(mean, gaps, 1.0, reps, seed);
}

void write_summary(std::ostream& out, const std::vector<CurvePoint>& curves) {
  out << "scheme,scheme_session_index,sessions,mean_engagement,"
         "cumulative_mean_engagement,mean_uncertainty,mean_throughput_kbps\n";
  for (const auto& c : curves) {
    out << scheme_name(c.scheme) << ',' << c.scheme_session_index << ','
        << c.sessions << ',' << io::format_double(c.mean_engagement) << ','
        << io::format_double(c.cumulative_mean_engagement) << ','
        << io::format_double(c.mean_uncertainty) << ','
        << io::format_double(c.mean_throughput_kbps) << '\n';
  }
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  auto open = [&](const char* name) {
    std::ofstream f(root / name);
    if (!f) {
      throw Error(ErrorCode::kInvalidArgument,
                  "cannot write " + (root / name).string());
    }
    return f;
  };
  const auto& world = result.world;
  {
    auto f = open("config.json");
    f << encode(world.config).dump(2) << '\n';
  }
  io::write_manifests((root / "manifest.jsonl").string(), world.videos);
  {
    std::vector<Json> users;
    for (const auto& u : world.users) users.push_back(encode(u));
    io::write_jsonl_file((root / "users.jsonl").string(), users);
  }
  {
    auto f = open("sessions.jsonl");
    io::write_sessions(f, result.sessions);
  }
  world.profile.save_file((root / "profile.jsonl").string());
  {
    player::TraceBank bank;
    for (const auto& t : result.traces) bank.add_session(t);
    bank.save_file((root / "traces.jsonl").string());
  }
  {
    std::vector<Json> rows;
    for (const auto& d : result.decisions) rows.push_back(scheduler::encode(d));
    io::write_jsonl_file((root / "decisions.jsonl").string(), rows);
  }
  {
    auto f = open("throughput.csv");
    ratelimit::write_throughput_header(f);
    for (const auto& [session, rows] : result.throughput) {
      ratelimit::write_throughput_rows(f, session, rows);
    }
  }
  {
    auto f = open("summary.csv");
    write_summary(f, engagement_curves(result.sessions));
  }
  const auto rows = analysis::rows_from_sessions(result.sessions,
                                                 world.config.ladder);
  {
    std::vector<io::QoeDatasetRow> csv;
    for (const auto& r : rows) {
      auto values = r.features.values();
      csv.push_back({r.user, r.device, r.video,
                     std::vector<double>(values.begin(), values.end()), r.qoe});
    }
    auto f = open("qoe_dataset.csv");
    io::write_qoe_dataset(f, csv);
  }
  {
    analysis::AnalysisConfig cfg;
    cfg.seed = world.config.seed;
    cfg.max_bitrate_kbps = world.config.ladder.max_kbps();
    auto f = open("heterogeneity_report.csv");
    analysis::write_report(f, analysis::heterogeneity_report(rows, cfg));
  }
  if (!result.forests.empty()) {
    auto it = result.forests.begin();
    for (auto i = result.forests.begin(); i != result.forests.end(); ++i) {
      if (i->first.ends_with("/vidhoc")) {
        it = i;
        break;
      }
    }
    auto f = open("forest.model");
    it->second.save(f);
  }
}

std::vector<MicrobenchRow> microbenchmarks(const ExperimentConfig& base) {
  ExperimentWorld world = build_world(base);
  std::vector<MicrobenchRow> out;
  auto cell = [&](const std::string& sweep, const std::string& value,
                  ExperimentConfig cfg) {
    ExperimentWorld w = world;
    w.config = cfg;
    const auto r = run_ab_experiment(std::move(w));
    for (auto s : cfg.schemes) {
      MicrobenchRow row;
      row.sweep = sweep;
      row.value = value;
      row.scheme = s;
      std::vector<double> e;
      for (const auto& rec : r.sessions) {
        if (rec.scheme == s) e.push_back(rec.engagement);
      }
      row.mean_engagement = mean_of(e);
      row.decisions = r.decision_count;
      double cand = 0.0;
      for (const auto& d : r.decisions) cand += static_cast<double>(d.candidates);
      row.mean_candidates = r.decisions.empty() ? 0.0 : cand / r.decisions.size();
      row.mean_latency_ms = r.decision_count == 0
                                ? 0.0
                                : 1000.0 * r.decision_seconds / r.decision_count;
      out.push_back(row);
    }
  };
  ExperimentConfig vidhoc_only = base;
  vidhoc_only.schemes = {Scheme::kVidhoc};
  for (int h : {1, 2, 3, 4}) {
    auto c = vidhoc_only;
    c.scheduler.horizon_segments = h;
    cell("horizon", std::to_string(h), c);
  }
  for (double sigma : {0.0, 200.0, 400.0, 600.0}) {
    auto c = vidhoc_only;
    c.noise.bitrate_sigma_kbps = sigma;
    cell("bitrate_noise_kbps", io::format_double(sigma), c);
  }
  for (double sigma : {0.0, 2.0, 4.0, 6.0}) {
    auto c = vidhoc_only;
    c.noise.buffer_sigma_s = sigma;
    cell("buffer_noise_s", io::format_double(sigma), c);
  }
  for (int window : {10, 20, 30, 40, 60}) {
    auto c = base;
    c.schemes = {Scheme::kGreedyPf};
    c.scheduler.greedy_pf_window = window;
    cell("greedy_pf_window", std::to_string(window), c);
  }
  for (auto mode : {qoe::FeatureMode::kPerPart, qoe::FeatureMode::kSessionAggregate}) {
    auto c = vidhoc_only;
    c.dataset.forest.mode = mode;
    cell("feature_mode", mode_name(mode), c);
  }
  return out;
}

void write_microbench(std::ostream& out, const std::vector<MicrobenchRow>& rows) {
  out << "sweep,value,scheme,mean_engagement,mean_latency_ms,mean_candidates,"
         "decisions\n";
  for (const auto& r : rows) {
    out << r.sweep << ',' << r.value << ',' << scheme_name(r.scheme) << ','
        << io::format_double(r.mean_engagement) << ','
        << io::format_double(r.mean_latency_ms) << ','
        << io::format_double(r.mean_candidates) << ',' << r.decisions << '\n';
  }
}

}  // namespace vidhoc::harness
