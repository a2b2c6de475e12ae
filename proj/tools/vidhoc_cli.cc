#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vidhoc/analysis/heterogeneity.h"
#include "vidhoc/core/error.h"
#include "vidhoc/core/io.h"
#include "vidhoc/harness/experiment.h"
#include "vidhoc/qoe/dataset.h"

namespace {

using namespace vidhoc;

harness::ExperimentConfig load(const std::string& path) {
  return path.empty() ? harness::ExperimentConfig{}
                      : harness::load_config_file(path);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  return f;
}

int profile_player(const std::string& config_path, const std::string& out) {
  const auto config = load(config_path);
  const auto profile = harness::build_profile(config);
  profile.save_file(out);
  std::cout << "cells " << profile.size() << '\n';
  for (const auto& [outcomes, cells] : profile.branching_histogram()) {
    std::cout << "  " << outcomes << " outcomes: " << cells << " cells\n";
  }
  return 0;
}

int run_experiment(const std::string& config_path, const std::string& out,
                   std::optional<int> users, std::optional<int> sessions) {
  auto config = load(config_path);
  if (users) config.users = *users;
  if (sessions) config.sessions_per_scheme = *sessions;
  config.validate();
  const auto result = harness::run_ab_experiment(config);
  harness::write_outputs(result, out);

  std::map<Scheme, std::pair<double, int>> mean;
  int failed = 0;
  for (const auto& s : result.sessions) {
    auto& m = mean[s.scheme];
    m.first += s.engagement;
    ++m.second;
    failed += s.failed;
  }
  for (const auto& [scheme, m] : mean) {
    std::cout << scheme_name(scheme) << " sessions " << m.second
              << " mean_engagement " << m.first / m.second << '\n';
  }
  std::cout << "failed_sessions " << failed << " decisions "
            << result.decision_count << " decision_ms_mean "
            << (result.decision_count
                    ? 1e3 * result.decision_seconds / result.decision_count
                    : 0.0)
            << '\n';
  return 0;
}

int microbench(const std::string& config_path, const std::string& out) {
  const auto rows = harness::microbenchmarks(load(config_path));
  if (out.empty()) {
    harness::write_microbench(std::cout, rows);
  } else {
    auto f = open_out(out);
    harness::write_microbench(f, rows);
  }
  return 0;
}

int analyze(const std::string& dataset, const std::string& out, int reps,
            double frac, std::uint64_t seed) {
  const auto rows =
      analysis::rows_from_dataset(io::read_qoe_dataset_file(dataset));
  analysis::AnalysisConfig config;
  config.bootstrap_reps = reps;
  config.bootstrap_frac = frac;
  config.seed = seed;
  const auto report = analysis::heterogeneity_report(rows, config);
  if (out.empty()) {
    analysis::write_report(std::cout, report);
  } else {
    auto f = open_out(out);
    analysis::write_report(f, report);
  }
  return 0;
}

int simulate_session(const std::string& config_path, const std::string& scheme_str,
                     double link_kbps, std::size_t video_index,
                     std::uint64_t seed) {
  const auto config = load(config_path);
  const Scheme scheme = parse_scheme(scheme_str);
  const auto world = harness::build_world(config);
  if (video_index >= world.videos.size()) {
    throw Error(ErrorCode::kIndexOutOfRange, "no such video");
  }
  const auto& video = world.videos[video_index];
  std::optional<qoe::QoeForest> forest;
  if (scheme != Scheme::kNoOpt) forest = qoe::train(world.initial, config.dataset);

  harness::SessionSetup setup;
  setup.session_id = "cli/s1";
  setup.video = &video;
  setup.link_kbps = link_kbps;
  setup.alpha = config.alpha;
  setup.ewma_weight = config.ewma_weight;
  setup.window_s = config.window_s;
  setup.scheduler = config.scheduler;
  setup.scheduler.scheme = scheme;
  setup.scheduler.bandwidth_limit_kbps = config.alpha * link_kbps;
  setup.player = config.player;
  setup.noise = config.noise;
  setup.player_seed = derive_seed({seed, 1});
  setup.noise_seed = derive_seed({seed, 2});
  const qoe::QoeForest* f = forest ? &*forest : nullptr;
  harness::Policy policy = [&](const scheduler::PlanningState& ps,
                               const scheduler::SchedulerConfig& cfg) {
    return scheduler::plan_schedule(scheme, f, world.profile, video, ps, cfg);
  };
  const auto run = harness::run_session(setup, policy);

  Json out{{"session", setup.session_id},
           {"scheme", std::string(scheme_name(scheme))},
           {"video", video.video_id()},
           {"link_kbps", link_kbps},
           {"limit_kbps", setup.scheduler.bandwidth_limit_kbps},
           {"mean_throughput_kbps", run.mean_throughput_kbps},
           {"infeasible_decisions", run.infeasible_decisions},
           {"pattern", io::encode(run.segment_pattern)}};
  Json decisions = Json::array();
  for (const auto& d : run.decisions) decisions.push_back(scheduler::encode(d));
  out["decisions"] = std::move(decisions);
  if (!world.users.empty()) {
    out["engagement_" + world.users.front().user_id] =
        harness::ground_truth_engagement(world.users.front(), run.chunk_pattern,
                                         config.ladder, seed);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vidhoc: per-user QoE scheduling experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;

  auto* prof = app.add_subcommand("profile-player", "build the transition profile");
  prof->add_option("--config", config_path, "experiment config (JSON)");
  prof->add_option("--out", out, "profile output path")->required();

  std::optional<int> users, sessions;
  auto* run = app.add_subcommand("run-experiment", "run the A/B experiment");
  run->add_option("--config", config_path, "experiment config (JSON)");
  run->add_option("--out", out, "output directory")->required();
  run->add_option("--users", users, "override user count");
  run->add_option("--sessions", sessions, "override sessions per scheme");

  auto* bench = app.add_subcommand("microbench", "parameter sweeps");
  bench->add_option("--config", config_path, "base config (JSON)");
  bench->add_option("--out", out, "CSV path (stdout if omitted)");

  std::string dataset;
  int reps = 1000;
  double frac = 0.10;
  std::uint64_t seed = 1;
  auto* an = app.add_subcommand("analyze", "heterogeneity report");
  an->add_option("--dataset", dataset, "qoe_dataset.csv")->required();
  an->add_option("--out", out, "report path (stdout if omitted)");
  an->add_option("--reps", reps, "bootstrap replicates");
  an->add_option("--frac", frac, "bootstrap sample fraction");
  an->add_option("--seed", seed, "bootstrap seed");

  std::string scheme = "vidhoc";
  double link = 1200.0;
  std::size_t video = 0;
  auto* sim = app.add_subcommand("simulate-session", "play one session");
  sim->add_option("--config", config_path, "experiment config (JSON)");
  sim->add_option("--scheme", scheme, "vidhoc, greedy_opt, greedy_pf or no_opt");
  sim->add_option("--link", link, "link rate in Kbps");
  sim->add_option("--video", video, "index into the video pool");
  sim->add_option("--seed", seed, "player and noise seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*prof) return profile_player(config_path, out);
    if (*run) return run_experiment(config_path, out, users, sessions);
    if (*bench) return microbench(config_path, out);
    if (*an) return analyze(dataset, out, reps, frac, seed);
    if (*sim) return simulate_session(config_path, scheme, link, video, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
