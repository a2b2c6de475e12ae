#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "vidhoc/core/error.h"
#include "vidhoc/core/random.h"
#include "vidhoc/qoe/dataset.h"
#include "vidhoc/scheduler/scheduler.h"

namespace vidhoc::scheduler {
namespace {

using player::ProfileOutcome;
using player::TransitionProfile;
using qoe::QoeForest;

// Forest of single-leaf trees with the given labels.
QoeForest forest_from_labels(const std::vector<int>& labels) {
  std::stringstream ss;
  ss << "vidhoc-forest 1\nmode per_part\ndimension 60\nseed 0\ntrees "
     << labels.size() << "\n";
  for (int l : labels) ss << "tree 1\n-1 0 -1 -1 " << l << "\n";
  return QoeForest::load(ss);
}

std::vector<int> split_labels(int a, int na, int b, int nb) {
  std::vector<int> out(na, a);
  out.insert(out.end(), nb, b);
  return out;
}

VideoManifest video_of(const BitrateLadder& ladder, std::size_t chunks) {
  return VideoManifest::constant_bitrate("v", ladder, chunks);
}

double planted(const QualityPattern& p, double max_kbps) {
  double e = 1.0;
  for (const auto& s : p.segments()) {
    e -= 0.12 * s.rebuffer_s + 0.25 * (1 - s.bitrate_kbps / max_kbps) /
                                   static_cast<double>(p.size());
    e -= 0.1 * s.switch_kbps / max_kbps;
  }
  return std::clamp(e, 0.0, 1.0);
}

// Forest trained on random patterns whose engagement drops with stalls,
// low bitrate and switches.
QoeForest trained_forest(const BitrateLadder& ladder, std::size_t segments,
                         std::uint64_t seed, int rows = 80) {
  Rng rng(seed);
  qoe::UserDataset d("oracle");
  for (int i = 0; i < rows; ++i) {
    std::vector<double> br, rb;
    for (std::size_t j = 0; j < segments; ++j) {
      br.push_back(ladder.level(uniform_index(rng, ladder.size())));
      rb.push_back(uniform01(rng) < 0.3 ? uniform(rng, 0, 3) : 0.0);
    }
    const auto p = QualityPattern::from_bitrates(br, rb, 1);
    const double noise = uniform(rng, -0.15, 0.15);
    d.add(qoe::extract_features(p, ladder),
          std::clamp(planted(p, ladder.max_kbps()) + noise, 0.0, 1.0),
          qoe::Provenance::kInitialShared);
  }
  qoe::DatasetConfig config;
  config.forest.num_trees = 30;
  return qoe::train(d, config, seed);
}

// --- Independent brute-force oracles -------------------------------------

struct OracleBest {
  std::vector<double> key;
  double value = -1;
  double qoe = 0;
  double usage = 0;
  bool found = false;

  void offer(const std::vector<double>& k, double v, double q, double u) {
    const double tol = 1e-12;
    bool better = !found;
    if (found) {
      if (std::abs(v - value) > tol) {
        better = v > value;
      } else if (std::abs(q - qoe) > tol) {
        better = q > qoe;
      } else if (std::abs(u - usage) > tol) {
        better = u < usage;
      } else {
        better = k < key;
      }
    }
    if (better) {
      key = k;
      value = v;
      qoe = q;
      usage = u;
      found = true;
    }
  }
};

void all_sequences(const std::vector<double>& alphabet, std::size_t len,
                   std::vector<double>& cur,
                   std::vector<std::vector<double>>& out) {
  if (cur.size() == len) {
    out.push_back(cur);
    return;
  }
  for (double a : alphabet) {
    cur.push_back(a);
    all_sequences(alphabet, len, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<double>> sequences(const std::vector<double>& alphabet,
                                           std::size_t len) {
  std::vector<std::vector<double>> out;
  std::vector<double> cur;
  all_sequences(alphabet, len, cur, out);
  return out;
}

OracleBest brute_force_patterns(const QoeForest& forest,
                                const VideoManifest& video, double limit,
                                double w_qoe, double w_unc) {
  const auto& ladder = video.ladder();
  OracleBest best;
  for (const auto& seq : sequences(ladder.levels(), video.num_chunks())) {
    const auto p = QualityPattern::from_bitrates(
        seq, std::vector<double>(seq.size(), 0.0), 1);
    const auto o = evaluate_pattern(forest, p, ladder, 0.0);
    const double usage = bandwidth_usage(p, o.qoe, video);
    if (usage > limit + 1.0) continue;
    best.offer(seq, w_qoe * o.qoe + w_unc * o.uncertainty, o.qoe, usage);
  }
  return best;
}

struct Expectation {
  double value = 0, qoe = 0, usage = 0, mass = 0;
};

void expand(const TransitionProfile& profile, const QoeForest& forest,
            const VideoManifest& video, const std::vector<double>& schedule,
            std::size_t k, const StateBucket& s, double p,
            std::vector<double>& br, std::vector<double>& rb, double w_qoe,
            double w_unc, Expectation& acc) {
  if (k == schedule.size()) {
    const auto pattern = QualityPattern::from_bitrates(br, rb, 1);
    const auto o = evaluate_pattern(forest, pattern, video.ladder(), 0.0);
    acc.value += p * (w_qoe * o.qoe + w_unc * o.uncertainty);
    acc.qoe += p * o.qoe;
    acc.usage += p * bandwidth_usage(pattern, o.qoe, video);
    acc.mass += p;
    return;
  }
  for (const auto& out : profile.lookup(s, schedule[k])) {
    br.push_back(player::bucket_bitrate_kbps(out.s2.bitrate_idx,
                                             video.ladder()));
    rb.push_back(out.rebuffer_s);
    expand(profile, forest, video, schedule, k + 1, out.s2, p * out.p, br, rb,
           w_qoe, w_unc, acc);
    br.pop_back();
    rb.pop_back();
  }
}

OracleBest brute_force_schedules(const TransitionProfile& profile,
                                 const QoeForest& forest,
                                 const VideoManifest& video,
                                 const StateBucket& start,
                                 const std::vector<double>& grid, double limit,
                                 double w_qoe, double w_unc) {
  OracleBest best;
  for (const auto& seq : sequences(grid, video.num_chunks())) {
    Expectation acc;
    std::vector<double> br, rb;
    expand(profile, forest, video, seq, 0, start, 1.0, br, rb, w_qoe, w_unc,
           acc);
    if (acc.usage > limit + 1.0) continue;
    best.offer(seq, acc.value, acc.qoe, acc.usage);
  }
  return best;
}

// Profile closed under the grid from `start`, with `branching` random
// outcomes per cell over buffer buckets 0..3.
TransitionProfile random_profile(Rng& rng, const BitrateLadder& ladder,
                                 const StateBucket& start,
                                 const std::vector<double>& grid,
                                 std::size_t branching) {
  TransitionProfile profile(12, 100);
  std::deque<StateBucket> todo{start};
  std::set<StateBucket> seen{start};
  while (!todo.empty()) {
    const StateBucket s1 = todo.front();
    todo.pop_front();
    for (double b : grid) {
      std::set<StateBucket> used;
      std::vector<ProfileOutcome> outs;
      double total = 0;
      while (outs.size() < branching) {
        PlayerState ps;
        ps.bitrate_kbps = ladder.level(uniform_index(rng, ladder.size()));
        ps.buffer_s = static_cast<double>(uniform_index(rng, 4));
        ps.bw_now_kbps = b;
        const StateBucket s2 = quantize_state(ps);
        if (!used.insert(s2).second) continue;
        const double w = uniform(rng, 0.1, 1.0);
        total += w;
        outs.push_back({s2, w, uniform01(rng) < 0.4 ? uniform(rng, 0, 2) : 0.0});
        if (seen.insert(s2).second) todo.push_back(s2);
      }
      for (auto& o : outs) o.p /= total;
      double sum = 0;
      for (auto& o : outs) sum += o.p;
      outs.back().p += 1.0 - sum;
      profile.insert(s1, b, outs);
    }
  }
  return profile;
}

// Each bandwidth deterministically yields the matching ladder level.
TransitionProfile identity_profile(const BitrateLadder& ladder,
                                   const std::vector<double>& grid) {
  TransitionProfile profile(12, 1);
  std::vector<StateBucket> states{player::session_start_bucket(ladder)};
  for (double b : grid) {
    PlayerState ps;
    ps.bitrate_kbps = b;
    ps.buffer_s = 2.0;
    ps.bw_now_kbps = b;
    states.push_back(quantize_state(ps));
  }
  for (const auto& s1 : states) {
    for (double b : grid) {
      PlayerState ps;
      ps.bitrate_kbps = b;
      ps.buffer_s = 2.0;
      ps.bw_now_kbps = b;
      profile.insert(s1, b, {{quantize_state(ps), 1.0, 0.0}});
    }
  }
  return profile;
}

SchedulerConfig full_horizon_config(std::size_t segments, double limit) {
  SchedulerConfig c;
  c.horizon_segments = static_cast<int>(segments);
  c.coalesce_factor = 1;
  c.bandwidth_limit_kbps = limit;
  return c;
}

// --- objective_value -----------------------------------------------------

const BitrateLadder kLadder = BitrateLadder::default_ladder();

QualityPattern flat(std::size_t n, double kbps, int g = 1) {
  return QualityPattern::from_bitrates(std::vector<double>(n, kbps),
                                       std::vector<double>(n, 0.0), g);
}

TEST(ObjectiveValue, LambdaZeroIsPredictedQoe) {
  const auto forest = trained_forest(kLadder, 5, 1);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> br;
    for (int j = 0; j < 5; ++j) br.push_back(kLadder.level(uniform_index(rng, 5)));
    const auto p = QualityPattern::from_bitrates(br, std::vector<double>(5), 1);
    EXPECT_EQ(objective_value(forest, p, kLadder, 0.0),
              qoe::predict_qoe(forest, qoe::extract_features(p, kLadder)));
  }
}

TEST(ObjectiveValue, UnanimousForestGivesBucketMedian) {
  const auto forest = forest_from_labels(std::vector<int>(50, 6));
  EXPECT_DOUBLE_EQ(objective_value(forest, flat(4, 600), kLadder, 1.0), 0.65);
}

TEST(ObjectiveValue, SixtyFortySplit) {
  const auto forest = forest_from_labels(split_labels(4, 60, 6, 40));
  EXPECT_NEAR(objective_value(forest, flat(4, 600), kLadder, 1.0), 0.45 + 0.8,
              1e-12);
}

TEST(ObjectiveValue, MonotoneInLambda) {
  const auto forest = trained_forest(kLadder, 5, 3);
  const auto p = flat(5, 400);
  double prev = -1;
  for (double lambda = 0; lambda <= 3; lambda += 0.25) {
    const double v = objective_value(forest, p, kLadder, lambda);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

// --- bandwidth_usage -----------------------------------------------------

TEST(BandwidthUsage, ConstantPattern) {
  const auto video = video_of(kLadder, 20);
  for (double q : {0.05, 0.33, 0.5, 1.0}) {
    EXPECT_NEAR(bandwidth_usage(flat(20, 1000), q, video), 1000, 1e-9);
  }
}

TEST(BandwidthUsage, WatchedPrefixMean) {
  const BitrateLadder ladder({400, 1200}, 3.0);
  const auto video = video_of(ladder, 20);
  std::vector<double> br(10, 400);
  br.insert(br.end(), 10, 1200);
  const auto p = QualityPattern::from_bitrates(br, std::vector<double>(20), 1);
  EXPECT_DOUBLE_EQ(bandwidth_usage(p, 0.5, video), 400);
  EXPECT_DOUBLE_EQ(bandwidth_usage(p, 1.0, video), 800);
}

TEST(BandwidthUsage, ZeroQoeUsesNothing) {
  EXPECT_EQ(bandwidth_usage(flat(20, 1000), 0.0, video_of(kLadder, 20)), 0.0);
}

TEST(BandwidthUsage, CoalescedSegmentsSpreadOverChunks) {
  const auto video = video_of(kLadder, 10);
  const auto p = QualityPattern::from_bitrates({200, 1000, 600}, {0, 0, 0}, 4);
  EXPECT_NEAR(bandwidth_usage(p, 1.0, video),
              (4 * 200 + 4 * 1000 + 2 * 600) / 10.0, 1e-9);
  EXPECT_THROW(bandwidth_usage(flat(2, 200, 4), 1.0, video), Error);
}

// --- select_quality_pattern ----------------------------------------------

TEST(SelectQualityPattern, SingleFeasiblePattern) {
  const BitrateLadder ladder({300}, 3.0);
  const auto video = video_of(ladder, 1);
  const auto choice = select_quality_pattern(
      forest_from_labels({3}), video, full_horizon_config(1, 300));
  EXPECT_EQ(choice.pattern, flat(1, 300));
  EXPECT_EQ(choice.candidates, 1u);
}

TEST(SelectQualityPattern, MatchesBruteForceOnTwoSegments) {
  const BitrateLadder ladder({300, 600}, 3.0);
  const auto video = video_of(ladder, 2);
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto forest = trained_forest(ladder, 2, seed);
    const auto choice =
        select_quality_pattern(forest, video, full_horizon_config(2, 600));
    const auto oracle = brute_force_patterns(forest, video, 600, 1.0, 1.0);
    ASSERT_TRUE(oracle.found);
    std::vector<double> got;
    for (const auto& s : choice.pattern.segments()) got.push_back(s.bitrate_kbps);
    EXPECT_EQ(got, oracle.key);
    EXPECT_NEAR(choice.value, oracle.value, 1e-12);
    EXPECT_EQ(choice.candidates, 4u);
  }
}

TEST(SelectQualityPattern, LimitBelowLadderIsInfeasible) {
  const auto video = video_of(kLadder, 4);
  try {
    select_quality_pattern(forest_from_labels({5}), video,
                           full_horizon_config(4, 150));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
  }
}

TEST(SelectQualityPattern, RespectsLimitAndPinsBeyondHorizon) {
  const auto video = video_of(kLadder, 40);
  const auto forest = trained_forest(kLadder, 10, 8);
  SchedulerConfig c;
  c.bandwidth_limit_kbps = 650;
  const auto choice = select_quality_pattern(forest, video, c);
  EXPECT_EQ(choice.pattern.size(), 10u);
  EXPECT_LE(choice.usage_kbps, 651);
  for (std::size_t j = 2; j < 10; ++j) {
    EXPECT_EQ(choice.pattern.segments()[j].bitrate_kbps, 600);
  }
  EXPECT_EQ(choice.candidates, 25u);
}

TEST(SelectQualityPattern, PositiveScalingKeepsArgmax) {
  const BitrateLadder ladder({200, 500, 900}, 3.0);
  const auto video = video_of(ladder, 3);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto forest = trained_forest(ladder, 3, seed);
    const auto cfg = full_horizon_config(3, 700);
    const auto a = select_quality_pattern(forest, video, cfg, {}, {1.0, 1.0});
    const auto b = select_quality_pattern(forest, video, cfg, {}, {3.5, 3.5});
    EXPECT_EQ(a.pattern, b.pattern);
  }
}

// --- expected_objective --------------------------------------------------

TEST(ExpectedObjective, PointMassEqualsInducedPattern) {
  const BitrateLadder ladder({300, 600}, 3.0);
  const auto video = video_of(ladder, 3);
  const auto forest = trained_forest(ladder, 3, 4);
  const auto profile = identity_profile(ladder, ladder.levels());
  const PlanningState state{player::session_start_bucket(ladder), {}, 1};
  const auto cfg = full_horizon_config(3, 600);
  const BandwidthSchedule sched{{600, 300, 600}, 1};
  EXPECT_NEAR(expected_objective(sched, profile, forest, state, video, cfg),
              objective_value(forest,
                              QualityPattern::from_bitrates({600, 300, 600},
                                                            {0, 0, 0}, 1),
                              ladder, 1.0),
              1e-12);
}

TEST(ExpectedObjective, TwoOutcomeHandChaining) {
  const BitrateLadder ladder({300, 600}, 3.0);
  const auto video = video_of(ladder, 1);
  const auto forest = trained_forest(ladder, 1, 5);
  const StateBucket start = player::session_start_bucket(ladder);
  TransitionProfile profile(12, 10);
  const StateBucket hi{3, 4, 3, 0};
  const StateBucket lo{1, 0, 3, 1};
  profile.insert(start, 600, {{hi, 0.7, 0.0}, {lo, 0.3, 1.5}});
  const auto cfg = full_horizon_config(1, 600);
  const double j1 = objective_value(
      forest, QualityPattern::from_bitrates({600}, {0.0}, 1), ladder, 1.0);
  const double j2 = objective_value(
      forest, QualityPattern::from_bitrates({300}, {1.5}, 1), ladder, 1.0);
  EXPECT_NEAR(expected_objective({{600}, 1}, profile, forest, {start, {}, 1},
                                 video, cfg),
              0.7 * j1 + 0.3 * j2, 1e-9);
}

TEST(ExpectedObjective, ProbabilitiesSumToOne) {
  const auto ladder = kLadder;
  Rng rng(31);
  const auto forest = trained_forest(ladder, 8, 2);
  const auto video = video_of(ladder, 30);
  SchedulerConfig cfg;
  cfg.bandwidth_limit_kbps = 700;
  cfg.horizon_segments = 3;
  for (int t = 0; t < 50; ++t) {
    const StateBucket start = player::session_start_bucket(ladder);
    const auto profile =
        random_profile(rng, ladder, start, ladder.levels(), 1 + t % 4);
    std::vector<double> b(total_segments(video, cfg));
    for (auto& x : b) x = ladder.level(uniform_index(rng, 5));
    PatternEvaluator ev(forest, ladder);
    const auto e = evaluate_schedule({b, 4}, profile, ev, video,
                                     {start, {}, 1}, cfg, {1, 1});
    EXPECT_NEAR(e.probability, 1.0, 1e-9);
  }
}

TEST(ExpectedObjective, MissingCellIsProfileGap) {
  const auto video = video_of(kLadder, 4);
  TransitionProfile empty(12, 1);
  try {
    expected_objective({{600, 600, 600, 600}, 1}, empty,
                       forest_from_labels({1}),
                       {player::session_start_bucket(kLadder), {}, 1}, video,
                       full_horizon_config(4, 600));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProfileGap);
  }
}

// --- select_bandwidth_schedule -------------------------------------------

TEST(SelectBandwidthSchedule, DeterministicProfileCollapsesToPatternChoice) {
  const BitrateLadder ladder({300, 600, 900}, 3.0);
  const auto video = video_of(ladder, 3);
  const auto profile = identity_profile(ladder, ladder.levels());
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto forest = trained_forest(ladder, 3, seed);
    const auto cfg = full_horizon_config(3, 700);
    const auto pattern = select_quality_pattern(forest, video, cfg);
    const auto sched = select_bandwidth_schedule(
        forest, profile, video, {player::session_start_bucket(ladder), {}, 1},
        cfg);
    std::vector<double> induced;
    for (const auto& s : pattern.pattern.segments()) {
      induced.push_back(s.bitrate_kbps);
    }
    EXPECT_EQ(sched.schedule.per_segment_kbps, induced);
  }
}

TEST(SelectBandwidthSchedule, MatchesBruteForceOnStochasticProfiles) {
  const BitrateLadder ladder({300, 600}, 3.0);
  const auto video = video_of(ladder, 2);
  Rng rng(41);
  const StateBucket start = player::session_start_bucket(ladder);
  for (int t = 0; t < 25; ++t) {
    const auto forest = trained_forest(ladder, 2, 100 + t);
    const auto profile =
        random_profile(rng, ladder, start, ladder.levels(), 1 + t % 3);
    const auto cfg = full_horizon_config(2, 500);
    const auto oracle = brute_force_schedules(profile, forest, video, start,
                                              ladder.levels(), 500, 1, 1);
    if (!oracle.found) {
      EXPECT_THROW(select_bandwidth_schedule(forest, profile, video,
                                             {start, {}, 1}, cfg),
                   Error);
      continue;
    }
    const auto got =
        select_bandwidth_schedule(forest, profile, video, {start, {}, 1}, cfg);
    EXPECT_EQ(got.schedule.per_segment_kbps, oracle.key);
    EXPECT_NEAR(got.evaluation.objective, oracle.value, 1e-12);
  }
}

TEST(SelectBandwidthSchedule, ReplansWhenRealizedStateDeviates) {
  const BitrateLadder ladder({300, 600}, 3.0);
  const auto video = video_of(ladder, 3);
  // A stalled start makes the high bandwidth keep stalling; a healthy start
  // plays it cleanly.
  const StateBucket start = player::session_start_bucket(ladder);
  const StateBucket good{3, 10, 3, 0};
  const StateBucket bad{3, 0, 3, 2};
  const StateBucket calm{1, 6, 1, 0};
  TransitionProfile profile(12, 10);
  profile.insert(start, 600, {{good, 0.8, 0.0}, {bad, 0.2, 2.5}});
  profile.insert(start, 300, {{calm, 1.0, 0.0}});
  for (const auto& s : {good, calm}) {
    profile.insert(s, 600, {{good, 1.0, 0.0}});
    profile.insert(s, 300, {{calm, 1.0, 0.0}});
  }
  profile.insert(bad, 600, {{bad, 1.0, 3.0}});
  profile.insert(bad, 300, {{calm, 1.0, 0.0}});

  qoe::UserDataset d("u");
  for (const auto& br : sequences({300, 600}, 3)) {
    for (const auto& stall : sequences({0.0, 2.5}, 3)) {
      const auto p = QualityPattern::from_bitrates(br, stall, 1);
      double e = 0.9 - 0.3 * p.total_rebuffer_s() / 2.5;
      for (double b : br) e -= b < 600 ? 0.1 : 0.0;
      d.add(qoe::extract_features(p, ladder), std::clamp(e, 0.0, 1.0),
            qoe::Provenance::kInitialShared);
    }
  }
  const auto forest = qoe::train(d, qoe::DatasetConfig{}, 1);
  const auto cfg = full_horizon_config(3, 600);
  const std::vector<SegmentQuality> modal{{600, 0.0, 0.0}};
  const std::vector<SegmentQuality> deviated{{600, 2.5, 0.0}};
  const auto from_good =
      select_bandwidth_schedule(forest, profile, video, {good, modal, 1}, cfg);
  const auto from_bad =
      select_bandwidth_schedule(forest, profile, video, {bad, deviated, 1}, cfg);
  EXPECT_EQ(from_good.schedule.per_segment_kbps,
            (std::vector<double>{600, 600}));
  EXPECT_NE(from_bad.schedule.per_segment_kbps,
            from_good.schedule.per_segment_kbps);
}

TEST(SelectBandwidthSchedule, EnumerationCountIsGridTimesBranching) {
  Rng rng(9);
  const auto forest = trained_forest(kLadder, 12, 6, 40);
  const StateBucket start = player::session_start_bucket(kLadder);
  for (std::size_t branching = 1; branching <= 3; ++branching) {
    const auto profile =
        random_profile(rng, kLadder, start, kLadder.levels(), branching);
    for (int h = 1; h <= 3; ++h) {
      for (std::size_t chunks : {40u, 80u, 160u}) {
        SchedulerConfig cfg;
        cfg.horizon_segments = h;
        cfg.bandwidth_limit_kbps = 1000;
        const auto choice = select_bandwidth_schedule(
            forest, profile, video_of(kLadder, chunks), {start, {}, 1}, cfg);
        const auto expected =
            static_cast<std::size_t>(std::pow(5.0 * branching, h));
        EXPECT_EQ(choice.candidates, expected);
        EXPECT_EQ(choice.schedules_considered,
                  static_cast<std::size_t>(std::pow(5.0, h)));
      }
    }
  }
}

TEST(SelectBandwidthSchedule, ChosenScheduleRespectsLimit) {
  Rng rng(10);
  const auto forest = trained_forest(kLadder, 10, 2, 60);
  const StateBucket start = player::session_start_bucket(kLadder);
  for (int t = 0; t < 20; ++t) {
    const auto profile = random_profile(rng, kLadder, start, kLadder.levels(), 2);
    SchedulerConfig cfg;
    cfg.bandwidth_limit_kbps = uniform(rng, 450, 950);
    try {
      const auto c = select_bandwidth_schedule(forest, profile,
                                               video_of(kLadder, 40),
                                               {start, {}, 1}, cfg);
      EXPECT_LE(c.evaluation.usage_kbps, cfg.bandwidth_limit_kbps + 1.0);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
    }
  }
}

// --- baselines -----------------------------------------------------------

TEST(BaselinePolicy, NoOptIsFlatAtLimit) {
  const auto video = video_of(kLadder, 30);
  SchedulerConfig cfg;
  cfg.bandwidth_limit_kbps = 612;
  const auto c = baseline_policy("no_opt", nullptr, TransitionProfile{}, video,
                                 {player::session_start_bucket(kLadder), {}, 1},
                                 cfg);
  EXPECT_EQ(c.schedule.per_segment_kbps, std::vector<double>(8, 612));
}

TEST(BaselinePolicy, GreedyPfAfterWindowMatchesGreedyOpt) {
  Rng rng(12);
  const auto forest = trained_forest(kLadder, 10, 3, 60);
  const StateBucket start = player::session_start_bucket(kLadder);
  const auto profile = random_profile(rng, kLadder, start, kLadder.levels(), 2);
  const auto video = video_of(kLadder, 40);
  SchedulerConfig cfg;
  cfg.bandwidth_limit_kbps = 800;
  const auto pf = baseline_policy("greedy_pf", &forest, profile, video,
                                  {start, {}, 31}, cfg);
  const auto opt = baseline_policy("greedy_opt", &forest, profile, video,
                                   {start, {}, 31}, cfg);
  EXPECT_EQ(pf.schedule, opt.schedule);
  EXPECT_EQ(pf.evaluation.objective, opt.evaluation.objective);
}

TEST(BaselinePolicy, GreedyPfProfilingPicksMaxUncertainty) {
  const BitrateLadder ladder({300, 600, 900}, 3.0);
  const auto video = video_of(ladder, 3);
  const auto profile = identity_profile(ladder, ladder.levels());
  const StateBucket start = player::session_start_bucket(ladder);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto forest = trained_forest(ladder, 3, seed);
    const auto cfg = full_horizon_config(3, 750);
    const auto got = baseline_policy("greedy_pf", &forest, profile, video,
                                     {start, {}, 1}, cfg);
    const auto oracle = brute_force_schedules(profile, forest, video, start,
                                              ladder.levels(), 750, 0, 1);
    EXPECT_EQ(got.schedule.per_segment_kbps, oracle.key);
  }
}

TEST(BaselinePolicy, RejectsUnknownNames) {
  const auto video = video_of(kLadder, 4);
  SchedulerConfig cfg;
  cfg.bandwidth_limit_kbps = 600;
  EXPECT_THROW(baseline_policy("random", nullptr, TransitionProfile{}, video,
                               {}, cfg),
               Error);
  EXPECT_THROW(baseline_policy("vidhoc", nullptr, TransitionProfile{}, video,
                               {}, cfg),
               Error);
}

TEST(DecisionRecord, JsonRoundTrip) {
  DecisionRecord r{"u1/s3", 2, 225, {600, 400, 600}, 1.234, 580.5, true};
  const auto back = decode_decision(encode(r));
  EXPECT_EQ(back.session, r.session);
  EXPECT_EQ(back.candidates, r.candidates);
  EXPECT_EQ(back.chosen, r.chosen);
  EXPECT_EQ(back.expected_usage_kbps, r.expected_usage_kbps);
  EXPECT_TRUE(back.fallback);
}

}  // namespace
}  // namespace vidhoc::scheduler
