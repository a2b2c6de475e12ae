// One line per acceptance criterion; exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vidhoc/analysis/heterogeneity.h"
#include "vidhoc/core/error.h"
#include "vidhoc/core/io.h"
#include "vidhoc/core/random.h"
#include "vidhoc/harness/experiment.h"
#include "vidhoc/harness/synthetic_user.h"
#include "vidhoc/qoe/dataset.h"
#include "vidhoc/ratelimit/throttle.h"
#include "vidhoc/scheduler/scheduler.h"

namespace {

using namespace vidhoc;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Verdict& v) {
  std::printf("[%s] %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name,
              v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------- oracles

double median_of(int bucket) { return (bucket + 0.5) / 10.0; }

struct Score {
  double qoe = 0, unc = 0;
};

Score score_votes(const qoe::VoteCounts& v) {
  int best = 0;
  for (int k = 1; k < qoe::kEngagementBuckets; ++k) {
    if (v[k] > v[best]) best = k;
  }
  std::vector<int> sorted(v.begin(), v.end());
  std::sort(sorted.rbegin(), sorted.rend());
  int total = 0;
  for (int c : v) total += c;
  return {median_of(best), 1.0 - double(sorted[0] - sorted[1]) / total};
}

Score score(const qoe::QoeForest& f, const QualityPattern& p,
            const BitrateLadder& ladder) {
  return score_votes(f.votes(qoe::extract_features(p, ladder)));
}

// Mean bitrate over the first qoe * duration seconds, chunk by chunk.
double watched_usage(const std::vector<double>& chunk_kbps, double chunk_s,
                     double q) {
  const double watched = q * chunk_kbps.size() * chunk_s;
  if (watched <= 0) return 0.0;
  double kbits = 0;
  for (std::size_t i = 0; i < chunk_kbps.size(); ++i) {
    const double overlap = std::clamp(watched - i * chunk_s, 0.0, chunk_s);
    kbits += chunk_kbps[i] * overlap;
  }
  return kbits / watched;
}

struct Best {
  bool found = false;
  std::vector<double> key;
  double value = 0, qoe = 0, usage = 0;

  void offer(const std::vector<double>& k, double v, double q, double u) {
    constexpr double tol = 1e-12;
    bool better = !found;
    if (found) {
      if (std::abs(v - value) > tol) better = v > value;
      else if (std::abs(q - qoe) > tol) better = q > qoe;
      else if (std::abs(u - usage) > tol) better = u < usage;
      else better = k < key;
    }
    if (better) {
      found = true;
      key = k;
      value = v;
      qoe = q;
      usage = u;
    }
  }
};

void sequences(const std::vector<double>& alphabet, std::size_t len,
               std::vector<double>& cur, std::vector<std::vector<double>>& out) {
  if (cur.size() == len) {
    out.push_back(cur);
    return;
  }
  for (double a : alphabet) {
    cur.push_back(a);
    sequences(alphabet, len, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<double>> all_sequences(const std::vector<double>& a,
                                               std::size_t len) {
  std::vector<std::vector<double>> out;
  std::vector<double> cur;
  sequences(a, len, cur, out);
  return out;
}

double planted(const QualityPattern& p, double max_kbps) {
  double e = 1.0;
  for (const auto& s : p.segments()) {
    e -= 0.12 * s.rebuffer_s +
         0.25 * (1 - s.bitrate_kbps / max_kbps) / static_cast<double>(p.size());
    e -= 0.1 * s.switch_kbps / max_kbps;
  }
  return std::clamp(e, 0.0, 1.0);
}

qoe::QoeForest trained_forest(const BitrateLadder& ladder, std::size_t n,
                              std::uint64_t seed) {
  Rng rng(seed);
  qoe::UserDataset d("oracle");
  for (int i = 0; i < 60; ++i) {
    std::vector<double> br, rb;
    for (std::size_t j = 0; j < n; ++j) {
      br.push_back(ladder.level(uniform_index(rng, ladder.size())));
      rb.push_back(uniform01(rng) < 0.3 ? uniform(rng, 0, 3) : 0.0);
    }
    const auto p = QualityPattern::from_bitrates(br, rb, 1);
    d.add(qoe::extract_features(p, ladder),
          std::clamp(planted(p, ladder.max_kbps()) + uniform(rng, -0.15, 0.15),
                     0.0, 1.0),
          qoe::Provenance::kInitialShared);
  }
  qoe::DatasetConfig config;
  config.forest.num_trees = 25;
  return qoe::train(d, config, seed);
}

// Closed profile over buffer buckets 0..3 with exactly `branching`
// outcomes per cell.
player::TransitionProfile random_profile(Rng& rng, const BitrateLadder& ladder,
                                         const StateBucket& start,
                                         const std::vector<double>& grid,
                                         std::size_t branching) {
  player::TransitionProfile profile(12, 100);
  std::deque<StateBucket> todo{start};
  std::set<StateBucket> seen{start};
  while (!todo.empty()) {
    const StateBucket s1 = todo.front();
    todo.pop_front();
    for (double b : grid) {
      std::set<StateBucket> used;
      std::vector<player::ProfileOutcome> outs;
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
      double sum = 0;
      for (auto& o : outs) sum += (o.p /= total);
      outs.back().p += 1.0 - sum;
      profile.insert(s1, b, outs);
    }
  }
  return profile;
}

struct Paths {
  double value = 0, qoe = 0, usage = 0;
};

void expand(const player::TransitionProfile& profile, const qoe::QoeForest& f,
            const BitrateLadder& ladder, const std::vector<double>& sched,
            std::size_t k, const StateBucket& s, double p,
            std::vector<double>& br, std::vector<double>& rb, double lambda,
            Paths& acc) {
  if (k == sched.size()) {
    const auto pattern = QualityPattern::from_bitrates(br, rb, 1);
    const auto sc = score(f, pattern, ladder);
    acc.value += p * (sc.qoe + lambda * sc.unc);
    acc.qoe += p * sc.qoe;
    acc.usage += p * watched_usage(br, ladder.chunk_duration_s(), sc.qoe);
    return;
  }
  for (const auto& o : profile.lookup(s, sched[k])) {
    br.push_back(player::bucket_bitrate_kbps(o.s2.bitrate_idx, ladder));
    rb.push_back(o.rebuffer_s);
    expand(profile, f, ladder, sched, k + 1, o.s2, p * o.p, br, rb, lambda, acc);
    br.pop_back();
    rb.pop_back();
  }
}

// ----------------------------------------------------------- criterion 1

Verdict oracle_equivalence() {
  const auto t0 = Clock::now();
  const std::vector<BitrateLadder> ladders{
      BitrateLadder({400}, 3.0), BitrateLadder({300, 800}, 3.0),
      BitrateLadder({200, 500, 900}, 3.0)};
  int instances = 0, mismatches = 0;
  Rng rng(4242);
  for (const auto& ladder : ladders) {
    for (std::size_t n = 1; n <= 3; ++n) {
      const auto video = VideoManifest::constant_bitrate("v", ladder, n);
      for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto forest = trained_forest(ladder, n, seed * 31 + n);
        for (double lambda : {0.0, 1.0}) {
          for (double limit : {ladder.min_kbps() * 0.5,
                               0.5 * (ladder.min_kbps() + ladder.max_kbps()),
                               ladder.max_kbps()}) {
            scheduler::SchedulerConfig cfg;
            cfg.horizon_segments = static_cast<int>(n);
            cfg.coalesce_factor = 1;
            cfg.bandwidth_limit_kbps = limit;
            cfg.lambda = lambda;

            // Quality patterns.
            Best want;
            for (const auto& seq : all_sequences(ladder.levels(), n)) {
              const auto p = QualityPattern::from_bitrates(
                  seq, std::vector<double>(n, 0.0), 1);
              const auto sc = score(forest, p, ladder);
              const double u = watched_usage(seq, ladder.chunk_duration_s(), sc.qoe);
              if (u > limit + 1.0) continue;
              want.offer(seq, sc.qoe + lambda * sc.unc, sc.qoe, u);
            }
            ++instances;
            try {
              const auto got = scheduler::select_quality_pattern(forest, video, cfg, {});
              std::vector<double> key;
              for (const auto& s : got.pattern.segments()) key.push_back(s.bitrate_kbps);
              if (!want.found || key != want.key ||
                  std::abs(got.value - want.value) > 1e-12) {
                ++mismatches;
              }
            } catch (const Error& e) {
              if (want.found || e.code() != ErrorCode::kInfeasible) ++mismatches;
            }

            // Bandwidth schedules over stochastic profiles.
            for (std::size_t branching = 1; branching <= 3; ++branching) {
              const auto start = player::session_start_bucket(ladder);
              const auto profile =
                  random_profile(rng, ladder, start, ladder.levels(), branching);
              Best best;
              for (const auto& seq : all_sequences(ladder.levels(), n)) {
                Paths acc;
                std::vector<double> br, rb;
                expand(profile, forest, ladder, seq, 0, start, 1.0, br, rb,
                       lambda, acc);
                if (acc.usage > limit + 1.0) continue;
                best.offer(seq, acc.value, acc.qoe, acc.usage);
              }
              ++instances;
              scheduler::PlanningState state;
              state.bucket = start;
              try {
                const auto got = scheduler::select_bandwidth_schedule(
                    forest, profile, video, state, cfg);
                if (!best.found || got.schedule.per_segment_kbps != best.key ||
                    std::abs(got.evaluation.objective - best.value) > 1e-12) {
                  ++mismatches;
                }
              } catch (const Error& e) {
                if (best.found || e.code() != ErrorCode::kInfeasible) ++mismatches;
              }
            }
          }
        }
      }
    }
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0,
          std::to_string(instances) + " instances, " + std::to_string(mismatches) +
              " mismatches, " + fmt("%.2f s (limit 10 s)", t)};
}

// ----------------------------------------------------------- criterion 2

Verdict probability_law() {
  Rng rng(77);
  const auto ladder = BitrateLadder::default_ladder();
  std::stringstream ss;
  ss << "vidhoc-forest 1\nmode per_part\ndimension 60\nseed 0\ntrees 3\n"
     << "tree 1\n-1 0 -1 -1 6\ntree 1\n-1 0 -1 -1 6\ntree 1\n-1 0 -1 -1 4\n";
  const auto forest = qoe::QoeForest::load(ss);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t branching = 1 + uniform_index(rng, 4);
    const int h = 1 + static_cast<int>(uniform_index(rng, 3));
    const auto start = player::session_start_bucket(ladder);
    const auto profile = random_profile(rng, ladder, start, ladder.levels(), branching);
    const std::size_t n = h + uniform_index(rng, 4);
    const auto video = VideoManifest::constant_bitrate("v", ladder, n);
    scheduler::SchedulerConfig cfg;
    cfg.horizon_segments = h;
    cfg.coalesce_factor = 1;
    cfg.bandwidth_limit_kbps = 1000;
    std::vector<double> b(n);
    for (auto& x : b) x = ladder.level(uniform_index(rng, ladder.size()));
    scheduler::PatternEvaluator evaluator(forest, ladder);
    scheduler::PlanningState state;
    state.bucket = start;
    const auto eval = scheduler::evaluate_schedule(
        {b, 1}, profile, evaluator, video, state, cfg,
        scheduler::ObjectiveWeights{1.0, 1.0});
    worst = std::max(worst, std::abs(eval.probability - 1.0));
  }
  return {worst <= 1e-9, "1000 pairs, max |sum p - 1| = " + fmt("%.3g", worst)};
}

// ----------------------------------------------------------- criterion 3

Verdict constraint_safety(const harness::ExperimentResult& r) {
  std::map<std::string, double> limit;
  std::size_t over_cap = 0;
  double worst_cap = -1e300;
  for (const auto& s : r.sessions) {
    limit[s.user_id + "/s" + std::to_string(s.session_index)] =
        s.bandwidth_limit_kbps;
    const double excess = s.mean_throughput_kbps - r.world.config.alpha * s.link_kbps;
    worst_cap = std::max(worst_cap, excess);
    if (excess > 1.0) ++over_cap;
  }
  std::size_t violations = 0, fallbacks = 0, checked = 0;
  for (const auto& d : r.decisions) {
    if (d.fallback) {
      ++fallbacks;
      continue;
    }
    ++checked;
    if (d.expected_usage_kbps > limit.at(d.session) + 1.0) ++violations;
  }
  return {violations == 0 && over_cap == 0,
          std::to_string(checked) + " selected schedules, " +
              std::to_string(violations) + " over limit; " +
              std::to_string(over_cap) + " sessions over alpha cap (max excess " +
              fmt("%.2f Kbps); ", worst_cap) + std::to_string(fallbacks) +
              " infeasible decisions fell back"};
}

// ----------------------------------------------------------- criterion 4

Verdict directional(const harness::ExperimentResult& r, double run_s) {
  const auto& s = r.sessions;
  const auto a = harness::engagement_gap(s, Scheme::kVidhoc, Scheme::kGreedyOpt,
                                         1, 60, 2000, 91);
  const auto b = harness::engagement_gap(s, Scheme::kVidhoc, Scheme::kGreedyPf,
                                         1, 60, 2000, 92);
  const auto c = harness::engagement_gap(s, Scheme::kNoOpt, Scheme::kGreedyPf,
                                         1, 30, 2000, 93);
  auto ci = [](const char* name, const analysis::BootstrapResult& g) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s %+.4f [%+.4f, %+.4f]", name, g.mean,
                  g.low(), g.high());
    return std::string(buf);
  };
  const bool ok = a.low() > 0 && b.low() > 0 && c.low() > 0 && run_s < 300;
  return {ok, ci("vidhoc-greedy_opt(1-60)", a) + "; " +
                  ci("vidhoc-greedy_pf(1-60)", b) + "; " +
                  ci("no_opt-greedy_pf(1-30)", c) + "; " +
                  fmt("run %.1f s (limit 300 s)", run_s)};
}

// ----------------------------------------------------------- criterion 5

Verdict uncertainty_decay(const harness::ExperimentResult& r) {
  double early = 0, late = 0;
  int ne = 0, nl = 0;
  for (const auto& s : r.sessions) {
    if (s.scheme != Scheme::kVidhoc) continue;
    if (s.scheme_session_index <= 20) {
      early += s.selected_uncertainty;
      ++ne;
    } else if (s.scheme_session_index >= 41 && s.scheme_session_index <= 60) {
      late += s.selected_uncertainty;
      ++nl;
    }
  }
  if (ne == 0 || nl == 0) return {false, "missing sessions"};
  early /= ne;
  late /= nl;
  return {late < 0.5 * early,
          fmt("sessions 1-20 %.4f, ", early) + fmt("41-60 %.4f, ", late) +
              fmt("ratio %.3f (need < 0.5)", late / early)};
}

// ----------------------------------------------------------- criterion 6

Verdict hold_time_exactness() {
  double worst = 0;
  int cases = 0;
  for (double bytes : {1e4, 1e5, 3.75e5, 1e6, 2.5e6}) {
    for (double target : {200.0, 400.0, 600.0, 800.0, 1000.0}) {
      for (double real : {300.0, 600.0, 1200.0, 2400.0}) {
        const double bits = bytes * 8.0;
        const double analytic =
            real > target ? bits * (real - target) / (1000.0 * target * real) : 0.0;
        worst = std::max(worst, std::abs(ratelimit::hold_time(bytes, target, real) -
                                         analytic));
        ++cases;
      }
    }
  }
  double worst_rel = 0;
  int replays = 0;
  for (double target : {200.0, 400.0, 600.0, 800.0, 1000.0}) {
    for (double factor : {1.0, 1.5, 3.0}) {
      const double link = target * factor;
      std::vector<ratelimit::Request> reqs;
      for (int i = 0; i < 40; ++i) reqs.push_back({i * 1.0, 375000});
      const BandwidthSchedule flat{std::vector<double>(4, target), 4};
      const auto res = ratelimit::apply_schedule(flat, 12.0, reqs, link);
      for (const auto& seg : res.throughput) {
        worst_rel = std::max(worst_rel, std::abs(seg.achieved_kbps - target) / target);
      }
      ++replays;
    }
  }
  return {cases == 100 && worst <= 1e-9 && worst_rel <= 0.05,
          std::to_string(cases) + " cases, max error " + fmt("%.3g s; ", worst) +
              std::to_string(replays) + " flat replays, max deviation " +
              fmt("%.2f%% (limit 5%%)", 100 * worst_rel)};
}

// ----------------------------------------------------------- criterion 7

Verdict coalescing_count(const harness::ExperimentResult& full) {
  std::string detail;
  bool ok = true;
  const auto ladder = BitrateLadder::default_ladder();
  const auto video60 = VideoManifest::constant_bitrate("v60", ladder, 20);
  scheduler::SchedulerConfig cfg;
  cfg.coalesce_factor = 4;
  cfg.bandwidth_limit_kbps = 1000;
  const std::size_t segs = coalesce(20, 3.0, 4);
  ok &= segs == 5 && scheduler::total_segments(video60, cfg) == 5;
  detail += "60 s / 3 s / g=4 -> " + std::to_string(segs) + " segments";

  // Exact counts against profiles with fixed branching.
  Rng rng(5);
  const auto grid = ladder.levels();
  int exact_checks = 0, exact_bad = 0;
  for (std::size_t branching = 1; branching <= 3; ++branching) {
    const auto start = player::session_start_bucket(ladder);
    const auto profile = random_profile(rng, ladder, start, grid, branching);
    const auto forest = trained_forest(ladder, 5, branching);
    for (int h = 1; h <= 3; ++h) {
      scheduler::SchedulerConfig c;
      c.horizon_segments = h;
      c.coalesce_factor = 4;
      c.bandwidth_limit_kbps = 1000;
      scheduler::PlanningState st;
      st.bucket = start;
      const auto got = scheduler::select_bandwidth_schedule(forest, profile,
                                                            video60, st, c);
      const auto want = static_cast<std::size_t>(
          std::pow(static_cast<double>(grid.size() * branching), h));
      ++exact_checks;
      if (got.candidates != want) ++exact_bad;
    }
  }
  ok &= exact_bad == 0;
  detail += "; fixed-branching grid^h*b^h " + std::to_string(exact_checks - exact_bad) +
            "/" + std::to_string(exact_checks);

  // Decision-log audit on a run whose profile keeps one outcome per cell.
  harness::ExperimentConfig c1;
  c1.users = 3;
  c1.sessions_per_scheme = 5;
  c1.top_k = 1;
  c1.schemes = {Scheme::kVidhoc, Scheme::kGreedyOpt};
  const auto run1 = harness::run_ab_experiment(c1);
  std::map<std::string, const VideoManifest*> video_of;
  std::map<std::string, const VideoManifest*> by_id;
  for (const auto& v : run1.world.videos) by_id[v.video_id()] = &v;
  for (const auto& s : run1.sessions) {
    video_of[s.user_id + "/s" + std::to_string(s.session_index)] = by_id.at(s.video_id);
  }
  std::size_t audited = 0, bad = 0;
  const std::size_t g = grid.size();
  for (const auto& d : run1.decisions) {
    if (d.fallback) continue;
    const auto total = scheduler::total_segments(*video_of.at(d.session), c1.scheduler);
    const auto h = std::min<std::size_t>(c1.scheduler.horizon_segments, total - d.segment);
    ++audited;
    if (d.candidates != static_cast<std::size_t>(std::pow(double(g), double(h)))) ++bad;
  }
  ok &= audited > 0 && bad == 0;
  detail += "; top_k=1 log " + std::to_string(audited - bad) + "/" +
            std::to_string(audited) + " equal grid^h";

  // The full run's logs stay inside [grid^h, grid^h * 3^h].
  std::map<std::string, const VideoManifest*> full_video;
  std::map<std::string, const VideoManifest*> full_ids;
  for (const auto& v : full.world.videos) full_ids[v.video_id()] = &v;
  for (const auto& s : full.sessions) {
    full_video[s.user_id + "/s" + std::to_string(s.session_index)] =
        full_ids.at(s.video_id);
  }
  std::size_t outside = 0, model_decisions = 0;
  for (const auto& d : full.decisions) {
    if (d.fallback || d.candidates == 0) continue;
    const auto total = scheduler::total_segments(*full_video.at(d.session),
                                                 full.world.config.scheduler);
    const auto h = std::min<std::size_t>(full.world.config.scheduler.horizon_segments,
                                         total - d.segment);
    const double lo = std::pow(double(g), double(h));
    const double hi = lo * std::pow(double(full.world.config.top_k), double(h));
    ++model_decisions;
    if (d.candidates < lo || d.candidates > hi) ++outside;
  }
  ok &= outside == 0;
  detail += "; full-run log " + std::to_string(model_decisions - outside) + "/" +
            std::to_string(model_decisions) + " within bounds";
  return {ok, detail};
}

// ----------------------------------------------------------- criterion 8

analysis::AnalysisRow analysis_row(const std::string& user, double q,
                                   int stall_part, double stall_s) {
  qoe::FeatureVector f;
  for (int p = 0; p < qoe::kParts; ++p) f.bitrate(p) = 1000;
  if (stall_part >= 0) f.rebuffer_s(stall_part) = stall_s;
  return {user, "sim", "v", f, q};
}

std::vector<analysis::AnalysisRow> planted_rows(const std::vector<double>& plants,
                                                int n, double sigma,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<analysis::AnalysisRow> rows;
  for (std::size_t u = 0; u < plants.size(); ++u) {
    const std::string id = "user" + std::to_string(u);
    for (int i = 0; i < n; ++i) {
      rows.push_back(analysis_row(id, 0.8 + plants[u] + gaussian(rng, sigma),
                                  static_cast<int>(uniform_index(rng, 20)), 0.4));
      rows.push_back(analysis_row(id, 0.8 + gaussian(rng, sigma), -1, 0));
    }
  }
  return rows;
}

Verdict heterogeneity_recovery() {
  using namespace analysis;
  const std::vector<double> plants{-0.1, -0.3, -0.5};
  const double sigma = 0.05;
  const int n = 50;
  const double tol = 3 * sigma / std::sqrt(double(n));
  const auto filter = IncidentFilter::defaults(IncidentKind::kRebuffering);
  const auto rows = planted_rows(plants, n, sigma, 2021);
  const auto got = delta_q_by(rows, filter, GroupBy::kUser);
  double worst = 0;
  bool ok = got.size() == plants.size();
  for (std::size_t u = 0; ok && u < plants.size(); ++u) {
    worst = std::max(worst, std::abs(got.at("user" + std::to_string(u)) - plants[u]));
  }
  ok &= worst <= tol;

  std::vector<double> constant;
  for (const auto& [k, v] :
       delta_q_by(planted_rows({-0.3, -0.3, -0.3, -0.3}, 20, 0.0, 3), filter,
                  GroupBy::kUser)) {
    constant.push_back(v);
  }
  const double disp = heterogeneity_dispersion(constant);
  ok &= disp == 0.0;

  const std::function<double(std::span<const AnalysisRow>)> stat =
      [&](std::span<const AnalysisRow> s) {
        std::vector<double> v;
        for (const auto& [k, dq] : delta_q_by(s, filter, GroupBy::kUser)) v.push_back(dq);
        return heterogeneity_dispersion(v);
      };
  const auto a = bootstrap_ci<AnalysisRow>(stat, rows, 0.5, 300, 99);
  const auto b = bootstrap_ci<AnalysisRow>(stat, rows, 0.5, 300, 99);
  const bool same = a.mean == b.mean && a.half_width == b.half_width &&
                    a.replicates == b.replicates;
  ok &= same;
  return {ok, fmt("max |dQ - plant| %.4f ", worst) + fmt("(tol %.4f); ", tol) +
                  fmt("constant dispersion %.3g; ", disp) +
                  (same ? "bootstrap repeatable" : "bootstrap differs")};
}

// ----------------------------------------------------------- criterion 9

Verdict time_sensitivity_direction() {
  using namespace analysis;
  const auto users = harness::synthetic_cohort(15, 0.05, 2021);
  const harness::SyntheticUser& user = users.front();  // front-loaded
  const auto ladder = BitrateLadder::default_ladder();
  std::vector<AnalysisRow> rows;
  Rng rng(9);
  auto add = [&](int stall_part, std::uint64_t k) {
    std::vector<double> br(qoe::kParts, 800.0), rb(qoe::kParts, 0.0);
    if (stall_part >= 0) rb[stall_part] = 0.4;
    const auto p = QualityPattern::from_bitrates(br, rb, 1);
    rows.push_back({user.user_id, "sim", "v", qoe::extract_features(p, ladder),
                    harness::ground_truth_engagement(user, p, ladder,
                                                     derive_seed({user.rng_seed, k}))});
  };
  std::uint64_t k = 0;
  for (int i = 0; i < 100; ++i) {
    add(static_cast<int>(uniform_index(rng, 3)), ++k);
    add(17 + static_cast<int>(uniform_index(rng, 3)), ++k);
    add(-1, ++k);
    add(-1, ++k);
  }
  const auto filter = IncidentFilter::defaults(IncidentKind::kRebuffering);
  const auto t = time_sensitivity(rows, filter);
  const std::function<double(std::span<const AnalysisRow>)> gap =
      [&](std::span<const AnalysisRow> s) {
        const auto ts = time_sensitivity(s, filter);
        return std::abs(ts.early) - std::abs(ts.late);
      };
  const auto ci = bootstrap_ci<AnalysisRow>(gap, rows, 1.0, 1000, 2021);
  const bool ok = std::abs(t.early) > std::abs(t.late) && ci.low() > 0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "early %.4f, late %.4f; |early|-|late| %.4f, 95%% CI [%.4f, %.4f]",
                t.early, t.late, ci.mean, ci.low(), ci.high());
  return {ok, buf};
}

// ---------------------------------------------------------- criterion 10

std::string sessions_bytes(const harness::ExperimentResult& r) {
  std::ostringstream out;
  io::write_sessions(out, r.sessions);
  return out.str();
}

}  // namespace

int main() {
  try {
    report(1, "scheduler oracle equivalence", oracle_equivalence());
    report(2, "probability law", probability_law());
    report(6, "hold_time exactness", hold_time_exactness());
    report(8, "heterogeneity recovery", heterogeneity_recovery());
    report(9, "time-sensitivity direction", time_sensitivity_direction());

    const harness::ExperimentConfig config;  // 15 users x 60 sessions
    auto t0 = Clock::now();
    const auto run = harness::run_ab_experiment(config);
    const double run_s = seconds_since(t0);
    report(3, "constraint safety", constraint_safety(run));
    report(4, "directional engagement ordering", directional(run, run_s));
    report(5, "uncertainty decay", uncertainty_decay(run));
    report(7, "coalescing count", coalescing_count(run));

    const auto again = harness::run_ab_experiment(config);
    const auto a = sessions_bytes(run);
    const auto b = sessions_bytes(again);
    report(10, "determinism",
           {a == b, std::to_string(a.size()) + " bytes of sessions.jsonl, " +
                        (a == b ? "identical" : "different")});
  } catch (const std::exception& e) {
    std::printf("[FAIL] aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
