#ifndef VIDHOC_ANALYSIS_HETEROGENEITY_H_
#define VIDHOC_ANALYSIS_HETEROGENEITY_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vidhoc/core/error.h"
#include "vidhoc/core/io.h"
#include "vidhoc/core/random.h"
#include "vidhoc/core/types.h"
#include "vidhoc/qoe/features.h"

namespace vidhoc::analysis {

enum class IncidentKind { kRebuffering, kLowBitrate, kBitrateSwitch };

std::string_view incident_name(IncidentKind kind);
IncidentKind parse_incident(std::string_view name);

struct IncidentFilter {
  IncidentKind kind = IncidentKind::kRebuffering;
  // Per-part magnitude range: stall seconds, Kbps below max, or switch Kbps.
  double lo = 0.3;
  double hi = 0.5;
  // Highest bitrate a clean part plays; 0 means the largest bitrate present
  // in the rows.
  double max_bitrate_kbps = 0.0;
  // Clean parts may sit this fraction below max.
  double bitrate_band = 0.0;
  // Switches up to this size do not count.
  double switch_tolerance_kbps = kBitrateBucketKbps;
  // Incident parts must fall in [first_part, last_part].
  int first_part = 0;
  int last_part = qoe::kParts - 1;
  int min_group = 5;

  // Throws kInvalidArgument on lo > hi or a bad part range.
  void validate() const;
  static IncidentFilter defaults(IncidentKind kind);
};

struct AnalysisRow {
  std::string user;
  std::string device;
  std::string video;
  qoe::FeatureVector features;
  double qoe = 0.0;
};

std::vector<AnalysisRow> rows_from_dataset(
    const std::vector<io::QoeDatasetRow>& rows);
// Device comes from the record's "device" context tag, "sim" if absent.
std::vector<AnalysisRow> rows_from_sessions(
    const std::vector<SessionRecord>& records, const BitrateLadder& ladder);

enum class RowClass { kWithIncident, kWithoutIncident, kExcluded };

RowClass classify(const AnalysisRow& row, const IncidentFilter& filter,
                  double max_bitrate_kbps);

// mean(QoE | incident) - mean(QoE | clean). Throws kInsufficientData when
// either group has fewer than filter.min_group rows.
double delta_q(std::span<const AnalysisRow> rows, const IncidentFilter& filter);

enum class GroupBy { kUser, kDevice, kVideo };
std::string_view group_by_name(GroupBy g);

// delta_q per group; groups without enough rows are left out.
std::map<std::string, double> delta_q_by(std::span<const AnalysisRow> rows,
                                         const IncidentFilter& filter,
                                         GroupBy group_by);

// Population std / |mean|. Throws kInsufficientData with fewer than two
// values and kUndefined when the mean is 0.
double heterogeneity_dispersion(std::span<const double> delta_qs);

struct BootstrapResult {
  double mean = 0.0;
  double half_width = 0.0;
  int replicates = 0;

  double low() const { return mean - half_width; }
  double high() const { return mean + half_width; }
};

// Resamples round(frac * n) rows (at least one) with replacement per
// replicate; replicates whose statistic throws are skipped. Reports the
// replicate mean and 1.96 * their population std. Throws kEmptyInput on no
// rows and kInsufficientData when every replicate fails.
template <typename Row>
BootstrapResult bootstrap_ci(
    const std::function<double(std::span<const Row>)>& statistic,
    std::span<const Row> rows, double frac, int reps, std::uint64_t seed) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyInput, "bootstrap_ci: no rows");
  if (!(frac > 0.0) || reps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bootstrap_ci: bad frac or reps");
  }
  const auto m = static_cast<std::size_t>(
      std::max(1.0, std::round(frac * static_cast<double>(rows.size()))));
  Rng rng(seed);
  std::vector<Row> sample;
  std::vector<double> stats;
  for (int r = 0; r < reps; ++r) {
    sample.clear();
    for (std::size_t i = 0; i < m; ++i) {
      sample.push_back(rows[uniform_index(rng, rows.size())]);
    }
    try {
      stats.push_back(statistic(std::span<const Row>(sample)));
    } catch (const Error&) {
    }
  }
  if (stats.empty()) {
    throw Error(ErrorCode::kInsufficientData, "bootstrap_ci: every replicate failed");
  }
  BootstrapResult out;
  out.replicates = static_cast<int>(stats.size());
  const auto [lo, hi] = std::minmax_element(stats.begin(), stats.end());
  if (*lo == *hi) {
    out.mean = *lo;
    return out;
  }
  double sum = 0.0;
  for (double s : stats) sum += s;
  out.mean = sum / static_cast<double>(stats.size());
  double ss = 0.0;
  for (double s : stats) ss += (s - out.mean) * (s - out.mean);
  out.half_width = 1.96 * std::sqrt(ss / static_cast<double>(stats.size()));
  return out;
}

struct TimeSensitivity {
  double early = 0.0;
  double late = 0.0;
};

struct TimeWindows {
  int early_first = 0;
  int early_last = 2;
  int late_first = qoe::kParts - 3;
  int late_last = qoe::kParts - 1;
  double bitrate_band = 0.124;
};

// delta_q with the incident restricted to the early and to the late parts;
// clean parts may sit within the band below max.
TimeSensitivity time_sensitivity(std::span<const AnalysisRow> rows,
                                 const IncidentFilter& filter,
                                 const TimeWindows& windows = {});

struct ReportRow {
  IncidentKind incident = IncidentKind::kRebuffering;
  GroupBy group_by = GroupBy::kUser;
  double dispersion = 0.0;
  // NaN when no bootstrap replicate succeeded.
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct AnalysisConfig {
  double bootstrap_frac = 0.10;
  int bootstrap_reps = 1000;
  std::uint64_t seed = 1;
  // Forwarded into every default filter.
  double max_bitrate_kbps = 0.0;
};

// Every incident kind against every grouping with at least two groups.
std::vector<ReportRow> heterogeneity_report(std::span<const AnalysisRow> rows,
                                            const AnalysisConfig& config);
void write_report(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace vidhoc::analysis

#endif  // VIDHOC_ANALYSIS_HETEROGENEITY_H_
