#include "vidhoc/analysis/heterogeneity.h"

#include <algorithm>
#include <limits>
#include <ostream>

namespace vidhoc::analysis {

namespace {

constexpr double kTiny = 1e-9;

double max_bitrate_of(std::span<const AnalysisRow> rows) {
  double m = 0.0;
  for (const auto& r : rows) {
    for (int p = 0; p < qoe::kParts; ++p) m = std::max(m, r.features.bitrate(p));
  }
  return m;
}

double resolved_max(std::span<const AnalysisRow> rows,
                    const IncidentFilter& filter) {
  return filter.max_bitrate_kbps > 0.0 ? filter.max_bitrate_kbps
                                       : max_bitrate_of(rows);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

const std::string& group_key(const AnalysisRow& row, GroupBy g) {
  switch (g) {
    case GroupBy::kUser:
      return row.user;
    case GroupBy::kDevice:
      return row.device;
    case GroupBy::kVideo:
      return row.video;
  }
  return row.user;
}

}  // namespace

std::string_view incident_name(IncidentKind kind) {
  switch (kind) {
    case IncidentKind::kRebuffering:
      return "rebuffering";
    case IncidentKind::kLowBitrate:
      return "low_bitrate";
    case IncidentKind::kBitrateSwitch:
      return "bitrate_switch";
  }
  return "?";
}

IncidentKind parse_incident(std::string_view name) {
  for (auto k : {IncidentKind::kRebuffering, IncidentKind::kLowBitrate,
                 IncidentKind::kBitrateSwitch}) {
    if (incident_name(k) == name) return k;
  }
  throw Error(ErrorCode::kParse, "unknown incident kind: " + std::string(name));
}

std::string_view group_by_name(GroupBy g) {
  switch (g) {
    case GroupBy::kUser:
      return "user";
    case GroupBy::kDevice:
      return "device";
    case GroupBy::kVideo:
      return "video";
  }
  return "?";
}

void IncidentFilter::validate() const {
  if (!(lo <= hi)) throw Error(ErrorCode::kInvalidArgument, "filter: lo > hi");
  if (first_part < 0 || last_part >= qoe::kParts || first_part > last_part) {
    throw Error(ErrorCode::kInvalidArgument, "filter: bad part range");
  }
  if (bitrate_band < 0.0 || switch_tolerance_kbps < 0.0 || min_group < 1) {
    throw Error(ErrorCode::kInvalidArgument, "filter: bad tolerance");
  }
}

IncidentFilter IncidentFilter::defaults(IncidentKind kind) {
  IncidentFilter f;
  f.kind = kind;
  switch (kind) {
    case IncidentKind::kRebuffering:
      f.lo = 0.3;
      f.hi = 0.5;
      break;
    case IncidentKind::kLowBitrate:
      f.lo = 200;
      f.hi = 500;
      break;
    case IncidentKind::kBitrateSwitch:
      f.lo = 1000;
      f.hi = 1500;
      break;
  }
  return f;
}

std::vector<AnalysisRow> rows_from_dataset(
    const std::vector<io::QoeDatasetRow>& rows) {
  std::vector<AnalysisRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({r.user, r.device, r.video, qoe::FeatureVector(r.features),
                   r.qoe});
  }
  return out;
}

std::vector<AnalysisRow> rows_from_sessions(
    const std::vector<SessionRecord>& records, const BitrateLadder& ladder) {
  std::vector<AnalysisRow> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto it = r.context.find("device");
    out.push_back({r.user_id, it == r.context.end() ? "sim" : it->second,
                   r.video_id, qoe::extract_features(r.pattern, ladder),
                   r.engagement});
  }
  return out;
}

RowClass classify(const AnalysisRow& row, const IncidentFilter& filter,
                  double max_bitrate_kbps) {
  const auto& f = row.features;
  const double band = filter.bitrate_band * max_bitrate_kbps + kTiny;
  bool any_incident = false;
  bool in_range = true;
  bool clean_rebuf = true, clean_bitrate = true, clean_switch = true;
  for (int p = 0; p < qoe::kParts; ++p) {
    const double rebuf = f.rebuffer_s(p);
    const double deficit = max_bitrate_kbps - f.bitrate(p);
    const double sw = f.switch_kbps(p);
    const bool bad_rebuf = rebuf > kTiny;
    const bool bad_bitrate = deficit > band;
    const bool bad_switch = sw > filter.switch_tolerance_kbps + kTiny;
    clean_rebuf &= !bad_rebuf;
    clean_bitrate &= !bad_bitrate;
    clean_switch &= !bad_switch;

    bool incident = false;
    double magnitude = 0.0;
    switch (filter.kind) {
      case IncidentKind::kRebuffering:
        incident = bad_rebuf;
        magnitude = rebuf;
        break;
      case IncidentKind::kLowBitrate:
        incident = bad_bitrate;
        magnitude = deficit;
        break;
      case IncidentKind::kBitrateSwitch:
        incident = bad_switch;
        magnitude = sw;
        break;
    }
    if (!incident) continue;
    any_incident = true;
    if (magnitude < filter.lo - kTiny || magnitude > filter.hi + kTiny ||
        p < filter.first_part || p > filter.last_part) {
      in_range = false;
    }
  }
  if (!any_incident) {
    return clean_rebuf && clean_bitrate && clean_switch
               ? RowClass::kWithoutIncident
               : RowClass::kExcluded;
  }
  if (!in_range) return RowClass::kExcluded;
  // A bitrate dip implies switches into and out of it, and a switch implies
  // a lower level on one side, so those couplings are not held against the
  // incident row.
  bool others_clean = false;
  switch (filter.kind) {
    case IncidentKind::kRebuffering:
      others_clean = clean_bitrate && clean_switch;
      break;
    case IncidentKind::kLowBitrate:
      others_clean = clean_rebuf;
      break;
    case IncidentKind::kBitrateSwitch:
      others_clean = clean_rebuf;
      break;
  }
  return others_clean ? RowClass::kWithIncident : RowClass::kExcluded;
}

double delta_q(std::span<const AnalysisRow> rows, const IncidentFilter& filter) {
  filter.validate();
  const double max_kbps = resolved_max(rows, filter);
  std::vector<double> with, without;
  for (const auto& r : rows) {
    switch (classify(r, filter, max_kbps)) {
      case RowClass::kWithIncident:
        with.push_back(r.qoe);
        break;
      case RowClass::kWithoutIncident:
        without.push_back(r.qoe);
        break;
      case RowClass::kExcluded:
        break;
    }
  }
  const auto need = static_cast<std::size_t>(filter.min_group);
  if (with.size() < need || without.size() < need) {
    throw Error(ErrorCode::kInsufficientData,
                "delta_q: " + std::to_string(with.size()) + " incident and " +
                    std::to_string(without.size()) + " clean rows");
  }
  return mean_of(with) - mean_of(without);
}

std::map<std::string, double> delta_q_by(std::span<const AnalysisRow> rows,
                                         const IncidentFilter& filter,
                                         GroupBy group_by) {
  IncidentFilter resolved = filter;
  resolved.max_bitrate_kbps = resolved_max(rows, filter);
  std::map<std::string, std::vector<AnalysisRow>> groups;
  for (const auto& r : rows) groups[group_key(r, group_by)].push_back(r);
  std::map<std::string, double> out;
  for (const auto& [key, members] : groups) {
    try {
      out[key] = delta_q(members, resolved);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientData) throw;
    }
  }
  return out;
}

double heterogeneity_dispersion(std::span<const double> delta_qs) {
  if (delta_qs.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "dispersion: need two groups");
  }
  const auto [lo, hi] = std::minmax_element(delta_qs.begin(), delta_qs.end());
  if (*lo == *hi) {
    if (*lo == 0.0) throw Error(ErrorCode::kUndefined, "dispersion: zero mean");
    return 0.0;
  }
  const double n = static_cast<double>(delta_qs.size());
  double mean = 0.0;
  for (double x : delta_qs) mean += x;
  mean /= n;
  if (mean == 0.0) throw Error(ErrorCode::kUndefined, "dispersion: zero mean");
  double ss = 0.0;
  for (double x : delta_qs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n) / std::abs(mean);
}

TimeSensitivity time_sensitivity(std::span<const AnalysisRow> rows,
                                 const IncidentFilter& filter,
                                 const TimeWindows& windows) {
  IncidentFilter base = filter;
  base.bitrate_band = windows.bitrate_band;
  base.max_bitrate_kbps = resolved_max(rows, filter);
  IncidentFilter early = base;
  early.first_part = windows.early_first;
  early.last_part = windows.early_last;
  IncidentFilter late = base;
  late.first_part = windows.late_first;
  late.last_part = windows.late_last;
  return {delta_q(rows, early), delta_q(rows, late)};
}

std::vector<ReportRow> heterogeneity_report(std::span<const AnalysisRow> rows,
                                            const AnalysisConfig& config) {
  std::vector<ReportRow> out;
  for (auto kind : {IncidentKind::kRebuffering, IncidentKind::kLowBitrate,
                    IncidentKind::kBitrateSwitch}) {
    IncidentFilter filter = IncidentFilter::defaults(kind);
    filter.max_bitrate_kbps = config.max_bitrate_kbps > 0.0
                                  ? config.max_bitrate_kbps
                                  : max_bitrate_of(rows);
    for (auto g : {GroupBy::kUser, GroupBy::kDevice, GroupBy::kVideo}) {
      auto dispersion_of = [&](std::span<const AnalysisRow> sample) {
        std::vector<double> values;
        for (const auto& [key, dq] : delta_q_by(sample, filter, g)) {
          values.push_back(dq);
        }
        return heterogeneity_dispersion(values);
      };
      double point = 0.0;
      try {
        point = dispersion_of(rows);
      } catch (const Error&) {
        continue;
      }
      ReportRow row{kind, g, point, std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()};
      try {
        const auto ci = bootstrap_ci<AnalysisRow>(
            dispersion_of, rows, config.bootstrap_frac, config.bootstrap_reps,
            derive_seed({config.seed, static_cast<std::uint64_t>(kind),
                         static_cast<std::uint64_t>(g)}));
        row.ci_low = ci.low();
        row.ci_high = ci.high();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInsufficientData) throw;
      }
      out.push_back(row);
    }
  }
  return out;
}

void write_report(std::ostream& out, const std::vector<ReportRow>& rows) {
  auto cell = [](double v) {
    return std::isnan(v) ? std::string() : io::format_double(v);
  };
  out << "incident,group_by,dispersion,ci_low,ci_high\n";
  for (const auto& r : rows) {
    out << incident_name(r.incident) << ',' << group_by_name(r.group_by) << ','
        << cell(r.dispersion) << ',' << cell(r.ci_low) << ','
        << cell(r.ci_high) << '\n';
  }
}

}  // namespace vidhoc::analysis
