#include "vidhoc/ratelimit/throttle.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "vidhoc/core/error.h"
#include "vidhoc/core/io.h"

namespace vidhoc::ratelimit {

double estimate_real_bw(const TransferRecord& last_request) {
  if (!(last_request.duration_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "transfer duration must be > 0");
  }
  return static_cast<double>(last_request.bytes) * 8.0 /
         (1000.0 * last_request.duration_s);
}

double hold_time(double size_bytes, double target_bw_kbps,
                 double real_bw_kbps) {
  if (!(target_bw_kbps > 0.0) || !(real_bw_kbps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bandwidths must be > 0");
  }
  const double kbits = size_bytes * 8.0 / 1000.0;
  return std::max(0.0, kbits / target_bw_kbps - kbits / real_bw_kbps);
}

ThrottleState::ThrottleState(double target_bw_kbps,
                             double default_real_bw_kbps, double alpha,
                             double ewma_weight)
    : target_bw_kbps_(target_bw_kbps),
      real_bw_kbps_(default_real_bw_kbps),
      alpha_(alpha),
      ewma_weight_(ewma_weight) {
  if (!(target_bw_kbps_ > 0.0) || !(real_bw_kbps_ > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bandwidths must be > 0");
  }
  if (!(alpha_ > 0.0 && alpha_ <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be in (0, 1]");
  }
  if (!(ewma_weight_ > 0.0 && ewma_weight_ <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ewma weight must be in (0, 1]");
  }
}

void ThrottleState::set_target(double kbps) {
  if (!(kbps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target must be > 0");
  }
  target_bw_kbps_ = kbps;
}

double ThrottleState::hold_for(double size_bytes) const {
  return hold_time(size_bytes, target_bw_kbps_, real_bw_kbps_);
}

void ThrottleState::record_transfer(const TransferRecord& raw_transfer) {
  const double sample = estimate_real_bw(raw_transfer);
  last_request_ = raw_transfer;
  if (sample <= 0.0) return;
  real_bw_kbps_ = ewma_weight_ * sample + (1.0 - ewma_weight_) * real_bw_kbps_;
}

ThroughputCap::ThroughputCap(double alpha, double link_kbps)
    : cap_kbps_(alpha * link_kbps) {
  if (!(alpha > 0.0 && alpha <= 1.0) || !(link_kbps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad throughput cap");
  }
}

double ThroughputCap::required_stall_s(double delivered_bits,
                                       double request_bits,
                                       double projected_end_s) const {
  const double earliest_end =
      (delivered_bits + request_bits) / (1000.0 * cap_kbps_);
  return std::max(0.0, earliest_end - projected_end_s);
}

ReplayResult apply_schedule(const BandwidthSchedule& schedule,
                            double segment_duration_s,
                            const std::vector<Request>& requests,
                            double link_kbps, double ewma_weight) {
  schedule.validate();
  if (!(segment_duration_s > 0.0) || !(link_kbps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad replay parameters");
  }
  ThrottleState throttle(schedule.per_segment_kbps.front(), link_kbps, 1.0,
                         ewma_weight);
  ReplayResult result;
  const std::size_t n_segments = schedule.per_segment_kbps.size();
  std::vector<double> kbits(n_segments, 0.0);
  std::vector<double> busy_s(n_segments, 0.0);
  double link_free_at = 0.0;
  double prev_issue = -1.0;
  for (const auto& req : requests) {
    if (req.issue_time_s < prev_issue) {
      throw Error(ErrorCode::kInvalidArgument, "requests must be time-ordered");
    }
    prev_issue = req.issue_time_s;
    const auto segment = std::min<std::size_t>(
        static_cast<std::size_t>(std::floor(req.issue_time_s /
                                            segment_duration_s)),
        n_segments - 1);
    throttle.set_target(schedule.per_segment_kbps[segment]);
    const double size = static_cast<double>(req.bytes);
    const double hold = throttle.hold_for(size);
    const double raw = size * 8.0 / (1000.0 * link_kbps);
    DeliveredRequest d;
    d.segment = segment;
    d.issue_time_s = req.issue_time_s;
    d.release_time_s = std::max(req.issue_time_s, link_free_at) + hold;
    d.complete_time_s = d.release_time_s + raw;
    d.hold_s = hold;
    d.bytes = req.bytes;
    link_free_at = d.complete_time_s;
    if (raw > 0.0) throttle.record_transfer({req.bytes, raw});
    kbits[segment] += size * 8.0 / 1000.0;
    busy_s[segment] += hold + raw;
    result.requests.push_back(d);
  }
  for (std::size_t s = 0; s < n_segments; ++s) {
    if (busy_s[s] <= 0.0) continue;
    result.throughput.push_back(
        {s, schedule.per_segment_kbps[s], kbits[s] / busy_s[s]});
  }
  return result;
}

void write_throughput_header(std::ostream& out) {
  out << "session,segment,target_kbps,achieved_kbps\n";
}

void write_throughput_rows(std::ostream& out, const std::string& session,
                           const std::vector<SegmentThroughput>& rows) {
  for (const auto& r : rows) {
    out << session << ',' << r.segment << ',' << io::format_double(r.target_kbps)
        << ',' << io::format_double(r.achieved_kbps) << '\n';
  }
}

}  // namespace vidhoc::ratelimit
