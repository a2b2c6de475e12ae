#ifndef VIDHOC_RATELIMIT_THROTTLE_H_
#define VIDHOC_RATELIMIT_THROTTLE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vidhoc/core/types.h"

namespace vidhoc::ratelimit {

struct TransferRecord {
  std::int64_t bytes = 0;
  double duration_s = 0.0;
};

// bytes * 8 / (1000 * duration_s), in Kbps.
double estimate_real_bw(const TransferRecord& last_request);

// max(0, size_bits / target - size_bits / real), in seconds.
double hold_time(double size_bytes, double target_bw_kbps,
                 double real_bw_kbps);

// Per-session throttling state. The real-bandwidth estimate comes from the
// last transfer; ewma_weight < 1 smooths across transfers.
class ThrottleState {
 public:
  ThrottleState(double target_bw_kbps, double default_real_bw_kbps,
                double alpha = 0.6, double ewma_weight = 1.0);

  double target_bw_kbps() const { return target_bw_kbps_; }
  void set_target(double kbps);
  double alpha() const { return alpha_; }
  const std::optional<TransferRecord>& last_request() const {
    return last_request_;
  }

  double real_bw_estimate_kbps() const { return real_bw_kbps_; }
  double hold_for(double size_bytes) const;
  // Feeds the unthrottled transfer of the request just completed.
  void record_transfer(const TransferRecord& raw_transfer);

 private:
  double target_bw_kbps_;
  double real_bw_kbps_;
  double alpha_;
  double ewma_weight_;
  std::optional<TransferRecord> last_request_;
};

// Keeps a session's mean throughput (bits over wall-clock session length)
// at or below alpha * link. The session cannot end before
// now + buffered media + media not yet downloaded, so a request may only be
// released once delivered + requested bits fit under cap * that bound. The
// bound grows only while playback is stalled.
class ThroughputCap {
 public:
  ThroughputCap(double alpha, double link_kbps);

  double cap_kbps() const { return cap_kbps_; }
  // Stall seconds that must elapse before the request may go out.
  double required_stall_s(double delivered_bits, double request_bits,
                          double projected_end_s) const;

 private:
  double cap_kbps_;
};

struct Request {
  double issue_time_s = 0.0;
  std::int64_t bytes = 0;
};

struct DeliveredRequest {
  std::size_t segment = 0;
  double issue_time_s = 0.0;
  double release_time_s = 0.0;
  double complete_time_s = 0.0;
  double hold_s = 0.0;
  std::int64_t bytes = 0;
};

struct SegmentThroughput {
  std::size_t segment = 0;
  double target_kbps = 0.0;
  double achieved_kbps = 0.0;
};

struct ReplayResult {
  std::vector<DeliveredRequest> requests;
  std::vector<SegmentThroughput> throughput;
};

// Replays time-ordered requests over a stable link of link_kbps, one at a
// time. The active segment is floor(issue_time / segment_duration_s).
ReplayResult apply_schedule(const BandwidthSchedule& schedule,
                            double segment_duration_s,
                            const std::vector<Request>& requests,
                            double link_kbps, double ewma_weight = 1.0);

// throughput.csv: session,segment,target_kbps,achieved_kbps
void write_throughput_header(std::ostream& out);
void write_throughput_rows(std::ostream& out, const std::string& session,
                           const std::vector<SegmentThroughput>& rows);

}  // namespace vidhoc::ratelimit

#endif  // VIDHOC_RATELIMIT_THROTTLE_H_
