#include "vidhoc/core/io.h"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "vidhoc/core/error.h"

namespace vidhoc {

void to_json(Json& j, const PlayerState& s) {
  j = Json{{"bitrate_kbps", s.bitrate_kbps},
           {"buffer_s", s.buffer_s},
           {"bw_past_kbps", s.bw_past_kbps},
           {"bw_now_kbps", s.bw_now_kbps},
           {"rebuf_window_s", s.rebuf_window_s}};
}

void from_json(const Json& j, PlayerState& s) {
  s.bitrate_kbps = j.at("bitrate_kbps").get<double>();
  s.buffer_s = j.at("buffer_s").get<double>();
  s.bw_past_kbps = j.at("bw_past_kbps").get<double>();
  s.bw_now_kbps = j.at("bw_now_kbps").get<double>();
  s.rebuf_window_s = j.value("rebuf_window_s", 0.0);
}

void to_json(Json& j, const StateBucket& b) {
  j = Json::array({b.bitrate_idx, b.buffer_idx, b.bandwidth_idx, b.rebuf_idx});
}

void from_json(const Json& j, StateBucket& b) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::kParse, "state bucket must be a 4-element array");
  }
  b.bitrate_idx = j[0].get<int>();
  b.buffer_idx = j[1].get<int>();
  b.bandwidth_idx = j[2].get<int>();
  b.rebuf_idx = j[3].get<int>();
}

void to_json(Json& j, const SegmentQuality& q) {
  j = Json::array({q.bitrate_kbps, q.rebuffer_s, q.switch_kbps});
}

void from_json(const Json& j, SegmentQuality& q) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kParse, "segment must be [bitrate, rebuf, switch]");
  }
  q.bitrate_kbps = j[0].get<double>();
  q.rebuffer_s = j[1].get<double>();
  q.switch_kbps = j[2].get<double>();
}

void to_json(Json& j, const BandwidthSchedule& s) {
  j = Json{{"per_segment_kbps", s.per_segment_kbps},
           {"coalesce_factor", s.coalesce_factor}};
}

void from_json(const Json& j, BandwidthSchedule& s) {
  s.per_segment_kbps = j.at("per_segment_kbps").get<std::vector<double>>();
  s.coalesce_factor = j.at("coalesce_factor").get<int>();
  s.validate();
}

namespace io {

Json encode(const BitrateLadder& ladder) {
  return Json{{"levels_kbps", ladder.levels()},
              {"chunk_duration_s", ladder.chunk_duration_s()}};
}

Json encode(const VideoManifest& m) {
  return Json{{"video_id", m.video_id()},
              {"num_chunks", m.num_chunks()},
              {"ladder", encode(m.ladder())},
              {"chunk_bytes", m.all_chunk_bytes()}};
}

Json encode(const QualityPattern& p) {
  return Json{{"coalesce_factor", p.coalesce_factor()},
              {"segments", p.segments()}};
}

Json encode(const SessionRecord& r) {
  Json j{{"user_id", r.user_id},
         {"video_id", r.video_id},
         {"scheme", std::string(scheme_name(r.scheme))},
         {"pattern", encode(r.pattern)},
         {"engagement", r.engagement},
         {"bandwidth_limit_kbps", r.bandwidth_limit_kbps},
         {"context", r.context},
         {"session_index", r.session_index},
         {"scheme_session_index", r.scheme_session_index},
         {"link_kbps", r.link_kbps},
         {"mean_throughput_kbps", r.mean_throughput_kbps},
         {"selected_uncertainty", r.selected_uncertainty},
         {"infeasible_decisions", r.infeasible_decisions},
         {"status", r.failed ? "failed" : "ok"}};
  return j;
}

BitrateLadder decode_ladder(const Json& j) {
  return BitrateLadder(j.at("levels_kbps").get<std::vector<double>>(),
                       j.at("chunk_duration_s").get<double>());
}

VideoManifest decode_manifest(const Json& j) {
  VideoManifest m(
      j.at("video_id").get<std::string>(), decode_ladder(j.at("ladder")),
      j.at("chunk_bytes").get<std::vector<std::vector<std::int64_t>>>());
  if (j.contains("num_chunks") &&
      j.at("num_chunks").get<std::size_t>() != m.num_chunks()) {
    throw Error(ErrorCode::kParse, "num_chunks disagrees with chunk_bytes");
  }
  return m;
}

QualityPattern decode_pattern(const Json& j) {
  return QualityPattern(j.at("segments").get<std::vector<SegmentQuality>>(),
                        j.at("coalesce_factor").get<int>());
}

SessionRecord decode_session(const Json& j) {
  SessionRecord r;
  r.user_id = j.at("user_id").get<std::string>();
  r.video_id = j.at("video_id").get<std::string>();
  r.scheme = parse_scheme(j.at("scheme").get<std::string>());
  r.pattern = decode_pattern(j.at("pattern"));
  r.engagement = j.at("engagement").get<double>();
  r.bandwidth_limit_kbps = j.at("bandwidth_limit_kbps").get<double>();
  r.context = j.value("context", std::map<std::string, std::string>{});
  r.session_index = j.value("session_index", 0);
  r.scheme_session_index = j.value("scheme_session_index", 0);
  r.link_kbps = j.value("link_kbps", 0.0);
  r.mean_throughput_kbps = j.value("mean_throughput_kbps", 0.0);
  r.selected_uncertainty = j.value("selected_uncertainty", 0.0);
  r.infeasible_decisions = j.value("infeasible_decisions", 0);
  r.failed = j.value("status", std::string("ok")) == "failed";
  r.validate();
  return r;
}

std::vector<Json> read_jsonl(std::istream& in) {
  std::vector<Json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<Json> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path);
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<Json>& rows) {
  for (const auto& row : rows) out << row.dump() << '\n';
}

void write_jsonl_file(const std::string& path, const std::vector<Json>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kParse, "cannot write " + path);
  write_jsonl(out, rows);
}

std::vector<VideoManifest> read_manifests(const std::string& path) {
  std::vector<VideoManifest> out;
  for (const auto& j : read_jsonl_file(path)) out.push_back(decode_manifest(j));
  return out;
}

void write_manifests(const std::string& path,
                     const std::vector<VideoManifest>& manifests) {
  std::vector<Json> rows;
  for (const auto& m : manifests) rows.push_back(encode(m));
  write_jsonl_file(path, rows);
}

std::vector<SessionRecord> read_sessions(const std::string& path) {
  std::vector<SessionRecord> out;
  for (const auto& j : read_jsonl_file(path)) out.push_back(decode_session(j));
  return out;
}

void write_sessions(std::ostream& out,
                    const std::vector<SessionRecord>& records) {
  for (const auto& r : records) out << encode(r).dump() << '\n';
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double parse_number(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                       ": not a number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<QoeDatasetRow> read_qoe_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParse, "qoe dataset is missing its header");
  }
  const auto header = split_csv_line(line);
  if (header.size() != kDatasetFeatureCount + 4 || header[0] != "user" ||
      header[1] != "device" || header[2] != "video" ||
      header.back() != "qoe") {
    throw Error(ErrorCode::kParse,
                "header must be user,device,video,feature_1..feature_60,qoe");
  }
  std::vector<QoeDatasetRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(line_no) + ": wrong field count");
    }
    QoeDatasetRow row;
    row.user = f[0];
    row.device = f[1];
    row.video = f[2];
    row.features.reserve(kDatasetFeatureCount);
    for (std::size_t k = 0; k < kDatasetFeatureCount; ++k) {
      row.features.push_back(parse_number(f[3 + k], line_no));
    }
    row.qoe = parse_number(f.back(), line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<QoeDatasetRow> read_qoe_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path);
  return read_qoe_dataset(in);
}

void write_qoe_dataset(std::ostream& out,
                       const std::vector<QoeDatasetRow>& rows) {
  out << "user,device,video";
  for (std::size_t k = 1; k <= kDatasetFeatureCount; ++k) {
    out << ",feature_" << k;
  }
  out << ",qoe\n";
  for (const auto& r : rows) {
    if (r.features.size() != kDatasetFeatureCount) {
      throw Error(ErrorCode::kInvalidArgument,
                  "dataset rows need exactly 60 features");
    }
    out << csv_field(r.user) << ',' << csv_field(r.device) << ','
        << csv_field(r.video);
    for (double v : r.features) out << ',' << format_double(v);
    out << ',' << format_double(r.qoe) << '\n';
  }
}

}  // namespace io
}  // namespace vidhoc
