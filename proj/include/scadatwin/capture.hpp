#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scadatwin/netsim.hpp"
#include "scadatwin/truth.hpp"

namespace scadatwin::capture {

struct CaptureRecord {
  net::SimTime t = 0;  // ms
  std::string tap;
  std::string src;  // "addr:port"
  std::string dst;
  net::Protocol protocol = net::Protocol::other;
  Bytes payload;

  std::size_t length() const { return payload.size(); }
  std::string src_addr() const;
  std::string dst_addr() const;
  std::uint16_t src_port() const;
  std::uint16_t dst_port() const;
  double seconds() const { return net::to_seconds(t); }
  friend bool operator==(const CaptureRecord&, const CaptureRecord&) = default;
};

CaptureRecord to_record(const net::Frame& f, const std::string& tap);

struct PowerRecord {
  double t = 0.0;  // s
  std::string point;  // lv_busbar | transformer
  double p_kw = 0.0;
  friend bool operator==(const PowerRecord&, const PowerRecord&) = default;
};

struct RunMeta {
  std::string scenario;
  std::uint64_t seed = 0;
  net::Mode mode = net::Mode::twin;
  double grid_step = 1.0;
  double duration = 0.0;
  int repetition = 0;
  std::vector<std::string> taps;
};

struct RunOutputs {
  RunMeta meta;
  std::map<std::string, std::vector<CaptureRecord>> captures;  // by tap id
  std::vector<PowerRecord> power;
  std::vector<TruthEvent> truth;
};

struct RateBin {
  std::uint64_t total_bytes = 0;
  std::uint64_t total_frames = 0;
  std::uint64_t telnet_frames = 0;
  std::uint64_t iec104_frames = 0;
  friend bool operator==(const RateBin&, const RateBin&) = default;
};

/// One bin per second starting at t = 0.
struct RateSeries {
  std::vector<RateBin> bins;
};

/// Writes capture_<tap>.jsonl, power.csv, truth.jsonl and meta.json.
/// Throws IoError when the directory cannot be created or written.
void write_run(const RunOutputs& outputs, const std::filesystem::path& dir);
RunOutputs read_run(const std::filesystem::path& dir);

std::string capture_line(const CaptureRecord& r);
CaptureRecord parse_capture_line(const std::string& line);
std::string truth_line(const TruthEvent& e);
TruthEvent parse_truth_line(const std::string& line);

/// `min_bins` pads the series with empty bins up to that length.
RateSeries derive_rates(const std::vector<CaptureRecord>& capture, std::size_t min_bins = 0);

/// Multiset union of several tap captures: a record seen at several taps
/// counts once per occurrence at the tap where it occurs most often. The
/// result is sorted by time, with the tap field cleared.
std::vector<CaptureRecord> merge_captures(const std::map<std::string, std::vector<CaptureRecord>>& captures);

/// Shortest round-trip decimal form.
std::string format_double(double v);
std::string format_ms(net::SimTime t);

}  // namespace scadatwin::capture
