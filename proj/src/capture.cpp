#include "scadatwin/capture.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scadatwin/error.hpp"

namespace scadatwin::capture {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& ep) {
  const auto colon = ep.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::Malformed, "endpoint '" + ep + "' lacks a port");
  unsigned port = 0;
  const char* first = ep.data() + colon + 1;
  const char* last = ep.data() + ep.size();
  auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc{} || ptr != last || port > 65535)
    throw Error(ErrorCode::Malformed, "bad port in endpoint '" + ep + "'");
  return {ep.substr(0, colon), static_cast<std::uint16_t>(port)};
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return in;
}

double parse_double(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorCode::Malformed, "bad number '" + s + "'");
  return v;
}

}  // namespace

std::string CaptureRecord::src_addr() const { return split_endpoint(src).first; }
std::string CaptureRecord::dst_addr() const { return split_endpoint(dst).first; }
std::uint16_t CaptureRecord::src_port() const { return split_endpoint(src).second; }
std::uint16_t CaptureRecord::dst_port() const { return split_endpoint(dst).second; }

CaptureRecord to_record(const net::Frame& f, const std::string& tap) {
  CaptureRecord r;
  r.t = f.delivered_at;
  r.tap = tap;
  r.src = f.src_addr + ":" + std::to_string(f.src_port);
  r.dst = f.dst_addr + ":" + std::to_string(f.dst_port);
  r.protocol = f.protocol;
  r.payload = f.payload;
  return r;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_ms(net::SimTime t) {
  char buf[48];
  const char* sign = t < 0 ? "-" : "";
  const long long a = t < 0 ? -t : t;
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", sign, a / 1000, a % 1000);
  return buf;
}

std::string capture_line(const CaptureRecord& r) {
  std::string s = "{\"t\":" + format_ms(r.t);
  s += ",\"tap\":" + json(r.tap).dump();
  s += ",\"src\":" + json(r.src).dump();
  s += ",\"dst\":" + json(r.dst).dump();
  s += ",\"protocol\":\"" + std::string(net::to_string(r.protocol)) + "\"";
  s += ",\"length\":" + std::to_string(r.length());
  s += ",\"payload\":\"" + to_hex(r.payload) + "\"}";
  return s;
}

CaptureRecord parse_capture_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    CaptureRecord r;
    r.t = net::from_seconds(j.at("t").get<double>());
    r.tap = j.at("tap").get<std::string>();
    r.src = j.at("src").get<std::string>();
    r.dst = j.at("dst").get<std::string>();
    r.protocol = net::protocol_from(j.at("protocol").get<std::string>());
    r.payload = from_hex(j.at("payload").get<std::string>());
    if (j.at("length").get<std::size_t>() != r.payload.size())
      throw Error(ErrorCode::Malformed, "length field disagrees with payload");
    split_endpoint(r.src);
    split_endpoint(r.dst);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("bad capture record: ") + e.what());
  }
}

std::string truth_line(const TruthEvent& e) {
  ordered_json j;
  j["label"] = e.label;
  j["window"] = {e.start, e.end};
  j["subjects"] = e.subjects;
  return j.dump();
}

TruthEvent parse_truth_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    TruthEvent e;
    e.label = j.at("label").get<std::string>();
    e.start = j.at("window").at(0).get<double>();
    e.end = j.at("window").at(1).get<double>();
    e.subjects = j.at("subjects").get<std::vector<std::string>>();
    return e;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("bad truth record: ") + e.what());
  }
}

void write_run(const RunOutputs& outputs, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create directory " + dir.string());

  for (const auto& [tap, records] : outputs.captures) {
    auto out = open_out(dir / ("capture_" + tap + ".jsonl"));
    for (const auto& r : records) out << capture_line(r) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for capture_" + tap + ".jsonl");
  }
  {
    auto out = open_out(dir / "power.csv");
    out << "t,point,p_kw\n";
    for (const auto& p : outputs.power) out << format_double(p.t) << ',' << p.point << ',' << format_double(p.p_kw) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for power.csv");
  }
  {
    auto out = open_out(dir / "truth.jsonl");
    for (const auto& e : outputs.truth) out << truth_line(e) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for truth.jsonl");
  }
  {
    ordered_json m;
    m["scenario"] = outputs.meta.scenario;
    m["seed"] = outputs.meta.seed;
    m["mode"] = net::to_string(outputs.meta.mode);
    m["grid_step"] = outputs.meta.grid_step;
    m["duration"] = outputs.meta.duration;
    m["repetition"] = outputs.meta.repetition;
    m["taps"] = outputs.meta.taps;
    auto out = open_out(dir / "meta.json");
    out << m.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for meta.json");
  }
}

RunOutputs read_run(const fs::path& dir) {
  RunOutputs r;
  try {
    auto in = open_in(dir / "meta.json");
    const json m = json::parse(in);
    r.meta.scenario = m.at("scenario").get<std::string>();
    r.meta.seed = m.at("seed").get<std::uint64_t>();
    r.meta.mode = net::mode_from(m.at("mode").get<std::string>());
    r.meta.grid_step = m.at("grid_step").get<double>();
    r.meta.duration = m.at("duration").get<double>();
    r.meta.repetition = m.value("repetition", 0);
    r.meta.taps = m.at("taps").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("bad meta.json: ") + e.what());
  }
  std::string line;
  for (const auto& tap : r.meta.taps) {
    auto in = open_in(dir / ("capture_" + tap + ".jsonl"));
    auto& records = r.captures[tap];
    while (std::getline(in, line))
      if (!line.empty()) records.push_back(parse_capture_line(line));
  }
  {
    auto in = open_in(dir / "power.csv");
    std::getline(in, line);
    if (line != "t,point,p_kw") throw Error(ErrorCode::Malformed, "power.csv header mismatch");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string t, point, p;
      if (!std::getline(ss, t, ',') || !std::getline(ss, point, ',') || !std::getline(ss, p))
        throw Error(ErrorCode::Malformed, "bad power.csv row '" + line + "'");
      r.power.push_back({parse_double(t), point, parse_double(p)});
    }
  }
  {
    auto in = open_in(dir / "truth.jsonl");
    while (std::getline(in, line))
      if (!line.empty()) r.truth.push_back(parse_truth_line(line));
  }
  return r;
}

RateSeries derive_rates(const std::vector<CaptureRecord>& capture, std::size_t min_bins) {
  RateSeries s;
  s.bins.resize(min_bins);
  for (const auto& r : capture) {
    const auto bin = static_cast<std::size_t>(r.t / 1000);
    if (bin >= s.bins.size()) s.bins.resize(bin + 1);
    auto& b = s.bins[bin];
    b.total_bytes += r.length();
    b.total_frames += 1;
    if (r.protocol == net::Protocol::telnet) b.telnet_frames += 1;
    if (r.protocol == net::Protocol::iec104) b.iec104_frames += 1;
  }
  return s;
}

std::vector<CaptureRecord> merge_captures(const std::map<std::string, std::vector<CaptureRecord>>& captures) {
  using Key = std::tuple<net::SimTime, std::string, std::string, int, Bytes>;
  auto key = [](const CaptureRecord& r) { return Key{r.t, r.src, r.dst, static_cast<int>(r.protocol), r.payload}; };

  std::map<Key, std::size_t> allowed;
  std::vector<const CaptureRecord*> all;
  for (const auto& [tap, records] : captures) {
    std::map<Key, std::size_t> here;
    for (const auto& r : records) {
      ++here[key(r)];
      all.push_back(&r);
    }
    for (const auto& [k, n] : here) allowed[k] = std::max(allowed[k], n);
  }
  // stable: equal timestamps keep each tap's own delivery order
  std::stable_sort(all.begin(), all.end(), [](const CaptureRecord* a, const CaptureRecord* b) { return a->t < b->t; });

  std::map<Key, std::size_t> emitted;
  std::vector<CaptureRecord> out;
  for (const CaptureRecord* r : all) {
    const Key k = key(*r);
    if (emitted[k] >= allowed[k]) continue;
    ++emitted[k];
    out.push_back(*r);
    out.back().tap.clear();
  }
  return out;
}

}  // namespace scadatwin::capture
