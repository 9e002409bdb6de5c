#include "scadatwin/ids.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scadatwin/error.hpp"

namespace scadatwin::ids {

using capture::CaptureRecord;
using ordered_json = nlohmann::ordered_json;

const char* to_string(Detector d) {
  switch (d) {
    case Detector::signature: return "signature";
    case Detector::spec: return "spec";
    case Detector::stat: return "stat";
  }
  return "?";
}

const char* to_string(Severity s) {
  switch (s) {
    case Severity::low: return "low";
    case Severity::medium: return "medium";
    case Severity::high: return "high";
  }
  return "?";
}

Detector detector_from(const std::string& s) {
  if (s == "signature") return Detector::signature;
  if (s == "spec") return Detector::spec;
  if (s == "stat") return Detector::stat;
  throw Error(ErrorCode::ConfigError, "unknown detector '" + s + "'");
}

Severity severity_from(const std::string& s) {
  if (s == "low") return Severity::low;
  if (s == "medium") return Severity::medium;
  if (s == "high") return Severity::high;
  throw Error(ErrorCode::ConfigError, "unknown severity '" + s + "'");
}

const std::vector<std::string>& labels_of(Detector d) {
  static const std::vector<std::string> sig{"T1", "T4", "SCAN", "LOGIN_FAIL"};
  static const std::vector<std::string> spec{"P1", "DC", "IPM", "NSC", "UIOA", "ISR", "SCM", "MALFORMED"};
  static const std::vector<std::string> stat{"STAT_BYTES", "STAT_POWER"};
  switch (d) {
    case Detector::signature: return sig;
    case Detector::spec: return spec;
    case Detector::stat: return stat;
  }
  return sig;
}

// ---- signature ----

void SignatureRule::validate() const {
  if (id.empty()) throw Error(ErrorCode::ConfigError, "signature rule without id");
  if (!protocol && !port && pattern.empty())
    throw Error(ErrorCode::ConfigError, "signature rule '" + id + "' has no filter");
  const auto& ok = labels_of(Detector::signature);
  if (std::find(ok.begin(), ok.end(), label) == ok.end())
    throw Error(ErrorCode::ConfigError, "signature rule '" + id + "' has label '" + label + "'");
}

bool SignatureRule::matches(const CaptureRecord& r) const {
  if (protocol && r.protocol != *protocol) return false;
  if (port && r.src_port() != *port && r.dst_port() != *port) return false;
  if (pattern.empty()) return true;
  if (offset) {
    if (r.payload.size() < *offset + pattern.size()) return false;
    return std::equal(pattern.begin(), pattern.end(), r.payload.begin() + static_cast<std::ptrdiff_t>(*offset));
  }
  return std::search(r.payload.begin(), r.payload.end(), pattern.begin(), pattern.end()) != r.payload.end();
}

std::vector<SignatureRule> default_rules() {
  auto tag = [](const char* id, std::uint8_t kind, const char* label, Severity sev) {
    return SignatureRule{id, net::Protocol::telnet, std::uint16_t{23}, Bytes{kind}, std::size_t{0}, label, sev};
  };
  return {
      tag("telnet-banner", 1, "T1", Severity::low),
      tag("telnet-username", 2, "T1", Severity::low),
      tag("telnet-password", 3, "T1", Severity::low),
      tag("telnet-command", 4, "T4", Severity::medium),
      tag("telnet-output", 5, "T4", Severity::medium),
      SignatureRule{"scan-probe", net::Protocol::scan, std::nullopt, to_bytes("PROBE"), std::size_t{0}, "SCAN",
                    Severity::medium},
      SignatureRule{"login-failure", net::Protocol::telnet, std::nullopt, to_bytes("Login incorrect"), std::nullopt,
                    "LOGIN_FAIL", Severity::high},
  };
}

std::vector<Alert> signature_scan(const std::vector<CaptureRecord>& capture, const std::vector<SignatureRule>& rules) {
  for (const auto& r : rules) r.validate();
  std::vector<Alert> out;
  for (const auto& rec : capture)
    for (const auto& rule : rules)
      if (rule.matches(rec))
        out.push_back({Detector::signature, rule.label, rule.severity, rec.seconds(), rec.src + "->" + rec.dst,
                       "rule " + rule.id});
  return out;
}

// ---- specification ----

void SpecModel::validate() const {
  if (!(cycle_gap_s > 0)) throw Error(ErrorCode::ConfigError, "command cycle gap must be positive");
  for (const auto& k : keywords)
    if (k.empty()) throw Error(ErrorCode::ConfigError, "empty suspicious keyword");
  for (const auto& p : allowed_pairs)
    if (!allowed_addresses.count(p.src) || !allowed_addresses.count(p.dst))
      throw Error(ErrorCode::ConfigError, "allowed connection " + p.src + "->" + p.dst + " uses an unlisted address");
}

namespace {

bool has_token(const std::string& text, const std::vector<std::string>& keywords, std::string& hit) {
  std::istringstream in(text);
  for (std::string tok; in >> tok;)
    for (const auto& k : keywords)
      if (tok == k) {
        hit = k;
        return true;
      }
  return false;
}

std::string describe(const CommandKey& k) {
  return "type " + std::to_string(k.type) + " ca " + std::to_string(k.common_address) + " ioa " +
         std::to_string(k.ioa);
}

}  // namespace

std::vector<Alert> spec_analyze(const std::vector<CaptureRecord>& capture, const SpecModel& model) {
  model.validate();
  std::vector<Alert> out;
  std::map<std::string, std::uint16_t> expected_ns;  // by "src>dst" endpoint pair

  struct Cycle {
    double start = 0.0;
    double last = 0.0;
    std::vector<CommandKey> commands;
  };
  std::optional<Cycle> cycle;
  auto close_cycle = [&]() {
    if (!cycle) return;
    std::vector<std::string> odd;
    for (const auto& k : cycle->commands) {
      if (model.relax_isr && k.type == static_cast<std::uint8_t>(iec104::TypeId::interrogation)) continue;
      if (!model.command_repertoire.count(k)) odd.push_back(describe(k));
    }
    if (!odd.empty()) {
      std::string why = "cycle outside repertoire:";
      for (const auto& o : odd) why += " [" + o + "]";
      out.push_back({Detector::spec, "ISR", Severity::low, cycle->start, model.mtu_address, why});
    }
    cycle.reset();
  };

  for (const auto& r : capture) {
    const double t = r.seconds();
    const std::string src = r.src_addr();
    const std::string dst = r.dst_addr();
    const std::string flow = r.src + "->" + r.dst;

    if (cycle && t - cycle->last > model.cycle_gap_s) close_cycle();
    // port probes carry no protocol the specification models
    if (r.protocol == net::Protocol::scan) continue;

    if (!model.allowed_addresses.count(src) || !model.allowed_addresses.count(dst)) {
      const std::string& who = model.allowed_addresses.count(src) ? dst : src;
      out.push_back({Detector::spec, "IPM", Severity::high, t, flow, "address " + who + " not in allowlist"});
    }

    switch (r.protocol) {
      case net::Protocol::other: {
        if (to_text(r.payload) == net::syn_payload) {
          expected_ns[r.src + ">" + r.dst] = 0;
          expected_ns[r.dst + ">" + r.src] = 0;
          if (!model.allowed_pairs.count({src, dst, r.dst_port()}))
            out.push_back({Detector::spec, "NSC", Severity::medium, t, flow,
                           "connection " + src + "->" + dst + ":" + std::to_string(r.dst_port()) + " not allowed"});
        }
        break;
      }
      case net::Protocol::telnet: {
        out.push_back({Detector::spec, "P1", Severity::low, t, flow, "telnet frame"});
        try {
          const auto msg = telnet::decode(r.payload);
          std::string hit;
          if (has_token(msg.text, model.keywords, hit))
            out.push_back({Detector::spec, "DC", Severity::high, t, flow, "suspicious keyword '" + hit + "'"});
        } catch (const Error&) {
          out.push_back({Detector::spec, "MALFORMED", Severity::medium, t, flow, "undecodable telnet frame"});
        }
        break;
      }
      case net::Protocol::iec104: {
        iec104::Apdu apdu;
        try {
          apdu = iec104::decode_apdu(r.payload);
        } catch (const Error& e) {
          out.push_back({Detector::spec, "MALFORMED", Severity::medium, t, flow, e.what()});
          break;
        }
        if (apdu.apci.kind != iec104::FrameKind::I || !apdu.asdu) break;
        const auto& a = *apdu.asdu;

        const std::string key = r.src + ">" + r.dst;
        auto exp = expected_ns.find(key);
        if (exp == expected_ns.end()) exp = expected_ns.emplace(key, apdu.apci.send_seq).first;
        if (apdu.apci.send_seq != exp->second)
          out.push_back({Detector::spec, "SCM", Severity::medium, t, flow,
                         "N(S) " + std::to_string(apdu.apci.send_seq) + " expected " + std::to_string(exp->second)});
        exp->second = iec104::next_seq(apdu.apci.send_seq);

        const bool gi = a.type == iec104::TypeId::interrogation;
        auto station = model.allowed_ioas.find(a.common_address);
        const bool known = station != model.allowed_ioas.end() && ((gi && a.ioa == 0) || station->second.count(a.ioa));
        if (!known) {
          auto where = model.station_address.find(a.common_address);
          out.push_back({Detector::spec, "UIOA", Severity::high, t, flow,
                         "IOA " + std::to_string(a.ioa) + " not mapped for station " +
                             (where == model.station_address.end() ? std::to_string(a.common_address) : where->second)});
        }

        if (src == model.mtu_address && (a.type == iec104::TypeId::setpoint_float || gi) &&
            a.cot == iec104::Cot::activation) {
          if (!cycle) cycle = Cycle{t, t, {}};
          cycle->last = t;
          cycle->commands.push_back({static_cast<std::uint8_t>(a.type), a.common_address, a.ioa});
        }
        break;
      }
      case net::Protocol::transfer:
      case net::Protocol::scan: break;
    }
  }
  close_cycle();
  std::stable_sort(out.begin(), out.end(), [](const Alert& x, const Alert& y) { return x.t < y.t; });
  return out;
}

// ---- statistical ----

void StatConfig::validate(double sample_spacing_s) const {
  if (!(z_low > 0 && z_low < z_med && z_med < z_high))
    throw Error(ErrorCode::ConfigError, "z thresholds must satisfy 0 < low < medium < high");
  if (!(min_std > 0)) throw Error(ErrorCode::ConfigError, "std floor must be positive");
  if (!(sample_spacing_s > 0) || window_s / sample_spacing_s < 10 - 1e-9)
    throw Error(ErrorCode::ConfigError, "statistical window must cover at least 10 samples");
}

std::vector<Alert> stat_series(const std::vector<Sample>& series, std::size_t window, const StatConfig& cfg,
                               const std::string& label, const std::string& subject) {
  std::vector<Alert> out;
  if (window == 0) return out;
  for (std::size_t i = window; i < series.size(); ++i) {
    double mean = 0.0;
    for (std::size_t k = i - window; k < i; ++k) mean += series[k].value;
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t k = i - window; k < i; ++k) var += (series[k].value - mean) * (series[k].value - mean);
    var /= static_cast<double>(window);
    const double sd = std::max(std::sqrt(var), cfg.min_std);
    const double z = std::abs(series[i].value - mean) / sd;
    if (z < cfg.z_low) continue;
    const Severity sev = z >= cfg.z_high ? Severity::high : z >= cfg.z_med ? Severity::medium : Severity::low;
    char why[160];
    std::snprintf(why, sizeof why, "z=%.3f value=%.6g mean=%.6g std=%.6g", z, series[i].value, mean, sd);
    out.push_back({Detector::stat, label, sev, series[i].t, subject, why});
  }
  return out;
}

std::vector<Alert> stat_analyze(const capture::RunOutputs& run, const StatConfig& cfg) {
  const double step = run.meta.grid_step > 0 ? run.meta.grid_step : 1.0;
  cfg.validate(1.0);
  cfg.validate(step);

  std::vector<Alert> out;
  const auto merged = capture::merge_captures(run.captures);
  const auto rates = capture::derive_rates(merged, static_cast<std::size_t>(std::ceil(run.meta.duration)));
  std::vector<Sample> bytes;
  for (std::size_t i = 0; i < rates.bins.size(); ++i)
    bytes.push_back({static_cast<double>(i), static_cast<double>(rates.bins[i].total_bytes)});
  auto b = stat_series(bytes, static_cast<std::size_t>(std::llround(cfg.window_s)), cfg, "STAT_BYTES", "network");
  out.insert(out.end(), b.begin(), b.end());

  std::vector<std::string> points;
  std::map<std::string, std::vector<Sample>> by_point;
  for (const auto& p : run.power) {
    if (!by_point.count(p.point)) points.push_back(p.point);
    by_point[p.point].push_back({p.t, p.p_kw});
  }
  const auto window = static_cast<std::size_t>(std::llround(cfg.window_s / step));
  for (const auto& name : points) {
    auto a = stat_series(by_point[name], window, cfg, "STAT_POWER", name);
    out.insert(out.end(), a.begin(), a.end());
  }
  std::stable_sort(out.begin(), out.end(), [](const Alert& x, const Alert& y) { return x.t < y.t; });
  return out;
}

// ---- scoring ----

LabelMapping default_label_mapping() {
  const std::vector<std::string> shell{"telnet_login", "login_failed",  "file_transfer", "tamper_install",
                                       "exfiltration", "hmi_halt",      "hmi_slowdown"};
  const std::vector<std::string> effects{"command_manipulation", "rtu_shutdown", "rtu_slowdown"};
  return {
      {"T1", shell},
      {"T4", shell},
      {"SCAN", {"scan"}},
      {"LOGIN_FAIL", {"login_failed"}},
      {"P1", shell},
      {"DC", {"file_transfer", "tamper_install", "exfiltration", "hmi_halt", "hmi_slowdown"}},
      {"IPM", shell},
      {"NSC", {"telnet_login", "login_failed"}},
      {"UIOA", effects},
      {"SCM", effects},
      {"ISR", effects},
      {"MALFORMED", {}},
      {"STAT_BYTES", {"file_transfer", "exfiltration", "scan", "rtu_shutdown", "rtu_slowdown", "hmi_halt",
                      "hmi_slowdown"}},
      {"STAT_POWER", {"command_manipulation", "rtu_shutdown"}},
  };
}

std::optional<double> MetricRow::precision() const {
  if (tp + fp == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::optional<double> MetricRow::recall() const {
  if (events == 0) return std::nullopt;
  return static_cast<double>(detected) / static_cast<double>(events);
}

std::optional<double> MetricRow::latency() const {
  if (detected == 0) return std::nullopt;
  return latency_sum / static_cast<double>(detected);
}

const MetricRow* Metrics::find(const std::string& detector, const std::string& label) const {
  for (const auto& r : rows)
    if (r.detector == detector && r.label == label) return &r;
  return nullptr;
}

bool alert_matches(const Alert& a, const TruthEvent& e, double tolerance, const LabelMapping& mapping) {
  auto m = mapping.find(a.label);
  if (m == mapping.end() || std::find(m->second.begin(), m->second.end(), e.label) == m->second.end()) return false;
  return a.t >= e.start - tolerance && a.t <= e.end + tolerance;
}

namespace {

// Scores `alerts` against the truth events whose label is in `relevant`.
MetricRow score(const std::string& detector, const std::string& label, const std::vector<const Alert*>& alerts,
                const std::vector<TruthEvent>& truth, const std::set<std::string>& relevant, double tolerance,
                const LabelMapping& mapping) {
  MetricRow row;
  row.detector = detector;
  row.label = label;
  for (const Alert* a : alerts) {
    bool hit = false;
    for (const auto& e : truth)
      if (alert_matches(*a, e, tolerance, mapping)) {
        hit = true;
        break;
      }
    hit ? ++row.tp : ++row.fp;
  }
  for (const auto& e : truth) {
    if (!relevant.count(e.label)) continue;
    ++row.events;
    std::optional<double> first;
    for (const Alert* a : alerts)
      if (alert_matches(*a, e, tolerance, mapping) && (!first || a->t < *first)) first = a->t;
    if (first) {
      ++row.detected;
      row.latency_sum += std::max(0.0, *first - e.start);
    }
  }
  return row;
}

}  // namespace

Metrics evaluate(const std::vector<Alert>& alerts, const std::vector<TruthEvent>& truth, double tolerance,
                 const LabelMapping& mapping, const std::vector<Detector>& detectors) {
  std::set<Detector> ds(detectors.begin(), detectors.end());
  for (const auto& a : alerts) ds.insert(a.detector);

  Metrics m;
  for (Detector d : ds) {
    const std::string dn = to_string(d);
    std::vector<const Alert*> mine;
    for (const auto& a : alerts)
      if (a.detector == d) mine.push_back(&a);

    std::set<std::string> relevant;
    for (const auto& l : labels_of(d)) {
      auto it = mapping.find(l);
      if (it != mapping.end()) relevant.insert(it->second.begin(), it->second.end());
    }
    m.rows.push_back(score(dn, "all", mine, truth, relevant, tolerance, mapping));

    for (const auto& l : labels_of(d)) {
      std::vector<const Alert*> subset;
      for (const Alert* a : mine)
        if (a->label == l) subset.push_back(a);
      if (subset.empty()) continue;
      auto it = mapping.find(l);
      std::set<std::string> rel;
      if (it != mapping.end()) rel.insert(it->second.begin(), it->second.end());
      m.rows.push_back(score(dn, l, subset, truth, rel, tolerance, mapping));
    }

    std::vector<std::string> truth_labels;
    for (const auto& e : truth)
      if (relevant.count(e.label) && std::find(truth_labels.begin(), truth_labels.end(), e.label) == truth_labels.end())
        truth_labels.push_back(e.label);
    std::sort(truth_labels.begin(), truth_labels.end());
    for (const auto& tl : truth_labels) {
      std::vector<TruthEvent> only;
      for (const auto& e : truth)
        if (e.label == tl) only.push_back(e);
      std::vector<const Alert*> hits;
      for (const Alert* a : mine)
        for (const auto& e : only)
          if (alert_matches(*a, e, tolerance, mapping)) {
            hits.push_back(a);
            break;
          }
      m.rows.push_back(score(dn, "truth:" + tl, hits, only, {tl}, tolerance, mapping));
    }
  }
  return m;
}

Metrics aggregate(const std::vector<Metrics>& runs) {
  Metrics out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& run : runs) {
    for (const auto& r : run.rows) {
      auto [it, fresh] = index.try_emplace({r.detector, r.label}, out.rows.size());
      if (fresh) {
        out.rows.push_back(r);
        continue;
      }
      MetricRow& acc = out.rows[it->second];
      acc.tp += r.tp;
      acc.fp += r.fp;
      acc.events += r.events;
      acc.detected += r.detected;
      acc.latency_sum += r.latency_sum;
    }
  }
  return out;
}

std::string metrics_csv(const Metrics& m) {
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  std::string s = "detector,label,tp,fp,precision,recall,latency_s\n";
  for (const auto& r : m.rows)
    s += r.detector + "," + r.label + "," + std::to_string(r.tp) + "," + std::to_string(r.fp) + "," +
         num(r.precision()) + "," + num(r.recall()) + "," + num(r.latency()) + "\n";
  return s;
}

// ---- alert files ----

std::string alert_line(const Alert& a) {
  ordered_json j;
  j["detector"] = to_string(a.detector);
  j["label"] = a.label;
  j["severity"] = to_string(a.severity);
  j["t"] = a.t;
  j["subject"] = a.subject;
  j["explanation"] = a.explanation;
  return j.dump();
}

Alert parse_alert_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Alert a;
    a.detector = detector_from(j.at("detector").get<std::string>());
    a.label = j.at("label").get<std::string>();
    a.severity = severity_from(j.at("severity").get<std::string>());
    a.t = j.at("t").get<double>();
    a.subject = j.at("subject").get<std::string>();
    a.explanation = j.at("explanation").get<std::string>();
    const auto& ok = labels_of(a.detector);
    if (std::find(ok.begin(), ok.end(), a.label) == ok.end())
      throw Error(ErrorCode::MalformedTrace, "label " + a.label + " does not belong to " + to_string(a.detector));
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedTrace, std::string("bad alert record: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedTrace, e.what());
  }
}

void write_alerts(const std::vector<Alert>& alerts, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  for (const auto& a : alerts) out << alert_line(a) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + file.string());
}

std::vector<Alert> read_alerts(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  std::vector<Alert> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(parse_alert_line(line));
  return out;
}

}  // namespace scadatwin::ids
