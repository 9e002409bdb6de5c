#pragma once

// Signature, specification and statistical detectors over recorded runs,
// plus scoring against ground truth.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scadatwin/capture.hpp"
#include "scadatwin/protocol.hpp"
#include "scadatwin/truth.hpp"

namespace scadatwin::ids {

enum class Detector : std::uint8_t { signature, spec, stat };
enum class Severity : std::uint8_t { low, medium, high };

const char* to_string(Detector d);
const char* to_string(Severity s);
Detector detector_from(const std::string& s);
Severity severity_from(const std::string& s);

struct Alert {
  Detector detector = Detector::signature;
  std::string label;
  Severity severity = Severity::low;
  double t = 0.0;  // s
  std::string subject;
  std::string explanation;
  friend bool operator==(const Alert&, const Alert&) = default;
};

/// Labels each detector may emit. MALFORMED marks undecodable frames.
const std::vector<std::string>& labels_of(Detector d);

// ---- signature ----

struct SignatureRule {
  std::string id;
  std::optional<net::Protocol> protocol;
  std::optional<std::uint16_t> port;  // matches either endpoint
  Bytes pattern;
  std::optional<std::size_t> offset;  // pattern anchored here when set
  std::string label;
  Severity severity = Severity::low;

  /// At least one filter; label one of the signature labels.
  void validate() const;
  bool matches(const capture::CaptureRecord& r) const;
};

std::vector<SignatureRule> default_rules();
std::vector<Alert> signature_scan(const std::vector<capture::CaptureRecord>& capture,
                                  const std::vector<SignatureRule>& rules);

// ---- specification ----

struct ConnectionPair {
  std::string src;
  std::string dst;
  std::uint16_t port = 0;
  auto operator<=>(const ConnectionPair&) const = default;
};

struct CommandKey {
  std::uint8_t type = 0;
  std::uint16_t common_address = 0;
  std::uint32_t ioa = 0;
  auto operator<=>(const CommandKey&) const = default;
};

struct SpecModel {
  std::set<std::string> allowed_addresses;
  std::set<ConnectionPair> allowed_pairs;
  /// Station common address → IOAs it may carry (station address kept
  /// for the explanation).
  std::map<std::uint16_t, std::set<std::uint32_t>> allowed_ioas;
  std::map<std::uint16_t, std::string> station_address;
  /// Commands a legitimate MTU cycle may contain.
  std::set<CommandKey> command_repertoire;
  std::string mtu_address;
  std::vector<std::string> keywords{"recv", "install-tamper", "tail", "nc", "chmod"};
  double cycle_gap_s = 0.5;
  bool relax_isr = false;

  void validate() const;
};

std::vector<Alert> spec_analyze(const std::vector<capture::CaptureRecord>& capture, const SpecModel& model);

// ---- statistical ----

struct StatConfig {
  double window_s = 120.0;
  double z_low = 3.0;
  double z_med = 5.0;
  double z_high = 8.0;
  double min_std = 1e-6;

  void validate(double sample_spacing_s = 1.0) const;
};

struct Sample {
  double t = 0.0;
  double value = 0.0;
};

/// Rolling z-score over the trailing `window` samples (current one
/// excluded); nothing is reported until a full window is available.
std::vector<Alert> stat_series(const std::vector<Sample>& series, std::size_t window, const StatConfig& cfg,
                               const std::string& label, const std::string& subject);

/// STAT_BYTES over per-second bytes of the merged capture, STAT_POWER over
/// every power point.
std::vector<Alert> stat_analyze(const capture::RunOutputs& run, const StatConfig& cfg);

// ---- scoring ----

/// Alert label → truth labels it may be credited against.
using LabelMapping = std::map<std::string, std::vector<std::string>>;
LabelMapping default_label_mapping();

struct MetricRow {
  std::string detector;
  std::string label;  // "all", an alert label, or "truth:<label>"
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t events = 0;    // truth events this row is scored against
  std::size_t detected = 0;  // of those, events with at least one TP
  double latency_sum = 0.0;  // over detected events

  std::optional<double> precision() const;
  std::optional<double> recall() const;
  std::optional<double> latency() const;
};

struct Metrics {
  std::vector<MetricRow> rows;
  const MetricRow* find(const std::string& detector, const std::string& label) const;
};

bool alert_matches(const Alert& a, const TruthEvent& e, double tolerance, const LabelMapping& mapping);

/// `detectors` lists the detectors to report even when they raised nothing.
Metrics evaluate(const std::vector<Alert>& alerts, const std::vector<TruthEvent>& truth, double tolerance,
                 const LabelMapping& mapping, const std::vector<Detector>& detectors = {});

/// Sums counts row-wise (rows keyed by detector+label).
Metrics aggregate(const std::vector<Metrics>& runs);

std::string metrics_csv(const Metrics& m);

// ---- alert files ----

std::string alert_line(const Alert& a);
Alert parse_alert_line(const std::string& line);
void write_alerts(const std::vector<Alert>& alerts, const std::filesystem::path& file);
std::vector<Alert> read_alerts(const std::filesystem::path& file);

}  // namespace scadatwin::ids
