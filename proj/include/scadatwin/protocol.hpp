#pragma once

// Wire codecs for the four protocols carried by the simulated process
// network: an IEC 60870-5-104 subset, a framed clear-text remote shell,
// the file-transfer stream, and scan probes.
//
// Every decoder is total: it either returns a value or throws
// Error(ErrorCode::Malformed).

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "scadatwin/bytes.hpp"

namespace scadatwin {

namespace iec104 {

inline constexpr std::uint8_t start_byte = 0x68;
inline constexpr std::uint16_t seq_modulus = 32768;
inline constexpr std::uint8_t interrogation_qualifier = 0x14;

enum class FrameKind : std::uint8_t { I, S, U };

enum class UFunction : std::uint8_t { startdt_act, startdt_con, testfr_act, testfr_con };

struct Apci {
  FrameKind kind = FrameKind::I;
  std::uint16_t send_seq = 0;  // I only
  std::uint16_t recv_seq = 0;  // I and S
  UFunction u_function = UFunction::startdt_act;  // U only

  static Apci i_frame(std::uint16_t ns, std::uint16_t nr) { return {FrameKind::I, ns, nr, {}}; }
  static Apci s_frame(std::uint16_t nr) { return {FrameKind::S, 0, nr, {}}; }
  static Apci u_frame(UFunction f) { return {FrameKind::U, 0, 0, f}; }

  friend bool operator==(const Apci& a, const Apci& b);
};

enum class TypeId : std::uint8_t {
  measured_float = 13,   // M_ME_NC_1
  setpoint_float = 50,   // C_SE_NC_1
  interrogation = 100,   // C_IC_NA_1
};

enum class Cot : std::uint8_t {
  spontaneous = 3,
  activation = 6,
  activation_con = 7,
  termination = 10,
  unknown_ioa = 47,
};

struct Asdu {
  TypeId type = TypeId::measured_float;
  Cot cot = Cot::spontaneous;
  std::uint16_t common_address = 0;
  std::uint32_t ioa = 0;  // 24 bit
  float value = 0.0f;     // types 13/50
  std::uint8_t qualifier = interrogation_qualifier;  // type 100

  bool is_float_type() const { return type != TypeId::interrogation; }
  friend bool operator==(const Asdu& a, const Asdu& b);
};

struct Apdu {
  Apci apci;
  std::optional<Asdu> asdu;
  friend bool operator==(const Apdu&, const Apdu&) = default;
};

/// Throws InvalidCombination when an ASDU rides on an S/U frame (or an
/// I-frame lacks one), Malformed on out-of-range fields.
Bytes encode_apdu(const Apci& apci, const std::optional<Asdu>& asdu);
inline Bytes encode_apdu(const Apdu& apdu) { return encode_apdu(apdu.apci, apdu.asdu); }

Apdu decode_apdu(std::span<const std::uint8_t> bytes);

constexpr std::uint16_t next_seq(std::uint16_t n) {
  return static_cast<std::uint16_t>((n + 1u) % seq_modulus);
}

const char* to_string(TypeId t);
const char* to_string(UFunction f);

}  // namespace iec104

namespace telnet {

inline constexpr std::size_t max_text = 4096;

enum class Kind : std::uint8_t { banner = 1, username = 2, password = 3, command = 4, output = 5 };

struct Message {
  Kind kind = Kind::banner;
  std::string text;
  friend bool operator==(const Message&, const Message&) = default;
};

Bytes encode(const Message& msg);
Message decode(std::span<const std::uint8_t> bytes);

bool is_login_phase(Kind k);

}  // namespace telnet

namespace transfer {

struct Chunk {
  std::string file_name;
  std::uint32_t offset = 0;
  Bytes data;
  bool last = false;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

inline constexpr std::size_t max_name = 255;
inline constexpr std::size_t max_data = 65535;

Bytes encode(const Chunk& chunk);
Chunk decode(std::span<const std::uint8_t> bytes);

}  // namespace transfer

namespace scan {

enum class Kind : std::uint8_t { probe, open, refused };

struct Message {
  Kind kind = Kind::probe;
  std::uint16_t port = 0;
  friend bool operator==(const Message&, const Message&) = default;
};

// ASCII framing: "PROBE <port>", "OPEN <port>", "REFUSED <port>".
Bytes encode(const Message& msg);
Message decode(std::span<const std::uint8_t> bytes);

}  // namespace scan

}  // namespace scadatwin
