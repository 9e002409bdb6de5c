#include "scadatwin/protocol.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

#include "scadatwin/error.hpp"

namespace scadatwin {

namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::Malformed, why); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | b_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u24() {
    need(3);
    std::uint32_t v = b_[pos_] | b_[pos_ + 1] << 8 | static_cast<std::uint32_t>(b_[pos_ + 2]) << 16;
    pos_ += 3;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | b_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void finish() const {
    if (pos_ != b_.size()) malformed("trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) malformed("truncated input");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

namespace iec104 {

namespace {

constexpr std::uint8_t u_code(UFunction f) {
  switch (f) {
    case UFunction::startdt_act: return 0x07;
    case UFunction::startdt_con: return 0x0B;
    case UFunction::testfr_act: return 0x43;
    case UFunction::testfr_con: return 0x83;
  }
  return 0;
}

bool valid_type(std::uint8_t t) { return t == 13 || t == 50 || t == 100; }
bool valid_cot(std::uint8_t c) { return c == 3 || c == 6 || c == 7 || c == 10 || c == 47; }

}  // namespace

bool operator==(const Apci& a, const Apci& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case FrameKind::I: return a.send_seq == b.send_seq && a.recv_seq == b.recv_seq;
    case FrameKind::S: return a.recv_seq == b.recv_seq;
    case FrameKind::U: return a.u_function == b.u_function;
  }
  return false;
}

bool operator==(const Asdu& a, const Asdu& b) {
  if (a.type != b.type || a.cot != b.cot || a.common_address != b.common_address || a.ioa != b.ioa)
    return false;
  if (a.is_float_type()) return std::bit_cast<std::uint32_t>(a.value) == std::bit_cast<std::uint32_t>(b.value);
  return a.qualifier == b.qualifier;
}

Bytes encode_apdu(const Apci& apci, const std::optional<Asdu>& asdu) {
  if ((apci.kind == FrameKind::I) != asdu.has_value())
    throw Error(ErrorCode::InvalidCombination,
                apci.kind == FrameKind::I ? "I-frame requires an ASDU" : "S/U frame cannot carry an ASDU");

  Bytes out{start_byte, 0};
  switch (apci.kind) {
    case FrameKind::I:
      if (apci.send_seq >= seq_modulus || apci.recv_seq >= seq_modulus) malformed("sequence number exceeds 15 bits");
      put16(out, static_cast<std::uint16_t>(apci.send_seq << 1));
      put16(out, static_cast<std::uint16_t>(apci.recv_seq << 1));
      break;
    case FrameKind::S:
      if (apci.recv_seq >= seq_modulus) malformed("sequence number exceeds 15 bits");
      out.insert(out.end(), {0x01, 0x00});
      put16(out, static_cast<std::uint16_t>(apci.recv_seq << 1));
      break;
    case FrameKind::U:
      out.insert(out.end(), {u_code(apci.u_function), 0x00, 0x00, 0x00});
      break;
  }

  if (asdu) {
    const Asdu& a = *asdu;
    if (a.ioa >= (1u << 24)) malformed("IOA exceeds 24 bits");
    if (a.is_float_type() && !std::isfinite(a.value)) malformed("non-finite float value");
    if (!valid_type(static_cast<std::uint8_t>(a.type))) malformed("type id outside subset");
    if (!valid_cot(static_cast<std::uint8_t>(a.cot))) malformed("cause of transmission outside subset");
    out.push_back(static_cast<std::uint8_t>(a.type));
    out.push_back(0x01);  // VSQ: one object
    out.push_back(static_cast<std::uint8_t>(a.cot));
    out.push_back(0x00);  // originator address
    put16(out, a.common_address);
    out.push_back(static_cast<std::uint8_t>(a.ioa & 0xff));
    out.push_back(static_cast<std::uint8_t>(a.ioa >> 8 & 0xff));
    out.push_back(static_cast<std::uint8_t>(a.ioa >> 16 & 0xff));
    if (a.is_float_type()) {
      put32(out, std::bit_cast<std::uint32_t>(a.value));
      out.push_back(0x00);  // QOS / QDS
    } else {
      out.push_back(a.qualifier);
    }
  }
  out[1] = static_cast<std::uint8_t>(out.size() - 2);
  return out;
}

Apdu decode_apdu(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.u8() != start_byte) malformed("bad start byte");
  const std::uint8_t len = r.u8();
  if (len < 4) malformed("length octet below control field size");
  if (bytes.size() != static_cast<std::size_t>(len) + 2) malformed("length octet does not match frame size");

  Apdu apdu;
  const std::uint8_t c1 = r.u8();
  const std::uint8_t c2 = r.u8();
  const std::uint16_t c34 = r.u16();
  if ((c1 & 0x01) == 0) {
    apdu.apci = Apci::i_frame(static_cast<std::uint16_t>((c1 | c2 << 8) >> 1), static_cast<std::uint16_t>(c34 >> 1));
    if (c34 & 0x01) malformed("I-frame receive field low bit set");
  } else if (c1 == 0x01) {
    if (c2 != 0 || (c34 & 0x01)) malformed("bad S-frame control field");
    apdu.apci = Apci::s_frame(static_cast<std::uint16_t>(c34 >> 1));
  } else {
    if (c2 != 0 || c34 != 0) malformed("bad U-frame control field");
    switch (c1) {
      case 0x07: apdu.apci = Apci::u_frame(UFunction::startdt_act); break;
      case 0x0B: apdu.apci = Apci::u_frame(UFunction::startdt_con); break;
      case 0x43: apdu.apci = Apci::u_frame(UFunction::testfr_act); break;
      case 0x83: apdu.apci = Apci::u_frame(UFunction::testfr_con); break;
      default: malformed("unsupported U-frame function");
    }
  }

  if (apdu.apci.kind != FrameKind::I) {
    r.finish();
    return apdu;
  }

  Asdu a;
  const std::uint8_t type = r.u8();
  if (!valid_type(type)) malformed("type id outside subset");
  a.type = static_cast<TypeId>(type);
  if (r.u8() != 0x01) malformed("unsupported variable structure qualifier");
  const std::uint8_t cot = r.u8();
  if (!valid_cot(cot)) malformed("cause of transmission outside subset");
  a.cot = static_cast<Cot>(cot);
  if (r.u8() != 0x00) malformed("nonzero originator address");
  a.common_address = r.u16();
  a.ioa = r.u24();
  if (a.is_float_type()) {
    a.value = std::bit_cast<float>(r.u32());
    if (!std::isfinite(a.value)) malformed("non-finite float value");
    if (r.u8() != 0x00) malformed("nonzero quality descriptor");
  } else {
    a.qualifier = r.u8();
  }
  r.finish();
  apdu.asdu = a;
  return apdu;
}

const char* to_string(TypeId t) {
  switch (t) {
    case TypeId::measured_float: return "M_ME_NC_1";
    case TypeId::setpoint_float: return "C_SE_NC_1";
    case TypeId::interrogation: return "C_IC_NA_1";
  }
  return "?";
}

const char* to_string(UFunction f) {
  switch (f) {
    case UFunction::startdt_act: return "STARTDT_ACT";
    case UFunction::startdt_con: return "STARTDT_CON";
    case UFunction::testfr_act: return "TESTFR_ACT";
    case UFunction::testfr_con: return "TESTFR_CON";
  }
  return "?";
}

}  // namespace iec104

namespace telnet {

Bytes encode(const Message& msg) {
  if (msg.text.size() > max_text) malformed("telnet text exceeds 4096 bytes");
  Bytes out;
  out.reserve(3 + msg.text.size());
  out.push_back(static_cast<std::uint8_t>(msg.kind));
  put16(out, static_cast<std::uint16_t>(msg.text.size()));
  out.insert(out.end(), msg.text.begin(), msg.text.end());
  return out;
}

Message decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint8_t tag = r.u8();
  if (tag < 1 || tag > 5) malformed("unknown telnet message tag");
  const std::uint16_t len = r.u16();
  if (len > max_text) malformed("telnet text exceeds 4096 bytes");
  Message m{static_cast<Kind>(tag), to_text(r.take(len))};
  r.finish();
  return m;
}

bool is_login_phase(Kind k) { return k == Kind::banner || k == Kind::username || k == Kind::password; }

}  // namespace telnet

namespace transfer {

Bytes encode(const Chunk& chunk) {
  if (chunk.file_name.empty() || chunk.file_name.size() > max_name) malformed("file name length out of range");
  if (chunk.data.size() > max_data) malformed("chunk data too large");
  Bytes out;
  out.push_back(static_cast<std::uint8_t>(chunk.file_name.size()));
  out.insert(out.end(), chunk.file_name.begin(), chunk.file_name.end());
  put32(out, chunk.offset);
  put16(out, static_cast<std::uint16_t>(chunk.data.size()));
  out.insert(out.end(), chunk.data.begin(), chunk.data.end());
  out.push_back(chunk.last ? 1 : 0);
  return out;
}

Chunk decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Chunk c;
  const std::uint8_t name_len = r.u8();
  if (name_len == 0) malformed("empty file name");
  c.file_name = to_text(r.take(name_len));
  c.offset = r.u32();
  const std::uint16_t n = r.u16();
  auto data = r.take(n);
  c.data.assign(data.begin(), data.end());
  const std::uint8_t last = r.u8();
  if (last > 1) malformed("bad last flag");
  c.last = last == 1;
  r.finish();
  return c;
}

}  // namespace transfer

namespace scan {

namespace {
constexpr std::string_view word(Kind k) {
  switch (k) {
    case Kind::probe: return "PROBE";
    case Kind::open: return "OPEN";
    case Kind::refused: return "REFUSED";
  }
  return "";
}
}  // namespace

Bytes encode(const Message& msg) {
  std::string s(word(msg.kind));
  s += ' ';
  s += std::to_string(msg.port);
  return to_bytes(s);
}

Message decode(std::span<const std::uint8_t> bytes) {
  const std::string s = to_text(bytes);
  const auto sp = s.find(' ');
  if (sp == std::string::npos) malformed("scan message lacks port");
  const std::string_view head(s.data(), sp);
  Message m;
  if (head == "PROBE") m.kind = Kind::probe;
  else if (head == "OPEN") m.kind = Kind::open;
  else if (head == "REFUSED") m.kind = Kind::refused;
  else malformed("unknown scan message kind");
  const char* first = s.data() + sp + 1;
  const char* last = s.data() + s.size();
  if (first == last || (*first == '0' && last - first > 1)) malformed("bad scan port");
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc{} || ptr != last || port > 65535) malformed("bad scan port");
  m.port = static_cast<std::uint16_t>(port);
  return m;
}

}  // namespace scan

}  // namespace scadatwin
