#include <doctest.h>

#include <functional>
#include <optional>

#include <cmath>
#include <cstring>

#include "scadatwin/error.hpp"
#include "scadatwin/protocol.hpp"
#include "scadatwin/rng.hpp"

using namespace scadatwin;
using namespace scadatwin::iec104;

namespace {

// Independent byte builder following the published APDU layout.
Bytes oracle_encode(const Apci& apci, const std::optional<Asdu>& asdu) {
  Bytes body;
  switch (apci.kind) {
    case FrameKind::I:
      body = {static_cast<std::uint8_t>((apci.send_seq << 1) & 0xFF), static_cast<std::uint8_t>(apci.send_seq >> 7),
              static_cast<std::uint8_t>((apci.recv_seq << 1) & 0xFF), static_cast<std::uint8_t>(apci.recv_seq >> 7)};
      break;
    case FrameKind::S:
      body = {0x01, 0x00, static_cast<std::uint8_t>((apci.recv_seq << 1) & 0xFF),
              static_cast<std::uint8_t>(apci.recv_seq >> 7)};
      break;
    case FrameKind::U: {
      const std::uint8_t codes[] = {0x07, 0x0B, 0x43, 0x83};
      body = {codes[static_cast<int>(apci.u_function)], 0, 0, 0};
      break;
    }
  }
  if (asdu) {
    body.push_back(static_cast<std::uint8_t>(asdu->type));
    body.push_back(0x01);
    body.push_back(static_cast<std::uint8_t>(asdu->cot));
    body.push_back(0x00);
    body.push_back(asdu->common_address & 0xFF);
    body.push_back(asdu->common_address >> 8);
    body.push_back(asdu->ioa & 0xFF);
    body.push_back((asdu->ioa >> 8) & 0xFF);
    body.push_back((asdu->ioa >> 16) & 0xFF);
    if (asdu->type == TypeId::interrogation) {
      body.push_back(asdu->qualifier);
    } else {
      std::uint32_t bits;
      std::memcpy(&bits, &asdu->value, 4);
      for (int i = 0; i < 4; ++i) body.push_back((bits >> (8 * i)) & 0xFF);
      body.push_back(0x00);
    }
  }
  Bytes out{0x68, static_cast<std::uint8_t>(body.size())};
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Apdu random_apdu(Rng& rng) {
  Apdu a;
  const auto kind = rng.uniform_int(0, 2);
  if (kind == 0) {
    a.apci = Apci::i_frame(static_cast<std::uint16_t>(rng.uniform_int(0, 32767)),
                           static_cast<std::uint16_t>(rng.uniform_int(0, 32767)));
    Asdu s;
    const TypeId types[] = {TypeId::measured_float, TypeId::setpoint_float, TypeId::interrogation};
    const Cot cots[] = {Cot::spontaneous, Cot::activation, Cot::activation_con, Cot::termination, Cot::unknown_ioa};
    s.type = types[rng.uniform_int(0, 2)];
    s.cot = cots[rng.uniform_int(0, 4)];
    s.common_address = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
    s.ioa = static_cast<std::uint32_t>(rng.uniform_int(0, (1 << 24) - 1));
    if (s.type == TypeId::interrogation)
      s.qualifier = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    else
      s.value = static_cast<float>(rng.uniform(-1e6, 1e6));
    a.asdu = s;
  } else if (kind == 1) {
    a.apci = Apci::s_frame(static_cast<std::uint16_t>(rng.uniform_int(0, 32767)));
  } else {
    a.apci = Apci::u_frame(static_cast<UFunction>(rng.uniform_int(0, 3)));
  }
  return a;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("startdt_act encodes to the fixed byte sequence") {
    CHECK(encode_apdu(Apci::u_frame(UFunction::startdt_act), std::nullopt) == Bytes{0x68, 0x04, 0x07, 0x00, 0x00, 0x00});
  }

  TEST_CASE("setpoint I-frame matches hand encoding") {
    Asdu s;
    s.type = TypeId::setpoint_float;
    s.cot = Cot::activation;
    s.common_address = 1;
    s.ioa = 100;
    s.value = 10.0f;
    const Bytes expected{0x68, 0x12, 0x02, 0x00, 0x00, 0x00, 0x32, 0x01, 0x06, 0x00,
                         0x01, 0x00, 0x64, 0x00, 0x00, 0x00, 0x00, 0x20, 0x41, 0x00};
    CHECK(encode_apdu(Apci::i_frame(1, 0), s) == expected);
  }

  TEST_CASE("random APDUs round-trip and match the layout oracle") {
    Rng rng(2024, "apdu-roundtrip");
    for (int i = 0; i < 10000; ++i) {
      const Apdu a = random_apdu(rng);
      const Bytes wire = encode_apdu(a);
      REQUIRE(wire == oracle_encode(a.apci, a.asdu));
      REQUIRE(wire[1] == wire.size() - 2);
      REQUIRE(decode_apdu(wire) == a);
    }
  }

  TEST_CASE("ASDU on S or U frame is an invalid combination") {
    Asdu s;
    CHECK_THROWS_AS(encode_apdu(Apci::s_frame(0), s), Error);
    try {
      encode_apdu(Apci::u_frame(UFunction::testfr_act), s);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidCombination);
    }
    try {
      encode_apdu(Apci::i_frame(0, 0), std::nullopt);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidCombination);
    }
  }

  TEST_CASE("out-of-range fields are rejected") {
    Asdu s;
    s.ioa = 1u << 24;
    CHECK_THROWS_AS(encode_apdu(Apci::i_frame(0, 0), s), Error);
    s.ioa = 1;
    s.value = std::nanf("");
    CHECK_THROWS_AS(encode_apdu(Apci::i_frame(0, 0), s), Error);
    s.value = 1;
    CHECK_THROWS_AS(encode_apdu(Apci::i_frame(32768, 0), s), Error);
  }

  TEST_CASE("bad start byte and truncation are malformed") {
    auto code_of = [](const Bytes& b) {
      try {
        decode_apdu(b);
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::IoError;
    };
    CHECK(code_of({0x00, 0x04, 0x07, 0x00, 0x00, 0x00}) == ErrorCode::Malformed);
    Asdu s;
    s.type = TypeId::setpoint_float;
    Bytes wire = encode_apdu(Apci::i_frame(3, 4), s);
    wire.pop_back();
    CHECK(code_of(wire) == ErrorCode::Malformed);
    CHECK(code_of({}) == ErrorCode::Malformed);
    CHECK(code_of({0x68}) == ErrorCode::Malformed);
    CHECK(code_of({0x68, 0x04, 0x13, 0x00, 0x00, 0x00}) == ErrorCode::Malformed);
  }

  TEST_CASE("decoder is total over random bytes") {
    Rng rng(7, "fuzz");
    for (int i = 0; i < 10000; ++i) {
      Bytes b(static_cast<std::size_t>(rng.uniform_int(0, 30)));
      for (auto& x : b) x = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
      if (!b.empty() && rng.uniform01() < 0.5) b[0] = 0x68;
      if (b.size() > 1 && rng.uniform01() < 0.5) b[1] = static_cast<std::uint8_t>(b.size() - 2);
      try {
        const Apdu a = decode_apdu(b);
        CHECK(encode_apdu(a).size() == b.size());
      } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::Malformed);
      }
    }
  }

  TEST_CASE("sequence numbers wrap at 15 bits") {
    CHECK(next_seq(0) == 1);
    CHECK(next_seq(32767) == 0);
    CHECK(next_seq(next_seq(32766)) == 0);
  }

  TEST_CASE("telnet framing") {
    const telnet::Message cmd{telnet::Kind::command, "tail /data/sensor.log"};
    CHECK(telnet::decode(telnet::encode(cmd)) == cmd);
    const telnet::Message banner{telnet::Kind::banner, "rtu1 login:"};
    CHECK(telnet::decode(telnet::encode(banner)).kind == telnet::Kind::banner);
    Bytes bad = telnet::encode(cmd);
    bad[0] = 0xFF;
    CHECK_THROWS_AS(telnet::decode(bad), Error);
    Bytes shortened = telnet::encode(cmd);
    shortened.pop_back();
    CHECK_THROWS_AS(telnet::decode(shortened), Error);
    CHECK_THROWS_AS(telnet::encode({telnet::Kind::output, std::string(telnet::max_text + 1, 'x')}), Error);
    CHECK(telnet::is_login_phase(telnet::Kind::password));
    CHECK_FALSE(telnet::is_login_phase(telnet::Kind::command));
  }

  TEST_CASE("transfer chunks round-trip") {
    transfer::Chunk c{"/tmp/agent.bin", 1024, Bytes(100, 0xAB), true};
    CHECK(transfer::decode(transfer::encode(c)) == c);
    Bytes wire = transfer::encode(c);
    wire.resize(wire.size() - 1);
    CHECK_THROWS_AS(transfer::decode(wire), Error);
    CHECK_THROWS_AS(transfer::encode({"", 0, {}, false}), Error);
  }

  TEST_CASE("scan probes are ASCII") {
    const scan::Message m{scan::Kind::probe, 2404};
    CHECK(to_text(scan::encode(m)) == "PROBE 2404");
    CHECK(scan::decode(scan::encode(m)) == m);
    CHECK(scan::decode(to_bytes("REFUSED 23")) == scan::Message{scan::Kind::refused, 23});
    CHECK_THROWS_AS(scan::decode(to_bytes("PROBE 70000")), Error);
    CHECK_THROWS_AS(scan::decode(to_bytes("PING 23")), Error);
  }
}
