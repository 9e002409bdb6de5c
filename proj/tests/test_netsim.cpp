#include <doctest.h>

#include <algorithm>
#include <functional>
#include <optional>

#include "scadatwin/error.hpp"
#include "scadatwin/netsim.hpp"

using namespace scadatwin;
using namespace scadatwin::net;

namespace {

Topology line_topology(SimTime latency = 1, SimTime jitter = 0) {
  Topology t;
  t.hosts = {{"a", "10.0.0.1", ""}, {"b", "10.0.0.2", ""}};
  t.switches = {"sw"};
  t.links = {{"a", "sw", latency, jitter}, {"sw", "b", latency, jitter}};
  t.taps = {{"tap_b", "sw", "b"}, {"tap_a", "a", "sw"}};
  return t;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

struct Bench {
  EventQueue events;
  Network net;
  std::vector<Frame> server_got;
  explicit Bench(Topology t, SimConfig c = {}) : net(std::move(t), c, events) {
    net.listen("10.0.0.2", 2404, [this](ConnId, const Endpoint&) {
      return [this](ConnId, const Frame& f) { server_got.push_back(f); };
    });
  }
};

}  // namespace

TEST_SUITE("netsim") {
  TEST_CASE("event queue orders by time, priority, then insertion") {
    EventQueue q;
    std::vector<int> order;
    q.schedule(5, [&] { order.push_back(3); });
    q.schedule(5, [&] { order.push_back(4); });
    q.schedule(5, [&] { order.push_back(2); }, 0);
    q.schedule(1, [&] { order.push_back(1); });
    q.schedule(9, [&] { order.push_back(9); });
    q.run_until(9);
    CHECK(order == std::vector<int>{1, 2, 3, 4});
    CHECK_FALSE(q.empty());
    q.run_until(10);
    CHECK(order.back() == 9);
  }

  TEST_CASE("handshake is three frames and sends arrive with fixed latency") {
    Bench b(line_topology(1));
    b.events.schedule(1000, [&] {
      const ConnId c = b.net.open_connection("10.0.0.1", "10.0.0.2", 2404, [](ConnId, const Frame&) {});
      const Frame f = b.net.send(c, "10.0.0.1", Protocol::iec104, Bytes{1, 2, 3});
      CHECK(f.delivered_at - f.sent_at == 2);
    });
    b.events.run_until(5000);
    const auto cap = b.net.tap_capture("tap_b");
    REQUIRE(cap.size() == 4);
    CHECK(to_text(cap[0].payload) == syn_payload);
    CHECK(to_text(cap[1].payload) == synack_payload);
    CHECK(to_text(cap[2].payload) == ack_payload);
    REQUIRE(b.server_got.size() == 1);
    CHECK(b.server_got[0].payload == Bytes{1, 2, 3});
  }

  TEST_CASE("in-order delivery under lab jitter") {
    SimConfig c;
    c.mode = Mode::lab;
    c.seed = 5;
    Bench b(line_topology(3, 3), c);
    b.events.schedule(0, [&] {
      const ConnId id = b.net.open_connection("10.0.0.1", "10.0.0.2", 2404, [](ConnId, const Frame&) {});
      for (std::uint8_t i = 0; i < 50; ++i) b.net.send(id, "10.0.0.1", Protocol::iec104, Bytes{i});
    });
    b.events.run_until(10000);
    REQUIRE(b.server_got.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) CHECK(b.server_got[i].payload[0] == i);
    for (std::size_t i = 1; i < 50; ++i) CHECK(b.server_got[i].delivered_at >= b.server_got[i - 1].delivered_at);
  }

  TEST_CASE("refused, unreachable and closed connections") {
    Bench b(line_topology());
    b.events.schedule(0, [&] {
      CHECK(code_of([&] { b.net.open_connection("10.0.0.1", "10.0.0.2", 23, {}); }) == ErrorCode::Refused);
      CHECK(code_of([&] { b.net.open_connection("10.0.0.1", "10.9.9.9", 23, {}); }) == ErrorCode::Unreachable);
      const ConnId c = b.net.open_connection("10.0.0.1", "10.0.0.2", 2404, [](ConnId, const Frame&) {});
      b.net.close(c, "10.0.0.1");
      CHECK(b.net.state(c) == ConnState::closed);
      CHECK(code_of([&] { b.net.send(c, "10.0.0.1", Protocol::iec104, {}); }) == ErrorCode::ConnectionClosed);
    });
    b.events.run_until(100);
    const auto cap = b.net.tap_capture("tap_b");
    // refused attempt: SYN out, RST back from the closed port
    REQUIRE(cap.size() >= 2);
    CHECK(to_text(cap[0].payload) == syn_payload);
    const auto rst = std::find_if(cap.begin(), cap.end(), [](const Frame& f) { return to_text(f.payload) == rst_payload; });
    REQUIRE(rst != cap.end());
    CHECK(rst->src_addr == "10.0.0.2");
    CHECK(rst->dst_port == cap[0].src_port);
    CHECK(code_of([&] { b.net.tap_capture("nope"); }) == ErrorCode::UnknownTap);
  }

  TEST_CASE("datagrams and unknown destinations") {
    Bench b(line_topology());
    std::vector<Frame> got;
    b.net.set_datagram_handler("10.0.0.2", [&](const Frame& f) { got.push_back(f); });
    b.events.schedule(0, [&] {
      b.net.send_datagram("10.0.0.1", "10.0.0.2", 40000, 23, Protocol::scan, to_bytes("PROBE 23"));
      b.net.send_datagram("10.0.0.1", "10.0.0.77", 40001, 23, Protocol::scan, to_bytes("PROBE 23"));
    });
    b.events.run_until(100);
    CHECK(got.size() == 1);
    CHECK(b.net.tap_capture("tap_a").size() == 2);
    CHECK(b.net.tap_capture("tap_b").size() == 1);
  }

  TEST_CASE("topology validation") {
    Topology dup = line_topology();
    dup.hosts[1].address = dup.hosts[0].address;
    CHECK(code_of([&] { dup.validate(); }) == ErrorCode::ConfigError);
    Topology dangling = line_topology();
    dangling.links.push_back({"a", "ghost", 1, 0});
    CHECK(code_of([&] { dangling.validate(); }) == ErrorCode::ConfigError);
    Topology bad_tap = line_topology();
    bad_tap.taps.push_back({"t", "a", "b"});
    CHECK(code_of([&] { bad_tap.validate(); }) == ErrorCode::ConfigError);
    Topology split = line_topology();
    split.hosts.push_back({"c", "10.0.0.3", ""});
    CHECK(code_of([&] { split.validate(); }) == ErrorCode::ConfigError);
    SimConfig c;
    c.step_s = 0;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::ConfigError);
  }

  TEST_CASE("identical seeds give identical captures, twin differs from lab") {
    auto run = [](Mode m) {
      SimConfig c;
      c.mode = m;
      Bench b(line_topology(2, 2), c);
      b.events.schedule(0, [&] {
        const ConnId id = b.net.open_connection("10.0.0.1", "10.0.0.2", 2404, [](ConnId, const Frame&) {});
        for (int i = 0; i < 20; ++i)
          b.events.schedule(i * 10, [&b, id] { b.net.send(id, "10.0.0.1", Protocol::iec104, Bytes{7}); });
      });
      b.events.run_until(1000);
      std::vector<SimTime> t;
      for (const auto& f : b.net.tap_capture("tap_b")) t.push_back(f.delivered_at);
      return t;
    };
    CHECK(run(Mode::lab) == run(Mode::lab));
    CHECK(run(Mode::twin) != run(Mode::lab));
  }
}
