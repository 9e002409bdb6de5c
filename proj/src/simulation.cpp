#include "scadatwin/simulation.hpp"

#include <algorithm>
#include <set>

#include "scadatwin/error.hpp"

namespace scadatwin::sim {

void SimulationInput::validate() const {
  topology.validate();
  sim.validate();
  grid.validate();
  schedule.validate();
  points.validate(grid);
  devices::validate_devices(devices, topology);

  std::set<std::string> rtu_hosts;
  for (const auto& d : devices)
    if (d.role == devices::Role::rtu) rtu_hosts.insert(d.host);
  for (const auto& p : points.entries)
    if (!rtu_hosts.count(p.rtu)) throw Error(ErrorCode::ConfigError, "data point on non-RTU host '" + p.rtu + "'");
  for (const auto& e : schedule.entries) {
    grid.asset(e.asset_id);
    if (!points.command_for(e.asset_id))
      throw Error(ErrorCode::ConfigError, "scheduled asset '" + e.asset_id + "' has no command data point");
  }
  for (const auto& [id, p] : initial_injections) grid.asset(id);
  for (const auto& p : power_points)
    if (p != devices::lv_busbar_point && p != devices::transformer_point) grid.asset(p);
  if (timing.ack_window < 1) throw Error(ErrorCode::ConfigError, "acknowledgement window must be at least 1");
  if (timing.response_delay_ms < 0 || timing.response_jitter_ms < 0)
    throw Error(ErrorCode::ConfigError, "negative device delay");
  if (!(timing.noise_half_width_kw >= 0)) throw Error(ErrorCode::ConfigError, "negative noise half-width");
  if (!(timing.interrogation_interval_s >= 0)) throw Error(ErrorCode::ConfigError, "negative interrogation interval");
  script.validate(topology);
}

struct World::Impl {
  SimulationInput in;
  net::EventQueue events;
  net::Network net;
  devices::Plant plant;
  std::vector<TruthEvent> truth;
  std::vector<capture::PowerRecord> power;
  Rng meter;
  devices::Context ctx;
  std::vector<std::unique_ptr<devices::Rtu>> rtus;
  std::unique_ptr<devices::Mtu> mtu;
  std::unique_ptr<devices::Hmi> hmi;
  std::unique_ptr<attack::Attacker> attacker;

  explicit Impl(const SimulationInput& input)
      : in(input),
        net(in.topology, in.sim, events),
        plant(in.grid, in.initial_injections),
        meter(in.sim.seed, "power-meter"),
        ctx{net, plant, in.points, in.schedule, in.timing, {}, {}} {
    const double duration = in.sim.duration_s;
    ctx.truth = [this, duration](TruthEvent e) {
      e.start = std::min(e.start, duration);
      e.end = std::clamp(e.end, e.start, duration);
      truth.push_back(std::move(e));
    };

    const devices::DeviceSpec* mtu_spec = nullptr;
    const devices::DeviceSpec* hmi_spec = nullptr;
    for (const auto& d : in.devices) {
      const net::HostSpec& host = *in.topology.host_by_id(d.host);
      if (d.role == devices::Role::rtu) rtus.push_back(std::make_unique<devices::Rtu>(d, host, ctx));
      if (d.role == devices::Role::mtu) mtu_spec = &d;
      if (d.role == devices::Role::hmi) hmi_spec = &d;
    }
    std::vector<const devices::Rtu*> stations;
    for (const auto& r : rtus) stations.push_back(r.get());
    const net::HostSpec& mtu_host = *in.topology.host_by_id(mtu_spec->host);
    mtu = std::make_unique<devices::Mtu>(*mtu_spec, mtu_host, ctx, stations);
    hmi = std::make_unique<devices::Hmi>(*hmi_spec, *in.topology.host_by_id(hmi_spec->host), ctx, mtu_host.address);
    attacker = std::make_unique<attack::Attacker>(in.script, net, ctx.truth);

    events.schedule(
        0,
        [this] {
          for (auto& r : rtus) r->start();
          mtu->start();
          hmi->start();
          attacker->start();
        },
        -1);
    const net::SimTime step = in.sim.step_ms();
    const net::SimTime end = in.sim.duration_ms();
    for (net::SimTime t = 0; t < end; t += step) events.schedule(t, [this, t] { grid_step(t); }, 0);
  }

  void grid_step(net::SimTime t) {
    const auto& state = plant.solve(net::to_seconds(t));
    const bool lab = in.sim.mode == net::Mode::lab;
    for (const auto& p : in.power_points) {
      double v = devices::point_value(state, p);
      if (lab && in.timing.noise_half_width_kw > 0)
        v += meter.uniform(-in.timing.noise_half_width_kw, in.timing.noise_half_width_kw);
      power.push_back({net::to_seconds(t), p, v});
    }
    for (auto& r : rtus) r->on_step(t);
    mtu->on_step(t);
    hmi->on_step(t);
  }
};

World::World(const SimulationInput& input) {
  input.validate();
  impl_ = std::make_unique<Impl>(input);
}

World::~World() = default;

void World::run_until(net::SimTime t) { impl_->events.run_until(t); }

void World::run() {
  run_until(impl_->in.sim.duration_ms());
  impl_->attacker->finish();
}

capture::RunOutputs World::outputs() const {
  capture::RunOutputs out;
  out.meta.scenario = impl_->in.scenario;
  out.meta.seed = impl_->in.sim.seed;
  out.meta.mode = impl_->in.sim.mode;
  out.meta.grid_step = impl_->in.sim.step_s;
  out.meta.duration = impl_->in.sim.duration_s;
  out.meta.repetition = impl_->in.repetition;
  out.meta.taps = impl_->net.tap_ids();
  for (const auto& tap : out.meta.taps) {
    auto& recs = out.captures[tap];
    for (const auto& f : impl_->net.tap_capture(tap)) recs.push_back(capture::to_record(f, tap));
  }
  out.power = impl_->power;
  out.truth = impl_->truth;
  std::stable_sort(out.truth.begin(), out.truth.end(),
                   [](const TruthEvent& a, const TruthEvent& b) { return a.start < b.start; });
  return out;
}

net::Network& World::network() { return impl_->net; }
devices::Plant& World::plant() { return impl_->plant; }
devices::Mtu& World::mtu() { return *impl_->mtu; }
devices::Hmi& World::hmi() { return *impl_->hmi; }
attack::Attacker& World::attacker() { return *impl_->attacker; }
const std::vector<TruthEvent>& World::truth() const { return impl_->truth; }

devices::Rtu& World::rtu(const std::string& host_id) {
  for (auto& r : impl_->rtus)
    if (r->host_id() == host_id) return *r;
  throw Error(ErrorCode::ConfigError, "no RTU on host '" + host_id + "'");
}

capture::RunOutputs run(const SimulationInput& input) {
  World w(input);
  w.run();
  return w.outputs();
}

}  // namespace scadatwin::sim
