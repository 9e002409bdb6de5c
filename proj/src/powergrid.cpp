#include "scadatwin/powergrid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <unordered_map>

#include "scadatwin/error.hpp"

namespace scadatwin::grid {

namespace {

using cplx = std::complex<double>;

struct Prepared {
  std::vector<std::string> order;          // BFS order, slack first
  std::unordered_map<std::string, std::size_t> index;
  std::vector<int> parent_branch;          // per bus in `order`, -1 for slack
  std::vector<std::size_t> parent_bus;     // per bus in `order`
  std::vector<cplx> z_pu;                  // per branch
};

Prepared prepare(const GridModel& m) {
  m.validate();
  Prepared p;
  std::unordered_map<std::string, std::vector<std::size_t>> children;
  for (std::size_t b = 0; b < m.branches.size(); ++b) children[m.branches[b].from_bus].push_back(b);

  std::unordered_map<std::string, double> kv;
  for (const auto& bus : m.buses) kv[bus.id] = bus.nominal_kv;

  p.order.push_back(m.slack_bus);
  p.index[m.slack_bus] = 0;
  p.parent_branch.push_back(-1);
  p.parent_bus.push_back(0);
  for (std::size_t i = 0; i < p.order.size(); ++i) {
    for (std::size_t b : children[p.order[i]]) {
      const auto& br = m.branches[b];
      p.index[br.to_bus] = p.order.size();
      p.order.push_back(br.to_bus);
      p.parent_branch.push_back(static_cast<int>(b));
      p.parent_bus.push_back(i);
    }
  }
  p.z_pu.resize(m.branches.size());
  for (std::size_t b = 0; b < m.branches.size(); ++b) {
    const auto& br = m.branches[b];
    const double zbase = kv[br.to_bus] * kv[br.to_bus] / m.base_mva;
    p.z_pu[b] = cplx(br.resistance, br.reactance) / zbase;
  }
  return p;
}

}  // namespace

void GridModel::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::MalformedModel, why); };
  if (base_mva <= 0) bad("base power must be positive");
  std::set<std::string> ids;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second) bad("duplicate bus id '" + b.id + "'");
    if (!(b.nominal_kv > 0)) bad("bus '" + b.id + "' needs a positive nominal voltage");
  }
  if (!ids.count(slack_bus)) bad("slack bus '" + slack_bus + "' does not exist");
  if (branches.size() + 1 != buses.size()) bad("branch count does not form a radial tree");

  std::set<std::string> has_parent;
  for (const auto& br : branches) {
    if (!ids.count(br.from_bus) || !ids.count(br.to_bus))
      bad("branch '" + br.id + "' references an unknown bus");
    if (br.to_bus == slack_bus) bad("branch '" + br.id + "' feeds the slack bus");
    if (!has_parent.insert(br.to_bus).second) bad("bus '" + br.to_bus + "' has more than one feeding branch");
    if (br.resistance < 0) bad("branch '" + br.id + "' has negative resistance");
  }
  // with n-1 branches, one parent per non-slack bus: check every bus reaches the slack
  std::unordered_map<std::string, std::string> parent;
  for (const auto& br : branches) parent[br.to_bus] = br.from_bus;
  for (const auto& b : buses) {
    std::string cur = b.id;
    for (std::size_t hops = 0; cur != slack_bus; ++hops) {
      if (hops > buses.size()) bad("network contains a loop");
      auto it = parent.find(cur);
      if (it == parent.end()) bad("bus '" + b.id + "' is disconnected from the slack");
      cur = it->second;
    }
  }

  std::set<std::string> asset_ids;
  for (const auto& a : assets) {
    if (!asset_ids.insert(a.id).second) bad("duplicate asset id '" + a.id + "'");
    if (!ids.count(a.bus)) bad("asset '" + a.id + "' references unknown bus '" + a.bus + "'");
    if (a.p_min > a.p_max) bad("asset '" + a.id + "' has p_min > p_max");
  }
}

const Asset& GridModel::asset(const std::string& id) const {
  auto it = std::find_if(assets.begin(), assets.end(), [&](const Asset& a) { return a.id == id; });
  if (it == assets.end()) throw Error(ErrorCode::UnknownAsset, "no asset '" + id + "'");
  return *it;
}

GridState solve_power_flow(const GridModel& model, const Injections& injections, double time, double tolerance,
                           int max_iterations) {
  const Prepared p = prepare(model);
  const std::size_t n = p.order.size();

  std::vector<double> p_inj(n, 0.0);  // p.u.
  for (const auto& [asset_id, kw] : injections) {
    const Asset& a = model.asset(asset_id);
    if (!std::isfinite(kw)) throw Error(ErrorCode::MalformedModel, "non-finite injection for '" + asset_id + "'");
    p_inj[p.index.at(a.bus)] += kw / 1000.0 / model.base_mva;
  }

  std::vector<cplx> v(n, cplx(1.0, 0.0));
  std::vector<cplx> i_branch(n, 0.0);  // current of the branch feeding bus k
  // iterate past the acceptance tolerance so the returned state sits well
  // inside it; the cap still bounds the work
  const double tight = tolerance * 1e-4;
  double update = 0.0;
  int it = 0;
  bool converged = false;
  for (it = 1; it <= max_iterations; ++it) {
    // backward sweep: BFS order reversed visits leaves first; the load
    // current at a bus is the negated injection current
    std::vector<cplx> acc(n, 0.0);
    for (std::size_t k = n; k-- > 1;) {
      acc[k] += -std::conj(cplx(p_inj[k], 0.0) / v[k]);
      acc[p.parent_bus[k]] += acc[k];
      i_branch[k] = acc[k];
    }
    update = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      const cplx vn = v[p.parent_bus[k]] - p.z_pu[static_cast<std::size_t>(p.parent_branch[k])] * i_branch[k];
      update = std::max(update, std::abs(vn - v[k]));
      v[k] = vn;
    }
    bool collapsed = false;
    for (const auto& x : v)
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag()) || std::abs(x) < 0.05) collapsed = true;
    if (collapsed) throw Error(ErrorCode::NoConvergence, "voltage collapse: loading exceeds transferable power");
    if (update < tight) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    if (update >= tolerance)
      throw Error(ErrorCode::NoConvergence, "power flow did not converge within " + std::to_string(max_iterations) +
                                                " iterations (last update " + std::to_string(update) + " p.u.)");
    it = max_iterations;
  }

  // final currents consistent with the returned voltages
  std::vector<cplx> acc(n, 0.0);
  for (std::size_t k = n; k-- > 1;) {
    acc[k] += -std::conj(cplx(p_inj[k], 0.0) / v[k]);
    acc[p.parent_bus[k]] += acc[k];
    i_branch[k] = acc[k];
  }

  const double kw = 1000.0 * model.base_mva;
  GridState s;
  s.time = time;
  s.iterations = it;
  for (std::size_t k = 0; k < n; ++k) s.bus_voltages[p.order[k]] = {std::abs(v[k]), std::arg(v[k])};
  for (const auto& a : model.assets) {
    auto f = injections.find(a.id);
    s.asset_powers[a.id] = f == injections.end() ? 0.0 : f->second;
  }
  cplx root_current = 0.0;
  for (std::size_t k = 1; k < n; ++k)
    if (p.parent_bus[k] == 0) root_current += i_branch[k];
  s.slack_p = (v[0] * std::conj(root_current)).real() * kw - p_inj[0] * kw;
  for (std::size_t k = 1; k < n; ++k) {
    const auto& z = p.z_pu[static_cast<std::size_t>(p.parent_branch[k])];
    s.losses += std::norm(i_branch[k]) * z.real() * kw;
  }

  s.transformer_loading = s.slack_p;
  s.lv_busbar_p = s.slack_p;
  for (std::size_t k = 1; k < n; ++k) {
    const auto& br = model.branches[static_cast<std::size_t>(p.parent_branch[k])];
    if (br.kind != BranchKind::transformer) continue;
    s.transformer_loading = (v[p.parent_bus[k]] * std::conj(i_branch[k])).real() * kw;
    s.lv_busbar_p = (v[k] * std::conj(i_branch[k])).real() * kw;
    break;
  }
  return s;
}

double apply_setpoint(const GridModel& model, const std::string& asset_id, double p_target) {
  const Asset& a = model.asset(asset_id);
  return std::clamp(p_target, a.p_min, a.p_max);
}

void SetpointSchedule::validate() const {
  std::map<std::string, double> last;
  double prev = -INFINITY;
  for (const auto& e : entries) {
    if (e.time < 0) throw Error(ErrorCode::ConfigError, "schedule entry with negative time");
    if (e.time < prev) throw Error(ErrorCode::ConfigError, "schedule entries out of time order");
    auto it = last.find(e.asset_id);
    if (it != last.end() && !(e.time > it->second))
      throw Error(ErrorCode::ConfigError, "schedule times for '" + e.asset_id + "' not strictly increasing");
    last[e.asset_id] = e.time;
    prev = e.time;
  }
  if (!(cadence > 0)) throw Error(ErrorCode::ConfigError, "schedule cadence must be positive");
}

std::vector<ScheduleEntry> SetpointSchedule::due(double t, double step) const {
  std::vector<ScheduleEntry> out;
  for (const auto& e : entries)
    if (e.time <= t && e.time > t - step) out.push_back(e);
  return out;
}

Injections schedule_injection(const SetpointSchedule& schedule, double t) {
  Injections out;
  for (const auto& e : schedule.entries) {
    out.try_emplace(e.asset_id, 0.0);
    if (e.time <= t) out[e.asset_id] = e.p_target;
  }
  return out;
}

SetpointSchedule cyclic_schedule(const std::string& asset_id, const std::vector<double>& values, double cadence,
                                 double duration) {
  SetpointSchedule s;
  s.cadence = cadence;
  if (values.empty()) throw Error(ErrorCode::ConfigError, "cyclic schedule for " + asset_id + " has no values");
  if (!(cadence > 0)) throw Error(ErrorCode::ConfigError, "cyclic schedule cadence must be positive");
  std::size_t i = 0;
  for (double t = 0.0; t < duration; t += cadence, ++i) s.entries.push_back({t, asset_id, values[i % values.size()]});
  return s;
}

const char* to_string(AssetKind k) {
  switch (k) {
    case AssetKind::bss: return "bss";
    case AssetKind::pv: return "pv";
    case AssetKind::load: return "load";
  }
  return "?";
}

const char* to_string(BranchKind k) { return k == BranchKind::line ? "line" : "transformer"; }

AssetKind asset_kind_from(const std::string& s) {
  if (s == "bss") return AssetKind::bss;
  if (s == "pv") return AssetKind::pv;
  if (s == "load") return AssetKind::load;
  throw Error(ErrorCode::ConfigError, "unknown asset kind '" + s + "'");
}

BranchKind branch_kind_from(const std::string& s) {
  if (s == "line") return BranchKind::line;
  if (s == "transformer") return BranchKind::transformer;
  throw Error(ErrorCode::ConfigError, "unknown branch kind '" + s + "'");
}

}  // namespace scadatwin::grid
