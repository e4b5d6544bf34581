#include "graphnlp/instances.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "graphnlp/errors.hpp"
#include "json.hpp"

namespace gnlp {
namespace {

using json = nlohmann::ordered_json;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ParseError(msg);
}

bool finite(double v) { return std::isfinite(v); }

std::string item(const char* kind, int i) {
  return std::string(kind) + " " + std::to_string(i + 1);
}

// ---- gas validation ----

std::unordered_map<std::string, int> junction_index(const GasInstance& inst) {
  std::unordered_map<std::string, int> idx;
  require(!inst.junctions.empty(), "gas instance needs at least one junction");
  for (int k = 0; k < static_cast<int>(inst.junctions.size()); ++k) {
    const GasJunction& j = inst.junctions[k];
    require(!j.id.empty(), item("junction", k) + ": empty id");
    require(idx.emplace(j.id, k).second,
            "duplicate junction id '" + j.id + "'");
    require(finite(j.rho_min) && finite(j.rho_max) && j.rho_min > 0.0 &&
                j.rho_min < j.rho_max,
            "junction '" + j.id +
                "': density bounds must satisfy 0 < rho_min < rho_max");
  }
  return idx;
}

int junction_at(const std::unordered_map<std::string, int>& idx,
                const std::string& id, const std::string& where) {
  auto it = idx.find(id);
  require(it != idx.end(), where + ": unknown junction '" + id + "'");
  return it->second;
}

void validate(const GasInstance& inst) {
  const auto idx = junction_index(inst);
  require(finite(inst.gamma) && inst.gamma >= 0.0,
          "gamma must be nonnegative");
  require(finite(inst.w_a) && inst.w_a > 0.0, "w_a must be positive");
  require(finite(inst.kappa) && inst.kappa > 0.0, "kappa must be positive");
  require(finite(inst.dt) && inst.dt > 0.0, "dt must be positive");

  const int nj = static_cast<int>(inst.junctions.size());
  std::vector<std::vector<int>> adj(nj);
  std::vector<bool> attached(nj, false);
  auto connect = [&](int a, int b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
    attached[a] = attached[b] = true;
  };

  for (int p = 0; p < static_cast<int>(inst.pipes.size()); ++p) {
    const GasPipe& pipe = inst.pipes[p];
    const std::string where = item("pipe", p);
    const int a = junction_at(idx, pipe.from, where);
    const int b = junction_at(idx, pipe.to, where);
    require(a != b, where + ": endpoints must differ");
    require(finite(pipe.length) && pipe.length > 0.0,
            where + ": length must be positive");
    require(finite(pipe.diameter) && pipe.diameter > 0.0,
            where + ": diameter must be positive");
    require(finite(pipe.friction) && pipe.friction > 0.0,
            where + ": friction must be positive");
    require(finite(pipe.area) && pipe.area > 0.0,
            where + ": area must be positive");
    require(finite(pipe.effective_length) && pipe.effective_length > 0.0,
            where + ": effective_length must be positive");
    connect(a, b);
  }
  for (int c = 0; c < static_cast<int>(inst.compressors.size()); ++c) {
    const GasCompressor& comp = inst.compressors[c];
    const std::string where = item("compressor", c);
    const int a = junction_at(idx, comp.from, where);
    const int b = junction_at(idx, comp.to, where);
    require(a != b, where + ": endpoints must differ");
    require(finite(comp.power_max) && comp.power_max > 0.0,
            where + ": power_max must be positive");
    require(finite(comp.flow_max) && comp.flow_max > 0.0,
            where + ": flow_max must be positive");
    require(finite(comp.boost_min) && finite(comp.boost_max) &&
                comp.boost_min >= 1.0 && comp.boost_min < comp.boost_max,
            where + ": boost bounds must satisfy 1 <= boost_min < boost_max");
    connect(a, b);
  }

  auto check_price = [&](const GasPrice& p, const std::string& where) {
    require(finite(p.base) && finite(p.amplitude) && finite(p.phase),
            where + ": price fields must be finite");
  };
  for (int r = 0; r < static_cast<int>(inst.receipts.size()); ++r) {
    const GasReceipt& rec = inst.receipts[r];
    const std::string where = item("receipt", r);
    attached[junction_at(idx, rec.junction, where)] = true;
    require(finite(rec.supply_max) && rec.supply_max > 0.0,
            where + ": supply_max must be positive");
    check_price(rec.price, where);
  }
  for (int d = 0; d < static_cast<int>(inst.transfers.size()); ++d) {
    const GasTransfer& tr = inst.transfers[d];
    const std::string where = item("transfer", d);
    attached[junction_at(idx, tr.junction, where)] = true;
    require(finite(tr.demand_min) && finite(tr.demand_max) &&
                tr.demand_min < tr.demand_max,
            where + ": demand bounds must satisfy demand_min < demand_max");
    check_price(tr.price, where);
  }

  for (int k = 0; k < nj; ++k)
    require(attached[k], "junction '" + inst.junctions[k].id +
                             "' has no attached pipe, compressor, receipt or "
                             "transfer");

  // breadth-first sweep over pipes and compressors
  std::vector<bool> seen(nj, false);
  std::vector<int> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    const int u = queue.back();
    queue.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
  }
  for (int k = 0; k < nj; ++k)
    require(nj == 1 || seen[k],
            "gas network is not connected: junction '" +
                inst.junctions[k].id + "' is unreachable from '" +
                inst.junctions[0].id + "'");
}

// ---- power validation ----

std::unordered_map<std::string, int> bus_index(const PowerInstance& inst) {
  std::unordered_map<std::string, int> idx;
  require(!inst.buses.empty(), "power instance needs at least one bus");
  for (int k = 0; k < static_cast<int>(inst.buses.size()); ++k) {
    const PowerBus& b = inst.buses[k];
    require(!b.id.empty(), item("bus", k) + ": empty id");
    require(idx.emplace(b.id, k).second, "duplicate bus id '" + b.id + "'");
    require(finite(b.vmin) && finite(b.vmax) && b.vmin > 0.0 &&
                b.vmin < b.vmax,
            "bus '" + b.id + "': voltage bounds must satisfy 0 < vmin < vmax");
  }
  return idx;
}

int bus_at(const std::unordered_map<std::string, int>& idx,
           const std::string& id, const std::string& where) {
  auto it = idx.find(id);
  require(it != idx.end(), where + ": unknown bus '" + id + "'");
  return it->second;
}

void validate(const PowerInstance& inst) {
  const auto idx = bus_index(inst);
  require(finite(inst.dt) && inst.dt > 0.0, "dt must be positive");
  require(finite(inst.storage_penalty) && inst.storage_penalty >= 0.0,
          "storage_penalty must be nonnegative");
  require(finite(inst.profile_amplitude) &&
              std::abs(inst.profile_amplitude) < 1.0,
          "profile_amplitude must lie in (-1, 1)");
  require(finite(inst.profile_phase), "profile_phase must be finite");

  int refs = 0;
  for (const PowerBus& b : inst.buses) refs += b.reference ? 1 : 0;
  require(refs == 1, "power instance needs exactly one reference bus, found " +
                         std::to_string(refs));

  std::vector<bool> attached(inst.buses.size(), false);
  require(!inst.generators.empty(),
          "power instance needs at least one generator");
  for (int k = 0; k < static_cast<int>(inst.generators.size()); ++k) {
    const PowerGenerator& gen = inst.generators[k];
    const std::string where = item("generator", k);
    attached[bus_at(idx, gen.bus, where)] = true;
    require(finite(gen.pmin) && finite(gen.pmax) && gen.pmin < gen.pmax,
            where + ": active-power bounds must satisfy pmin < pmax");
    require(finite(gen.qmin) && finite(gen.qmax) && gen.qmin < gen.qmax,
            where + ": reactive-power bounds must satisfy qmin < qmax");
    require(finite(gen.c0) && finite(gen.c1) && finite(gen.c2),
            where + ": cost coefficients must be finite");
  }
  for (int k = 0; k < static_cast<int>(inst.branches.size()); ++k) {
    const PowerBranch& br = inst.branches[k];
    const std::string where = item("branch", k);
    const int a = bus_at(idx, br.from, where);
    const int b = bus_at(idx, br.to, where);
    require(a != b, where + ": endpoints must differ");
    require(finite(br.r) && finite(br.x) && br.r >= 0.0 &&
                br.r * br.r + br.x * br.x > 0.0,
            where + ": series impedance must satisfy r >= 0, r^2 + x^2 > 0");
    require(finite(br.charging) && br.charging >= 0.0,
            where + ": charging must be nonnegative");
    require(finite(br.tap) && br.tap > 0.0, where + ": tap must be positive");
    require(finite(br.s_max) && br.s_max > 0.0,
            where + ": s_max must be positive");
    require(finite(br.angle_min) && finite(br.angle_max) &&
                br.angle_min < br.angle_max,
            where + ": angle bounds must satisfy angle_min < angle_max");
    attached[a] = attached[b] = true;
  }
  for (int k = 0; k < static_cast<int>(inst.storages.size()); ++k) {
    const PowerStorage& st = inst.storages[k];
    const std::string where = item("storage", k);
    attached[bus_at(idx, st.bus, where)] = true;
    require(finite(st.energy_max) && st.energy_max > 0.0,
            where + ": energy_max must be positive");
    require(finite(st.charge_max) && st.charge_max > 0.0,
            where + ": charge_max must be positive");
    require(finite(st.discharge_max) && st.discharge_max > 0.0,
            where + ": discharge_max must be positive");
    require(finite(st.power_max) && st.power_max > 0.0,
            where + ": power_max must be positive");
    require(finite(st.eta_c) && st.eta_c > 0.0 && st.eta_c <= 1.0 &&
                finite(st.eta_d) && st.eta_d > 0.0 && st.eta_d <= 1.0,
            where + ": efficiencies must lie in (0, 1]");
    require(finite(st.p_loss) && st.p_loss >= 0.0 && finite(st.q_loss) &&
                st.q_loss >= 0.0,
            where + ": standby losses must be nonnegative");
  }
  for (int k = 0; k < static_cast<int>(inst.loads.size()); ++k) {
    const PowerLoad& ld = inst.loads[k];
    const std::string where = item("load", k);
    attached[bus_at(idx, ld.bus, where)] = true;
    require(finite(ld.pd) && finite(ld.qd),
            where + ": demand must be finite");
  }
  for (int k = 0; k < static_cast<int>(inst.buses.size()); ++k)
    require(attached[k], "bus '" + inst.buses[k].id +
                             "' has no attached branch, generator, storage "
                             "or load");
}

// ---- JSON serialization ----
//
// Writers serialize structs verbatim (no validation), readers validate after
// parsing: tests can serialize deliberately broken instances and feed them
// back through the readers.

json price_to_json(const GasPrice& p) {
  json j;
  j["base"] = p.base;
  j["amplitude"] = p.amplitude;
  j["phase"] = p.phase;
  return j;
}

GasPrice price_from_json(const json& j) {
  GasPrice p;
  p.base = j.at("base").get<double>();
  p.amplitude = j.value("amplitude", 0.0);
  p.phase = j.value("phase", 0.0);
  return p;
}

json gas_to_json(const GasInstance& inst) {
  json j;
  j["format"] = "graphnlp-gas";
  j["version"] = 1;
  j["gamma"] = inst.gamma;
  j["w_a"] = inst.w_a;
  j["kappa"] = inst.kappa;
  j["dt"] = inst.dt;

  json junctions = json::array();
  for (const GasJunction& jc : inst.junctions)
    junctions.push_back(
        {{"id", jc.id}, {"rho_min", jc.rho_min}, {"rho_max", jc.rho_max}});
  j["junctions"] = std::move(junctions);

  json pipes = json::array();
  for (const GasPipe& p : inst.pipes)
    pipes.push_back({{"from", p.from},
                     {"to", p.to},
                     {"length", p.length},
                     {"diameter", p.diameter},
                     {"friction", p.friction},
                     {"area", p.area},
                     {"effective_length", p.effective_length}});
  j["pipes"] = std::move(pipes);

  json compressors = json::array();
  for (const GasCompressor& c : inst.compressors)
    compressors.push_back({{"from", c.from},
                           {"to", c.to},
                           {"power_max", c.power_max},
                           {"flow_max", c.flow_max},
                           {"boost_min", c.boost_min},
                           {"boost_max", c.boost_max}});
  j["compressors"] = std::move(compressors);

  json receipts = json::array();
  for (const GasReceipt& r : inst.receipts)
    receipts.push_back({{"junction", r.junction},
                        {"supply_max", r.supply_max},
                        {"price", price_to_json(r.price)}});
  j["receipts"] = std::move(receipts);

  json transfers = json::array();
  for (const GasTransfer& d : inst.transfers)
    transfers.push_back({{"junction", d.junction},
                         {"demand_min", d.demand_min},
                         {"demand_max", d.demand_max},
                         {"price", price_to_json(d.price)}});
  j["transfers"] = std::move(transfers);
  return j;
}

GasInstance gas_from_json(const json& j) {
  require(j.is_object() && j.value("format", "") == "graphnlp-gas",
          "not a graphnlp-gas document");
  require(j.value("version", 0) == 1, "unsupported instance version");
  GasInstance inst;
  inst.gamma = j.value("gamma", inst.gamma);
  inst.w_a = j.value("w_a", inst.w_a);
  inst.kappa = j.value("kappa", inst.kappa);
  inst.dt = j.value("dt", inst.dt);
  for (const json& e : j.at("junctions")) {
    GasJunction jc;
    jc.id = e.at("id").get<std::string>();
    jc.rho_min = e.at("rho_min").get<double>();
    jc.rho_max = e.at("rho_max").get<double>();
    inst.junctions.push_back(std::move(jc));
  }
  for (const json& e : j.value("pipes", json::array())) {
    GasPipe p;
    p.from = e.at("from").get<std::string>();
    p.to = e.at("to").get<std::string>();
    p.length = e.at("length").get<double>();
    p.diameter = e.at("diameter").get<double>();
    p.friction = e.at("friction").get<double>();
    p.area = e.value("area", 0.25 * std::numbers::pi * p.diameter * p.diameter);
    p.effective_length = e.value("effective_length", p.length);
    inst.pipes.push_back(std::move(p));
  }
  for (const json& e : j.value("compressors", json::array())) {
    GasCompressor c;
    c.from = e.at("from").get<std::string>();
    c.to = e.at("to").get<std::string>();
    c.power_max = e.at("power_max").get<double>();
    c.flow_max = e.at("flow_max").get<double>();
    c.boost_min = e.at("boost_min").get<double>();
    c.boost_max = e.at("boost_max").get<double>();
    inst.compressors.push_back(std::move(c));
  }
  for (const json& e : j.value("receipts", json::array())) {
    GasReceipt r;
    r.junction = e.at("junction").get<std::string>();
    r.supply_max = e.at("supply_max").get<double>();
    if (e.contains("price")) r.price = price_from_json(e.at("price"));
    inst.receipts.push_back(std::move(r));
  }
  for (const json& e : j.value("transfers", json::array())) {
    GasTransfer d;
    d.junction = e.at("junction").get<std::string>();
    d.demand_min = e.at("demand_min").get<double>();
    d.demand_max = e.at("demand_max").get<double>();
    if (e.contains("price")) d.price = price_from_json(e.at("price"));
    inst.transfers.push_back(std::move(d));
  }
  validate(inst);
  return inst;
}

json power_to_json(const PowerInstance& inst) {
  json j;
  j["format"] = "graphnlp-power";
  j["version"] = 1;
  j["dt"] = inst.dt;
  j["profile_amplitude"] = inst.profile_amplitude;
  j["profile_phase"] = inst.profile_phase;
  j["storage_penalty"] = inst.storage_penalty;

  json buses = json::array();
  for (const PowerBus& b : inst.buses)
    buses.push_back({{"id", b.id},
                     {"vmin", b.vmin},
                     {"vmax", b.vmax},
                     {"reference", b.reference}});
  j["buses"] = std::move(buses);

  json generators = json::array();
  for (const PowerGenerator& gen : inst.generators)
    generators.push_back({{"bus", gen.bus},
                          {"pmin", gen.pmin},
                          {"pmax", gen.pmax},
                          {"qmin", gen.qmin},
                          {"qmax", gen.qmax},
                          {"c0", gen.c0},
                          {"c1", gen.c1},
                          {"c2", gen.c2}});
  j["generators"] = std::move(generators);

  json branches = json::array();
  for (const PowerBranch& br : inst.branches)
    branches.push_back({{"from", br.from},
                        {"to", br.to},
                        {"r", br.r},
                        {"x", br.x},
                        {"charging", br.charging},
                        {"tap", br.tap},
                        {"s_max", br.s_max},
                        {"angle_min", br.angle_min},
                        {"angle_max", br.angle_max}});
  j["branches"] = std::move(branches);

  json storages = json::array();
  for (const PowerStorage& st : inst.storages)
    storages.push_back({{"bus", st.bus},
                        {"energy_max", st.energy_max},
                        {"charge_max", st.charge_max},
                        {"discharge_max", st.discharge_max},
                        {"power_max", st.power_max},
                        {"eta_c", st.eta_c},
                        {"eta_d", st.eta_d},
                        {"p_loss", st.p_loss},
                        {"q_loss", st.q_loss}});
  j["storages"] = std::move(storages);

  json loads = json::array();
  for (const PowerLoad& ld : inst.loads)
    loads.push_back({{"bus", ld.bus}, {"pd", ld.pd}, {"qd", ld.qd}});
  j["loads"] = std::move(loads);
  return j;
}

PowerInstance power_from_json(const json& j) {
  require(j.is_object() && j.value("format", "") == "graphnlp-power",
          "not a graphnlp-power document");
  require(j.value("version", 0) == 1, "unsupported instance version");
  PowerInstance inst;
  inst.dt = j.value("dt", inst.dt);
  inst.profile_amplitude = j.value("profile_amplitude", inst.profile_amplitude);
  inst.profile_phase = j.value("profile_phase", inst.profile_phase);
  inst.storage_penalty = j.value("storage_penalty", inst.storage_penalty);
  for (const json& e : j.at("buses")) {
    PowerBus b;
    b.id = e.at("id").get<std::string>();
    b.vmin = e.at("vmin").get<double>();
    b.vmax = e.at("vmax").get<double>();
    b.reference = e.value("reference", false);
    inst.buses.push_back(std::move(b));
  }
  for (const json& e : j.value("generators", json::array())) {
    PowerGenerator gen;
    gen.bus = e.at("bus").get<std::string>();
    gen.pmin = e.at("pmin").get<double>();
    gen.pmax = e.at("pmax").get<double>();
    gen.qmin = e.at("qmin").get<double>();
    gen.qmax = e.at("qmax").get<double>();
    gen.c0 = e.value("c0", 0.0);
    gen.c1 = e.value("c1", 0.0);
    gen.c2 = e.value("c2", 0.0);
    inst.generators.push_back(std::move(gen));
  }
  for (const json& e : j.value("branches", json::array())) {
    PowerBranch br;
    br.from = e.at("from").get<std::string>();
    br.to = e.at("to").get<std::string>();
    br.r = e.at("r").get<double>();
    br.x = e.at("x").get<double>();
    br.charging = e.value("charging", 0.0);
    br.tap = e.value("tap", 1.0);
    br.s_max = e.at("s_max").get<double>();
    br.angle_min = e.at("angle_min").get<double>();
    br.angle_max = e.at("angle_max").get<double>();
    inst.branches.push_back(std::move(br));
  }
  for (const json& e : j.value("storages", json::array())) {
    PowerStorage st;
    st.bus = e.at("bus").get<std::string>();
    st.energy_max = e.at("energy_max").get<double>();
    st.charge_max = e.at("charge_max").get<double>();
    st.discharge_max = e.at("discharge_max").get<double>();
    st.power_max = e.at("power_max").get<double>();
    st.eta_c = e.value("eta_c", 1.0);
    st.eta_d = e.value("eta_d", 1.0);
    st.p_loss = e.value("p_loss", 0.0);
    st.q_loss = e.value("q_loss", 0.0);
    inst.storages.push_back(std::move(st));
  }
  for (const json& e : j.value("loads", json::array())) {
    PowerLoad ld;
    ld.bus = e.at("bus").get<std::string>();
    ld.pd = e.at("pd").get<double>();
    ld.qd = e.at("qd").get<double>();
    inst.loads.push_back(std::move(ld));
  }
  validate(inst);
  return inst;
}

// ---- gas discretization ----
//
// Every pipe becomes a chain of equal segments with fresh interior
// junctions; interior density bounds span both endpoint boxes. Segment
// orientation is +1 at its first endpoint and -1 at its second, so the mass
// balance sums A*phi with these signs.

struct GasTopology {
  std::vector<std::string> label;  // discretized junction display labels
  std::vector<double> rho_min, rho_max;
  std::vector<std::array<int, 2>> seg_end;
  std::vector<int> seg_pipe;
  std::vector<std::string> seg_label;
  std::vector<std::vector<std::pair<int, double>>> seg_at;
  std::vector<std::vector<std::pair<int, double>>> comp_at;
  std::vector<std::vector<int>> receipts_at, transfers_at;
};

GasTopology discretize(const GasInstance& inst, int segments,
                       const std::unordered_map<std::string, int>& jidx) {
  GasTopology topo;
  const int nmain = static_cast<int>(inst.junctions.size());
  const int npipe = static_cast<int>(inst.pipes.size());
  const int nj = nmain + npipe * (segments - 1);
  topo.label.reserve(nj);
  for (const GasJunction& j : inst.junctions) {
    topo.label.push_back(j.id);
    topo.rho_min.push_back(j.rho_min);
    topo.rho_max.push_back(j.rho_max);
  }
  topo.seg_at.resize(nj);
  topo.comp_at.resize(nj);
  topo.receipts_at.resize(nj);
  topo.transfers_at.resize(nj);

  for (int p = 0; p < npipe; ++p) {
    const GasPipe& pipe = inst.pipes[p];
    const int a = jidx.at(pipe.from);
    const int b = jidx.at(pipe.to);
    const double lo = std::min(inst.junctions[a].rho_min,
                               inst.junctions[b].rho_min);
    const double hi = std::max(inst.junctions[a].rho_max,
                               inst.junctions[b].rho_max);
    int prev = a;
    for (int s = 1; s <= segments; ++s) {
      const std::string pref = "p" + std::to_string(p + 1);
      int next = b;
      if (s < segments) {
        next = static_cast<int>(topo.label.size());
        topo.label.push_back(pref + "." + std::to_string(s));
        topo.rho_min.push_back(lo);
        topo.rho_max.push_back(hi);
      }
      const int seg = static_cast<int>(topo.seg_end.size());
      topo.seg_end.push_back({prev, next});
      topo.seg_pipe.push_back(p);
      topo.seg_label.push_back(pref + "." + std::to_string(s));
      topo.seg_at[prev].emplace_back(seg, 1.0);
      topo.seg_at[next].emplace_back(seg, -1.0);
      prev = next;
    }
  }
  for (int c = 0; c < static_cast<int>(inst.compressors.size()); ++c) {
    topo.comp_at[jidx.at(inst.compressors[c].from)].emplace_back(c, 1.0);
    topo.comp_at[jidx.at(inst.compressors[c].to)].emplace_back(c, -1.0);
  }
  for (int r = 0; r < static_cast<int>(inst.receipts.size()); ++r)
    topo.receipts_at[jidx.at(inst.receipts[r].junction)].push_back(r);
  for (int d = 0; d < static_cast<int>(inst.transfers.size()); ++d)
    topo.transfers_at[jidx.at(inst.transfers[d].junction)].push_back(d);
  return topo;
}

double price_at(const GasPrice& p, int t, int periods) {
  return p.base * profile_factor(p.amplitude, p.phase, t, periods);
}

}  // namespace

double profile_factor(double amplitude, double phase, int t, int periods) {
  return 1.0 +
         amplitude * std::sin(2.0 * std::numbers::pi * (t - 1) / periods +
                              phase);
}

GasInstance default_gas_instance() {
  GasInstance inst;
  inst.gamma = 0.1;
  inst.w_a = 100.0;
  inst.kappa = 2.0 / 7.0;
  inst.dt = 3600.0;
  // The wellhead junction j1 has a low pressure cap, so meeting transfer
  // demand requires actual compression work. boost_min stays strictly above
  // one: an idle compressor then still separates its endpoint pressures and
  // the direction constraint f*(rho_i - rho_j) <= 0 never degenerates into
  // an identically-zero row.
  inst.junctions.push_back({"j1", 45.0, 58.0});
  for (int k = 2; k <= 6; ++k)
    inst.junctions.push_back({"j" + std::to_string(k), 45.0, 75.0});
  const double area = 0.25 * std::numbers::pi * 0.9 * 0.9;
  auto pipe = [&](const char* from, const char* to) {
    inst.pipes.push_back({from, to, 30000.0, 0.9, 0.008, area, 30000.0});
  };
  pipe("j2", "j3");
  pipe("j3", "j4");
  pipe("j5", "j6");
  pipe("j4", "j6");
  inst.compressors.push_back({"j1", "j2", 200.0, 5.0, 1.02, 1.8});
  inst.compressors.push_back({"j3", "j5", 200.0, 5.0, 1.02, 1.8});
  inst.receipts.push_back({"j1", 8.0, {1.0, 0.25, 0.0}});
  inst.transfers.push_back({"j2", -0.4, 1.5, {2.0, 0.4, 0.0}});
  inst.transfers.push_back({"j3", -0.4, 1.5, {1.8, 0.3, 0.5}});
  inst.transfers.push_back({"j4", -0.4, 1.5, {2.2, 0.5, 1.0}});
  inst.transfers.push_back({"j5", -0.4, 1.5, {1.6, 0.35, 1.5}});
  inst.transfers.push_back({"j6", -0.4, 1.5, {2.4, 0.45, 2.0}});
  return inst;
}

PowerInstance default_power_instance() {
  PowerInstance inst;
  inst.dt = 1.0;
  inst.profile_amplitude = 0.2;
  inst.profile_phase = 0.0;
  inst.storage_penalty = 1e-3;
  for (int k = 1; k <= 14; ++k)
    inst.buses.push_back({"b" + std::to_string(k), 0.94, 1.06, k == 1});

  auto gen = [&](const char* bus, double pmax, double qmin, double qmax,
                 double c1, double c2) {
    inst.generators.push_back({bus, 0.0, pmax, qmin, qmax, 0.0, c1, c2});
  };
  gen("b1", 3.324, 0.0, 0.10, 20.0, 0.043);
  gen("b2", 1.40, -0.40, 0.50, 20.0, 0.25);
  gen("b3", 1.00, 0.0, 0.40, 40.0, 0.01);
  gen("b6", 1.00, -0.06, 0.24, 40.0, 0.01);
  gen("b8", 1.00, -0.06, 0.24, 40.0, 0.01);

  auto branch = [&](const char* from, const char* to, double r, double x,
                    double charging, double tap, double s_max) {
    inst.branches.push_back(
        {from, to, r, x, charging, tap, s_max, -1.0472, 1.0472});
  };
  branch("b1", "b2", 0.01938, 0.05917, 0.0528, 1.0, 3.0);
  branch("b1", "b5", 0.05403, 0.22304, 0.0492, 1.0, 2.0);
  branch("b2", "b3", 0.04699, 0.19797, 0.0438, 1.0, 1.5);
  branch("b2", "b4", 0.05811, 0.17632, 0.0340, 1.0, 1.5);
  branch("b2", "b5", 0.05695, 0.17388, 0.0346, 1.0, 1.5);
  branch("b3", "b4", 0.06701, 0.17103, 0.0128, 1.0, 1.5);
  branch("b4", "b5", 0.01335, 0.04211, 0.0, 1.0, 1.5);
  branch("b4", "b7", 0.0, 0.20912, 0.0, 0.978, 1.5);
  branch("b4", "b9", 0.0, 0.55618, 0.0, 0.969, 1.5);
  branch("b5", "b6", 0.0, 0.25202, 0.0, 0.932, 1.5);
  branch("b6", "b11", 0.09498, 0.19890, 0.0, 1.0, 1.5);
  branch("b6", "b12", 0.12291, 0.25581, 0.0, 1.0, 1.5);
  branch("b6", "b13", 0.06615, 0.13027, 0.0, 1.0, 1.5);
  branch("b7", "b8", 0.0, 0.17615, 0.0, 1.0, 1.5);
  branch("b7", "b9", 0.0, 0.11001, 0.0, 1.0, 1.5);
  branch("b9", "b10", 0.03181, 0.08450, 0.0, 1.0, 1.5);
  branch("b9", "b14", 0.12711, 0.27038, 0.0, 1.0, 1.5);
  branch("b10", "b11", 0.08205, 0.19207, 0.0, 1.0, 1.5);
  branch("b12", "b13", 0.22092, 0.19988, 0.0, 1.0, 1.5);
  branch("b13", "b14", 0.17093, 0.34802, 0.0, 1.0, 1.5);

  inst.storages.push_back({"b4", 2.0, 0.5, 0.5, 0.7, 0.9, 0.9, 0.0, 0.0});

  auto load = [&](const char* bus, double pd, double qd) {
    inst.loads.push_back({bus, pd, qd});
  };
  load("b2", 0.217, 0.127);
  load("b3", 0.942, 0.190);
  load("b4", 0.478, -0.039);
  load("b5", 0.076, 0.016);
  load("b6", 0.112, 0.075);
  load("b9", 0.295, 0.166);
  load("b10", 0.090, 0.058);
  load("b11", 0.035, 0.018);
  load("b12", 0.061, 0.016);
  load("b13", 0.135, 0.058);
  load("b14", 0.149, 0.050);
  return inst;
}

OptiGraph build_gas(const GasInstance& inst, int periods,
                    int segments_per_pipe) {
  validate(inst);
  if (periods < 2)
    throw InvalidHorizon("gas horizon must be at least 2 periods, got " +
                         std::to_string(periods));
  if (segments_per_pipe < 1)
    throw InvalidHorizon("pipes need at least one segment, got " +
                         std::to_string(segments_per_pipe));

  const auto jidx = junction_index(inst);
  const GasTopology topo = discretize(inst, segments_per_pipe, jidx);
  const int T = periods;
  const int nj = static_cast<int>(topo.label.size());
  const int nseg = static_cast<int>(topo.seg_end.size());
  const int ncomp = static_cast<int>(inst.compressors.size());
  const int nrec = static_cast<int>(inst.receipts.size());
  const int ntr = static_cast<int>(inst.transfers.size());

  OptiGraph g;
  for (int t = 0; t < T; ++t) g.add_node();
  for (NodeId t = 2; t <= T; ++t) g.add_edge(t - 1, t);
  // Periodic closure; for T = 2 the edge {2,1} already exists.
  if (T > 2) g.add_edge(T, 1);

  std::vector<std::vector<Expr>> rho(T + 1), phi(T + 1), phim(T + 1),
      alpha(T + 1), pcomp(T + 1), fcomp(T + 1), supply(T + 1), demand(T + 1);
  for (NodeId t = 1; t <= T; ++t) {
    const std::string ts = std::to_string(t);
    for (int k = 0; k < nj; ++k)
      rho[t].push_back(
          g.add_variable(t, topo.rho_min[k], topo.rho_max[k],
                         0.5 * (topo.rho_min[k] + topo.rho_max[k]),
                         "rho[" + topo.label[k] + "," + ts + "]"));
    for (int s = 0; s < nseg; ++s) {
      phi[t].push_back(g.add_variable(t, -kInfinity, kInfinity, 0.5,
                                      "phi[" + topo.seg_label[s] + "," + ts +
                                          "]"));
      phim[t].push_back(g.add_variable(t, -kInfinity, kInfinity, 0.0,
                                       "phim[" + topo.seg_label[s] + "," +
                                           ts + "]"));
    }
    for (int c = 0; c < ncomp; ++c) {
      const GasCompressor& comp = inst.compressors[c];
      const std::string tag = "[c" + std::to_string(c + 1) + "," + ts + "]";
      const double a0 = comp.boost_min + 0.25 * (comp.boost_max -
                                                 comp.boost_min);
      const double f0 = std::min(0.5, 0.5 * comp.flow_max);
      alpha[t].push_back(g.add_variable(t, comp.boost_min, comp.boost_max, a0,
                                        "alpha" + tag));
      fcomp[t].push_back(g.add_variable(t, -comp.flow_max, comp.flow_max, f0,
                                        "fcomp" + tag));
      // Compressor power consumption is nonnegative: boost > 1 and the flow
      // direction constraint force f >= 0 on the feasible set, so the lower
      // bound cuts nothing while keeping the objective bounded below at
      // infeasible iterates.
      pcomp[t].push_back(
          g.add_variable(t, 0.0, comp.power_max,
                         inst.w_a * f0 * (std::pow(a0, inst.kappa) - 1.0),
                         "pcomp" + tag));
    }
    for (int r = 0; r < nrec; ++r)
      supply[t].push_back(
          g.add_variable(t, 0.0, inst.receipts[r].supply_max,
                         0.25 * inst.receipts[r].supply_max,
                         "supply[r" + std::to_string(r + 1) + "," + ts + "]"));
    for (int d = 0; d < ntr; ++d)
      demand[t].push_back(g.add_variable(
          t, inst.transfers[d].demand_min, inst.transfers[d].demand_max,
          0.5 * (inst.transfers[d].demand_min + inst.transfers[d].demand_max),
          "transfer[d" + std::to_string(d + 1) + "," + ts + "]"));
  }

  for (NodeId t = 1; t <= T; ++t) {
    const NodeId tp = (t == 1) ? T : t - 1;  // periodic predecessor
    const std::string ts = std::to_string(t);

    for (int k = 0; k < nj; ++k) {
      std::optional<Expr> acc;
      auto add = [&](Expr e) { acc = acc ? *acc + e : e; };
      for (const auto& [s, sgn] : topo.seg_at[k])
        add((sgn * inst.pipes[topo.seg_pipe[s]].area) * phi[t][s]);
      for (const auto& [c, sgn] : topo.comp_at[k])
        add(sgn > 0 ? fcomp[t][c] : -fcomp[t][c]);
      for (int r : topo.receipts_at[k]) add(-supply[t][r]);
      for (int d : topo.transfers_at[k]) add(demand[t][d]);
      g.add_constraint(t, *acc, Sense::kEq, 0.0,
                       "balance[" + topo.label[k] + "," + ts + "]");
    }

    for (int s = 0; s < nseg; ++s) {
      const GasPipe& p = inst.pipes[topo.seg_pipe[s]];
      const double coef =
          p.friction * (p.length / segments_per_pipe) / p.diameter;
      const auto [a, b] = topo.seg_end[s];
      g.add_constraint(t,
                       square(rho[t][a]) - square(rho[t][b]) +
                           coef * signed_square(phi[t][s]),
                       Sense::kEq, 0.0,
                       "momentum[" + topo.seg_label[s] + "," + ts + "]");
    }

    for (int c = 0; c < ncomp; ++c) {
      const GasCompressor& comp = inst.compressors[c];
      const int a = jidx.at(comp.from);
      const int b = jidx.at(comp.to);
      const std::string tag = "[c" + std::to_string(c + 1) + "," + ts + "]";
      g.add_constraint(t, fcomp[t][c] * (rho[t][a] - rho[t][b]), Sense::kLe,
                       0.0, "direction" + tag);
      g.add_constraint(t, rho[t][b] - alpha[t][c] * rho[t][a], Sense::kEq, 0.0,
                       "boost" + tag);
      g.add_constraint(
          t,
          pcomp[t][c] -
              inst.w_a * (fcomp[t][c] *
                          (exp(inst.kappa * log(alpha[t][c])) - 1.0)),
          Sense::kEq, 0.0, "power" + tag);
    }

    for (int s = 0; s < nseg; ++s) {
      const GasPipe& p = inst.pipes[topo.seg_pipe[s]];
      const double lhat =
          (p.effective_length / segments_per_pipe) / inst.dt;
      const auto [a, b] = topo.seg_end[s];
      g.add_link_constraint(t,
                            lhat * ((rho[t][a] - rho[tp][a]) +
                                    (rho[t][b] - rho[tp][b])) +
                                4.0 * phim[t][s],
                            0.0, "dynamics[" + topo.seg_label[s] + "," + ts +
                                     "]");
    }

    std::optional<Expr> obj;
    auto add_obj = [&](Expr e) { obj = obj ? *obj + e : e; };
    for (int c = 0; c < ncomp; ++c) add_obj(inst.gamma * pcomp[t][c]);
    for (int r = 0; r < nrec; ++r)
      add_obj(price_at(inst.receipts[r].price, t, T) * supply[t][r]);
    for (int d = 0; d < ntr; ++d)
      add_obj(-price_at(inst.transfers[d].price, t, T) * demand[t][d]);
    if (obj) g.add_objective_term(t, *obj);
  }
  return g;
}

OptiGraph build_power(const PowerInstance& inst, int periods) {
  validate(inst);
  if (periods < 2)
    throw InvalidHorizon("power horizon must be at least 2 periods, got " +
                         std::to_string(periods));

  const auto bidx = bus_index(inst);
  const int T = periods;
  const int nb = static_cast<int>(inst.buses.size());
  const int ng = static_cast<int>(inst.generators.size());
  const int nbr = static_cast<int>(inst.branches.size());
  const int ns = static_cast<int>(inst.storages.size());

  std::vector<std::vector<int>> gens_at(nb), from_at(nb), to_at(nb),
      stor_at(nb);
  std::vector<double> pd(nb, 0.0), qd(nb, 0.0);
  for (int k = 0; k < ng; ++k)
    gens_at[bidx.at(inst.generators[k].bus)].push_back(k);
  for (int k = 0; k < nbr; ++k) {
    from_at[bidx.at(inst.branches[k].from)].push_back(k);
    to_at[bidx.at(inst.branches[k].to)].push_back(k);
  }
  for (int k = 0; k < ns; ++k)
    stor_at[bidx.at(inst.storages[k].bus)].push_back(k);
  for (const PowerLoad& ld : inst.loads) {
    pd[bidx.at(ld.bus)] += ld.pd;
    qd[bidx.at(ld.bus)] += ld.qd;
  }
  int ref = 0;
  for (int k = 0; k < nb; ++k)
    if (inst.buses[k].reference) ref = k;

  OptiGraph g;
  for (int t = 0; t < T; ++t) g.add_node();
  for (NodeId t = 2; t <= T; ++t) g.add_edge(t - 1, t);

  std::vector<std::vector<Expr>> vm(T + 1), va(T + 1), pg(T + 1), qg(T + 1),
      pfr(T + 1), qfr(T + 1), pto(T + 1), qto(T + 1), ps(T + 1), qs(T + 1),
      en(T + 1), sc(T + 1), sd(T + 1), sqc(T + 1);
  for (NodeId t = 1; t <= T; ++t) {
    const std::string ts = std::to_string(t);
    for (int k = 0; k < nb; ++k) {
      const PowerBus& b = inst.buses[k];
      const std::string tag = "[" + b.id + "," + ts + "]";
      vm[t].push_back(g.add_variable(t, b.vmin, b.vmax,
                                     0.5 * (b.vmin + b.vmax), "vm" + tag));
      va[t].push_back(
          g.add_variable(t, -kInfinity, kInfinity, 0.0, "va" + tag));
    }
    for (int k = 0; k < ng; ++k) {
      const PowerGenerator& gen = inst.generators[k];
      const std::string tag = "[g" + std::to_string(k + 1) + "," + ts + "]";
      pg[t].push_back(g.add_variable(t, gen.pmin, gen.pmax,
                                     gen.pmin + 0.25 * (gen.pmax - gen.pmin),
                                     "pg" + tag));
      qg[t].push_back(g.add_variable(t, gen.qmin, gen.qmax,
                                     0.5 * (gen.qmin + gen.qmax),
                                     "qg" + tag));
    }
    for (int k = 0; k < nbr; ++k) {
      const std::string tag = "[e" + std::to_string(k + 1) + "," + ts + "]";
      auto flow = [&](const char* name) {
        return g.add_variable(t, -kInfinity, kInfinity, 0.0, name + tag);
      };
      pfr[t].push_back(flow("p_fr"));
      qfr[t].push_back(flow("q_fr"));
      pto[t].push_back(flow("p_to"));
      qto[t].push_back(flow("q_to"));
    }
    for (int k = 0; k < ns; ++k) {
      const PowerStorage& st = inst.storages[k];
      const std::string tag = "[s" + std::to_string(k + 1) + "," + ts + "]";
      ps[t].push_back(
          g.add_variable(t, -kInfinity, kInfinity, 0.0, "ps" + tag));
      qs[t].push_back(
          g.add_variable(t, -kInfinity, kInfinity, 0.0, "qs" + tag));
      en[t].push_back(g.add_variable(t, 0.0, st.energy_max,
                                     0.5 * st.energy_max, "e" + tag));
      sc[t].push_back(g.add_variable(t, 0.0, st.charge_max, 0.0, "sc" + tag));
      sd[t].push_back(
          g.add_variable(t, 0.0, st.discharge_max, 0.0, "sd" + tag));
      sqc[t].push_back(
          g.add_variable(t, 0.0, kInfinity, 0.0, "sqc" + tag));
    }
  }

  for (NodeId t = 1; t <= T; ++t) {
    const std::string ts = std::to_string(t);
    const double factor =
        profile_factor(inst.profile_amplitude, inst.profile_phase, t, T);

    g.add_constraint(t, va[t][ref], Sense::kEq, 0.0,
                     "ref_angle[" + inst.buses[ref].id + "," + ts + "]");

    for (int k = 0; k < nbr; ++k) {
      const PowerBranch& br = inst.branches[k];
      const int f = bidx.at(br.from);
      const int w = bidx.at(br.to);
      const double den = br.r * br.r + br.x * br.x;
      const double gs = br.r / den;
      const double bs = -br.x / den;
      const double bc = 0.5 * br.charging;
      const double tr = br.tap;
      const std::string tag = "[e" + std::to_string(k + 1) + "," + ts + "]";

      Expr cthe = vm[t][f] * vm[t][w] * cos(va[t][f] - va[t][w]);
      Expr sthe = vm[t][f] * vm[t][w] * sin(va[t][f] - va[t][w]);
      g.add_constraint(t,
                       pfr[t][k] - ((gs / (tr * tr)) * square(vm[t][f]) -
                                    (gs * cthe + bs * sthe) / tr),
                       Sense::kEq, 0.0, "p_flow_fr" + tag);
      g.add_constraint(t,
                       qfr[t][k] - (-((bs + bc) / (tr * tr)) *
                                        square(vm[t][f]) -
                                    (gs * sthe - bs * cthe) / tr),
                       Sense::kEq, 0.0, "q_flow_fr" + tag);
      g.add_constraint(t,
                       pto[t][k] - (gs * square(vm[t][w]) -
                                    (gs * cthe - bs * sthe) / tr),
                       Sense::kEq, 0.0, "p_flow_to" + tag);
      g.add_constraint(t,
                       qto[t][k] - (-(bs + bc) * square(vm[t][w]) +
                                    (gs * sthe + bs * cthe) / tr),
                       Sense::kEq, 0.0, "q_flow_to" + tag);
    }

    for (int k = 0; k < nb; ++k) {
      const std::string tag = "[" + inst.buses[k].id + "," + ts + "]";
      std::optional<Expr> p, q;
      auto addp = [&](Expr e) { p = p ? *p + e : e; };
      auto addq = [&](Expr e) { q = q ? *q + e : e; };
      for (int i : gens_at[k]) {
        addp(pg[t][i]);
        addq(qg[t][i]);
      }
      for (int i : stor_at[k]) {
        addp(ps[t][i]);
        addq(qs[t][i]);
      }
      for (int i : from_at[k]) {
        addp(-pfr[t][i]);
        addq(-qfr[t][i]);
      }
      for (int i : to_at[k]) {
        addp(-pto[t][i]);
        addq(-qto[t][i]);
      }
      g.add_constraint(t, *p, Sense::kEq, pd[k] * factor, "p_balance" + tag);
      g.add_constraint(t, *q, Sense::kEq, qd[k] * factor, "q_balance" + tag);
    }

    for (int k = 0; k < nbr; ++k) {
      const PowerBranch& br = inst.branches[k];
      const int f = bidx.at(br.from);
      const int w = bidx.at(br.to);
      const std::string tag = "[e" + std::to_string(k + 1) + "," + ts + "]";
      g.add_constraint(t, square(pfr[t][k]) + square(qfr[t][k]), Sense::kLe,
                       br.s_max * br.s_max, "thermal_fr" + tag);
      g.add_constraint(t, square(pto[t][k]) + square(qto[t][k]), Sense::kLe,
                       br.s_max * br.s_max, "thermal_to" + tag);
      g.add_constraint(t, va[t][f] - va[t][w], Sense::kGe, br.angle_min,
                       "angle_min" + tag);
      g.add_constraint(t, va[t][f] - va[t][w], Sense::kLe, br.angle_max,
                       "angle_max" + tag);
    }

    for (int k = 0; k < ns; ++k) {
      const PowerStorage& st = inst.storages[k];
      const std::string tag = "[s" + std::to_string(k + 1) + "," + ts + "]";
      g.add_constraint(t, ps[t][k] + sc[t][k] - sd[t][k], Sense::kEq,
                       st.p_loss, "storage_p" + tag);
      g.add_constraint(t, qs[t][k] - sqc[t][k], Sense::kEq, st.q_loss,
                       "storage_q" + tag);
      g.add_constraint(t, square(ps[t][k]) + square(qs[t][k]), Sense::kLe,
                       st.power_max * st.power_max, "storage_cap" + tag);
      if (t > 1)
        g.add_link_constraint(
            t,
            en[t][k] - en[t - 1][k] -
                inst.dt * (st.eta_c * sc[t][k] - sd[t][k] / st.eta_d),
            0.0, "storage_energy" + tag);
    }

    std::optional<Expr> obj;
    auto add_obj = [&](Expr e) { obj = obj ? *obj + e : e; };
    for (int k = 0; k < ng; ++k) {
      const PowerGenerator& gen = inst.generators[k];
      add_obj(gen.c2 * square(pg[t][k]) + gen.c1 * pg[t][k] + gen.c0);
    }
    for (int k = 0; k < ns; ++k)
      add_obj(inst.storage_penalty * (square(sc[t][k]) + square(sd[t][k])));
    if (obj) g.add_objective_term(t, *obj);
  }
  return g;
}

std::string write_gas_instance(const GasInstance& inst) {
  return gas_to_json(inst).dump(2) + "\n";
}

std::string write_power_instance(const PowerInstance& inst) {
  return power_to_json(inst).dump(2) + "\n";
}

namespace {

json parse_document(const std::string& text) {
  try {
    json j = json::parse(text);
    require(j.is_object(), "instance document must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed instance document: ") + e.what());
  }
}

template <typename Fn>
auto guarded(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed instance document: ") + e.what());
  }
}

}  // namespace

GasInstance read_gas_instance(const std::string& text) {
  return guarded([&] { return gas_from_json(parse_document(text)); });
}

PowerInstance read_power_instance(const std::string& text) {
  return guarded([&] { return power_from_json(parse_document(text)); });
}

Instance read_instance(const std::string& text) {
  return guarded([&]() -> Instance {
    const json j = parse_document(text);
    const std::string format = j.value("format", "");
    if (format == "graphnlp-gas") return gas_from_json(j);
    if (format == "graphnlp-power") return power_from_json(j);
    throw ParseError("unknown instance format '" + format + "'");
  });
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return read_instance(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace gnlp
