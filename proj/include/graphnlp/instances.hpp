#pragma once

#include <string>
#include <variant>
#include <vector>

#include "graphnlp/graph.hpp"

namespace gnlp {

// ---- transient gas network ----
//
// Desk-scale generator for a periodic transient gas network economic
// dispatch: densities and mass fluxes on a discretized pipe network with
// compressors, one graph node per time period, density dynamics as link
// constraints and a periodic closure that turns the problem graph into a
// cycle. All fixture data are synthetic.

struct GasJunction {
  std::string id;
  double rho_min{0.0};
  double rho_max{0.0};
};

struct GasPipe {
  std::string from, to;
  double length{0.0};            // total length, split into equal segments
  double diameter{0.0};
  double friction{0.0};          // Darcy friction factor
  double area{0.0};              // cross-sectional area
  double effective_length{0.0};  // inertia length scale of the dynamics
};

struct GasCompressor {
  std::string from, to;
  double power_max{0.0};
  double flow_max{0.0};  // |mass flow| cap
  double boost_min{1.0};
  double boost_max{1.0};
};

/// Sinusoidal price series c_t = base * (1 + amplitude * sin(2 pi (t-1)/T
/// + phase)).
struct GasPrice {
  double base{1.0};
  double amplitude{0.0};
  double phase{0.0};
};

struct GasReceipt {
  std::string junction;
  double supply_max{0.0};  // supply in [0, supply_max]
  GasPrice price;
};

/// Transfer points buy or sell: demand may take either sign within its box.
struct GasTransfer {
  std::string junction;
  double demand_min{0.0};
  double demand_max{0.0};
  GasPrice price;
};

struct GasInstance {
  double gamma{0.1};   // economic weight of compressor power
  double w_a{100.0};   // compressor power coefficient
  double kappa{2.0 / 7.0};  // boost exponent in alpha^kappa - 1
  double dt{1.0};      // period length
  std::vector<GasJunction> junctions;
  std::vector<GasPipe> pipes;
  std::vector<GasCompressor> compressors;
  std::vector<GasReceipt> receipts;
  std::vector<GasTransfer> transfers;
};

// ---- multi-period AC power flow with storage ----
//
// Polar formulation with explicit per-branch complex flow variables; every
// complex relation is expanded into a real pair. Storage dynamics couple
// consecutive periods, so the problem graph is a path. Shunts are not
// modeled. All fixture data are synthetic.

struct PowerBus {
  std::string id;
  double vmin{0.0}, vmax{0.0};
  bool reference{false};  // exactly one bus pins its voltage angle to zero
};

struct PowerGenerator {
  std::string bus;
  double pmin{0.0}, pmax{0.0};
  double qmin{0.0}, qmax{0.0};
  double c0{0.0}, c1{0.0}, c2{0.0};  // cost c0 + c1 p + c2 p^2
};

struct PowerBranch {
  std::string from, to;
  double r{0.0}, x{0.0};  // series impedance
  double charging{0.0};   // total line-charging susceptance, split half/half
  double tap{1.0};        // from-side tap magnitude
  double s_max{0.0};      // apparent-power limit per side
  double angle_min{0.0}, angle_max{0.0};  // bounds on va_from - va_to
};

struct PowerStorage {
  std::string bus;
  double energy_max{0.0};
  double charge_max{0.0};
  double discharge_max{0.0};
  double power_max{0.0};  // apparent-power cap on the injection
  double eta_c{1.0}, eta_d{1.0};
  double p_loss{0.0}, q_loss{0.0};  // standby losses
};

struct PowerLoad {
  std::string bus;
  double pd{0.0}, qd{0.0};  // nominal demand, scaled by the load profile
};

struct PowerInstance {
  double dt{1.0};
  double profile_amplitude{0.2};  // load_t = nominal * (1 + a sin(...))
  double profile_phase{0.0};
  // Tiny quadratic charge/discharge penalty. Without it simultaneous
  // charging and discharging at equal rates is cost-neutral and the barrier
  // method converges to the center of that degenerate face instead of an
  // idle storage.
  double storage_penalty{1e-3};
  std::vector<PowerBus> buses;
  std::vector<PowerGenerator> generators;
  std::vector<PowerBranch> branches;
  std::vector<PowerStorage> storages;
  std::vector<PowerLoad> loads;
};

// ---- generators ----

/// Bundled 6-junction network: 4 pipes, 2 compressors, 1 receipt and 5
/// transfer points; matches data/gas6.json byte for byte.
GasInstance default_gas_instance();

/// Bundled 14-bus system: 5 generators, 20 branches, 1 storage; matches
/// data/power14.json byte for byte.
PowerInstance default_power_instance();

/// Builds the periodic gas model with `periods` graph nodes. Every pipe is
/// split into `segments_per_pipe` equal segments with interior junctions.
/// Throws InvalidHorizon for periods < 2 or segments < 1.
OptiGraph build_gas(const GasInstance& inst, int periods,
                    int segments_per_pipe);

/// Builds the multi-period power model with `periods` graph nodes along a
/// path. Throws InvalidHorizon for periods < 2.
OptiGraph build_power(const PowerInstance& inst, int periods);

/// Price or load profile multiplier for 1-based period t of T.
double profile_factor(double amplitude, double phase, int t, int periods);

// ---- fixture files ----
//
// Versioned JSON schema, one document per instance:
//   {"format": "graphnlp-gas"   , "version": 1, ...}
//   {"format": "graphnlp-power" , "version": 1, ...}
// write(read(text)) reproduces the input byte for byte.

std::string write_gas_instance(const GasInstance& inst);
std::string write_power_instance(const PowerInstance& inst);
GasInstance read_gas_instance(const std::string& text);
PowerInstance read_power_instance(const std::string& text);

using Instance = std::variant<GasInstance, PowerInstance>;

/// Dispatches on the "format" field. Throws ParseError on anything invalid.
Instance read_instance(const std::string& text);
/// Reads a fixture file; ParseError mentions the path on failure.
Instance load_instance(const std::string& path);

}  // namespace gnlp
