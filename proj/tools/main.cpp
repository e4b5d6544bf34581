// Command-line driver: configures the interior-point solver and the linear
// algebra backend, runs gas/power instances, and persists logs, timings,
// solutions and benchmark comparisons.
//
// Exit codes: 0 success, 1 solver failure, 2 usage or configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "graphnlp/errors.hpp"
#include "graphnlp/instances.hpp"
#include "graphnlp/ipm.hpp"
#include "graphnlp/nlp.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct RunConfig {
  std::string instance;  // fixture path; empty when generating
  std::string generate;  // "gas" or "power"; empty when loading a file
  int horizon{8};
  int segments{8};  // gas pipe discretization; ignored for power
  std::string solver{"direct"};
  std::string iterator{"richardson"};
  int parts{4};
  int omega{-1};  // -1 selects the automatic overlap rule
  double tol{1e-8};
  int max_iter{3000};
  int threads{4};
  std::string out{"."};
  unsigned seed{0};  // echoed into artifacts for provenance
};

struct RunOutcome {
  gnlp::SolveReport report;
  std::string error;  // nonempty when the solve threw
  int num_vars{0};
  int num_cons{0};
  bool ok() const {
    return error.empty() &&
           report.status == gnlp::SolveReport::Status::kOptimal;
  }
  std::string status() const {
    return error.empty() ? gnlp::status_name(report.status) : "error";
  }
};

std::string label(const RunConfig& cfg) {
  return cfg.instance.empty() ? cfg.generate : cfg.instance;
}

std::string strategy(const RunConfig& cfg) {
  return cfg.solver == "ras" ? "ras-" + cfg.iterator : cfg.solver;
}

gnlp::OptiGraph build_model(const RunConfig& cfg) {
  gnlp::Instance inst;
  if (!cfg.instance.empty())
    inst = gnlp::load_instance(cfg.instance);
  else if (cfg.generate == "gas")
    inst = gnlp::default_gas_instance();
  else
    inst = gnlp::default_power_instance();
  if (std::holds_alternative<gnlp::GasInstance>(inst))
    return gnlp::build_gas(std::get<gnlp::GasInstance>(inst), cfg.horizon,
                           cfg.segments);
  return gnlp::build_power(std::get<gnlp::PowerInstance>(inst), cfg.horizon);
}

gnlp::IpmOptions ipm_options(const RunConfig& cfg, std::ostream* log) {
  gnlp::IpmOptions opt;
  opt.tol = cfg.tol;
  opt.max_iter = cfg.max_iter;
  opt.threads = cfg.threads;
  opt.log = log;
  opt.linear.kind = cfg.solver == "ras"
                        ? gnlp::LinearSolverOptions::Kind::kRas
                        : gnlp::LinearSolverOptions::Kind::kDirect;
  opt.linear.iterator =
      cfg.iterator == "gmres" ? gnlp::LinearSolverOptions::Iterator::kGmres
                              : gnlp::LinearSolverOptions::Iterator::kRichardson;
  opt.linear.num_parts = cfg.parts;
  opt.linear.omega = cfg.omega;
  opt.linear.threads = cfg.threads;
  return opt;
}

// One row per run, appended; the header is written when the file is new.
// Columns: config echo, termination summary, then the three wall-time
// categories (total, linear solve, function evaluation) plus the remainder.
const char* kCsvHeader =
    "instance,horizon,segments,solver,iterator,parts,omega,threads,tol,"
    "max_iter,seed,status,iterations,objective,kkt_error,"
    "primal_infeasibility,linear_iterations,overlap_adaptations,"
    "regularizations,restorations,time_total,time_linear_solve,"
    "time_function_eval,time_other\n";

void append_csv_row(const fs::path& file, const RunConfig& cfg,
                    const RunOutcome& oc) {
  const bool fresh = !fs::exists(file);
  std::ofstream out(file, std::ios::app);
  if (!out) throw gnlp::Error("cannot write " + file.string());
  if (fresh) out << kCsvHeader;
  const gnlp::SolveReport& r = oc.report;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%d,%d,%s,%s,%d,%d,%d,%g,%d,%u,%s,%d,%.12e,%.3e,%.3e,%d,"
                "%d,%d,%d,%.6f,%.6f,%.6f,%.6f\n",
                label(cfg).c_str(), cfg.horizon, cfg.segments,
                cfg.solver.c_str(), cfg.iterator.c_str(), cfg.parts, cfg.omega,
                cfg.threads, cfg.tol, cfg.max_iter, cfg.seed,
                oc.status().c_str(), r.iterations, r.objective, r.kkt_error,
                r.primal_infeasibility, r.linear_iterations,
                r.overlap_adaptations, r.regularization_escalations,
                r.restorations, r.time_total, r.time_linear_solve,
                r.time_function_eval, r.time_other);
  out << buf;
}

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j;
  j["instance"] = label(cfg);
  j["horizon"] = cfg.horizon;
  j["segments"] = cfg.segments;
  j["solver"] = cfg.solver;
  j["iterator"] = cfg.iterator;
  j["parts"] = cfg.parts;
  j["omega"] = cfg.omega;
  j["threads"] = cfg.threads;
  j["tol"] = cfg.tol;
  j["max_iter"] = cfg.max_iter;
  j["seed"] = cfg.seed;
  return j;
}

// Primal and equality-dual values grouped by owning graph node, keyed by
// the model's variable/constraint names.
void write_solution(const fs::path& file, const RunConfig& cfg,
                    const gnlp::StandardNlp& nlp,
                    const gnlp::PrimalDualPoint& pt,
                    const gnlp::SolveReport& rep) {
  ordered_json doc;
  doc["format"] = "graphnlp-solution";
  doc["version"] = 1;
  doc["config"] = config_json(cfg);
  doc["status"] = gnlp::status_name(rep.status);
  doc["iterations"] = rep.iterations;
  doc["objective"] = rep.objective;
  doc["kkt_error"] = rep.kkt_error;
  doc["primal_infeasibility"] = rep.primal_infeasibility;

  const auto& vnames = nlp.variable_names();
  const auto& cnames = nlp.constraint_names();
  ordered_json nodes = ordered_json::array();
  for (int k = 0; k < nlp.num_graph_nodes(); ++k) {
    ordered_json node;
    node["node"] = k + 1;
    ordered_json primal, dual;
    const auto [pb, pe] = nlp.primal_range(k);
    for (int j = pb; j < pe; ++j) primal[vnames[j]] = pt.x[j];
    const auto [db, de] = nlp.dual_range(k);
    for (int i = db; i < de; ++i) dual[cnames[i]] = pt.lambda[i];
    node["primal"] = std::move(primal);
    node["dual"] = std::move(dual);
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);

  std::ofstream out(file);
  if (!out) throw gnlp::Error("cannot write " + file.string());
  out << doc.dump(2) << '\n';
}

RunOutcome run_solve(const RunConfig& cfg, std::ostream* log,
                     gnlp::StandardNlp& nlp, gnlp::PrimalDualPoint& pt) {
  RunOutcome oc;
  oc.num_vars = nlp.num_vars();
  oc.num_cons = nlp.num_cons();
  try {
    auto [point, report] = gnlp::solve(nlp, ipm_options(cfg, log));
    pt = std::move(point);
    oc.report = report;
  } catch (const std::exception& e) {
    oc.error = e.what();
  }
  return oc;
}

void print_summary(const RunConfig& cfg, const RunOutcome& oc) {
  std::cout << "instance=" << label(cfg) << " horizon=" << cfg.horizon
            << " strategy=" << strategy(cfg) << " parts=" << cfg.parts
            << " omega=" << (cfg.omega < 0 ? std::string("auto")
                                           : std::to_string(cfg.omega))
            << " threads=" << cfg.threads << " n=" << oc.num_vars
            << " m=" << oc.num_cons << "\n";
  if (!oc.error.empty()) {
    std::cout << "status=error (" << oc.error << ")\n";
    return;
  }
  const gnlp::SolveReport& r = oc.report;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "status=%s iterations=%d objective=%.10e kkt_error=%.3e\n"
                "time_total=%.3fs linear_solve=%.3fs function_eval=%.3fs",
                gnlp::status_name(r.status), r.iterations, r.objective,
                r.kkt_error, r.time_total, r.time_linear_solve,
                r.time_function_eval);
  std::cout << buf << "\n";
}

int cmd_solve(const RunConfig& cfg) {
  gnlp::OptiGraph model = build_model(cfg);
  gnlp::StandardNlp nlp = model.flatten();
  fs::create_directories(cfg.out);
  const fs::path dir(cfg.out);

  std::ofstream log(dir / "iterations.log");
  if (!log) throw gnlp::Error("cannot write " + (dir / "iterations.log").string());

  gnlp::PrimalDualPoint pt;
  RunOutcome oc = run_solve(cfg, &log, nlp, pt);
  append_csv_row(dir / "run.csv", cfg, oc);
  if (oc.error.empty()) write_solution(dir / "solution.json", cfg, nlp, pt, oc.report);

  print_summary(cfg, oc);
  if (!oc.ok()) {
    std::cerr << "solve failed: "
              << (oc.error.empty() ? oc.status() : oc.error) << "\n";
    return 1;
  }
  std::cout << "artifacts: " << (dir / "run.csv").string() << " "
            << (dir / "iterations.log").string() << " "
            << (dir / "solution.json").string() << "\n";
  return 0;
}

// ---- benchmark harness ----

struct BenchRow {
  RunConfig cfg;
  RunOutcome oc;
};

// Wall time vs. horizon, one polyline per solver strategy. The plot is
// regenerated from the rows of this invocation only; appended history in
// run.csv is left untouched.
void write_bench_svg(const fs::path& file, const std::vector<BenchRow>& rows) {
  const int width = 640, height = 420;
  const int ml = 70, mr = 160, mt = 30, mb = 50;
  const double px0 = ml, px1 = width - mr;
  const double py0 = height - mb, py1 = mt;

  std::vector<std::string> series;
  int hmin = 1 << 30, hmax = 0;
  double tmax = 0.0;
  for (const BenchRow& r : rows) {
    if (!r.oc.error.empty()) continue;
    const std::string s = strategy(r.cfg);
    if (std::find(series.begin(), series.end(), s) == series.end())
      series.push_back(s);
    hmin = std::min(hmin, r.cfg.horizon);
    hmax = std::max(hmax, r.cfg.horizon);
    tmax = std::max(tmax, r.oc.report.time_total);
  }
  if (series.empty()) {
    hmin = hmax = 0;
  }
  tmax = std::max(tmax, 1e-6);

  auto sx = [&](int h) {
    if (hmax == hmin) return 0.5 * (px0 + px1);
    return px0 + (px1 - px0) * (h - hmin) / double(hmax - hmin);
  };
  auto sy = [&](double t) { return py0 - (py0 - py1) * (t / (1.1 * tmax)); };

  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1
      << "\" y2=\"" << py0 << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0
      << "\" y2=\"" << py1 << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << 0.5 * (px0 + px1) << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">horizon (periods)"
      << "</text>\n"
      << "<text x=\"16\" y=\"" << 0.5 * (py0 + py1)
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << 0.5 * (py0 + py1) << ")\">solution wall time (s)</text>\n";

  std::vector<int> hticks;
  for (const BenchRow& r : rows)
    if (std::find(hticks.begin(), hticks.end(), r.cfg.horizon) == hticks.end())
      hticks.push_back(r.cfg.horizon);
  std::sort(hticks.begin(), hticks.end());
  for (int h : hticks)
    svg << "<text x=\"" << sx(h) << "\" y=\"" << py0 + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << h << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double t = 1.1 * tmax * k / 4;
    char lab[32];
    std::snprintf(lab, sizeof(lab), "%.2g", t);
    svg << "<line x1=\"" << px0 - 4 << "\" y1=\"" << sy(t) << "\" x2=\"" << px0
        << "\" y2=\"" << sy(t) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << px0 - 8 << "\" y=\"" << sy(t) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << lab << "</text>\n";
  }

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 6];
    std::vector<std::pair<int, double>> pts;
    for (const BenchRow& r : rows)
      if (r.oc.error.empty() && strategy(r.cfg) == series[s])
        pts.emplace_back(r.cfg.horizon, r.oc.report.time_total);
    std::sort(pts.begin(), pts.end());
    if (pts.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2\" points=\"";
      for (const auto& [h, t] : pts) svg << sx(h) << "," << sy(t) << " ";
      svg << "\"/>\n";
    }
    for (const auto& [h, t] : pts)
      svg << "<circle cx=\"" << sx(h) << "\" cy=\"" << sy(t)
          << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    const double ly = mt + 18.0 * s;
    svg << "<line x1=\"" << width - mr + 14 << "\" y1=\"" << ly << "\" x2=\""
        << width - mr + 38 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << width - mr + 44 << "\" y=\"" << ly + 4
        << "\" font-size=\"12\">" << series[s] << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(file);
  if (!out) throw gnlp::Error("cannot write " + file.string());
  out << svg.str();
}

int cmd_bench(const RunConfig& base, const std::vector<int>& horizons,
              const std::vector<std::string>& solvers) {
  fs::create_directories(base.out);
  const fs::path dir(base.out);
  std::vector<BenchRow> rows;
  bool any_failed = false;
  int k = 0;
  const int total = static_cast<int>(horizons.size() * solvers.size());

  for (const std::string& solver : solvers) {
    for (int h : horizons) {
      RunConfig cfg = base;
      cfg.solver = solver;
      cfg.horizon = h;
      ++k;
      BenchRow row{cfg, {}};
      try {
        gnlp::OptiGraph model = build_model(cfg);
        gnlp::StandardNlp nlp = model.flatten();
        gnlp::PrimalDualPoint pt;
        row.oc = run_solve(cfg, nullptr, nlp, pt);
      } catch (const std::exception& e) {
        row.oc.error = e.what();
      }
      append_csv_row(dir / "run.csv", cfg, row.oc);
      any_failed = any_failed || !row.oc.ok();

      char buf[256];
      if (row.oc.error.empty())
        std::snprintf(buf, sizeof(buf),
                      "[%d/%d] %s T=%d %s: %s %d it %.3fs objective=%.6e", k,
                      total, label(cfg).c_str(), h, strategy(cfg).c_str(),
                      row.oc.status().c_str(), row.oc.report.iterations,
                      row.oc.report.time_total, row.oc.report.objective);
      else
        std::snprintf(buf, sizeof(buf), "[%d/%d] %s T=%d %s: error (%s)", k,
                      total, label(cfg).c_str(), h, strategy(cfg).c_str(),
                      row.oc.error.c_str());
      std::cout << buf << "\n";
      rows.push_back(std::move(row));
    }
  }

  write_bench_svg(dir / "bench.svg", rows);
  std::cout << "wrote " << rows.size() << " rows to "
            << (dir / "run.csv").string() << " and plot "
            << (dir / "bench.svg").string() << "\n";
  return any_failed ? 1 : 0;
}

void add_source_options(CLI::App* cmd, RunConfig& cfg) {
  auto* src = cmd->add_option_group("source")->require_option(1);
  src->add_option("--instance", cfg.instance,
                  "instance fixture file (gas or power schema)")
      ->check(CLI::ExistingFile);
  src->add_option("--generate", cfg.generate,
                  "generate a bundled instance instead of loading a file")
      ->check(CLI::IsMember({"gas", "power"}));
}

void add_solver_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--segments", cfg.segments,
                  "pipe discretization segments (gas only)")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  cmd->add_option("--iterator", cfg.iterator,
                  "iterative scheme around the Schwarz preconditioner")
      ->check(CLI::IsMember({"richardson", "gmres"}))
      ->capture_default_str();
  cmd->add_option("--K", cfg.parts, "number of Schwarz subdomains")
      ->check(CLI::Range(1, 1 << 20))
      ->capture_default_str();
  cmd->add_option("--omega", cfg.omega,
                  "overlap radius; -1 selects the automatic rule")
      ->check(CLI::Range(-1, 1 << 20))
      ->capture_default_str();
  cmd->add_option("--tol", cfg.tol, "KKT error tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-iter", cfg.max_iter, "interior-point iteration cap")
      ->check(CLI::Range(1, 1 << 24))
      ->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "worker threads")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  cmd->add_option("--out", cfg.out, "output directory")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed,
                  "run seed echoed into artifacts for provenance")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-structured nonlinear programming driver"};
  app.require_subcommand(1);

  RunConfig scfg;
  CLI::App* sv = app.add_subcommand(
      "solve", "solve one instance; writes run.csv, iterations.log and "
               "solution.json into --out");
  add_source_options(sv, scfg);
  sv->add_option("--horizon", scfg.horizon, "number of time periods")
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  sv->add_option("--linear-solver", scfg.solver, "KKT solution strategy")
      ->check(CLI::IsMember({"direct", "ras"}))
      ->capture_default_str();
  add_solver_options(sv, scfg);

  RunConfig bcfg;
  std::vector<int> horizons;
  std::vector<std::string> solvers{"direct", "ras"};
  CLI::App* bn = app.add_subcommand(
      "bench", "run a horizon-by-strategy matrix; appends to run.csv and "
               "draws bench.svg");
  add_source_options(bn, bcfg);
  bn->add_option("--horizons", horizons, "horizons to sweep")
      ->required()
      ->check(CLI::Range(2, 1 << 20));
  bn->add_option("--solvers", solvers, "strategies to compare")
      ->check(CLI::IsMember({"direct", "ras"}))
      ->capture_default_str();
  add_solver_options(bn, bcfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sv->parsed()) return cmd_solve(scfg);
    return cmd_bench(bcfg, horizons, solvers);
  } catch (const gnlp::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gnlp::InvalidHorizon& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gnlp::EmptyModel& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
