// costas-lab: simulate Costas-loop models, reproduce the counterexample
// scenarios and run the averaging / pull-in / phase-portrait tools.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 integration
// failure, 3 scenario outcome mismatch.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "costas_lab/analysis.hpp"
#include "costas_lab/config.hpp"
#include "costas_lab/experiments.hpp"
#include "costas_lab/io.hpp"

namespace {

using namespace costas;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kIntegrationError = 2;
constexpr int kMismatch = 3;

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = costas::detail::trim(item);
    if (t.empty()) continue;
    out.push_back(costas::detail::parse_number(what, t));
  }
  if (out.empty()) throw ConfigError(what, what + ": empty list");
  return out;
}

/// lo:hi:step, inclusive of hi up to rounding.
std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(costas::detail::parse_number("range", costas::detail::trim(item)));
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw ConfigError("range", "range: expected lo:hi:step with lo <= hi and step > 0");
  }
  std::vector<double> out;
  const auto n = static_cast<long long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return out;
}

/// x=lo:hi:n,theta=lo:hi:n (either part optional, n points inclusive).
struct GridSpec {
  std::vector<double> x, theta;
};

std::vector<double> linspace_spec(const std::string& key, const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.emplace_back(costas::detail::trim(item));
  if (parts.size() == 1) return {costas::detail::parse_number(key, parts[0])};
  if (parts.size() != 3) throw ConfigError(key, "grid: expected " + key + "=lo:hi:n");
  const double lo = costas::detail::parse_number(key, parts[0]);
  const double hi = costas::detail::parse_number(key, parts[1]);
  const double n = costas::detail::parse_number(key, parts[2]);
  if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError(key, "grid: point count must be a positive integer");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return out;
}

GridSpec parse_grid(const std::string& text, const StateVector& s0) {
  GridSpec g;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("grid", "grid: expected key=lo:hi:n entries");
    const std::string key(costas::detail::trim(item.substr(0, eq)));
    const std::string val = item.substr(eq + 1);
    if (key == "x") {
      g.x = linspace_spec(key, val);
    } else if (key == "theta" || key == "theta_delta") {
      g.theta = linspace_spec(key, val);
    } else {
      throw ConfigError(key, "grid: unknown axis '" + key + "' (use x, theta)");
    }
  }
  if (g.x.empty()) g.x = {s0[0]};
  if (g.theta.empty()) g.theta = {s0[1]};
  return g;
}

void print_lock(const LockReport& r) {
  std::cout << "locked=" << (r.locked ? "true" : "false") << " tail_freq_err=" << format_double(r.tail_mean_freq_error)
            << " steady_theta=" << (r.steady_theta_delta ? format_double(*r.steady_theta_delta) : "none") << "\n";
}

Scenario load_scenario(const std::string& path, RunConfig* raw = nullptr) {
  RunConfig cfg = load_config(path);
  Scenario s = build_scenario(cfg);
  if (raw) *raw = std::move(cfg);
  return s;
}

void require_classic(const Scenario& s, const char* cmd) {
  if (s.kind != ModelKind::ClassicPhaseSpace) {
    throw ConfigError("model", std::string(cmd) + " requires model = classic_phase_space");
  }
  if (s.params.loop_filter.order() != 1) throw ConfigError("loop_filter", "scalar loop filter required");
}

int cmd_simulate(const std::string& config_path, const std::string& out) {
  RunConfig raw;
  const Scenario s = load_scenario(config_path, &raw);
  const Trajectory tr = integrate(s.kind, s.params, s.s0, s.integrator);
  const LockReport r = detect_lock(tr, s.criterion);
  const std::string path = !out.empty() ? out : raw.word_or("output", "");
  if (!path.empty()) write_file(path, [&](std::ostream& os) { write_trajectory_csv(os, tr); });
  print_lock(r);
  return kOk;
}

int cmd_example(int id, const std::string& outdir) {
  ExperimentOptions opt;
  opt.outdir = outdir;
  opt.keep_trajectories = false;
  const ExperimentReport rep = run_example(id, opt);
  const std::string summary = format_report(rep);
  std::cout << summary;
  if (!outdir.empty()) {
    const auto path = (std::filesystem::path(outdir) / ("example" + std::to_string(id) + "_summary.txt")).string();
    write_file(path, [&](std::ostream& os) { os << summary; });
  }
  return rep.pass() ? kOk : kMismatch;
}

int cmd_portrait(const std::string& config_path, const std::string& grid_text, const std::string& outdir) {
  const Scenario s = load_scenario(config_path);
  require_classic(s, "portrait");
  const GridSpec g = parse_grid(grid_text, s.s0);
  std::vector<StateVector> ics;
  for (double x : g.x) {
    for (double th : g.theta) ics.push_back({x, th});
  }
  std::vector<Trajectory> trs(ics.size());
  std::vector<char> captured(ics.size(), 0);
  parallel_for(ics.size(), [&](std::size_t i) {
    trs[i] = integrate(s.kind, s.params, ics[i], s.integrator);
    captured[i] = detect_lock(trs[i], s.criterion).locked ? 1 : 0;
  });
  std::filesystem::create_directories(outdir);
  std::size_t n_captured = 0;
  write_file((std::filesystem::path(outdir) / "portrait_index.csv").string(), [&](std::ostream& os) {
    os << "id,x0,theta0,verdict,file\n";
    for (std::size_t i = 0; i < ics.size(); ++i) {
      const std::string file = "portrait_" + std::to_string(i) + ".csv";
      os << i << ',' << format_double(ics[i][0]) << ',' << format_double(ics[i][1]) << ','
         << (captured[i] ? "captured" : "rotational") << ',' << file << '\n';
      n_captured += captured[i] ? 1 : 0;
    }
  });
  for (std::size_t i = 0; i < ics.size(); ++i) {
    write_file((std::filesystem::path(outdir) / ("portrait_" + std::to_string(i) + ".csv")).string(),
               [&](std::ostream& os) { write_portrait_csv(os, trs[i]); });
  }
  std::cout << "trajectories=" << ics.size() << " captured=" << n_captured
            << " rotational=" << ics.size() - n_captured << "\n";
  return kOk;
}

int cmd_avgcheck(const std::string& config_path, const std::string& omega1_text) {
  RunConfig raw = load_config(config_path);
  const ModelKind kind = config_model(raw);
  AveragingOptions opt;
  if (kind == ModelKind::ModifiedSignalSpace || kind == ModelKind::ClassicPhaseSpace) {
    opt.pair = AveragingPair::ModifiedVsClassic;
  } else if (kind == ModelKind::SimplifiedSignalSpace || kind == ModelKind::PhaseSpace) {
    opt.pair = AveragingPair::SimplifiedVsPhaseSpace;
  } else {
    throw ConfigError("model", "avgcheck pairs modified_signal_space/classic_phase_space or "
                               "simplified_signal_space/phase_space");
  }
  opt.t_end = raw.number("t_end");
  const LoopParams p = config_params(raw);
  InitialConditions ic;
  ic.x = {raw.number_or("x", 0.0)};
  if (opt.pair == AveragingPair::SimplifiedVsPhaseSpace) {
    ic.x1 = {raw.number_or("x1", 0.0)};
    ic.x2 = {raw.number_or("x2", 0.0)};
  }
  ic.theta_delta = raw.number_or("theta_delta", 0.0);
  const std::vector<double> omega1 = parse_list(omega1_text, "omega1");
  const auto rows = averaging_discrepancy(p, omega1, ic, opt);
  std::cout << "omega1,sup_error,flag\n";
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    std::cout << format_double(r.omega1) << ',' << format_double(r.sup_error) << ','
              << (r.detuning_too_large ? "detuning-too-large" : "") << '\n';
    xs.push_back(r.omega1);
    ys.push_back(r.sup_error);
  }
  if (rows.size() > 1) std::cout << "slope=" << format_double(loglog_slope(xs, ys)) << "\n";
  return kOk;
}

int cmd_pullin(const std::string& config_path, const std::string& range, const std::string& grid_text) {
  const Scenario s = load_scenario(config_path);
  require_classic(s, "pullin");
  const std::vector<double> omegas = parse_range(range);
  std::vector<StateVector> ics{s.s0};
  if (!grid_text.empty()) {
    const GridSpec g = parse_grid(grid_text, s.s0);
    for (double x : g.x) {
      for (double th : g.theta) ics.push_back({x, th});
    }
  }
  const auto rows = pullin_probe(s.params, omegas, ics, s.integrator, s.criterion);
  std::cout << "omega_delta,verdict,escapes,runs,hold_in\n";
  for (const auto& r : rows) {
    std::cout << format_double(r.omega_delta) << ',' << (r.all_lock ? "all-lock" : "some-escape") << ','
              << r.escapes << ',' << r.runs << ',' << (r.hold_in ? "true" : "false") << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Costas loop model laboratory"};
  app.require_subcommand(1);

  std::string config, out, outdir, grid, omega1, range;
  int example_id = 0;

  auto* sim = app.add_subcommand("simulate", "Integrate one configured model and report lock");
  sim->add_option("--config", config, "Run configuration file")->required();
  sim->add_option("--out", out, "CSV output path");

  auto* ex = app.add_subcommand("example", "Reproduce one counterexample scenario (1..6)");
  ex->add_option("id", example_id, "Scenario id")->required()->check(CLI::Range(1, 6));
  ex->add_option("--outdir", outdir, "Directory for CSVs and the summary");

  auto* por = app.add_subcommand("portrait", "Phase portrait of the classic model over a grid");
  por->add_option("--config", config, "Run configuration file")->required();
  por->add_option("--grid", grid, "x=lo:hi:n,theta=lo:hi:n")->required();
  por->add_option("--outdir", outdir, "Output directory")->required();

  auto* avg = app.add_subcommand("avgcheck", "Original vs averaged model discrepancy over carrier frequencies");
  avg->add_option("--config", config, "Run configuration file")->required();
  avg->add_option("--omega1", omega1, "Comma-separated carrier frequencies, rad/s")->required();

  auto* pull = app.add_subcommand("pullin", "Pull-in probe of the classic model");
  pull->add_option("--config", config, "Run configuration file")->required();
  pull->add_option("--range", range, "lo:hi:step of omega_delta_free")->required();
  pull->add_option("--grid", grid, "Extra initial states x=lo:hi:n,theta=lo:hi:n");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sim) return cmd_simulate(config, out);
    if (*ex) return cmd_example(example_id, outdir);
    if (*por) return cmd_portrait(config, grid, outdir);
    if (*avg) return cmd_avgcheck(config, omega1);
    if (*pull) return cmd_pullin(config, range, grid);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IntegrationError& e) {
    std::cerr << "integration failure: " << e.what() << " (last good t = " << e.last_good_time() << ")\n";
    return kIntegrationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
