// Batch front end: spectrum | estimate | sweep | compile | oracle-check

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "spinstar/experiment.hpp"
#include "spinstar/oracle.hpp"
#include "spinstar/plot.hpp"

using namespace spinstar;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2 };

struct Overrides {
  std::string config_path, preset, out, pulses, sequence, priming;
  std::uint64_t seed = 0;
  double delay = 0, b0 = 0, delta_h = 0, delta_si = 0, gamma_center = 0, j_coupling = 0;
  // Each subcommand registers its own copy of the common options.
  std::multimap<std::string, CLI::Option*> opt;

  bool given(const std::string& name) const {
    auto [a, b] = opt.equal_range(name);
    for (auto it = a; it != b; ++it)
      if (it->second->count() > 0) return true;
    return false;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  o.opt.emplace("config", app->add_option("--config", o.config_path, "JSON run configuration"));
  o.opt.emplace("preset", app->add_option("--preset", o.preset, "tms or tmp (when no --config is given)"));
  o.opt.emplace("seed", app->add_option("--seed", o.seed, "master seed"));
  o.opt.emplace("out", app->add_option("--out", o.out, "output directory"));
  o.opt.emplace("pulses", app->add_option("--pulses", o.pulses, "ideal, hard or bb1"));
  o.opt.emplace("sequence", app->add_option("--sequence", o.sequence, "none, original, a or b"));
  o.opt.emplace("priming", app->add_option("--priming", o.priming, "true or false"));
  o.opt.emplace("delay", app->add_option("--delay", o.delay, "free-evolution delay (s)"));
  o.opt.emplace("b0", app->add_option("--b0", o.b0, "field offset (T)"));
  o.opt.emplace("delta-h", app->add_option("--delta-h", o.delta_h, "peripheral channel offset (Hz)"));
  o.opt.emplace("delta-si", app->add_option("--delta-si", o.delta_si, "centre channel offset (Hz)"));
  o.opt.emplace("gamma-center", app->add_option("--gamma-center", o.gamma_center, "centre gyromagnetic ratio (MHz/T)"));
  o.opt.emplace("j-coupling", app->add_option("--j-coupling", o.j_coupling, "coupling constant (Hz)"));
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("priming must be true or false, got '" + s + "'");
}

RunConfig build_config(const Overrides& o) {
  RunConfig c;
  if (o.given("config")) {
    if (o.given("preset")) throw ConfigError("preset: give either --config or --preset, not both");
    c = load_config(o.config_path);
  } else {
    c = preset_config(o.given("preset") ? o.preset : "tms");
  }
  if (o.given("seed")) c.seed = o.seed;
  if (o.given("out")) c.out = o.out;
  try {
    if (o.given("pulses")) c.pulses = parse_pulse_model(o.pulses);
    if (o.given("sequence")) c.sequence = parse_sequence_kind(o.sequence);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (o.given("priming")) c.priming = parse_bool(o.priming);
  if (o.given("delay")) c.delay = o.delay;
  if (o.given("b0")) c.b0 = o.b0;
  if (o.given("delta-h")) c.delta_h = o.delta_h;
  if (o.given("delta-si")) c.delta_si = o.delta_si;
  if (o.given("gamma-center")) c.system.gamma_center = o.gamma_center;
  if (o.given("j-coupling")) c.system.j_coupling = o.j_coupling;
  c.validate();
  return c;
}

fs::path prepare_out(const RunConfig& c) {
  fs::path dir(c.out);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << config_to_json(c);
  return dir;
}

template <class F>
void write_file(const fs::path& p, F&& f) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  f(os);
}

void write_spectrum_files(const fs::path& dir, const RunConfig& c, const RunResult& r) {
  write_file(dir / "spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, r.spectrum); });
  write_file(dir / "peaks_raw.csv", [&](std::ostream& os) { write_peaks_csv(os, r.peaks); });
  write_file(dir / "peaks.csv", [&](std::ostream& os) { write_peaks_csv(os, r.calibrated); });
  PlotSpec spec;
  spec.title = std::string("Centre-spin spectrum (") + to_string(c.sequence) + ")";
  spec.x_label = "frequency (Hz)";
  spec.y_label = "real part";
  spec.x_column = "freq_hz";
  spec.series = {{"re", "real", false}, {"im", "imaginary", false}};
  const double half = (c.system.n_peripheral + 3) * c.system.j_coupling / 4 + std::abs(c.acquisition.center_offset);
  spec.x_range = std::make_pair(-half, half);
  plot_csv_file((dir / "spectrum.csv").string(), (dir / "spectrum.svg").string(), spec);
}

int cmd_spectrum(const RunConfig& c) {
  const auto dir = prepare_out(c);
  const auto r = run_experiment(c);
  write_spectrum_files(dir, c, r);
  std::printf("ell,magnitude,phase_rad,snr\n");
  for (const auto& p : r.calibrated) std::printf("%d,%.6g,%.6g,%.3g\n", p.ell, std::abs(p.amplitude), p.phase, p.snr);
  std::printf("wrote %s\n", dir.string().c_str());
  return kOk;
}

int cmd_estimate(const RunConfig& c) {
  phase_model(c);
  const auto dir = prepare_out(c);
  const auto r = run_experiment(c);
  const auto est = estimate_field(c, r);
  write_spectrum_files(dir, c, r);
  write_file(dir / "peak_estimates.csv", [&](std::ostream& os) { write_peak_estimates_csv(os, est); });
  const std::string json = estimate_to_json(est);
  write_file(dir / "estimate.json", [&](std::ostream& os) { os << json; });
  PlotSpec spec;
  spec.title = "Per-line field estimates";
  spec.x_label = "ell";
  spec.y_label = "B0 (nT)";
  spec.x_column = "ell";
  spec.series = {{"b0_tesla", "per-line estimate", true}};
  spec.y_error_column = "sigma_tesla";
  spec.y_scale = 1e9;
  plot_csv_file((dir / "peak_estimates.csv").string(), (dir / "peak_estimates.svg").string(), spec);
  std::cout << json;
  if (est.has_flag("degraded") && c.estimator.fail_on_degraded) {
    std::cerr << "estimate flagged degraded\n";
    return kNumerical;
  }
  return kOk;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  // start:stop:count
  if (std::count(s.begin(), s.end(), ':') == 2) {
    double a = 0, b = 0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> a >> c1 >> b >> c2 >> n) || n < 2) throw ConfigError("values: expected start:stop:count with count >= 2");
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
    return out;
  }
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("values: cannot parse '" + cell + "'");
    }
  }
  return out;
}

int cmd_sweep(const RunConfig& c, const std::string& axis_name, const std::string& values_text, int threads) {
  const auto axis = parse_sweep_axis(axis_name);
  const auto values = parse_values(values_text);
  const auto dir = prepare_out(c);
  const auto points = run_sweep(c, axis, values, threads);
  write_file(dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, axis, points); });
  PlotSpec spec;
  spec.title = std::string("Field estimate versus ") + to_string(axis);
  spec.x_label = axis == SweepAxis::b0 ? "B0 (nT)" : std::string(to_string(axis)) + " (Hz)";
  spec.x_scale = axis == SweepAxis::b0 ? 1e9 : 1.0;
  spec.y_label = "estimated B0 (nT)";
  spec.x_column = to_string(axis);
  spec.series = {{"b0_tesla", "estimate", true}};
  spec.y_error_column = "sigma_tesla";
  spec.y_scale = 1e9;
  plot_csv_file((dir / "sweep.csv").string(), (dir / "sweep.svg").string(), spec);
  int failed = 0;
  for (const auto& p : points)
    if (!p.ok) {
      ++failed;
      std::cerr << "point " << p.value << " failed: " << p.error << "\n";
    }
  std::printf("%zu points, %d failed, wrote %s\n", points.size(), failed, dir.string().c_str());
  return failed ? kNumerical : kOk;
}

int cmd_compile(const RunConfig& c) {
  const auto program = compile(build_sequence(c.sequence, c.priming, c.delay, c.system), c.system, {c.pulses});
  const std::string text = program_to_string(program);
  const auto dir = prepare_out(c);
  write_file(dir / "program.txt", [&](std::ostream& os) { os << text; });
  std::cout << text;
  return kOk;
}

int cmd_oracle_check(int n, int trials, std::uint64_t seed) {
  if (n < 1 || n > 4) throw ConfigError("n must lie in 1..4 for the brute-force oracle");
  if (trials < 0) throw ConfigError("trials must be >= 0");
  if (trials == 0) {
    std::cerr << "warning: trials = 0, nothing checked\n";
    std::printf("n=%d trials=0 max_deviation=0 PASS (vacuous)\n", n);
    return kOk;
  }
  const auto report = oracle::equivalence_check(n, trials, seed);
  const bool ok = report.max_deviation <= 1e-10;
  std::printf("n=%d trials=%d max_deviation=%.3e %s\n", n, report.trials, report.max_deviation, ok ? "PASS" : "FAIL");
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-star magnetometry simulator"};
  app.require_subcommand(1);
  Overrides o;
  std::string axis = "delta_center", values;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int n = 2, trials = 100;
  std::uint64_t oracle_seed = 1;

  auto* spectrum = app.add_subcommand("spectrum", "simulate and write the spectrum, peaks and a plot");
  auto* estimate = app.add_subcommand("estimate", "field run plus reference, calibrated and fused");
  auto* sweep = app.add_subcommand("sweep", "estimate over a list of offsets or fields");
  auto* compile_cmd = app.add_subcommand("compile", "write the timed pulse program");
  auto* oracle_cmd = app.add_subcommand("oracle-check", "compare the block engine with the full Hilbert space");
  for (auto* sub : {spectrum, estimate, sweep, compile_cmd}) add_common(sub, o);
  sweep->add_option("--axis", axis, "delta_center, delta_peripheral or b0");
  sweep->add_option("--values", values, "comma list or start:stop:count")->required();
  sweep->add_option("--threads", threads, "worker threads");
  oracle_cmd->add_option("--n", n, "peripheral spins (1..4)");
  oracle_cmd->add_option("--trials", trials, "random sequences");
  oracle_cmd->add_option("--seed", oracle_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (oracle_cmd->parsed()) return cmd_oracle_check(n, trials, oracle_seed);
    const RunConfig c = build_config(o);
    if (spectrum->parsed()) return cmd_spectrum(c);
    if (estimate->parsed()) return cmd_estimate(c);
    if (sweep->parsed()) return cmd_sweep(c, axis, values, threads);
    if (compile_cmd->parsed()) return cmd_compile(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const CompileError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kConfig;
}
