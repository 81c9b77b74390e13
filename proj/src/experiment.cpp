#include "spinstar/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace spinstar {

using nlohmann::json;

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "config must be a JSON object" : where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  const std::string name = where.empty() ? key : where + "." + key;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!obj.at(key).is_number()) throw ConfigError(name + " must be a number");
    }
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(name + " has the wrong type");
  }
}

cplx read_complex(const json& obj, const char* key, const std::string& where, cplx def) {
  if (!obj.contains(key)) return def;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + "." + key + " must be [re, im]");
  return {v[0].get<double>(), v[1].get<double>()};
}

template <class F>
auto named(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

RunConfig preset_config(const std::string& preset) {
  RunConfig c;
  c.preset = preset;
  if (preset == "tms") {
    c.system = SpinStarSystem::tms();
  } else if (preset == "tmp") {
    c.system = SpinStarSystem::tms();
    c.system.n_peripheral = 9;
    c.system.gamma_center = kUnset;
    c.system.j_coupling = kUnset;
  } else {
    throw ConfigError("preset must be 'tms' or 'tmp', got '" + preset + "'");
  }
  return c;
}

void RunConfig::validate() const {
  if (std::isnan(system.gamma_center)) throw ConfigError("system.gamma_center is required for preset " + preset);
  if (std::isnan(system.j_coupling)) throw ConfigError("system.j_coupling is required for preset " + preset);
  try {
    system.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  require(delay >= 0.0 && std::isfinite(delay), "delay must be >= 0");
  require(std::isfinite(b0), "b0 must be finite");
  require(std::isfinite(delta_h) && std::isfinite(delta_si), "delta_h and delta_si must be finite");
  require(amplitude_error > -1.0 && std::isfinite(amplitude_error), "amplitude_error must be > -1");
  if (sequence == SequenceKind::seq_a && system.n_peripheral % 2 == 0)
    throw ConfigError("sequence: sequence a needs an odd number of peripheral spins");
  require(acquisition.dwell > 0.0, "acquisition.dwell must be > 0");
  require(acquisition.n_samples > 1, "acquisition.n_samples must be > 1");
  require(acquisition.zero_fill >= acquisition.n_samples && (acquisition.zero_fill & (acquisition.zero_fill - 1)) == 0,
          "acquisition.zero_fill must be a power of two >= n_samples");
  require(corruption.noise_sigma >= 0.0, "corruption.noise_sigma must be >= 0");
  require(std::abs(corruption.gain_imbalance) < 1.0, "corruption.gain_imbalance must lie in (-1, 1)");
  require(estimator.min_snr >= 0.0, "estimator.min_snr must be >= 0");
  if (estimator.prior) require(estimator.prior->lo < estimator.prior->hi, "estimator.prior must satisfy lo < hi");
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, "", {"preset", "system", "sequence", "priming", "pulses", "amplitude_error", "delay", "b0",
                           "delta_h", "delta_si", "relaxation", "phase_cycle", "order_filter", "acquisition", "corruption",
                           "estimator", "seed", "out"});
  std::string preset = "tms";
  read(doc, "preset", "", preset);
  RunConfig c = preset_config(preset);

  if (doc.contains("system")) {
    const auto& s = doc.at("system");
    reject_unknown(s, "system", {"n_peripheral", "gamma_center", "gamma_peripheral", "j_coupling", "t1_center",
                                 "t2_center", "t1_peripheral", "t2_peripheral", "t2star_peripheral", "t2star_noon",
                                 "pulse_pi2_center", "pulse_pi2_peripheral"});
    auto& y = c.system;
    read(s, "n_peripheral", "system", y.n_peripheral);
    read(s, "gamma_center", "system", y.gamma_center);
    read(s, "gamma_peripheral", "system", y.gamma_peripheral);
    read(s, "j_coupling", "system", y.j_coupling);
    read(s, "t1_center", "system", y.t1_center);
    read(s, "t2_center", "system", y.t2_center);
    read(s, "t1_peripheral", "system", y.t1_peripheral);
    read(s, "t2_peripheral", "system", y.t2_peripheral);
    read(s, "t2star_peripheral", "system", y.t2star_peripheral);
    read(s, "t2star_noon", "system", y.t2star_noon);
    read(s, "pulse_pi2_center", "system", y.pulse_pi2_center);
    read(s, "pulse_pi2_peripheral", "system", y.pulse_pi2_peripheral);
  }
  std::string text;
  if (doc.contains("sequence")) {
    read(doc, "sequence", "", text);
    c.sequence = named("sequence", [&] { return parse_sequence_kind(text); });
  }
  if (doc.contains("pulses")) {
    read(doc, "pulses", "", text);
    c.pulses = named("pulses", [&] { return parse_pulse_model(text); });
  }
  read(doc, "priming", "", c.priming);
  read(doc, "amplitude_error", "", c.amplitude_error);
  read(doc, "delay", "", c.delay);
  read(doc, "b0", "", c.b0);
  read(doc, "delta_h", "", c.delta_h);
  read(doc, "delta_si", "", c.delta_si);
  read(doc, "relaxation", "", c.relaxation);
  read(doc, "phase_cycle", "", c.phase_cycle);
  read(doc, "order_filter", "", c.order_filter);
  read(doc, "seed", "", c.seed);
  read(doc, "out", "", c.out);

  if (doc.contains("acquisition")) {
    const auto& a = doc.at("acquisition");
    reject_unknown(a, "acquisition", {"dwell", "n_samples", "zero_fill", "center_offset"});
    read(a, "dwell", "acquisition", c.acquisition.dwell);
    read(a, "n_samples", "acquisition", c.acquisition.n_samples);
    read(a, "zero_fill", "acquisition", c.acquisition.zero_fill);
    read(a, "center_offset", "acquisition", c.acquisition.center_offset);
  }
  if (doc.contains("corruption")) {
    const auto& k = doc.at("corruption");
    reject_unknown(k, "corruption", {"noise_sigma", "dc_offset", "drift", "gain_imbalance", "quadrature_phase"});
    read(k, "noise_sigma", "corruption", c.corruption.noise_sigma);
    c.corruption.dc_offset = read_complex(k, "dc_offset", "corruption", c.corruption.dc_offset);
    c.corruption.drift = read_complex(k, "drift", "corruption", c.corruption.drift);
    read(k, "gain_imbalance", "corruption", c.corruption.gain_imbalance);
    read(k, "quadrature_phase", "corruption", c.corruption.quadrature_phase);
  }
  if (doc.contains("estimator")) {
    const auto& e = doc.at("estimator");
    reject_unknown(e, "estimator", {"delta_h", "delta_si", "min_snr", "prior", "fail_on_degraded"});
    read(e, "delta_h", "estimator", c.estimator.delta_h);
    read(e, "delta_si", "estimator", c.estimator.delta_si);
    read(e, "min_snr", "estimator", c.estimator.min_snr);
    read(e, "fail_on_degraded", "estimator", c.estimator.fail_on_degraded);
    if (e.contains("prior")) {
      const cplx p = read_complex(e, "prior", "estimator", {});
      c.estimator.prior = PriorRange{p.real(), p.imag()};
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["preset"] = c.preset;
  const auto& y = c.system;
  j["system"] = {{"n_peripheral", y.n_peripheral},
                 {"gamma_center", y.gamma_center},
                 {"gamma_peripheral", y.gamma_peripheral},
                 {"j_coupling", y.j_coupling},
                 {"t1_center", y.t1_center},
                 {"t2_center", y.t2_center},
                 {"t1_peripheral", y.t1_peripheral},
                 {"t2_peripheral", y.t2_peripheral},
                 {"t2star_peripheral", y.t2star_peripheral},
                 {"t2star_noon", y.t2star_noon},
                 {"pulse_pi2_center", y.pulse_pi2_center},
                 {"pulse_pi2_peripheral", y.pulse_pi2_peripheral}};
  j["sequence"] = to_string(c.sequence);
  j["priming"] = c.priming;
  j["pulses"] = to_string(c.pulses);
  j["amplitude_error"] = c.amplitude_error;
  j["delay"] = c.delay;
  j["b0"] = c.b0;
  j["delta_h"] = c.delta_h;
  j["delta_si"] = c.delta_si;
  j["relaxation"] = c.relaxation;
  j["phase_cycle"] = c.phase_cycle;
  j["order_filter"] = c.order_filter;
  j["acquisition"] = {{"dwell", c.acquisition.dwell},
                      {"n_samples", c.acquisition.n_samples},
                      {"zero_fill", c.acquisition.zero_fill},
                      {"center_offset", c.acquisition.center_offset}};
  j["corruption"] = {{"noise_sigma", c.corruption.noise_sigma},
                     {"dc_offset", {c.corruption.dc_offset.real(), c.corruption.dc_offset.imag()}},
                     {"drift", {c.corruption.drift.real(), c.corruption.drift.imag()}},
                     {"gain_imbalance", c.corruption.gain_imbalance},
                     {"quadrature_phase", c.corruption.quadrature_phase}};
  nlohmann::ordered_json e = {{"delta_h", c.estimator.delta_h},
                              {"delta_si", c.estimator.delta_si},
                              {"min_snr", c.estimator.min_snr},
                              {"fail_on_degraded", c.estimator.fail_on_degraded}};
  if (c.estimator.prior) e["prior"] = {c.estimator.prior->lo, c.estimator.prior->hi};
  j["estimator"] = e;
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j.dump(2) + "\n";
}

namespace {

int order_steps(const RunConfig& c) {
  return c.order_filter && c.sequence != SequenceKind::none ? 2 * c.system.n_peripheral + 1 : 1;
}

}  // namespace

std::uint64_t streams_per_run(const RunConfig& config) { return 8 * static_cast<std::uint64_t>(order_steps(config)); }

RunResult run_experiment(const RunConfig& config, std::uint64_t stream_base) {
  config.validate();
  const auto& sys = config.system;
  const EvolutionParams params{config.b0, config.delta_h, config.delta_si, 0.0};
  ProgramSimOptions sim{config.pulses, config.amplitude_error, std::nullopt};
  if (config.relaxation) sim.relaxation = RelaxationModel::from_system(sys);
  AcquisitionParams acq = config.acquisition;
  acq.decay_rate = sim.relaxation ? sim.relaxation->coherence_rate(1, 0) : 0.0;

  auto acquire = [&](const PulseProgram& program, std::uint64_t stream) {
    const auto state = simulate_program(program, thermal_state(sys), params, sys, sim);
    return synthesize_fid(measure_center_peaks(state), sys, acq, config.corruption, config.seed, stream);
  };
  auto spectrum_for = [&](double delay, double order_phase, std::uint64_t stream, PulseProgram* program_out) {
    const auto program =
        compile(build_sequence(config.sequence, config.priming, delay, sys, order_phase), sys, {config.pulses});
    Fid fid;
    if (config.phase_cycle) {
      std::vector<Fid> fids;
      std::vector<double> rx;
      std::uint64_t s = stream;
      for (const auto& step : phase_cycle_variants(program)) {
        fids.push_back(acquire(step.program, s++));
        rx.push_back(step.receiver_phase);
      }
      fid = combine_phase_cycle(fids, rx);
    } else {
      fid = acquire(program, stream);
    }
    if (program_out) *program_out = program;
    return process(fid, acq.zero_fill);
  };
  const int steps = order_steps(config);
  const PeakExtractor extract(sys, acq);
  auto measure = [&](double delay, std::uint64_t stream, PulseProgram* program_out, Spectrum* spectrum_out) {
    std::vector<cplx> sum;
    std::vector<double> var;
    std::vector<PeakMeasurement> out;
    for (int k = 0; k < steps; ++k) {
      const double psi = kTwoPi * k / steps;
      const Spectrum s = spectrum_for(delay, psi, stream + 4 * k, k == 0 ? program_out : nullptr);
      if (k == 0 && spectrum_out) *spectrum_out = s;
      const auto peaks = extract(s);
      if (steps == 1) return peaks;
      if (k == 0) {
        out = peaks;
        sum.assign(peaks.size(), 0.0);
        var.assign(peaks.size(), 0.0);
      }
      for (std::size_t i = 0; i < peaks.size(); ++i) {
        sum[i] += peaks[i].amplitude * std::polar(1.0, psi * peaks[i].ell);
        const double sd = peaks[i].snr > 0.0 ? std::abs(peaks[i].amplitude) / peaks[i].snr : 0.0;
        var[i] += sd * sd;
      }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto& p = out[i];
      p.amplitude = sum[i] / static_cast<double>(steps);
      p.phase = std::arg(p.amplitude);
      const double sd = std::sqrt(var[i]) / steps, mag = std::abs(p.amplitude);
      p.snr = mag == 0.0 ? 0.0 : (sd > 0.0 ? std::min(mag / sd, 1e12) : 1e12);
      p.phase_sigma = p.snr > 0.0 ? 1.0 / p.snr : std::numeric_limits<double>::infinity();
    }
    return out;
  };

  RunResult r;
  const std::uint64_t half = streams_per_run(config) / 2;
  r.peaks = measure(config.delay, stream_base, &r.program, &r.spectrum);
  r.reference_peaks = measure(0.0, stream_base + half, nullptr, nullptr);
  r.calibrated = calibrate_and_apply_phase(r.reference_peaks, {r.peaks}).front();
  return r;
}

PhaseModel phase_model(const RunConfig& config) {
  EstimatorMode mode;
  switch (config.sequence) {
    case SequenceKind::original: mode = EstimatorMode::original; break;
    case SequenceKind::seq_a: mode = EstimatorMode::seq_a; break;
    case SequenceKind::seq_b: mode = EstimatorMode::seq_b; break;
    default: throw ConfigError("sequence: field estimation needs original, a or b");
  }
  if (!(config.delay > 0.0)) throw ConfigError("delay must be > 0 for field estimation");
  // The zero-delay reference still holds the refocusing pulses of the delay
  // window, so only the extra program time separates the two runs.
  auto duration = [&](double delay) {
    return compile(build_sequence(config.sequence, config.priming, delay, config.system), config.system,
                   {config.pulses})
        .total_duration;
  };
  const double effective = duration(config.delay) - duration(0.0);
  if (!(effective > 0.0)) throw ConfigError("delay is shorter than the refocusing pulses it contains");
  return {mode, effective, config.estimator.delta_h, config.estimator.delta_si};
}

FieldEstimate estimate_field(const RunConfig& config, const RunResult& result) {
  FuseOptions o;
  o.prior = config.estimator.prior;
  o.min_snr = config.estimator.min_snr;
  return fuse(result.calibrated, phase_model(config), config.system, o);
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "delta_center" || s == "delta_si") return SweepAxis::delta_center;
  if (s == "delta_peripheral" || s == "delta_h") return SweepAxis::delta_peripheral;
  if (s == "b0") return SweepAxis::b0;
  throw ConfigError("axis must be delta_center, delta_peripheral or b0, got '" + s + "'");
}

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::delta_center: return "delta_center";
    case SweepAxis::delta_peripheral: return "delta_peripheral";
    case SweepAxis::b0: return "b0";
  }
  return "?";
}

std::vector<SweepPoint> run_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values,
                                  int threads) {
  if (values.size() < 2) throw ConfigError("values: a sweep needs at least two values");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  config.validate();
  phase_model(config);

  std::vector<SweepPoint> points(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < values.size();) {
      SweepPoint& p = points[i];
      p.value = values[i];
      RunConfig c = config;
      switch (axis) {
        case SweepAxis::delta_center: c.delta_si = values[i]; break;
        case SweepAxis::delta_peripheral: c.delta_h = values[i]; break;
        case SweepAxis::b0: c.b0 = values[i]; break;
      }
      try {
        p.estimate = estimate_field(c, run_experiment(c, streams_per_run(c) * static_cast<std::uint64_t>(i)));
        p.ok = true;
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
  };
  const int n = std::min<int>(threads, static_cast<int>(values.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return points;
}

void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepPoint>& points) {
  os << to_string(axis) << ",b0_tesla,sigma_tesla,flags,error\n";
  char buf[128];
  for (const auto& p : points) {
    std::string flags, error = p.error;
    for (const auto& f : p.estimate.flags) flags += (flags.empty() ? "" : ";") + f;
    for (char& ch : error)
      if (ch == ',' || ch == '\n') ch = ';';
    if (p.ok)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,", p.value, p.estimate.b0, p.estimate.sigma);
    else
      std::snprintf(buf, sizeof buf, "%.17g,nan,nan,", p.value);
    os << buf << flags << ',' << error << '\n';
  }
}

}  // namespace spinstar
