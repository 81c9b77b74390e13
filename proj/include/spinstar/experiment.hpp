#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinstar/field_estimator.hpp"
#include "spinstar/pulse_compiler.hpp"
#include "spinstar/spectro.hpp"

namespace spinstar {

/// Invalid run configuration. The message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimatorConfig {
  /// Offsets the estimator assumes (Hz). They need not match the simulated ones.
  double delta_h = 0.0;
  double delta_si = 0.0;
  double min_snr = 3.0;
  std::optional<PriorRange> prior;
  bool fail_on_degraded = true;
};

struct RunConfig {
  std::string preset = "tms";
  SpinStarSystem system = SpinStarSystem::tms();
  SequenceKind sequence = SequenceKind::seq_b;
  bool priming = false;
  PulseModel pulses = PulseModel::ideal;
  double amplitude_error = 0.0;
  double delay = 0.1;  // s
  double b0 = 0.0;     // T
  double delta_h = 0.0;
  double delta_si = 0.0;
  bool relaxation = true;
  bool phase_cycle = false;
  /// Repeat the run with the peripheral frame stepped through 2N+1 values
  /// after encoding and keep, for each line, only the cat-state coherence order.
  bool order_filter = true;
  AcquisitionParams acquisition;
  Corruption corruption{0.05};
  EstimatorConfig estimator;
  std::uint64_t seed = 1;
  std::string out = "out";

  /// Throws ConfigError.
  void validate() const;
};

/// Defaults for a named preset. "tmp" leaves gamma_center and j_coupling unset
/// (NaN) so that validation insists on them.
RunConfig preset_config(const std::string& preset);

/// Parses a JSON document on top of the preset it names. Unknown keys are rejected.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

struct RunResult {
  PulseProgram program;
  /// Spectrum of the first (unrotated) acquisition of the field run.
  Spectrum spectrum;
  std::vector<PeakMeasurement> peaks;            // field run, raw phases
  std::vector<PeakMeasurement> reference_peaks;  // same sequence at zero delay
  std::vector<PeakMeasurement> calibrated;
};

/// Field run and zero-delay reference, each through the full
/// compile, simulate, acquire, process and extract chain. At most
/// streams_per_run(config) random streams from stream_base on are used.
RunResult run_experiment(const RunConfig& config, std::uint64_t stream_base = 0);
std::uint64_t streams_per_run(const RunConfig& config);

PhaseModel phase_model(const RunConfig& config);
FieldEstimate estimate_field(const RunConfig& config, const RunResult& result);

enum class SweepAxis { delta_center, delta_peripheral, b0 };
SweepAxis parse_sweep_axis(const std::string& s);
const char* to_string(SweepAxis a);

struct SweepPoint {
  double value = 0.0;
  bool ok = false;
  FieldEstimate estimate;
  std::string error;
};

/// Independent runs over `values` on a pool of `threads` workers. Point i uses
/// random streams derived from (config.seed, i) only.
std::vector<SweepPoint> run_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values,
                                  int threads);
/// value,b0_tesla,sigma_tesla,flags,error
void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepPoint>& points);

}  // namespace spinstar
