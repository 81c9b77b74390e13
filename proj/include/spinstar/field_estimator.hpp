#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spinstar/spectro.hpp"
#include "spinstar/spin_model.hpp"

namespace spinstar {

/// How the phase of line ell depends on the field. `original` keeps the centre
/// entangled during the delay; seq_a and seq_b disentangle it.
enum class EstimatorMode { original, seq_a, seq_b };

const char* to_string(EstimatorMode m);
EstimatorMode parse_estimator_mode(const std::string& s);
inline bool disentangled(EstimatorMode m) { return m != EstimatorMode::original; }

struct PhaseModel {
  EstimatorMode mode = EstimatorMode::original;
  double delay = 0.0;             // s
  double delta_peripheral = 0.0;  // Hz, as known to the estimator
  double delta_center = 0.0;      // Hz, as known to the estimator

  void validate() const;
};

/// Field sensitivity of line ell in Hz/T: ell gamma_p + gamma_c, or ell gamma_p
/// when disentangled.
double phase_rate_coefficient(int ell, const SpinStarSystem& system, EstimatorMode mode);

/// Priming gain 1 + gamma_R ell.
double amplification(int ell, const SpinStarSystem& system);

/// Deterministic coupling phase accrued during the delay. Zero for the
/// original sequence and for seq_b; for seq_a the centre sits in m_c = +-1/2
/// depending on the parity of the flipped branch.
double j_phase(int ell, const PhaseModel& model, const SpinStarSystem& system);

/// Phase of line ell (unwrapped) for a field offset b0.
double expected_phase(int ell, double b0, const PhaseModel& model, const SpinStarSystem& system);

struct PriorRange {
  double lo = 0.0;  // T
  double hi = 0.0;
  double center() const { return 0.5 * (lo + hi); }
};

/// Branch k solution for a measured phase.
double candidate(int ell, double phase, int k, const PhaseModel& model, const SpinStarSystem& system);

/// All branch solutions inside the prior, k ascending. Empty when the line
/// carries no field information.
std::vector<double> peak_candidates(const PeakMeasurement& m, const PhaseModel& model,
                                    const SpinStarSystem& system, const PriorRange& prior);

struct PeakEstimate {
  int ell = 0;
  double phase = 0.0;
  double coefficient = 0.0;  // Hz/T
  bool used = false;
  int k = 0;
  double b0 = 0.0;      // chosen branch
  double sigma = 0.0;   // T
  double weight = 0.0;  // 1/T^2
};

struct FieldEstimate {
  double b0 = 0.0;
  double sigma = 0.0;
  std::vector<PeakEstimate> peaks;
  std::vector<std::string> flags;

  bool has_flag(const std::string& f) const;
};

struct FuseOptions {
  std::optional<PriorRange> prior;
  /// Lines with lower SNR are left out of the fit.
  double min_snr = 3.0;
  /// Only lines with |ell| <= max_abs_ell take part (negative: all).
  int max_abs_ell = -1;
  /// Consistency threshold in units of each line's own sigma.
  double consistency_sigmas = 3.0;
};

/// Coarse-to-fine unwrapping from the least to the most sensitive line,
/// followed by an inverse-variance weighted mean.
FieldEstimate fuse(const std::vector<PeakMeasurement>& peaks, const PhaseModel& model,
                   const SpinStarSystem& system, const FuseOptions& options = {});

/// Half the branch spacing of the least field-sensitive usable line, centred on 0.
PriorRange default_prior(const std::vector<int>& ells, const PhaseModel& model, const SpinStarSystem& system);

struct SensitivityRow {
  int ell = 0;
  double coefficient = 0.0;  // Hz/T
  double vs_center = 0.0;
  double vs_peripheral = 0.0;
  double amplification = 0.0;
};

struct SensitivityReport {
  EstimatorMode mode = EstimatorMode::original;
  std::vector<SensitivityRow> rows;
  /// N independent peripheral spins improve on one by sqrt(N); the cat state by N.
  double standard_quantum_limit = 0.0;
  double heisenberg_limit = 0.0;
};

SensitivityReport sensitivity_report(const SpinStarSystem& system, EstimatorMode mode);
void write_sensitivity_csv(std::ostream& os, const SensitivityReport& report);

/// JSON record: b0_tesla, sigma_tesla, peaks[] (ell, phase_rad, k, weight), flags[].
std::string estimate_to_json(const FieldEstimate& estimate);
/// Per-line estimates: ell,phase_rad,coefficient_hz_per_t,used,k,b0_tesla,sigma_tesla,weight
void write_peak_estimates_csv(std::ostream& os, const FieldEstimate& estimate);

}  // namespace spinstar
