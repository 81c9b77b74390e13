#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinstar/dicke_engine.hpp"
#include "spinstar/spin_model.hpp"

namespace spinstar {

/// Receiver imperfections added on top of the ideal signal.
///
/// The quadrature model is I = (1 + g) Re s, Q = (1 - g)(cos q Im s + sin q Re s),
/// so a pure gain imbalance g adds the image term g conj(s).
struct Corruption {
  double noise_sigma = 0.0;  // per real component, per sample
  cplx dc_offset{0.0, 0.0};
  cplx drift{0.0, 0.0};  // added linearly in time, per second
  double gain_imbalance = 0.0;
  double quadrature_phase = 0.0;  // rad
};

struct AcquisitionParams {
  double dwell = 4e-3;  // s
  int n_samples = 2048;
  int zero_fill = 16384;
  /// Centre-line offset from the receiver reference (Hz); line ell sits at
  /// center_offset + ell J / 2.
  double center_offset = 0.0;
  /// Decay rate of the observed single-quantum coherences (1/s).
  double decay_rate = 0.0;
};

struct Fid {
  Eigen::VectorXcd samples;
  double dwell = 0.0;
  double start_time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  Corruption corruption;
};

struct Spectrum {
  Eigen::VectorXd freq;      // Hz, strictly increasing
  Eigen::VectorXcd values;   // dwell-scaled DFT of the apodised FID
  // provenance
  std::string apodization = "hamming";
  int acquired_samples = 0;
  int zero_fill = 0;
  double dwell = 0.0;
  double phase_correction = 0.0;

  double df() const { return 1.0 / (zero_fill * dwell); }
};

struct PeakMeasurement {
  int ell = 0;
  cplx amplitude{0.0, 0.0};
  double phase = 0.0;  // arg(amplitude), in (-pi, pi]
  double frequency = 0.0;
  double snr = 0.0;
  /// 1 sigma phase uncertainty (rad), 1 / snr.
  double phase_sigma = 0.0;
  bool calibrated = true;
};

/// Line positions for every ell, ascending.
std::vector<double> line_frequencies(const SpinStarSystem& system, double center_offset);

/// s(k) = sum_ell amp_ell exp((2 pi i f_ell - R) k dwell) plus corruption and
/// complex Gaussian noise drawn from std::seed_seq{seed, stream}.
Fid synthesize_fid(const std::vector<PeakAmplitude>& peaks, const SpinStarSystem& system,
                   const AcquisitionParams& acq, const Corruption& corruption,
                   std::uint64_t seed, std::uint64_t stream = 0);

/// 0.54 - 0.46 cos(2 pi k / (n - 1))
Eigen::VectorXd hamming(int n);

/// Hamming apodisation, zero fill and DFT, with the axis centred on 0.
Spectrum process(const Fid& fid, int zero_fill);

/// Integrates each line over [f - J/4, f + J/4) and removes the cross-talk
/// between windows using the known processed lineshape. Throws DomainError
/// when the windows are narrower than 3 bins or fall off the axis.
std::vector<PeakMeasurement> extract_peaks(const Spectrum& spectrum, const SpinStarSystem& system,
                                           const AcquisitionParams& acq);

/// extract_peaks with the window layout, deconvolution and model lineshapes
/// prepared once for repeated spectra of the same acquisition geometry.
class PeakExtractor {
 public:
  PeakExtractor(const SpinStarSystem& system, const AcquisitionParams& acq);
  std::vector<PeakMeasurement> operator()(const Spectrum& spectrum) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Subtracts the reference phase of each line from every target. Lines whose
/// reference magnitude is below `threshold` times the largest one are marked
/// uncalibrated and left untouched.
std::vector<std::vector<PeakMeasurement>> calibrate_and_apply_phase(
    const std::vector<PeakMeasurement>& reference,
    const std::vector<std::vector<PeakMeasurement>>& targets, double threshold = 1e-6);

/// sum_k fids[k] exp(-i receiver_phase[k])
Fid combine_phase_cycle(const std::vector<Fid>& fids, const std::vector<double>& receiver_phases);

void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum);
void write_peaks_csv(std::ostream& os, const std::vector<PeakMeasurement>& peaks);

}  // namespace spinstar
