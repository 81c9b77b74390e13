#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "spinstar/operations.hpp"
#include "spinstar/spin_model.hpp"

namespace spinstar {

using cplx = std::complex<double>;

/// One collective-spin sector of the density matrix, in the basis
/// |m_c> (x) |J, m_J> with m_c = +1/2 first and m_J running from J down to -J.
struct Block {
  DickeSector sector;
  Eigen::MatrixXcd rho;

  int half_dim() const { return sector.two_j + 1; }
  /// Row/column of |m_c, m_J>. `center_up` selects m_c = +1/2; two_m = 2 m_J.
  int index(bool center_up, int two_m) const {
    return (center_up ? 0 : half_dim()) + (sector.two_j - two_m) / 2;
  }
};

/// Deviation density matrix of a spin-star system reduced by permutation
/// symmetry. Each sector's multiplicity acts as a statistical weight.
class BlockState {
 public:
  BlockState() = default;
  explicit BlockState(int n_peripheral);

  int n_peripheral() const { return n_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& blocks() { return blocks_; }

  /// sum_J d_J tr(rho_J)
  cplx weighted_trace() const;
  /// Largest |rho - rho^dagger| element over all blocks.
  double hermiticity_error() const;
  /// Largest elementwise |a - b| over all blocks (unweighted).
  static double max_abs_diff(const BlockState& a, const BlockState& b);

 private:
  int n_ = 0;
  std::vector<Block> blocks_;
};

/// Coherence damping and longitudinal recovery.
///
/// An element with coherence orders (dmc, dm) decays at
/// |dmc| * rate_center + |dm|^alpha * rate_peripheral.
struct RelaxationModel {
  double rate_center = 0.0;      // 1/s
  double rate_peripheral = 0.0;  // 1/s
  double rate_peripheral_echo = 0.0;  // 1/s, inside peripheral echoes
  double alpha = 0.1122;
  double t1_center = 0.0;        // s, <= 0 disables recovery of that part
  double t1_peripheral = 0.0;
  bool t1_recovery = false;

  /// Defaults calibrated from the proton and NOON T2* values.
  static RelaxationModel from_system(const SpinStarSystem& system);
  void validate() const;
  double coherence_rate(int dmc, int dm) const;
};

/// High-temperature thermal deviation, (g_c 2m_c + g_p 2m_J) / |g_c| per
/// basis state.
BlockState thermal_state(const SpinStarSystem& system);

/// Centre up, peripheral register projected onto lopsidedness `ell`.
BlockState pseudopure_state(const SpinStarSystem& system, int ell);

BlockState apply_ideal_gate(const BlockState& state, const IdealGate& gate);

/// Free precession; the element phase advances by
/// 2 pi t [nu_c dmc + nu_p dm + J (m_c m - m_c' m')].
BlockState free_evolve(const BlockState& state, const EvolutionParams& params,
                       const SpinStarSystem& system);

/// Evolves through one constant-RF segment under the full rotating-frame
/// Hamiltonian (offsets, coupling and RF on the driven channels).
BlockState apply_segment(const BlockState& state, const PulseSegment& segment,
                         const EvolutionParams& params, const SpinStarSystem& system);

BlockState finite_pulse(const BlockState& state, Species species, double nutation_hz,
                        double duration_s, double rf_phase_rad, double carrier_offset_hz,
                        const EvolutionParams& params, const SpinStarSystem& system);

/// Phase of the BB1 correction sequence for a target rotation angle.
double bb1_phase(double target_angle);

/// BB1 segments theta_phi, pi_{phi+p1}, 2pi_{phi+3p1}, pi_{phi+p1} at a fixed
/// nominal nutation; `amplitude_error` scales the delivered nutation.
std::vector<Drive> bb1_drives(Species species, double target_angle, double rf_phase,
                              double nutation_hz, double amplitude_error,
                              std::vector<double>* durations);

BlockState bb1_pulse(const BlockState& state, Species species, double target_angle,
                     double rf_phase, double nutation_hz, const EvolutionParams& params,
                     const SpinStarSystem& system, double amplitude_error = 0.0);

/// Hard pulse equivalent of bb1_pulse, with the same amplitude error model.
BlockState plain_pulse(const BlockState& state, Species species, double target_angle,
                       double rf_phase, double nutation_hz, const EvolutionParams& params,
                       const SpinStarSystem& system, double amplitude_error = 0.0);

BlockState relax(const BlockState& state, double duration, const RelaxationModel& model,
                 const SpinStarSystem& system);

BlockState apply(const BlockState& state, const Operation& op, const EvolutionParams& params,
                 const SpinStarSystem& system);

struct PeakAmplitude {
  int ell = 0;
  cplx amplitude;
};

/// Multiplicity-weighted <+1/2, m| rho |-1/2, m> for each line, ell ascending.
std::vector<PeakAmplitude> measure_center_peaks(const BlockState& state);

// Spin-J building blocks, exposed for tests.
Eigen::MatrixXcd spin_jz(int two_j);
Eigen::MatrixXcd spin_jx(int two_j);
Eigen::MatrixXcd spin_jy(int two_j);
/// exp(-i angle (cos(phase) Jx + sin(phase) Jy))
Eigen::MatrixXcd spin_rotation(int two_j, double phase, double angle);

}  // namespace spinstar
