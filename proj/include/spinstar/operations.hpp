#pragma once

// Plain descriptions of the operations both simulators understand. These are
// data only; each simulator owns its own evolution kernels.

#include <string>
#include <variant>
#include <vector>

#include "spinstar/spin_model.hpp"

namespace spinstar {

enum class GateKind {
  hadamard_c,
  hadamard_p,
  not_c,
  not_p,
  z_c,
  z_p,
  cnot_cp,      // collective NOT on the peripherals when the centre is |1>
  cnot_pc_mod,  // centre NOT iff the number of down peripherals is odd
  rot_c,
  rot_p,
};

const char* to_string(GateKind k);

/// Ideal instantaneous gate. `angle` is used by z_* and rot_*, `phase` (the
/// rotation axis azimuth in the xy plane) by rot_* only.
struct IdealGate {
  GateKind kind = GateKind::hadamard_c;
  double angle = 0.0;
  double phase = 0.0;
};

/// Field offset and channel detunings felt by the spins.
struct EvolutionParams {
  double b0_offset = 0.0;         // T, offset from the nominal field
  double delta_peripheral = 0.0;  // Hz
  double delta_center = 0.0;      // Hz
  double duration = 0.0;          // s
};

/// Rotating-frame precession frequencies (Hz) of the two species.
struct Precession {
  double center = 0.0;
  double peripheral = 0.0;
};

Precession precession(const SpinStarSystem& system, const EvolutionParams& params);

/// Constant-amplitude RF applied to one species.
struct Drive {
  Species species = Species::center;
  double nutation_hz = 0.0;
  double phase_rad = 0.0;
  double carrier_offset_hz = 0.0;
};

/// Interval of constant RF (possibly on both channels at once).
struct PulseSegment {
  std::vector<Drive> drives;
  double duration = 0.0;
};

struct FreeEvolution {
  double duration = 0.0;
  /// Peripheral dephasing is refocused; relaxation then uses the echo rate.
  bool echo = false;
};

using Operation = std::variant<IdealGate, PulseSegment, FreeEvolution>;

}  // namespace spinstar
