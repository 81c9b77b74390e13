#include "spinstar/operations.hpp"

namespace spinstar {

const char* to_string(GateKind k) {
  switch (k) {
    case GateKind::hadamard_c: return "hadamard_c";
    case GateKind::hadamard_p: return "hadamard_p";
    case GateKind::not_c: return "not_c";
    case GateKind::not_p: return "not_p";
    case GateKind::z_c: return "z_c";
    case GateKind::z_p: return "z_p";
    case GateKind::cnot_cp: return "cnot_cp";
    case GateKind::cnot_pc_mod: return "cnot_pc_mod";
    case GateKind::rot_c: return "rot_c";
    case GateKind::rot_p: return "rot_p";
  }
  return "unknown";
}

Precession precession(const SpinStarSystem& system, const EvolutionParams& params) {
  return {params.delta_center + system.gamma_center * kMHz * params.b0_offset,
          params.delta_peripheral + system.gamma_peripheral * kMHz * params.b0_offset};
}

}  // namespace spinstar
