#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spinstar/dicke_engine.hpp"
#include "spinstar/operations.hpp"
#include "spinstar/spin_model.hpp"

namespace spinstar {

/// Raised for gate sequences that cannot be realised on the given system.
class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Gate-level IR

namespace ir {
struct Hadamard { Species species; };
/// Centre-controlled collective NOT on the peripherals.
struct Cnot {
  Species control = Species::center;
  Species target = Species::peripheral;
};
/// Peripheral-controlled NOT on the centre. With N couplings of equal J the
/// conventional CNOT flips the centre iff an odd number of peripherals are
/// down, which disentangles every MSSM line when N is odd.
struct ModCnot {};
struct Not { Species species; };
struct Z { Species species; double angle; };
struct Delay { double duration; };
/// Simultaneous refocusing pi_x pulses on the listed channels.
struct Echo { bool center = true; bool peripheral = true; };
/// Delay of `window` seconds with pi pulses on `species` at window/4 and 3 window/4.
struct PiPair { Species species; double window; };
/// Centre pi/2 pulse about -y that converts the final state to observable
/// coherence.
struct Readout {};
}  // namespace ir

using IrGate = std::variant<ir::Hadamard, ir::Cnot, ir::ModCnot, ir::Not, ir::Z, ir::Delay,
                            ir::Echo, ir::PiPair, ir::Readout>;

struct GateIR {
  std::vector<IrGate> gates;
};

enum class SequenceKind { none, original, seq_a, seq_b };
enum class PulseModel { ideal, hard, bb1 };
enum class PulseShape { hard, bb1 };

const char* to_string(SequenceKind k);
const char* to_string(PulseModel m);
SequenceKind parse_sequence_kind(const std::string& s);
PulseModel parse_pulse_model(const std::string& s);

/// Priming (optional), the cat-state sequence with its mirrored unwinding,
/// and a readout pulse. `none` yields just [priming] + readout.
///
/// A non-zero `order_phase` adds a peripheral Z rotation right after the
/// encoding CNOT. Coherences of peripheral order q then carry exp(i q phase),
/// which lets a stepped acquisition keep only the cat-state pathway.
GateIR build_sequence(SequenceKind kind, bool priming, double delay, const SpinStarSystem& system,
                      double order_phase = 0.0);

// ---------------------------------------------------------------------------
// Timed pulse programs

namespace prim {
struct Pulse {
  Species species = Species::center;
  double angle = 0.0;     // rad
  double phase = 0.0;     // rad, after frame folding
  double duration = 0.0;  // s
  PulseShape shape = PulseShape::hard;
  bool sync = false;      // starts together with the preceding pulse
  bool readout = false;
};
struct Delay {
  double duration = 0.0;
  bool echo = false;  // peripheral spins are refocused across this interval
};
}  // namespace prim

using Primitive = std::variant<prim::Pulse, prim::Delay>;

struct PulseProgram {
  std::vector<Primitive> items;
  /// Z rotations still pending at the end of the program (receiver frame).
  double final_frame_center = 0.0;
  double final_frame_peripheral = 0.0;
  double total_duration = 0.0;
};

struct CompileOptions {
  PulseModel model = PulseModel::ideal;
};

PulseProgram compile(const GateIR& ir, const SpinStarSystem& system,
                     const CompileOptions& options = {});

/// Line-oriented text form, one primitive per line.
void write_program(std::ostream& os, const PulseProgram& program);
std::string program_to_string(const PulseProgram& program);

struct PhaseCycleStep {
  PulseProgram program;
  double receiver_phase = 0.0;
};

/// Four copies with every centre pulse phase stepped by 0, pi/2, pi, 3pi/2 and
/// the receiver co-stepped so that sum_k s_k exp(-i receiver_k) adds coherently.
std::vector<PhaseCycleStep> phase_cycle_variants(const PulseProgram& program);

// ---------------------------------------------------------------------------
// Simulation of IR and programs

/// Ideal-gate simulation of the IR (delays evolve freely).
BlockState simulate_ir(const GateIR& ir, const BlockState& initial, const EvolutionParams& params,
                       const SpinStarSystem& system,
                       const std::optional<RelaxationModel>& relaxation = std::nullopt);

struct ProgramSimOptions {
  PulseModel model = PulseModel::ideal;
  double amplitude_error = 0.0;
  std::optional<RelaxationModel> relaxation;
};

/// Lowers a program to engine operations for the chosen pulse model. Final
/// frames become trailing ideal Z rotations.
std::vector<Operation> lower(const PulseProgram& program, const SpinStarSystem& system,
                             PulseModel model, double amplitude_error = 0.0);

BlockState simulate_program(const PulseProgram& program, const BlockState& initial,
                            const EvolutionParams& params, const SpinStarSystem& system,
                            const ProgramSimOptions& options = {});

}  // namespace spinstar
