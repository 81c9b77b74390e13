#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "spinstar/pulse_compiler.hpp"

using namespace spinstar;

namespace {

struct Timed {
  double start;
  prim::Pulse pulse;
};

// Start time of every pulse, with sync pulses sharing the previous start.
std::vector<Timed> pulse_times(const PulseProgram& p) {
  std::vector<Timed> out;
  double t = 0.0, last_start = 0.0;
  for (const auto& it : p.items) {
    if (const auto* d = std::get_if<prim::Delay>(&it)) {
      t += d->duration;
    } else {
      const auto& pulse = std::get<prim::Pulse>(it);
      if (pulse.sync) {
        out.push_back({last_start, pulse});
      } else {
        last_start = t;
        out.push_back({t, pulse});
        t += pulse.duration;
      }
    }
  }
  return out;
}

double max_peak_diff(const BlockState& a, const BlockState& b) {
  const auto pa = measure_center_peaks(a), pb = measure_center_peaks(b);
  double worst = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k) worst = std::max(worst, std::abs(pa[k].amplitude - pb[k].amplitude));
  return worst;
}

SpinStarSystem tmp() { return SpinStarSystem::tmp(17.235, 11.0); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Compile, CnotEchoTiming) {
  const auto sys = SpinStarSystem::tms();
  GateIR ir;
  ir.gates = {ir::Cnot{}};
  const auto prog = compile(ir, sys);
  EXPECT_NEAR(prog.total_duration, 1.0 / (2 * 6.63), 1e-15);
  EXPECT_NEAR(prog.total_duration * 1e3, 75.41, 5e-3);
  const auto times = pulse_times(prog);
  // H_p, two simultaneous pi pairs, H_p.
  ASSERT_EQ(times.size(), 6u);
  EXPECT_EQ(times[0].pulse.species, Species::peripheral);
  EXPECT_NEAR(times[0].pulse.angle, kPi / 2, 1e-15);
  for (int k : {1, 3}) {
    EXPECT_EQ(times[k].pulse.species, Species::center);
    EXPECT_EQ(times[k + 1].pulse.species, Species::peripheral);
    EXPECT_TRUE(times[k + 1].pulse.sync);
    EXPECT_NEAR(times[k].pulse.angle, kPi, 1e-15);
  }
  EXPECT_NEAR(times[1].start, 1.0 / (8 * 6.63), 1e-15);
  EXPECT_NEAR(times[3].start, 3.0 / (8 * 6.63), 1e-15);
  EXPECT_NEAR(times[1].start * 1e3, 18.85, 5e-3);
  EXPECT_NEAR(times[3].start * 1e3, 56.56, 5e-3);
}

TEST(Compile, CnotHardPulsesAreCentredAndStretched) {
  const auto sys = SpinStarSystem::tms();
  GateIR ir;
  ir.gates = {ir::Cnot{}};
  const auto prog = compile(ir, sys, {PulseModel::hard});
  const auto times = pulse_times(prog);
  ASSERT_EQ(times.size(), 6u);
  const double d = 2 * sys.pulse_pi2_peripheral;
  EXPECT_DOUBLE_EQ(times[1].pulse.duration, d);
  EXPECT_DOUBLE_EQ(times[2].pulse.duration, d);
  const double h = sys.pulse_pi2_peripheral;
  EXPECT_NEAR(times[1].start + d / 2 - h, 1.0 / (8 * 6.63), 1e-12);
  EXPECT_NEAR(times[3].start + d / 2 - h, 3.0 / (8 * 6.63), 1e-12);
  EXPECT_NEAR(prog.total_duration, 1.0 / (2 * 6.63) + 2 * h, 1e-12);
}

TEST(Compile, FrameFolding) {
  const auto sys = SpinStarSystem::tms();
  GateIR ir;
  ir.gates = {ir::Z{Species::center, kPi / 2}, ir::Readout{}};
  const auto prog = compile(ir, sys);
  ASSERT_EQ(prog.items.size(), 1u);
  const auto& p = std::get<prim::Pulse>(prog.items[0]);
  EXPECT_NEAR(p.phase, -kPi / 2 - kPi / 2 + kTwoPi, 1e-15);  // -pi wraps to pi

  GateIR x;
  x.gates = {ir::Z{Species::center, kPi / 2}, ir::Not{Species::center}};
  const auto px = compile(x, sys);
  ASSERT_EQ(px.items.size(), 1u);
  EXPECT_NEAR(std::get<prim::Pulse>(px.items[0]).phase, -kPi / 2, 1e-15);
  EXPECT_DOUBLE_EQ(px.final_frame_center, kPi / 2);
}

TEST(Compile, ModCnotRejectsEvenN) {
  GateIR ir;
  ir.gates = {ir::ModCnot{}};
  EXPECT_THROW(compile(ir, SpinStarSystem::tms()), CompileError);
  EXPECT_NO_THROW(compile(ir, tmp()));
}

TEST(Compile, RejectsPeripheralControlledCnot) {
  GateIR ir;
  ir.gates = {ir::Cnot{Species::peripheral, Species::center}};
  EXPECT_THROW(compile(ir, SpinStarSystem::tms()), CompileError);
}

TEST(Compile, NoStandaloneFramePrimitives) {
  const auto sys = tmp();
  for (auto kind : {SequenceKind::none, SequenceKind::original, SequenceKind::seq_a, SequenceKind::seq_b}) {
    const auto prog = compile(build_sequence(kind, true, 0.3, sys), sys, {PulseModel::bb1});
    for (const auto& it : prog.items) {
      if (const auto* p = std::get_if<prim::Pulse>(&it)) {
        EXPECT_GT(p->angle, 0.0);
        EXPECT_GT(p->duration, 0.0);
      }
    }
  }
}

TEST(Compile, DeterministicAndLongerThanDelay) {
  const auto sys = SpinStarSystem::tms();
  for (double t : {0.0, 0.01, 1.0}) {
    for (auto model : {PulseModel::ideal, PulseModel::hard, PulseModel::bb1}) {
      const auto ir = build_sequence(SequenceKind::seq_b, true, t, sys);
      const auto a = compile(ir, sys, {model});
      const auto b = compile(ir, sys, {model});
      EXPECT_EQ(program_to_string(a), program_to_string(b));
      EXPECT_GE(a.total_duration, t);
    }
  }
}

TEST(BuildSequence, OriginalZeroDelayIsThermalReadout) {
  const auto sys = SpinStarSystem::tms();
  const auto thermal = thermal_state(sys);
  const auto readout = apply_ideal_gate(thermal, {GateKind::rot_c, kPi / 2, -kPi / 2});
  const auto prog = compile(build_sequence(SequenceKind::original, false, 0.0, sys), sys);
  const auto out = simulate_program(prog, thermal, {}, sys);
  const auto a = measure_center_peaks(out), b = measure_center_peaks(readout);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LT(std::abs(a[k].amplitude - b[k].amplitude), 1e-9);
}

TEST(BuildSequence, SeqBWithPriming) {
  const auto sys = SpinStarSystem::tms();
  const auto ir = build_sequence(SequenceKind::seq_b, true, 1.0, sys);
  ASSERT_EQ(ir.gates.size(), 7u);
  EXPECT_TRUE(std::holds_alternative<ir::Cnot>(ir.gates[0]));
  EXPECT_TRUE(std::holds_alternative<ir::Hadamard>(ir.gates[1]));
  EXPECT_TRUE(std::holds_alternative<ir::Cnot>(ir.gates[2]));
  const auto& pair = std::get<ir::PiPair>(ir.gates[3]);
  EXPECT_EQ(pair.species, Species::center);
  EXPECT_DOUBLE_EQ(pair.window, 1.0);
  EXPECT_TRUE(std::holds_alternative<ir::Cnot>(ir.gates[4]));
  EXPECT_TRUE(std::holds_alternative<ir::Hadamard>(ir.gates[5]));
  EXPECT_TRUE(std::holds_alternative<ir::Readout>(ir.gates[6]));

  // Centre pi pulses at 0.25 s and 0.75 s after the delay opens, which is
  // after two CNOT windows.
  const auto times = pulse_times(compile(ir, sys));
  std::vector<double> lone_center_pi;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const bool synced = k + 1 < times.size() && times[k + 1].pulse.sync;
    if (times[k].pulse.species == Species::center && !synced && std::abs(times[k].pulse.angle - kPi) < 1e-12)
      lone_center_pi.push_back(times[k].start);
  }
  ASSERT_EQ(lone_center_pi.size(), 2u);
  EXPECT_NEAR(lone_center_pi[0] - 2 * 1.0 / (2 * 6.63), 0.25, 1e-12);
  EXPECT_NEAR(lone_center_pi[1] - 2 * 1.0 / (2 * 6.63), 0.75, 1e-12);
}

TEST(BuildSequence, SeqAOddOnly) {
  EXPECT_THROW(build_sequence(SequenceKind::seq_a, false, 0.1, SpinStarSystem::tms()), CompileError);
  const auto ir = build_sequence(SequenceKind::seq_a, true, 0.1, tmp());
  EXPECT_EQ(ir.gates.size(), 9u);
  EXPECT_NO_THROW(compile(ir, tmp()));
}

TEST(BuildSequence, NoneIsReadoutOnly) {
  const auto ir = build_sequence(SequenceKind::none, false, 0.0, SpinStarSystem::tms());
  ASSERT_EQ(ir.gates.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<ir::Readout>(ir.gates[0]));
  EXPECT_THROW(build_sequence(SequenceKind::original, false, -1.0, SpinStarSystem::tms()), CompileError);
}

TEST(RoundTrip, IdealProgramMatchesIrSimulation) {
  EvolutionParams params;
  params.b0_offset = 7e-9;
  params.delta_center = 3.5;
  params.delta_peripheral = -2.25;
  for (const auto& sys : {SpinStarSystem::tms(), tmp()}) {
    for (auto kind : {SequenceKind::none, SequenceKind::original, SequenceKind::seq_a, SequenceKind::seq_b}) {
      if (kind == SequenceKind::seq_a && sys.n_peripheral % 2 == 0) continue;
      for (bool priming : {false, true}) {
        for (double t : {0.0, 0.013, 0.4}) {
          const auto ir = build_sequence(kind, priming, t, sys);
          const auto st0 = thermal_state(sys);
          const auto a = simulate_ir(ir, st0, params, sys);
          const auto b = simulate_program(compile(ir, sys), st0, params, sys);
          EXPECT_LE(max_peak_diff(a, b), 1e-9) << to_string(kind) << priming << t;
          EXPECT_LE(BlockState::max_abs_diff(a, b), 1e-9);
        }
      }
    }
  }
}

TEST(RoundTrip, GateLevelPieces) {
  const auto sys = tmp();
  EvolutionParams params;
  params.b0_offset = -4e-9;
  params.delta_center = 11.0;
  params.delta_peripheral = 1.0;
  std::vector<IrGate> gates = {ir::Hadamard{Species::peripheral}, ir::Not{Species::peripheral},
                               ir::Z{Species::peripheral, 0.3},    ir::Echo{true, false},
                               ir::Echo{false, true},              ir::Echo{true, true},
                               ir::ModCnot{},                      ir::PiPair{Species::peripheral, 0.2}};
  for (const auto& g : gates) {
    GateIR ir;
    ir.gates = {ir::Hadamard{Species::center}, g, ir::Readout{}};
    const auto st0 = thermal_state(sys);
    EXPECT_LE(BlockState::max_abs_diff(simulate_ir(ir, st0, params, sys),
                                       simulate_program(compile(ir, sys), st0, params, sys)),
              1e-9);
  }
}

TEST(RoundTrip, HardPulsesStayClose) {
  const auto sys = SpinStarSystem::tms();
  EvolutionParams params;
  params.b0_offset = 2e-9;
  const auto ir = build_sequence(SequenceKind::seq_b, true, 0.05, sys);
  const auto st0 = thermal_state(sys);
  const auto a = simulate_ir(ir, st0, params, sys);
  ProgramSimOptions opt;
  opt.model = PulseModel::hard;
  const auto b = simulate_program(compile(ir, sys, {PulseModel::hard}), st0, params, sys, opt);
  const auto pa = measure_center_peaks(a), pb = measure_center_peaks(b);
  for (std::size_t k = 0; k < pa.size(); ++k)
    EXPECT_LT(std::abs(pa[k].amplitude - pb[k].amplitude), 2e-2 * std::abs(pa[k].amplitude) + 1e-6);
}

TEST(RoundTrip, FinitePulsesNeedDurations) {
  const auto sys = SpinStarSystem::tms();
  const auto prog = compile(build_sequence(SequenceKind::none, false, 0.0, sys), sys);
  ProgramSimOptions opt;
  opt.model = PulseModel::hard;
  EXPECT_THROW(simulate_program(prog, thermal_state(sys), {}, sys, opt), std::invalid_argument);
}

TEST(Echo, PiPairRefocusesCentreOffset) {
  const auto sys = SpinStarSystem::tms();
  GateIR ir;
  ir.gates = {ir::Hadamard{Species::center}, ir::Cnot{}, ir::PiPair{Species::center, 0.8}};
  const auto st0 = thermal_state(sys);
  EvolutionParams a, b;
  a.b0_offset = b.b0_offset = 3e-9;
  b.delta_center = 517.0;
  EXPECT_LE(BlockState::max_abs_diff(simulate_ir(ir, st0, a, sys), simulate_ir(ir, st0, b, sys)), 1e-12);
  EXPECT_LE(BlockState::max_abs_diff(simulate_program(compile(ir, sys), st0, a, sys),
                                     simulate_program(compile(ir, sys), st0, b, sys)),
            1e-12);
}

TEST(PhaseCycle, FourVariants) {
  const auto sys = SpinStarSystem::tms();
  const auto prog = compile(build_sequence(SequenceKind::seq_b, true, 0.1, sys), sys);
  const auto steps = phase_cycle_variants(prog);
  ASSERT_EQ(steps.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(std::remainder(steps[k].receiver_phase + k * kPi / 2, kTwoPi), 0.0, 1e-15);
    EXPECT_EQ(steps[k].program.items.size(), prog.items.size());
  }
  // Every step produces the same signal once the receiver phase is removed.
  const auto st0 = thermal_state(sys);
  const auto ref = measure_center_peaks(simulate_program(prog, st0, {}, sys));
  for (const auto& s : steps) {
    const auto peaks = measure_center_peaks(simulate_program(s.program, st0, {}, sys));
    for (std::size_t k = 0; k < peaks.size(); ++k)
      EXPECT_LT(std::abs(peaks[k].amplitude * std::polar(1.0, -s.receiver_phase) - ref[k].amplitude), 1e-9);
  }
}

TEST(PhaseCycle, NeedsReadout) {
  GateIR ir;
  ir.gates = {ir::Hadamard{Species::center}};
  EXPECT_THROW(phase_cycle_variants(compile(ir, SpinStarSystem::tms())), CompileError);
}

TEST(Golden, CompiledPrograms) {
  const auto tms = SpinStarSystem::tms();
  struct Case {
    const char* file;
    SequenceKind kind;
    bool priming;
    double delay;
    PulseModel model;
    SpinStarSystem sys;
  };
  const Case cases[] = {
      {"seq_b_t1_tms.txt", SequenceKind::seq_b, false, 1.0, PulseModel::hard, tms},
      {"original_t0_tms.txt", SequenceKind::original, false, 0.0, PulseModel::hard, tms},
      {"primed_seq_a_tmp_bb1.txt", SequenceKind::seq_a, true, 0.25, PulseModel::bb1, tmp()},
  };
  for (const auto& c : cases) {
    const auto text = program_to_string(compile(build_sequence(c.kind, c.priming, c.delay, c.sys), c.sys, {c.model}));
    EXPECT_EQ(text, read_file(std::string(SPINSTAR_TEST_DATA) + "/" + c.file)) << c.file;
  }
}

TEST(Golden, OriginalZeroDelayIsMirrorSymmetric) {
  const auto sys = SpinStarSystem::tms();
  const auto prog = compile(build_sequence(SequenceKind::original, false, 0.0, sys), sys, {PulseModel::hard});
  std::vector<prim::Pulse> pulses;
  for (const auto& it : prog.items)
    if (const auto* p = std::get_if<prim::Pulse>(&it); p && !p->readout && !p->sync) pulses.push_back(*p);
  ASSERT_FALSE(pulses.empty());
  for (std::size_t k = 0; k < pulses.size(); ++k) {
    const auto& a = pulses[k];
    const auto& b = pulses[pulses.size() - 1 - k];
    EXPECT_EQ(a.species, b.species);
    EXPECT_DOUBLE_EQ(a.angle, b.angle);
    EXPECT_DOUBLE_EQ(a.duration, b.duration);
  }
}
