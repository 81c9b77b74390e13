#include "spinstar/pulse_compiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace spinstar {

namespace {

double wrap_phase(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w == 0.0 ? 0.0 : w;  // no negative zero in the text form
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

class Compiler {
 public:
  Compiler(const SpinStarSystem& system, const CompileOptions& options)
      : sys_(system), opt_(options) {}

  void gate(const IrGate& g) {
    std::visit(overloaded{
                   [&](const ir::Hadamard& h) { hadamard(h.species); },
                   [&](const ir::Cnot& c) {
                     if (c.control != Species::center || c.target != Species::peripheral)
                       throw CompileError("Cnot supports centre control only; use ModCnot");
                     hadamard(Species::peripheral);
                     controlled_phase();
                     hadamard(Species::peripheral);
                   },
                   [&](const ir::ModCnot&) {
                     if (sys_.n_peripheral % 2 == 0)
                       throw CompileError(
                           "ModCnot does not work for systems with an even number of peripheral spins");
                     hadamard(Species::center);
                     controlled_phase();
                     hadamard(Species::center);
                   },
                   [&](const ir::Not& n) { pulse(n.species, kPi, 0.0); },
                   [&](const ir::Z& z) { rotate_frame(z.species, z.angle); },
                   [&](const ir::Delay& d) {
                     if (d.duration < 0) throw CompileError("negative delay");
                     wait(d.duration);
                   },
                   [&](const ir::Echo& e) {
                     if (e.center && e.peripheral)
                       sync_pi();
                     else if (e.center)
                       pulse(Species::center, kPi, 0.0);
                     else if (e.peripheral)
                       pulse(Species::peripheral, kPi, 0.0);
                   },
                   [&](const ir::PiPair& p) {
                     if (p.window < 0) throw CompileError("negative PiPair window");
                     refocused_window(p.window, [&] { pulse(p.species, kPi, 0.0); },
                                      duration(p.species, kPi), p.species == Species::peripheral);
                   },
                   [&](const ir::Readout&) { pulse(Species::center, kPi / 2, -kPi / 2, true); },
               },
               g);
  }

  PulseProgram finish() {
    prog_.final_frame_center = wrap_phase(frame_c_);
    prog_.final_frame_peripheral = wrap_phase(frame_p_);
    double total = 0.0;
    for (const auto& it : prog_.items) {
      std::visit(overloaded{[&](const prim::Pulse& p) {
                              if (!p.sync) total += p.duration;
                            },
                            [&](const prim::Delay& d) { total += d.duration; }},
                 it);
    }
    prog_.total_duration = total;
    return prog_;
  }

 private:
  double& frame(Species s) { return s == Species::center ? frame_c_ : frame_p_; }

  PulseShape shape() const {
    return opt_.model == PulseModel::bb1 ? PulseShape::bb1 : PulseShape::hard;
  }

  double duration(Species s, double angle) const {
    if (opt_.model == PulseModel::ideal) return 0.0;
    const double t90 = s == Species::center ? sys_.pulse_pi2_center : sys_.pulse_pi2_peripheral;
    const double total_angle = opt_.model == PulseModel::bb1 ? angle + 2.0 * kTwoPi : angle;
    return total_angle / (kPi / 2) * t90;
  }

  void pulse(Species s, double angle, double phase, bool readout = false) {
    prim::Pulse p;
    p.species = s;
    p.angle = angle;
    p.phase = wrap_phase(phase - frame(s));
    p.duration = duration(s, angle);
    p.shape = shape();
    p.readout = readout;
    prog_.items.emplace_back(p);
  }

  // Simultaneous pi_x on both channels, stretched to a common duration.
  void sync_pi() {
    const double d = std::max(duration(Species::center, kPi), duration(Species::peripheral, kPi));
    pulse(Species::center, kPi, 0.0);
    std::get<prim::Pulse>(prog_.items.back()).duration = d;
    pulse(Species::peripheral, kPi, 0.0);
    auto& p = std::get<prim::Pulse>(prog_.items.back());
    p.duration = d;
    p.sync = true;
  }

  void wait(double t, bool echo = false) {
    if (t <= 0.0) return;
    if (!prog_.items.empty()) {
      if (auto* d = std::get_if<prim::Delay>(&prog_.items.back()); d && d->echo == echo) {
        d->duration += t;
        return;
      }
    }
    prog_.items.emplace_back(prim::Delay{t, echo});
  }

  void rotate_frame(Species s, double angle) { frame(s) = wrap_phase(frame(s) + angle); }

  void hadamard(Species s) {
    pulse(s, kPi / 2, -kPi / 2);
    rotate_frame(s, kPi);
  }

  // Refocusing pulses centred at window/4 and 3 window/4.
  template <class F>
  void refocused_window(double window, F&& refocus, double pulse_duration, bool echo) {
    wait(std::max(0.0, window / 4 - pulse_duration / 2), echo);
    refocus();
    wait(std::max(0.0, window / 2 - pulse_duration), echo);
    refocus();
    wait(std::max(0.0, window / 4 - pulse_duration / 2), echo);
  }

  // prod_k CZ(centre, k) = R_z(N pi/2)_c R_z(pi/2)_p exp(i pi Iz Jz), the last
  // factor being 1/(2J) of coupling evolution with offsets echoed away.
  void controlled_phase() {
    rotate_frame(Species::center, (sys_.n_peripheral % 4) * kPi / 2);
    rotate_frame(Species::peripheral, kPi / 2);
    const double d = std::max(duration(Species::center, kPi), duration(Species::peripheral, kPi));
    refocused_window(1.0 / (2.0 * sys_.j_coupling), [&] { sync_pi(); }, d, true);
  }

  const SpinStarSystem& sys_;
  CompileOptions opt_;
  PulseProgram prog_;
  double frame_c_ = 0.0;
  double frame_p_ = 0.0;
};

}  // namespace

const char* to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::none: return "none";
    case SequenceKind::original: return "original";
    case SequenceKind::seq_a: return "a";
    case SequenceKind::seq_b: return "b";
  }
  return "?";
}

const char* to_string(PulseModel m) {
  switch (m) {
    case PulseModel::ideal: return "ideal";
    case PulseModel::hard: return "hard";
    case PulseModel::bb1: return "bb1";
  }
  return "?";
}

SequenceKind parse_sequence_kind(const std::string& s) {
  if (s == "none" || s == "thermal") return SequenceKind::none;
  if (s == "original") return SequenceKind::original;
  if (s == "a" || s == "seq_a") return SequenceKind::seq_a;
  if (s == "b" || s == "seq_b") return SequenceKind::seq_b;
  throw std::invalid_argument("unknown sequence '" + s + "'");
}

PulseModel parse_pulse_model(const std::string& s) {
  if (s == "ideal") return PulseModel::ideal;
  if (s == "hard") return PulseModel::hard;
  if (s == "bb1") return PulseModel::bb1;
  throw std::invalid_argument("unknown pulse model '" + s + "'");
}

GateIR build_sequence(SequenceKind kind, bool priming, double delay, const SpinStarSystem& system,
                      double order_phase) {
  if (delay < 0.0) throw CompileError("delay must be >= 0");
  if (kind == SequenceKind::seq_a && system.n_peripheral % 2 == 0)
    throw CompileError(
        "sequence A does not work for systems with an even number of peripheral spins");
  GateIR out;
  auto& g = out.gates;
  if (priming) g.emplace_back(ir::Cnot{});
  switch (kind) {
    case SequenceKind::none: break;
    case SequenceKind::original:
      g.insert(g.end(), {ir::Hadamard{Species::center}, ir::Cnot{}, ir::Delay{delay}, ir::Cnot{},
                         ir::Hadamard{Species::center}});
      break;
    case SequenceKind::seq_a:
      g.insert(g.end(), {ir::Hadamard{Species::center}, ir::Cnot{}, ir::ModCnot{},
                         ir::Delay{delay}, ir::ModCnot{}, ir::Cnot{},
                         ir::Hadamard{Species::center}});
      break;
    case SequenceKind::seq_b:
      g.insert(g.end(), {ir::Hadamard{Species::center}, ir::Cnot{},
                         ir::PiPair{Species::center, delay}, ir::Cnot{},
                         ir::Hadamard{Species::center}});
      break;
  }
  if (order_phase != 0.0 && kind != SequenceKind::none) {
    // right after the encoding CNOT; it commutes with the parity CNOT of sequence A
    const auto at = g.begin() + (priming ? 3 : 2);
    g.insert(at, ir::Z{Species::peripheral, order_phase});
  }
  g.emplace_back(ir::Readout{});
  return out;
}

PulseProgram compile(const GateIR& ir, const SpinStarSystem& system, const CompileOptions& options) {
  system.validate();
  Compiler c(system, options);
  for (const auto& g : ir.gates) c.gate(g);
  return c.finish();
}

void write_program(std::ostream& os, const PulseProgram& program) {
  char buf[256];
  os << "# kind species angle_rad phase_rad duration_s shape\n";
  for (const auto& it : program.items) {
    std::visit(overloaded{[&](const prim::Pulse& p) {
                            const char* kind = p.readout ? "readout" : (p.sync ? "pulse_sync" : "pulse");
                            std::snprintf(buf, sizeof buf, "%s %s %.17g %.17g %.17g %s\n", kind,
                                          to_string(p.species), p.angle, p.phase, p.duration,
                                          p.shape == PulseShape::bb1 ? "bb1" : "hard");
                            os << buf;
                          },
                          [&](const prim::Delay& d) {
                            std::snprintf(buf, sizeof buf, "delay - 0 0 %.17g %s\n", d.duration, d.echo ? "echo" : "-");
                            os << buf;
                          }},
               it);
  }
  std::snprintf(buf, sizeof buf, "frame center 0 %.17g 0 -\nframe peripheral 0 %.17g 0 -\n",
                program.final_frame_center, program.final_frame_peripheral);
  os << buf;
  std::snprintf(buf, sizeof buf, "total - 0 0 %.17g -\n", program.total_duration);
  os << buf;
}

std::string program_to_string(const PulseProgram& program) {
  std::ostringstream os;
  write_program(os, program);
  return os.str();
}

std::vector<PhaseCycleStep> phase_cycle_variants(const PulseProgram& program) {
  const bool has_readout = std::any_of(program.items.begin(), program.items.end(), [](const auto& it) {
    const auto* p = std::get_if<prim::Pulse>(&it);
    return p && p->readout;
  });
  if (!has_readout) throw CompileError("phase cycling needs a program with a readout pulse");
  std::vector<PhaseCycleStep> out;
  for (int k = 0; k < 4; ++k) {
    const double psi = k * kPi / 2;
    PhaseCycleStep step{program, wrap_phase(-psi)};
    for (auto& it : step.program.items) {
      if (auto* p = std::get_if<prim::Pulse>(&it); p && p->species == Species::center)
        p->phase = wrap_phase(p->phase + psi);
    }
    out.push_back(std::move(step));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

IdealGate rotation(Species s, double phase, double angle) {
  return {s == Species::center ? GateKind::rot_c : GateKind::rot_p, angle, phase};
}

struct SegmentPiece {
  double duration;
  Drive drive;
};

std::vector<SegmentPiece> pieces_for(const prim::Pulse& p, double amplitude_error) {
  if (p.duration <= 0.0)
    throw std::invalid_argument("program has zero-length pulses; compile it for a finite pulse model");
  if (p.shape == PulseShape::hard) {
    const double nut = p.angle / (kTwoPi * p.duration);
    return {{p.duration, Drive{p.species, nut * (1.0 + amplitude_error), p.phase, 0.0}}};
  }
  const double nut = (p.angle + 2.0 * kTwoPi) / (kTwoPi * p.duration);
  std::vector<double> durations;
  const auto drives = bb1_drives(p.species, p.angle, p.phase, nut, amplitude_error, &durations);
  std::vector<SegmentPiece> out;
  for (std::size_t k = 0; k < drives.size(); ++k) out.push_back({durations[k], drives[k]});
  return out;
}

// Merges two piecewise-constant drives that start together into common
// segments.
std::vector<PulseSegment> merge(const std::vector<SegmentPiece>& a, const std::vector<SegmentPiece>& b) {
  std::vector<PulseSegment> out;
  std::size_t i = 0, j = 0;
  double ra = a.empty() ? 0.0 : a[0].duration, rb = b.empty() ? 0.0 : b[0].duration;
  while (i < a.size() || j < b.size()) {
    PulseSegment seg;
    double step;
    if (i < a.size() && j < b.size()) {
      step = std::min(ra, rb);
      seg.drives = {a[i].drive, b[j].drive};
    } else if (i < a.size()) {
      step = ra;
      seg.drives = {a[i].drive};
    } else {
      step = rb;
      seg.drives = {b[j].drive};
    }
    seg.duration = step;
    if (step > 0.0) out.push_back(seg);
    if (i < a.size()) {
      ra -= step;
      if (ra <= 1e-18 * (1.0 + a[i].duration)) {
        if (++i < a.size()) ra = a[i].duration;
      }
    }
    if (j < b.size()) {
      rb -= step;
      if (rb <= 1e-18 * (1.0 + b[j].duration)) {
        if (++j < b.size()) rb = b[j].duration;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Operation> lower(const PulseProgram& program, const SpinStarSystem& system,
                             PulseModel model, double amplitude_error) {
  (void)system;
  std::vector<Operation> ops;
  const auto& items = program.items;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (const auto* d = std::get_if<prim::Delay>(&items[k])) {
      ops.emplace_back(FreeEvolution{d->duration, d->echo});
      continue;
    }
    const auto& p = std::get<prim::Pulse>(items[k]);
    const prim::Pulse* partner = nullptr;
    if (k + 1 < items.size()) {
      const auto* next = std::get_if<prim::Pulse>(&items[k + 1]);
      if (next && next->sync) partner = next;
    }
    if (model == PulseModel::ideal) {
      ops.emplace_back(rotation(p.species, p.phase, p.angle * (1.0 + amplitude_error)));
      if (partner)
        ops.emplace_back(rotation(partner->species, partner->phase, partner->angle * (1.0 + amplitude_error)));
    } else {
      const auto a = pieces_for(p, amplitude_error);
      const auto b = partner ? pieces_for(*partner, amplitude_error) : std::vector<SegmentPiece>{};
      for (auto& seg : merge(a, b)) ops.emplace_back(std::move(seg));
    }
    if (partner) ++k;
  }
  ops.emplace_back(IdealGate{GateKind::z_c, program.final_frame_center, 0.0});
  ops.emplace_back(IdealGate{GateKind::z_p, program.final_frame_peripheral, 0.0});
  return ops;
}

BlockState simulate_program(const PulseProgram& program, const BlockState& initial,
                            const EvolutionParams& params, const SpinStarSystem& system,
                            const ProgramSimOptions& options) {
  BlockState st = initial;
  for (const auto& op : lower(program, system, options.model, options.amplitude_error)) {
    st = apply(st, op, params, system);
    if (options.relaxation) {
      if (const auto* fe = std::get_if<FreeEvolution>(&op)) {
        RelaxationModel m = *options.relaxation;
        if (fe->echo) m.rate_peripheral = m.rate_peripheral_echo;
        st = relax(st, fe->duration, m, system);
      }
    }
  }
  return st;
}

BlockState simulate_ir(const GateIR& ir, const BlockState& initial, const EvolutionParams& params,
                       const SpinStarSystem& system, const std::optional<RelaxationModel>& relaxation) {
  BlockState st = initial;
  auto evolve = [&](double t) {
    EvolutionParams p = params;
    p.duration = t;
    st = free_evolve(st, p, system);
    if (relaxation) st = relax(st, t, *relaxation, system);
  };
  auto gate = [&](GateKind k, double angle = 0.0, double phase = 0.0) {
    st = apply_ideal_gate(st, IdealGate{k, angle, phase});
  };
  for (const auto& g : ir.gates) {
    std::visit(overloaded{
                   [&](const ir::Hadamard& h) {
                     gate(h.species == Species::center ? GateKind::hadamard_c : GateKind::hadamard_p);
                   },
                   [&](const ir::Cnot& c) {
                     if (c.control != Species::center || c.target != Species::peripheral)
                       throw CompileError("Cnot supports centre control only; use ModCnot");
                     gate(GateKind::cnot_cp);
                   },
                   [&](const ir::ModCnot&) { gate(GateKind::cnot_pc_mod); },
                   [&](const ir::Not& n) {
                     gate(n.species == Species::center ? GateKind::not_c : GateKind::not_p);
                   },
                   [&](const ir::Z& z) {
                     gate(z.species == Species::center ? GateKind::z_c : GateKind::z_p, z.angle);
                   },
                   [&](const ir::Delay& d) { evolve(d.duration); },
                   [&](const ir::Echo& e) {
                     if (e.center) gate(GateKind::rot_c, kPi, 0.0);
                     if (e.peripheral) gate(GateKind::rot_p, kPi, 0.0);
                   },
                   [&](const ir::PiPair& p) {
                     const GateKind k = p.species == Species::center ? GateKind::rot_c : GateKind::rot_p;
                     evolve(p.window / 4);
                     gate(k, kPi, 0.0);
                     evolve(p.window / 2);
                     gate(k, kPi, 0.0);
                     evolve(p.window / 4);
                   },
                   [&](const ir::Readout&) { gate(GateKind::rot_c, kPi / 2, -kPi / 2); },
               },
               g);
  }
  return st;
}

}  // namespace spinstar
