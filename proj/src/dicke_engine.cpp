#include "spinstar/dicke_engine.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace spinstar {

namespace {

using Eigen::MatrixXcd;

const cplx kI{0.0, 1.0};

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

MatrixXcd identity(int dim) { return MatrixXcd::Identity(dim, dim); }

// exp(-i * scale * H) for Hermitian H.
MatrixXcd hermitian_exp(const MatrixXcd& h, double scale) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  const auto& v = es.eigenvectors();
  Eigen::VectorXcd phases(h.rows());
  for (Eigen::Index k = 0; k < h.rows(); ++k)
    phases(k) = std::polar(1.0, -scale * es.eigenvalues()(k));
  return v * phases.asDiagonal() * v.adjoint();
}

double m_of(const Block& b, int idx, bool* center_up) {
  const int half = b.half_dim();
  *center_up = idx < half;
  const int k = idx % half;
  return 0.5 * (b.sector.two_j - 2 * k);
}

// Single-spin operators for the centre.
MatrixXcd center_op(char which) {
  MatrixXcd m = MatrixXcd::Zero(2, 2);
  switch (which) {
    case 'x': m << 0.0, 0.5, 0.5, 0.0; break;
    case 'y': m << 0.0, -0.5 * kI, 0.5 * kI, 0.0; break;
    case 'z': m << 0.5, 0.0, 0.0, -0.5; break;
    default: throw std::logic_error("center_op");
  }
  return m;
}

BlockState conjugate(const BlockState& state, const auto& unitary_for) {
  BlockState out = state;
  for (auto& b : out.blocks()) {
    const MatrixXcd u = unitary_for(b);
    b.rho = u * b.rho * u.adjoint();
  }
  return out;
}

cplx i_pow(int n) {
  static const cplx table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return table[((n % 4) + 4) % 4];
}

}  // namespace

// --- spin matrices -------------------------------------------------------

Eigen::MatrixXcd spin_jz(int two_j) {
  MatrixXcd m = MatrixXcd::Zero(two_j + 1, two_j + 1);
  for (int k = 0; k <= two_j; ++k) m(k, k) = 0.5 * (two_j - 2 * k);
  return m;
}

namespace {
MatrixXcd spin_jplus(int two_j) {
  const double j = 0.5 * two_j;
  MatrixXcd m = MatrixXcd::Zero(two_j + 1, two_j + 1);
  for (int k = 1; k <= two_j; ++k) {
    const double mm = 0.5 * (two_j - 2 * k);  // m of column k
    m(k - 1, k) = std::sqrt(j * (j + 1) - mm * (mm + 1));
  }
  return m;
}
}  // namespace

Eigen::MatrixXcd spin_jx(int two_j) {
  const MatrixXcd p = spin_jplus(two_j);
  return 0.5 * (p + p.adjoint());
}

Eigen::MatrixXcd spin_jy(int two_j) {
  const MatrixXcd p = spin_jplus(two_j);
  return (p - p.adjoint()) / (2.0 * kI);
}

Eigen::MatrixXcd spin_rotation(int two_j, double phase, double angle) {
  const MatrixXcd g = std::cos(phase) * spin_jx(two_j) + std::sin(phase) * spin_jy(two_j);
  return hermitian_exp(g, angle);
}

// --- BlockState -------------------------------------------------------------

BlockState::BlockState(int n_peripheral) : n_(n_peripheral) {
  for (const auto& s : dicke_decomposition(n_peripheral)) {
    const int dim = 2 * (s.two_j + 1);
    blocks_.push_back({s, MatrixXcd::Zero(dim, dim)});
  }
}

cplx BlockState::weighted_trace() const {
  cplx t = 0.0;
  for (const auto& b : blocks_) t += static_cast<double>(b.sector.multiplicity) * b.rho.trace();
  return t;
}

double BlockState::hermiticity_error() const {
  double e = 0.0;
  for (const auto& b : blocks_) e = std::max(e, (b.rho - b.rho.adjoint()).cwiseAbs().maxCoeff());
  return e;
}

double BlockState::max_abs_diff(const BlockState& a, const BlockState& b) {
  if (a.blocks_.size() != b.blocks_.size())
    throw std::invalid_argument("states have different sector structure");
  double e = 0.0;
  for (std::size_t k = 0; k < a.blocks_.size(); ++k)
    e = std::max(e, (a.blocks_[k].rho - b.blocks_[k].rho).cwiseAbs().maxCoeff());
  return e;
}

// --- relaxation model -------------------------------------------------------

RelaxationModel RelaxationModel::from_system(const SpinStarSystem& system) {
  RelaxationModel m;
  m.rate_center = 1.0 / system.t2_center;
  m.rate_peripheral = 1.0 / system.t2star_peripheral;
  m.rate_peripheral_echo = 1.0 / system.t2_peripheral;
  m.alpha = 0.1122;
  m.t1_center = system.t1_center;
  m.t1_peripheral = system.t1_peripheral;
  m.t1_recovery = false;
  return m;
}

void RelaxationModel::validate() const {
  if (rate_center < 0.0 || rate_peripheral < 0.0 || rate_peripheral_echo < 0.0)
    throw DomainError("relaxation rates must be >= 0");
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must lie in [0, 1]");
}

double RelaxationModel::coherence_rate(int dmc, int dm) const {
  const double order = dm == 0 ? 0.0 : std::pow(std::abs(dm), alpha);
  return std::abs(dmc) * rate_center + order * rate_peripheral;
}

// --- states -----------------------------------------------------------------

BlockState thermal_state(const SpinStarSystem& system) {
  system.validate();
  BlockState st(system.n_peripheral);
  const double scale = 1.0 / std::abs(system.gamma_center);
  for (auto& b : st.blocks()) {
    for (int idx = 0; idx < b.rho.rows(); ++idx) {
      bool up;
      const double m = m_of(b, idx, &up);
      const double mc = up ? 0.5 : -0.5;
      b.rho(idx, idx) = scale * (system.gamma_center * 2.0 * mc + system.gamma_peripheral * 2.0 * m);
    }
  }
  return st;
}

BlockState pseudopure_state(const SpinStarSystem& system, int ell) {
  system.validate();
  Lopsidedness l(system.n_peripheral, ell);
  BlockState st(system.n_peripheral);
  for (auto& b : st.blocks()) {
    if (b.sector.two_j < std::abs(l.two_m())) continue;
    const int idx = b.index(true, l.two_m());
    b.rho(idx, idx) = 1.0;
  }
  return st;
}

// --- gates ------------------------------------------------------------------

BlockState apply_ideal_gate(const BlockState& state, const IdealGate& gate) {
  const int n = state.n_peripheral();
  switch (gate.kind) {
    case GateKind::hadamard_c:
      return conjugate(state, [](const Block& b) {
        MatrixXcd h(2, 2);
        h << 1.0, 1.0, 1.0, -1.0;
        return kron(h / std::sqrt(2.0), identity(b.half_dim()));
      });
    case GateKind::hadamard_p:
      // R_z(pi) R_{-y}(pi/2) per spin, equal to H up to a global phase.
      return conjugate(state, [](const Block& b) {
        const int tj = b.sector.two_j;
        const MatrixXcd u = hermitian_exp(spin_jz(tj), kPi) * spin_rotation(tj, -kPi / 2, kPi / 2);
        return kron(identity(2), u);
      });
    case GateKind::not_c:
      return conjugate(state, [](const Block& b) {
        MatrixXcd x(2, 2);
        x << 0.0, 1.0, 1.0, 0.0;
        return kron(x, identity(b.half_dim()));
      });
    case GateKind::not_p:
      return conjugate(state, [n](const Block& b) {
        return kron(identity(2), i_pow(n) * spin_rotation(b.sector.two_j, 0.0, kPi));
      });
    case GateKind::z_c:
      return conjugate(state, [&gate](const Block& b) {
        return kron(hermitian_exp(center_op('z'), gate.angle), identity(b.half_dim()));
      });
    case GateKind::z_p:
      return conjugate(state, [&gate](const Block& b) {
        return kron(identity(2), hermitian_exp(spin_jz(b.sector.two_j), gate.angle));
      });
    case GateKind::rot_c:
      return conjugate(state, [&gate](const Block& b) {
        return kron(spin_rotation(1, gate.phase, gate.angle), identity(b.half_dim()));
      });
    case GateKind::rot_p:
      return conjugate(state, [&gate](const Block& b) {
        return kron(identity(2), spin_rotation(b.sector.two_j, gate.phase, gate.angle));
      });
    case GateKind::cnot_cp:
      // X^{(x)N} = i^N exp(-i pi Jx) inside every sector.
      return conjugate(state, [n](const Block& b) {
        const int h = b.half_dim();
        MatrixXcd u = MatrixXcd::Zero(2 * h, 2 * h);
        u.topLeftCorner(h, h) = identity(h);
        u.bottomRightCorner(h, h) = i_pow(n) * spin_rotation(b.sector.two_j, 0.0, kPi);
        return u;
      });
    case GateKind::cnot_pc_mod: {
      if (n % 2 == 0)
        throw DomainError("parity-controlled CNOT cannot disentangle an even peripheral count");
      return conjugate(state, [n](const Block& b) {
        const int h = b.half_dim();
        MatrixXcd u = MatrixXcd::Zero(2 * h, 2 * h);
        for (int k = 0; k < h; ++k) {
          const int two_m = b.sector.two_j - 2 * k;
          const int down = (n - two_m) / 2;
          if (down % 2 == 1) {
            u(k, h + k) = 1.0;
            u(h + k, k) = 1.0;
          } else {
            u(k, k) = 1.0;
            u(h + k, h + k) = 1.0;
          }
        }
        return u;
      });
    }
  }
  throw std::invalid_argument("unknown gate");
}

// --- evolution --------------------------------------------------------------

BlockState free_evolve(const BlockState& state, const EvolutionParams& params,
                       const SpinStarSystem& system) {
  if (params.duration < 0.0) throw DomainError("duration must be >= 0");
  if (params.duration == 0.0) return state;
  const Precession nu = precession(system, params);
  const double jc = system.j_coupling;
  BlockState out = state;
  for (auto& b : out.blocks()) {
    const int dim = static_cast<int>(b.rho.rows());
    std::vector<double> energy(dim);
    for (int idx = 0; idx < dim; ++idx) {
      bool up;
      const double m = m_of(b, idx, &up);
      const double mc = up ? 0.5 : -0.5;
      energy[idx] = nu.center * mc + nu.peripheral * m + jc * mc * m;
    }
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c)
        b.rho(r, c) *= std::polar(1.0, kTwoPi * params.duration * (energy[r] - energy[c]));
  }
  return out;
}

BlockState apply_segment(const BlockState& state, const PulseSegment& segment,
                         const EvolutionParams& params, const SpinStarSystem& system) {
  if (segment.duration < 0.0) throw DomainError("segment duration must be >= 0");
  if (segment.duration == 0.0) return state;
  Precession nu = precession(system, params);
  bool seen[2] = {false, false};
  for (const auto& d : segment.drives) {
    const int s = d.species == Species::center ? 0 : 1;
    if (seen[s]) throw std::invalid_argument("segment drives a channel twice");
    seen[s] = true;
    (d.species == Species::center ? nu.center : nu.peripheral) += d.carrier_offset_hz;
  }
  const double jc = system.j_coupling;
  return conjugate(state, [&](const Block& b) {
    const int tj = b.sector.two_j;
    const int h = b.half_dim();
    const MatrixXcd iz = kron(center_op('z'), identity(h));
    const MatrixXcd jz = kron(identity(2), spin_jz(tj));
    // Rotating-frame generator K; free precession alone is exp(+i 2 pi H t).
    MatrixXcd k = -(nu.center * iz + nu.peripheral * jz + jc * iz * jz);
    for (const auto& d : segment.drives) {
      const double c = std::cos(d.phase_rad), s = std::sin(d.phase_rad);
      if (d.species == Species::center) {
        k += d.nutation_hz * kron(c * center_op('x') + s * center_op('y'), identity(h));
      } else {
        k += d.nutation_hz * kron(identity(2), c * spin_jx(tj) + s * spin_jy(tj));
      }
    }
    return hermitian_exp(k, kTwoPi * segment.duration);
  });
}

BlockState finite_pulse(const BlockState& state, Species species, double nutation_hz,
                        double duration_s, double rf_phase_rad, double carrier_offset_hz,
                        const EvolutionParams& params, const SpinStarSystem& system) {
  if (!(nutation_hz > 0.0)) throw DomainError("nutation must be > 0");
  PulseSegment seg{{Drive{species, nutation_hz, rf_phase_rad, carrier_offset_hz}}, duration_s};
  return apply_segment(state, seg, params, system);
}

double bb1_phase(double target_angle) { return std::acos(-target_angle / (4.0 * kPi)); }

std::vector<Drive> bb1_drives(Species species, double target_angle, double rf_phase,
                              double nutation_hz, double amplitude_error,
                              std::vector<double>* durations) {
  if (!(target_angle > 0.0) || target_angle > kTwoPi + 1e-12)
    throw DomainError("BB1 target angle must lie in (0, 2pi]");
  const double p1 = bb1_phase(target_angle);
  const double angles[4] = {target_angle, kPi, kTwoPi, kPi};
  const double phases[4] = {rf_phase, rf_phase + p1, rf_phase + 3.0 * p1, rf_phase + p1};
  std::vector<Drive> drives;
  durations->clear();
  for (int k = 0; k < 4; ++k) {
    drives.push_back({species, nutation_hz * (1.0 + amplitude_error), phases[k], 0.0});
    durations->push_back(angles[k] / (kTwoPi * nutation_hz));
  }
  return drives;
}

BlockState bb1_pulse(const BlockState& state, Species species, double target_angle,
                     double rf_phase, double nutation_hz, const EvolutionParams& params,
                     const SpinStarSystem& system, double amplitude_error) {
  std::vector<double> durations;
  const auto drives =
      bb1_drives(species, target_angle, rf_phase, nutation_hz, amplitude_error, &durations);
  BlockState out = state;
  for (std::size_t k = 0; k < drives.size(); ++k)
    out = apply_segment(out, PulseSegment{{drives[k]}, durations[k]}, params, system);
  return out;
}

BlockState plain_pulse(const BlockState& state, Species species, double target_angle,
                       double rf_phase, double nutation_hz, const EvolutionParams& params,
                       const SpinStarSystem& system, double amplitude_error) {
  const double duration = target_angle / (kTwoPi * nutation_hz);
  return apply_segment(
      state, PulseSegment{{Drive{species, nutation_hz * (1.0 + amplitude_error), rf_phase, 0.0}}, duration},
      params, system);
}

BlockState relax(const BlockState& state, double duration, const RelaxationModel& model,
                 const SpinStarSystem& system) {
  if (duration < 0.0) throw DomainError("duration must be >= 0");
  model.validate();
  if (duration == 0.0) return state;
  BlockState out = state;
  const double sign = system.gamma_center > 0 ? 1.0 : -1.0;
  const double gr = system.gamma_ratio();
  for (auto& b : out.blocks()) {
    const int dim = static_cast<int>(b.rho.rows());
    const int h = b.half_dim();
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        if (r == c) continue;
        const int dmc = (r < h ? 1 : 0) - (c < h ? 1 : 0);
        const int dm = (c % h) - (r % h);  // two_m difference / 2
        b.rho(r, c) *= std::exp(-duration * model.coherence_rate(dmc, dm));
      }
    }
    if (!model.t1_recovery) continue;
    const double ec = model.t1_center > 0 ? std::exp(-duration / model.t1_center) : 1.0;
    const double ep = model.t1_peripheral > 0 ? std::exp(-duration / model.t1_peripheral) : 1.0;
    for (int k = 0; k < h; ++k) {
      const double m = 0.5 * (b.sector.two_j - 2 * k);
      const cplx up = b.rho(k, k), dn = b.rho(h + k, h + k);
      // Split into peripheral-like (even in m_c) and centre-like (odd) parts.
      const cplx a = 0.5 * (up + dn), z = 0.5 * (up - dn);
      const double a_th = sign * gr * 2.0 * m, z_th = sign;
      const cplx a_new = a_th + (a - a_th) * ep;
      const cplx z_new = z_th + (z - z_th) * ec;
      b.rho(k, k) = a_new + z_new;
      b.rho(h + k, h + k) = a_new - z_new;
    }
  }
  return out;
}

BlockState apply(const BlockState& state, const Operation& op, const EvolutionParams& params,
                 const SpinStarSystem& system) {
  return std::visit(
      [&](const auto& o) -> BlockState {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, IdealGate>) {
          return apply_ideal_gate(state, o);
        } else if constexpr (std::is_same_v<T, PulseSegment>) {
          return apply_segment(state, o, params, system);
        } else {
          EvolutionParams p = params;
          p.duration = o.duration;
          return free_evolve(state, p, system);
        }
      },
      op);
}

std::vector<PeakAmplitude> measure_center_peaks(const BlockState& state) {
  const int n = state.n_peripheral();
  std::vector<PeakAmplitude> out;
  for (int ell : lopsidedness_values(n)) {
    cplx sum = 0.0;
    for (const auto& b : state.blocks()) {
      if (b.sector.two_j < std::abs(ell)) continue;
      sum += static_cast<double>(b.sector.multiplicity) * b.rho(b.index(true, ell), b.index(false, ell));
    }
    out.push_back({ell, sum});
  }
  return out;
}

}  // namespace spinstar
