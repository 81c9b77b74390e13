#include "spinstar/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace spinstar::oracle {

namespace {

using Eigen::MatrixXcd;
const cplx kI{0.0, 1.0};

void guard(int n) {
  if (n < 1 || n > kMaxPeripheral)
    throw DomainError("oracle supports 1 <= N <= " + std::to_string(kMaxPeripheral));
}

int dim_of(int n) { return 1 << (n + 1); }

MatrixXcd pauli(char which) {
  MatrixXcd m(2, 2);
  switch (which) {
    case 'i': m << 1, 0, 0, 1; break;
    case 'x': m << 0, 1, 1, 0; break;
    case 'y': m << 0, -kI, kI, 0; break;
    case 'z': m << 1, 0, 0, -1; break;
    default: throw std::logic_error("pauli");
  }
  return m;
}

// Embeds a 2x2 operator acting on `spin` (0 = centre, 1..N peripherals).
MatrixXcd on_spin(int n, int spin, const MatrixXcd& op) {
  MatrixXcd out = MatrixXcd::Ones(1, 1);
  for (int s = 0; s <= n; ++s) {
    const MatrixXcd& f = (s == spin) ? op : pauli('i');
    MatrixXcd next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        next.block(2 * i, 2 * j, 2, 2) = out(i, j) * f;
    out = next;
  }
  return out;
}

MatrixXcd spin_op(int n, int spin, char axis) { return 0.5 * on_spin(n, spin, pauli(axis)); }

MatrixXcd sum_peripheral(int n, char axis) {
  MatrixXcd s = MatrixXcd::Zero(dim_of(n), dim_of(n));
  for (int k = 1; k <= n; ++k) s += spin_op(n, k, axis);
  return s;
}

// The centre is the most significant spin in on_spin's ordering, so the basis
// index decomposes as c * 2^N + p with peripheral k stored at bit N-k.
int down_count(int p) { return std::popcount(static_cast<unsigned>(p)); }

MatrixXcd permutation(int n, auto map) {
  const int d = dim_of(n);
  MatrixXcd u = MatrixXcd::Zero(d, d);
  for (int i = 0; i < d; ++i) u(map(i), i) = 1.0;
  return u;
}

MatrixXcd product_of_single(int n, int first, int last, const MatrixXcd& op) {
  MatrixXcd u = MatrixXcd::Identity(dim_of(n), dim_of(n));
  for (int s = first; s <= last; ++s) u = on_spin(n, s, op) * u;
  return u;
}

MatrixXcd rotation_2x2(double phase, double angle) {
  const MatrixXcd g = 0.5 * (std::cos(phase) * pauli('x') + std::sin(phase) * pauli('y'));
  return (MatrixXcd(-kI * angle * g)).exp();
}

MatrixXcd gate_unitary(int n, const IdealGate& g) {
  const int half = 1 << n;
  MatrixXcd h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const MatrixXcd zrot = (MatrixXcd(-kI * g.angle * 0.5 * pauli('z'))).exp();
  switch (g.kind) {
    case GateKind::hadamard_c: return on_spin(n, 0, h);
    case GateKind::hadamard_p: return product_of_single(n, 1, n, h);
    case GateKind::not_c: return on_spin(n, 0, pauli('x'));
    case GateKind::not_p: return product_of_single(n, 1, n, pauli('x'));
    case GateKind::z_c: return on_spin(n, 0, zrot);
    case GateKind::z_p: return product_of_single(n, 1, n, zrot);
    case GateKind::rot_c: return on_spin(n, 0, rotation_2x2(g.phase, g.angle));
    case GateKind::rot_p: return product_of_single(n, 1, n, rotation_2x2(g.phase, g.angle));
    case GateKind::cnot_cp:
      return permutation(n, [half](int i) { return i >= half ? half + ((half - 1) ^ (i - half)) : i; });
    case GateKind::cnot_pc_mod:
      if (n % 2 == 0) throw DomainError("parity CNOT needs odd N");
      return permutation(n, [half](int i) {
        const int p = i % half;
        return down_count(p) % 2 == 1 ? (i ^ half) : i;
      });
  }
  throw std::invalid_argument("unknown gate");
}

// Rotating-frame Hamiltonian H (Hz); free evolution is exp(+i 2 pi H t).
MatrixXcd free_hamiltonian(const SpinStarSystem& sys, double nu_c, double nu_p) {
  const int n = sys.n_peripheral;
  const MatrixXcd iz = spin_op(n, 0, 'z');
  MatrixXcd hmat = nu_c * iz + nu_p * sum_peripheral(n, 'z');
  for (int k = 1; k <= n; ++k) hmat += sys.j_coupling * iz * spin_op(n, k, 'z');
  return hmat;
}

MatrixXcd op_unitary(const SpinStarSystem& sys, const Operation& op, const EvolutionParams& params) {
  const int n = sys.n_peripheral;
  const Precession nu = precession(sys, params);
  return std::visit(
      [&](const auto& o) -> MatrixXcd {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, IdealGate>) {
          return gate_unitary(n, o);
        } else if constexpr (std::is_same_v<T, FreeEvolution>) {
          const MatrixXcd hmat = free_hamiltonian(sys, nu.center, nu.peripheral);
          return (MatrixXcd(kI * kTwoPi * o.duration * hmat)).exp();
        } else {
          double nc = nu.center, np = nu.peripheral;
          MatrixXcd rf = MatrixXcd::Zero(dim_of(n), dim_of(n));
          for (const auto& d : o.drives) {
            const double c = std::cos(d.phase_rad), s = std::sin(d.phase_rad);
            if (d.species == Species::center) {
              nc += d.carrier_offset_hz;
              rf += d.nutation_hz * (c * spin_op(n, 0, 'x') + s * spin_op(n, 0, 'y'));
            } else {
              np += d.carrier_offset_hz;
              rf += d.nutation_hz * (c * sum_peripheral(n, 'x') + s * sum_peripheral(n, 'y'));
            }
          }
          const MatrixXcd k = rf - free_hamiltonian(sys, nc, np);
          return (MatrixXcd(-kI * kTwoPi * o.duration * k)).exp();
        }
      },
      op);
}

FullState diagonal_state(const SpinStarSystem& system, auto value) {
  system.validate();
  guard(system.n_peripheral);
  const int n = system.n_peripheral;
  FullState st{n, MatrixXcd::Zero(dim_of(n), dim_of(n))};
  const int half = 1 << n;
  for (int i = 0; i < dim_of(n); ++i) {
    const bool center_up = i < half;
    const int down = down_count(i % half);
    st.rho(i, i) = value(center_up, n - 2 * down);
  }
  return st;
}

}  // namespace

FullState thermal(const SpinStarSystem& system) {
  const double scale = 1.0 / std::abs(system.gamma_center);
  return diagonal_state(system, [&](bool up, int ell) {
    return scale * (system.gamma_center * (up ? 1.0 : -1.0) + system.gamma_peripheral * ell);
  });
}

FullState pseudopure(const SpinStarSystem& system, int ell) {
  Lopsidedness(system.n_peripheral, ell);
  return diagonal_state(system, [&](bool up, int e) { return (up && e == ell) ? 1.0 : 0.0; });
}

FullState run(const SpinStarSystem& system, const FullState& initial,
              const std::vector<Operation>& ops, const EvolutionParams& params) {
  guard(system.n_peripheral);
  if (initial.n_peripheral != system.n_peripheral)
    throw std::invalid_argument("state and system disagree on N");
  FullState st = initial;
  for (const auto& op : ops) {
    const MatrixXcd u = op_unitary(system, op, params);
    st.rho = u * st.rho * u.adjoint();
  }
  return st;
}

std::vector<PeakAmplitude> project_to_peaks(const FullState& state) {
  const int n = state.n_peripheral;
  guard(n);
  const int half = 1 << n;
  std::vector<PeakAmplitude> out;
  for (int ell = -n; ell <= n; ell += 2) out.push_back({ell, 0.0});
  for (int p = 0; p < half; ++p) {
    const int ell = n - 2 * down_count(p);
    out[(ell + n) / 2].amplitude += state.rho(p, half + p);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Operation> random_operations(int n, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 11);
  std::vector<GateKind> kinds = {GateKind::hadamard_c, GateKind::hadamard_p, GateKind::not_c,
                                 GateKind::not_p,      GateKind::z_c,        GateKind::z_p,
                                 GateKind::cnot_cp,    GateKind::rot_c,      GateKind::rot_p};
  if (n % 2 == 1) kinds.push_back(GateKind::cnot_pc_mod);
  std::uniform_int_distribution<std::size_t> pick_gate(0, kinds.size() - 1);
  auto drive = [&](Species s) {
    return Drive{s, 5e3 + 45e3 * u(rng), kTwoPi * u(rng), 4e3 * (u(rng) - 0.5)};
  };
  std::vector<Operation> ops;
  for (int k = 0; k < count; ++k) {
    const int r = pick(rng);
    if (r < 6) {
      ops.emplace_back(IdealGate{kinds[pick_gate(rng)], kTwoPi * u(rng), kTwoPi * u(rng)});
    } else if (r < 9) {
      PulseSegment seg;
      seg.duration = 1e-6 + 39e-6 * u(rng);
      const double c = u(rng);
      if (c < 0.4 || c >= 0.7) seg.drives.push_back(drive(Species::center));
      if (c >= 0.4) seg.drives.push_back(drive(Species::peripheral));
      ops.emplace_back(seg);
    } else {
      ops.emplace_back(FreeEvolution{0.1 * u(rng)});
    }
  }
  return ops;
}

EvolutionParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  EvolutionParams p;
  p.b0_offset = 1e-7 * u(rng);
  p.delta_peripheral = 20.0 * u(rng);
  p.delta_center = 20.0 * u(rng);
  return p;
}

double peak_deviation(const SpinStarSystem& system, const std::vector<Operation>& ops,
                      const EvolutionParams& params) {
  BlockState engine = thermal_state(system);
  for (const auto& op : ops) engine = apply(engine, op, params, system);
  const FullState full = run(system, thermal(system), ops, params);

  const IdealGate readout{GateKind::rot_c, kPi / 2, -kPi / 2};
  const BlockState engine_read = apply_ideal_gate(engine, readout);
  const FullState full_read = run(system, full, {readout}, params);

  double worst = 0.0;
  auto compare = [&](const std::vector<PeakAmplitude>& a, const std::vector<PeakAmplitude>& b) {
    for (std::size_t k = 0; k < a.size(); ++k)
      worst = std::max(worst, std::abs(a[k].amplitude - b[k].amplitude));
  };
  compare(measure_center_peaks(engine), project_to_peaks(full));
  compare(measure_center_peaks(engine_read), project_to_peaks(full_read));
  return worst;
}

CheckReport equivalence_check(int n, int trials, std::uint64_t seed, int ops_per_trial) {
  guard(n);
  if (trials < 0) throw DomainError("trials must be >= 0");
  SpinStarSystem system = SpinStarSystem::tms();
  system.n_peripheral = n;
  CheckReport rep;
  rep.trials = trials;
  for (int k = 0; k < trials; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    const auto params = random_params(rng);
    const auto ops = random_operations(n, ops_per_trial, rng);
    rep.max_deviation = std::max(rep.max_deviation, peak_deviation(system, ops, params));
  }
  return rep;
}

}  // namespace spinstar::oracle
