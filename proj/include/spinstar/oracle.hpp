#pragma once

// Reference simulator on the full 2^(N+1) product space. It shares only the
// operation descriptions with the Dicke engine, never its kernels.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spinstar/dicke_engine.hpp"
#include "spinstar/operations.hpp"

namespace spinstar::oracle {

constexpr int kMaxPeripheral = 4;

/// Product basis: index = c * 2^N + p with c = 1 for a down centre and bit k
/// of p set for a down peripheral k.
struct FullState {
  int n_peripheral = 0;
  Eigen::MatrixXcd rho;
};

FullState thermal(const SpinStarSystem& system);
FullState pseudopure(const SpinStarSystem& system, int ell);

FullState run(const SpinStarSystem& system, const FullState& initial,
              const std::vector<Operation>& ops, const EvolutionParams& params);

/// Centre single-quantum coherences summed per lopsidedness, ell ascending.
std::vector<PeakAmplitude> project_to_peaks(const FullState& state);

// ---------------------------------------------------------------------------
// Randomised equivalence checks

/// Random mix of ideal gates, one- and two-channel RF segments and free
/// evolution. The parity CNOT is only drawn for odd n.
std::vector<Operation> random_operations(int n, int count, std::mt19937_64& rng);
EvolutionParams random_params(std::mt19937_64& rng);

/// Largest |peak difference| between the engine and the oracle for `ops`
/// applied to the thermal state, read both directly and after a centre
/// pi/2 readout.
double peak_deviation(const SpinStarSystem& system, const std::vector<Operation>& ops,
                      const EvolutionParams& params);

struct CheckReport {
  int trials = 0;
  double max_deviation = 0.0;
};

/// Trial k draws from std::seed_seq{seed, k}.
CheckReport equivalence_check(int n, int trials, std::uint64_t seed, int ops_per_trial = 8);

}  // namespace spinstar::oracle
