#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinstar {

/// Raised when an argument lies outside the physically meaningful domain
/// (parity mismatch, |ell| > N, non-positive times, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kMHz = 1.0e6;

enum class Species { center, peripheral };

const char* to_string(Species s);

/// Physical description of a spin-star molecule: one central spin-1/2
/// coupled with equal J to N equivalent peripheral spin-1/2 nuclei.
///
/// Gyromagnetic ratios are kept in MHz/T as printed in the literature;
/// conversion to angular units happens where phases are computed.
struct SpinStarSystem {
  int n_peripheral = 12;
  double gamma_center = -8.465;      // MHz/T
  double gamma_peripheral = 42.577;  // MHz/T
  double j_coupling = 6.63;          // Hz
  double t1_center = 25.4;           // s
  double t2_center = 1.2;
  double t1_peripheral = 8.9;
  double t2_peripheral = 1.6;
  double t2star_peripheral = 0.37;
  double t2star_noon = 0.28;
  double pulse_pi2_center = 17e-6;      // s
  double pulse_pi2_peripheral = 27e-6;  // s

  /// gamma_peripheral / gamma_center. Always derived.
  double gamma_ratio() const { return gamma_peripheral / gamma_center; }

  /// Throws DomainError if an invariant is violated.
  void validate() const;

  /// Tetramethylsilane: 29Si centre, twelve 1H.
  static SpinStarSystem tms();
  /// Trimethylphosphite: 31P centre, nine 1H. The centre gyromagnetic ratio
  /// and the P-H coupling are not tabulated here and must be supplied.
  static SpinStarSystem tmp(double gamma_phosphorus, double j_coupling);
};

/// Lopsidedness ell = U - D of the peripheral register.
class Lopsidedness {
 public:
  Lopsidedness(int n, int ell);
  int value() const { return ell_; }
  int n() const { return n_; }
  /// Number of peripheral spins pointing up.
  int up() const { return (n_ + ell_) / 2; }
  int down() const { return (n_ - ell_) / 2; }
  /// Collective magnetic quantum number m_J = ell / 2, stored doubled.
  int two_m() const { return ell_; }

  static bool valid(int n, int ell);

 private:
  int n_;
  int ell_;
};

/// All lopsidedness values -N, -N+2, ..., N in ascending order.
std::vector<int> lopsidedness_values(int n);

/// Irreducible collective-spin block. Total spin is stored as 2J so that
/// half-integer sectors stay exact.
struct DickeSector {
  int two_j = 0;
  std::int64_t multiplicity = 0;

  double j() const { return 0.5 * two_j; }
  int dimension() const { return two_j + 1; }
  bool operator==(const DickeSector&) const = default;
};

std::int64_t binomial(int n, int k);

/// C(n, (n+ell)/2): peripheral configurations with lopsidedness ell.
std::int64_t lopsidedness_multiplicity(int n, int ell);

/// Sectors ordered from J = n/2 downwards.
std::vector<DickeSector> dicke_decomposition(int n);

/// First-order centre-spin line position for peripheral lopsidedness ell.
double peak_frequency(int ell, double delta_center_hz, double j_coupling_hz);

}  // namespace spinstar
