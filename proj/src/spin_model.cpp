#include "spinstar/spin_model.hpp"

#include <cmath>

namespace spinstar {

const char* to_string(Species s) {
  return s == Species::center ? "center" : "peripheral";
}

void SpinStarSystem::validate() const {
  if (n_peripheral < 1) throw DomainError("n_peripheral must be >= 1");
  if (!(j_coupling > 0.0)) throw DomainError("j_coupling must be > 0");
  if (!(gamma_center != 0.0) || !std::isfinite(gamma_center))
    throw DomainError("gamma_center must be finite and non-zero");
  if (!std::isfinite(gamma_peripheral))
    throw DomainError("gamma_peripheral must be finite");
  const double times[] = {t1_center,         t2_center,   t1_peripheral,
                          t2_peripheral,     t2star_peripheral,
                          t2star_noon,       pulse_pi2_center,
                          pulse_pi2_peripheral};
  for (double t : times) {
    if (!(t > 0.0) || !std::isfinite(t))
      throw DomainError("relaxation and pulse times must be > 0");
  }
}

SpinStarSystem SpinStarSystem::tms() { return SpinStarSystem{}; }

SpinStarSystem SpinStarSystem::tmp(double gamma_phosphorus, double j) {
  SpinStarSystem s;
  s.n_peripheral = 9;
  s.gamma_center = gamma_phosphorus;
  s.j_coupling = j;
  s.validate();
  return s;
}

bool Lopsidedness::valid(int n, int ell) {
  return n >= 0 && std::abs(ell) <= n && ((n - ell) % 2 == 0);
}

Lopsidedness::Lopsidedness(int n, int ell) : n_(n), ell_(ell) {
  if (!valid(n, ell)) {
    throw DomainError("lopsidedness " + std::to_string(ell) +
                      " invalid for N=" + std::to_string(n));
  }
}

std::vector<int> lopsidedness_values(int n) {
  std::vector<int> out;
  for (int ell = -n; ell <= n; ell += 2) out.push_back(ell);
  return out;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::int64_t lopsidedness_multiplicity(int n, int ell) {
  Lopsidedness l(n, ell);
  return binomial(n, l.up());
}

std::vector<DickeSector> dicke_decomposition(int n) {
  if (n < 1) throw DomainError("dicke_decomposition needs n >= 1");
  std::vector<DickeSector> out;
  // d_J = C(n, n/2 - J) - C(n, n/2 - J - 1); with 2J = n - 2k that is
  // C(n, k) - C(n, k - 1).
  for (int k = 0; 2 * k <= n; ++k) {
    out.push_back({n - 2 * k, binomial(n, k) - binomial(n, k - 1)});
  }
  return out;
}

double peak_frequency(int ell, double delta_center_hz, double j_coupling_hz) {
  return delta_center_hz + 0.5 * ell * j_coupling_hz;
}

}  // namespace spinstar
