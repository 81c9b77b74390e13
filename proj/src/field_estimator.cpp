#include "spinstar/field_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

namespace spinstar {

namespace {

double offset_term(int ell, const PhaseModel& model) {
  return disentangled(model.mode) ? ell * model.delta_peripheral
                                  : ell * model.delta_peripheral + model.delta_center;
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

const char* to_string(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::original: return "original";
    case EstimatorMode::seq_a: return "a";
    case EstimatorMode::seq_b: return "b";
  }
  return "?";
}

EstimatorMode parse_estimator_mode(const std::string& s) {
  if (s == "original") return EstimatorMode::original;
  if (s == "a" || s == "seq_a") return EstimatorMode::seq_a;
  if (s == "b" || s == "seq_b") return EstimatorMode::seq_b;
  throw std::invalid_argument("unknown estimator mode '" + s + "'");
}

void PhaseModel::validate() const {
  if (!(delay > 0.0)) throw DomainError("phase model needs a delay > 0");
}

double phase_rate_coefficient(int ell, const SpinStarSystem& system, EstimatorMode mode) {
  Lopsidedness(system.n_peripheral, ell);
  const double c = ell * system.gamma_peripheral + (disentangled(mode) ? 0.0 : system.gamma_center);
  return c * kMHz;
}

double amplification(int ell, const SpinStarSystem& system) {
  Lopsidedness(system.n_peripheral, ell);
  return 1.0 + system.gamma_ratio() * ell;
}

double j_phase(int ell, const PhaseModel& model, const SpinStarSystem& system) {
  if (model.mode != EstimatorMode::seq_a) return 0.0;
  Lopsidedness l(system.n_peripheral, ell);
  const double mc = l.down() % 2 == 0 ? 0.5 : -0.5;
  return kTwoPi * model.delay * ell * system.j_coupling * mc;
}

double expected_phase(int ell, double b0, const PhaseModel& model, const SpinStarSystem& system) {
  const double c = phase_rate_coefficient(ell, system, model.mode);
  return kTwoPi * model.delay * (c * b0 + offset_term(ell, model)) + j_phase(ell, model, system);
}

double candidate(int ell, double phase, int k, const PhaseModel& model, const SpinStarSystem& system) {
  const double c = phase_rate_coefficient(ell, system, model.mode);
  if (c == 0.0) throw DomainError("line carries no field information");
  const double base = phase - kTwoPi * model.delay * offset_term(ell, model) - j_phase(ell, model, system);
  return (base + kTwoPi * k) / (kTwoPi * model.delay * c);
}

std::vector<double> peak_candidates(const PeakMeasurement& m, const PhaseModel& model,
                                    const SpinStarSystem& system, const PriorRange& prior) {
  model.validate();
  const double c = phase_rate_coefficient(m.ell, system, model.mode);
  if (c == 0.0) return {};
  // B(k) is affine in k with slope 1 / (t c).
  const double b_at_0 = candidate(m.ell, m.phase, 0, model, system);
  const double step = 1.0 / (model.delay * c);
  double k_lo = (prior.lo - b_at_0) / step, k_hi = (prior.hi - b_at_0) / step;
  if (k_lo > k_hi) std::swap(k_lo, k_hi);
  std::vector<double> out;
  for (long k = static_cast<long>(std::ceil(k_lo)); k <= static_cast<long>(std::floor(k_hi)); ++k)
    out.push_back(candidate(m.ell, m.phase, static_cast<int>(k), model, system));
  std::sort(out.begin(), out.end());
  return out;
}

PriorRange default_prior(const std::vector<int>& ells, const PhaseModel& model, const SpinStarSystem& system) {
  double smallest = 0.0;
  for (int ell : ells) {
    const double c = std::abs(phase_rate_coefficient(ell, system, model.mode));
    if (c > 0.0 && (smallest == 0.0 || c < smallest)) smallest = c;
  }
  if (smallest == 0.0) throw DomainError("no field-sensitive line");
  const double half = 0.5 / (model.delay * smallest);
  return {-half, half};
}

bool FieldEstimate::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

FieldEstimate fuse(const std::vector<PeakMeasurement>& peaks, const PhaseModel& model,
                   const SpinStarSystem& system, const FuseOptions& options) {
  model.validate();
  FieldEstimate est;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const auto& p = peaks[i];
    PeakEstimate pe;
    pe.ell = p.ell;
    pe.phase = p.phase;
    pe.coefficient = phase_rate_coefficient(p.ell, system, model.mode);
    pe.used = pe.coefficient != 0.0 && p.calibrated && finite_positive(p.snr) && p.snr >= options.min_snr &&
              finite_positive(p.phase_sigma) &&
              (options.max_abs_ell < 0 || std::abs(p.ell) <= options.max_abs_ell);
    if (pe.used) {
      pe.sigma = p.phase_sigma / (kTwoPi * model.delay * std::abs(pe.coefficient));
      pe.weight = 1.0 / (pe.sigma * pe.sigma);
      order.push_back(i);
    }
    est.peaks.push_back(pe);
  }
  if (order.empty()) throw DomainError("no usable line for the field estimate");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int ea = peaks[a].ell, eb = peaks[b].ell;
    return std::abs(ea) != std::abs(eb) ? std::abs(ea) < std::abs(eb) : ea < eb;
  });

  std::vector<int> used_ells;
  for (auto i : order) used_ells.push_back(peaks[i].ell);
  const PriorRange prior = options.prior ? *options.prior : default_prior(used_ells, model, system);

  bool tie = false;
  double wsum = 0.0, bsum = 0.0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    auto& pe = est.peaks[order[n]];
    const double target = n == 0 ? prior.center() : bsum / wsum;
    // Continuous branch index that would land exactly on the target.
    const double b0_k0 = candidate(pe.ell, pe.phase, 0, model, system);
    const double kf = (target - b0_k0) * model.delay * pe.coefficient;
    double k = std::round(kf);
    if (std::abs(std::abs(kf - std::floor(kf)) - 0.5) < 1e-9) {
      const double a = std::floor(kf), b = std::ceil(kf);
      k = std::abs(a) <= std::abs(b) ? a : b;
      tie = true;
    }
    if (n == 0) {
      const auto cands = peak_candidates(peaks[order[n]], model, system, prior);
      if (cands.empty()) est.flags.push_back("prior_excludes_all_branches");
    }
    pe.k = static_cast<int>(k);
    pe.b0 = candidate(pe.ell, pe.phase, pe.k, model, system);
    wsum += pe.weight;
    bsum += pe.weight * pe.b0;
  }
  est.b0 = bsum / wsum;
  est.sigma = 1.0 / std::sqrt(wsum);
  if (tie) est.flags.push_back("branch_tie");
  for (const auto& pe : est.peaks)
    if (pe.used && std::abs(pe.b0 - est.b0) > options.consistency_sigmas * pe.sigma) {
      est.flags.push_back("degraded");
      break;
    }
  return est;
}

SensitivityReport sensitivity_report(const SpinStarSystem& system, EstimatorMode mode) {
  system.validate();
  SensitivityReport r;
  r.mode = mode;
  for (int ell : lopsidedness_values(system.n_peripheral)) {
    SensitivityRow row;
    row.ell = ell;
    row.coefficient = phase_rate_coefficient(ell, system, mode);
    row.vs_center = std::abs(row.coefficient) / (std::abs(system.gamma_center) * kMHz);
    row.vs_peripheral = std::abs(row.coefficient) / (std::abs(system.gamma_peripheral) * kMHz);
    row.amplification = amplification(ell, system);
    r.rows.push_back(row);
  }
  r.standard_quantum_limit = std::sqrt(static_cast<double>(system.n_peripheral));
  r.heisenberg_limit = system.n_peripheral;
  return r;
}

void write_sensitivity_csv(std::ostream& os, const SensitivityReport& report) {
  char buf[200];
  os << "ell,coefficient_hz_per_t,vs_center,vs_peripheral,amplification\n";
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.ell, r.coefficient, r.vs_center,
                  r.vs_peripheral, r.amplification);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "# standard_quantum_limit %.17g heisenberg_limit %.17g\n",
                report.standard_quantum_limit, report.heisenberg_limit);
  os << buf;
}

std::string estimate_to_json(const FieldEstimate& estimate) {
  nlohmann::ordered_json j;
  j["b0_tesla"] = estimate.b0;
  j["sigma_tesla"] = estimate.sigma;
  j["peaks"] = nlohmann::ordered_json::array();
  for (const auto& p : estimate.peaks) {
    if (!p.used) continue;
    j["peaks"].push_back({{"ell", p.ell}, {"phase_rad", p.phase}, {"k", p.k}, {"weight", p.weight}});
  }
  j["flags"] = estimate.flags;
  return j.dump(2) + "\n";
}

void write_peak_estimates_csv(std::ostream& os, const FieldEstimate& estimate) {
  char buf[256];
  os << "ell,phase_rad,coefficient_hz_per_t,used,k,b0_tesla,sigma_tesla,weight\n";
  for (const auto& p : estimate.peaks) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%d,%.17g,%.17g,%.17g\n", p.ell, p.phase, p.coefficient,
                  p.used ? 1 : 0, p.k, p.b0, p.sigma, p.weight);
    os << buf;
  }
}

}  // namespace spinstar
