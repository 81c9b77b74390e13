#include "spinstar/spectro.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

#include <unsupported/Eigen/FFT>

namespace spinstar {

namespace {

constexpr double kSnrCap = 1e12;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double wrap_phase(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

// sum_{k=0}^{n-1} q^k
cplx geometric(cplx q, int n) {
  const cplx one_minus = 1.0 - q;
  if (std::abs(one_minus) < 1e-9) {
    // Series about q = 1 keeps full precision where the closed form cancels.
    const cplx e = q - 1.0;
    const double nn = n;
    return nn + e * (nn * (nn - 1) / 2) + e * e * (nn * (nn - 1) * (nn - 2) / 6);
  }
  return (1.0 - std::pow(q, n)) / one_minus;
}

// Processed (windowed, dwell-scaled) spectrum of exp((2 pi i f - R) t) at
// frequency nu, in closed form.
cplx lineshape(double f, double rate, double nu, double dwell, int n) {
  const cplx q = std::exp(cplx(-rate * dwell, kTwoPi * (f - nu) * dwell));
  const double th = kTwoPi / (n - 1);
  const cplx e = std::polar(1.0, th);
  return dwell * (0.54 * geometric(q, n) - 0.23 * geometric(q * e, n) - 0.23 * geometric(q * std::conj(e), n));
}

struct Windows {
  std::vector<int> first, last;  // inclusive bin ranges
};

Windows peak_windows(int m, double df, const std::vector<double>& f, double j) {
  if (j / 2 < 3 * df)
    throw DomainError("line spacing J/2 spans fewer than 3 spectral bins; increase the zero fill or acquisition time");
  Windows w;
  for (double fl : f) {
    const int a = static_cast<int>(std::ceil((fl - j / 4) / df - 1e-9)) + m / 2;
    const int b = static_cast<int>(std::ceil((fl + j / 4) / df - 1e-9)) + m / 2 - 1;
    if (a < 0 || b >= m) throw DomainError("peak window falls outside the spectral width");
    if (!w.last.empty() && a <= w.last.back()) throw DomainError("peak windows overlap");
    w.first.push_back(a);
    w.last.push_back(b);
  }
  return w;
}

}  // namespace

std::vector<double> line_frequencies(const SpinStarSystem& system, double center_offset) {
  std::vector<double> out;
  for (int ell : lopsidedness_values(system.n_peripheral))
    out.push_back(peak_frequency(ell, center_offset, system.j_coupling));
  return out;
}

Fid synthesize_fid(const std::vector<PeakAmplitude>& peaks, const SpinStarSystem& system,
                   const AcquisitionParams& acq, const Corruption& corruption, std::uint64_t seed,
                   std::uint64_t stream) {
  system.validate();
  if (acq.n_samples < 2) throw DomainError("an FID needs at least 2 samples");
  if (!(acq.dwell > 0)) throw DomainError("dwell must be > 0");
  if (acq.decay_rate < 0) throw DomainError("decay rate must be >= 0");
  if (corruption.noise_sigma < 0) throw DomainError("noise sigma must be >= 0");
  const auto freqs = line_frequencies(system, acq.center_offset);
  const double nyquist = 0.5 / acq.dwell;
  for (double f : freqs)
    if (std::abs(f) >= nyquist)
      throw DomainError("line at " + std::to_string(f) + " Hz exceeds the Nyquist limit " +
                        std::to_string(nyquist) + " Hz; reduce the dwell time");

  Fid fid;
  fid.dwell = acq.dwell;
  fid.seed = seed;
  fid.stream = stream;
  fid.corruption = corruption;
  fid.samples = Eigen::VectorXcd::Zero(acq.n_samples);
  const int n_lines = static_cast<int>(freqs.size());
  for (const auto& p : peaks) {
    const int idx = (p.ell + system.n_peripheral) / 2;
    if (!Lopsidedness::valid(system.n_peripheral, p.ell) || idx < 0 || idx >= n_lines)
      throw DomainError("peak with invalid lopsidedness");
    if (p.amplitude == cplx(0.0, 0.0)) continue;
    for (int k = 0; k < acq.n_samples; ++k) {
      const double t = k * acq.dwell;
      fid.samples(k) += p.amplitude * std::exp(cplx(-acq.decay_rate * t, kTwoPi * freqs[idx] * t));
    }
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double cq = std::cos(corruption.quadrature_phase), sq = std::sin(corruption.quadrature_phase);
  for (int k = 0; k < acq.n_samples; ++k) {
    cplx s = fid.samples(k);
    if (corruption.noise_sigma > 0) {
      const double re = gauss(rng), im = gauss(rng);
      s += corruption.noise_sigma * cplx(re, im);
    }
    const double i_ch = (1.0 + corruption.gain_imbalance) * s.real();
    const double q_ch = (1.0 - corruption.gain_imbalance) * (cq * s.imag() + sq * s.real());
    fid.samples(k) = cplx(i_ch, q_ch) + corruption.dc_offset + corruption.drift * (k * acq.dwell);
  }
  return fid;
}

Eigen::VectorXd hamming(int n) {
  Eigen::VectorXd w(n);
  if (n == 1) {
    w(0) = 1.0;
    return w;
  }
  for (int k = 0; k < n; ++k) w(k) = 0.54 - 0.46 * std::cos(kTwoPi * k / (n - 1));
  return w;
}

Spectrum process(const Fid& fid, int zero_fill) {
  const int n = static_cast<int>(fid.samples.size());
  if (n < 2) throw DomainError("an FID needs at least 2 samples");
  if (!is_power_of_two(zero_fill) || zero_fill < n)
    throw DomainError("zero fill must be a power of two >= the number of samples");
  const Eigen::VectorXd w = hamming(n);
  std::vector<cplx> in(zero_fill, cplx(0.0, 0.0)), out;
  for (int k = 0; k < n; ++k) in[k] = w(k) * fid.samples(k);
  Eigen::FFT<double> fft;
  fft.fwd(out, in);

  Spectrum s;
  s.acquired_samples = n;
  s.zero_fill = zero_fill;
  s.dwell = fid.dwell;
  s.freq.resize(zero_fill);
  s.values.resize(zero_fill);
  const int half = zero_fill / 2;
  for (int i = 0; i < zero_fill; ++i) {
    s.freq(i) = static_cast<double>(i - half) / (zero_fill * fid.dwell);
    s.values(i) = fid.dwell * out[(i - half + zero_fill) % zero_fill];
  }
  return s;
}

struct PeakExtractor::Impl {
  int n = 0, m = 0;
  double dwell = 0.0, df = 0.0, j = 0.0;
  std::vector<double> freqs;
  std::vector<int> ells;
  Windows win;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu;
  Eigen::VectorXd gain_norm;
  std::vector<int> outside;     // bins used for the noise estimate
  Eigen::MatrixXcd shapes;      // unit lineshapes on those bins
  double noise_scale = 0.0;
};

PeakExtractor::PeakExtractor(const SpinStarSystem& system, const AcquisitionParams& acq) {
  system.validate();
  auto built = std::make_shared<Impl>();
  auto& d = *built;
  d.n = acq.n_samples;
  d.m = acq.zero_fill;
  d.dwell = acq.dwell;
  d.df = 1.0 / (d.m * d.dwell);
  d.j = system.j_coupling;
  d.freqs = line_frequencies(system, acq.center_offset);
  d.ells = lopsidedness_values(system.n_peripheral);
  d.win = peak_windows(d.m, d.df, d.freqs, d.j);
  const int n = d.n, m = d.m, nl = static_cast<int>(d.freqs.size());

  // L maps raw samples to window integrals: dwell df w_k sum_{i in W} r_k^(i - m/2).
  const Eigen::VectorXd w = hamming(n);
  Eigen::MatrixXcd lmap(nl, n);
  for (int l = 0; l < nl; ++l) {
    const int cnt = d.win.last[l] - d.win.first[l] + 1;
    const std::int64_t a = d.win.first[l] - m / 2;
    for (int k = 0; k < n; ++k) {
      cplx sum;
      if (k == 0) {
        sum = static_cast<double>(cnt);
      } else {
        auto unit = [&](std::int64_t e) {
          const std::int64_t r = ((e * k) % m + m) % m;
          return std::polar(1.0, -kTwoPi * static_cast<double>(r) / m);
        };
        sum = unit(a) * (1.0 - unit(cnt)) / (1.0 - unit(1));
      }
      lmap(l, k) = d.dwell * d.df * w(k) * sum;
    }
  }

  // Cross-talk matrix: window integrals of unit lines.
  Eigen::MatrixXcd lines(n, nl);
  for (int l = 0; l < nl; ++l)
    for (int k = 0; k < n; ++k) {
      const double t = k * d.dwell;
      lines(k, l) = std::exp(cplx(-acq.decay_rate * t, kTwoPi * d.freqs[l] * t));
    }
  d.lu = (lmap * lines).fullPivLu();
  const Eigen::MatrixXcd gain = d.lu.solve(lmap);
  d.gain_norm = gain.rowwise().norm();

  // Noise level comes from the model residual outside the windows and away from DC.
  for (int i = 0; i < m; ++i) {
    const double f = (i - m / 2) * d.df;
    bool inside = std::abs(f) < d.j / 2;
    for (int l = 0; l < nl && !inside; ++l) inside = i >= d.win.first[l] && i <= d.win.last[l];
    if (!inside) d.outside.push_back(i);
  }
  d.shapes.resize(static_cast<Eigen::Index>(d.outside.size()), nl);
  for (std::size_t r = 0; r < d.outside.size(); ++r)
    for (int l = 0; l < nl; ++l)
      d.shapes(static_cast<Eigen::Index>(r), l) =
          lineshape(d.freqs[l], acq.decay_rate, (d.outside[r] - m / 2) * d.df, d.dwell, n);
  d.noise_scale = 1.0 / (d.dwell * w.norm());
  impl_ = std::move(built);
}

std::vector<PeakMeasurement> PeakExtractor::operator()(const Spectrum& spectrum) const {
  const auto& d = *impl_;
  if (spectrum.acquired_samples != d.n || spectrum.zero_fill != d.m || spectrum.dwell != d.dwell)
    throw DomainError("spectrum does not match the acquisition the extractor was built for");
  const int nl = static_cast<int>(d.freqs.size());

  Eigen::VectorXcd integral(nl);
  for (int l = 0; l < nl; ++l)
    integral(l) = d.df * spectrum.values.segment(d.win.first[l], d.win.last[l] - d.win.first[l] + 1).sum();
  const Eigen::VectorXcd amp = d.lu.solve(integral);

  double sigma = 0.0;
  if (!d.outside.empty()) {
    const Eigen::VectorXcd model = d.shapes * amp;
    double power = 0.0;
    for (std::size_t r = 0; r < d.outside.size(); ++r)
      power += std::norm(spectrum.values(d.outside[r]) - model(static_cast<Eigen::Index>(r)));
    sigma = std::sqrt(power / static_cast<double>(d.outside.size()) / 2.0) * d.noise_scale;
  }

  std::vector<PeakMeasurement> out;
  for (int l = 0; l < nl; ++l) {
    PeakMeasurement p;
    p.ell = d.ells[l];
    p.amplitude = amp(l);
    p.phase = std::arg(amp(l));
    if (p.phase <= -kPi) p.phase += kTwoPi;
    p.frequency = d.freqs[l];
    const double mag = std::abs(amp(l));
    const double noise = sigma * d.gain_norm(l);
    p.snr = mag == 0.0 ? 0.0 : (noise > 0.0 ? std::min(mag / noise, kSnrCap) : kSnrCap);
    p.phase_sigma = p.snr > 0.0 ? 1.0 / p.snr : std::numeric_limits<double>::infinity();
    out.push_back(p);
  }
  return out;
}

std::vector<PeakMeasurement> extract_peaks(const Spectrum& spectrum, const SpinStarSystem& system,
                                           const AcquisitionParams& acq) {
  AcquisitionParams a = acq;
  a.n_samples = spectrum.acquired_samples;
  a.zero_fill = spectrum.zero_fill;
  a.dwell = spectrum.dwell;
  return PeakExtractor(system, a)(spectrum);
}

std::vector<std::vector<PeakMeasurement>> calibrate_and_apply_phase(
    const std::vector<PeakMeasurement>& reference,
    const std::vector<std::vector<PeakMeasurement>>& targets, double threshold) {
  double biggest = 0.0;
  for (const auto& r : reference) biggest = std::max(biggest, std::abs(r.amplitude));
  std::vector<std::vector<PeakMeasurement>> out = targets;
  for (auto& t : out) {
    if (t.size() != reference.size()) throw std::invalid_argument("reference and target peak lists differ in size");
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k].ell != reference[k].ell) throw std::invalid_argument("reference and target peaks are not aligned");
      const double mag = std::abs(reference[k].amplitude);
      if (biggest == 0.0 || mag < threshold * biggest) {
        t[k].calibrated = false;
        continue;
      }
      const double ref_phase = std::arg(reference[k].amplitude);
      t[k].amplitude *= std::polar(1.0, -ref_phase);
      t[k].phase = wrap_phase(std::arg(t[k].amplitude));
    }
  }
  return out;
}

Fid combine_phase_cycle(const std::vector<Fid>& fids, const std::vector<double>& receiver_phases) {
  if (fids.empty() || fids.size() != receiver_phases.size())
    throw std::invalid_argument("need one receiver phase per acquisition");
  Fid out = fids.front();
  out.samples.setZero();
  for (std::size_t k = 0; k < fids.size(); ++k) {
    if (fids[k].samples.size() != out.samples.size() || fids[k].dwell != out.dwell)
      throw std::invalid_argument("phase-cycle acquisitions differ in shape");
    out.samples += fids[k].samples * std::polar(1.0, -receiver_phases[k]);
  }
  return out;
}

void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum) {
  char buf[128];
  os << "freq_hz,re,im\n";
  for (Eigen::Index i = 0; i < spectrum.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", spectrum.freq(i), spectrum.values(i).real(),
                  spectrum.values(i).imag());
    os << buf;
  }
}

void write_peaks_csv(std::ostream& os, const std::vector<PeakMeasurement>& peaks) {
  char buf[160];
  os << "ell,amp_re,amp_im,phase_rad,freq_hz\n";
  for (const auto& p : peaks) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", p.ell, p.amplitude.real(), p.amplitude.imag(),
                  p.phase, p.frequency);
    os << buf;
  }
}

}  // namespace spinstar
