#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spinstar/experiment.hpp"
#include "spinstar/plot.hpp"

using namespace spinstar;

namespace {

RunConfig quiet(SequenceKind kind) {
  RunConfig c = preset_config("tms");
  c.sequence = kind;
  c.corruption.noise_sigma = 0.0;
  return c;
}

std::string sweep_text(const RunConfig& c, SweepAxis axis, const std::vector<double>& v, int threads) {
  std::ostringstream os;
  write_sweep_csv(os, axis, run_sweep(c, axis, v, threads));
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, PresetDefaults) {
  const auto c = preset_config("tms");
  EXPECT_EQ(c.system.n_peripheral, 12);
  EXPECT_DOUBLE_EQ(c.system.gamma_center, -8.465);
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(preset_config("tmx"), ConfigError);
}

TEST(Config, UnknownKeysAreRejected) {
  try {
    parse_config(R"({"sequence": "b", "dleay": 1})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dleay"), std::string::npos);
  }
  try {
    parse_config(R"({"corruption": {"noise": 1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("corruption.noise"), std::string::npos);
  }
}

TEST(Config, ErrorsNameTheField) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text).validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"delay": "long"})").find("delay"), std::string::npos);
  EXPECT_NE(message(R"({"pulses": "soft"})").find("pulses"), std::string::npos);
  EXPECT_NE(message(R"({"acquisition": {"zero_fill": 1000}})").find("acquisition.zero_fill"), std::string::npos);
  EXPECT_NE(message(R"({"preset": "tmp"})").find("system.gamma_center"), std::string::npos);
  EXPECT_NE(message(R"({"preset": "tmp", "system": {"gamma_center": 17.235}})").find("system.j_coupling"),
            std::string::npos);
  EXPECT_NE(message(R"({"sequence": "a"})").find("sequence"), std::string::npos);
  EXPECT_NE(message("{not json").find("JSON"), std::string::npos);
}

TEST(Config, TmpWithSuppliedConstants) {
  const auto c = parse_config(R"({"preset": "tmp", "sequence": "a", "system": {"gamma_center": 17.235, "j_coupling": 11.0}})");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.system.n_peripheral, 9);
  EXPECT_EQ(c.sequence, SequenceKind::seq_a);
}

TEST(Config, JsonRoundTrip) {
  auto c = parse_config(R"({"sequence": "original", "priming": true, "pulses": "bb1", "delay": 0.25, "b0": 3e-9,
                            "corruption": {"dc_offset": [0.1, -0.2], "gain_imbalance": 0.01},
                            "estimator": {"prior": [-1e-8, 2e-8], "min_snr": 5}, "seed": 99})");
  const std::string once = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_config(once)), once);
  EXPECT_EQ(c.seed, 99u);
  ASSERT_TRUE(c.estimator.prior.has_value());
  EXPECT_DOUBLE_EQ(c.estimator.prior->hi, 2e-8);
}

// ---------------------------------------------------------------------------
// Spectra

TEST(Spectrum, ThermalBinomialLines) {
  auto c = quiet(SequenceKind::none);
  const auto r = run_experiment(c);
  ASSERT_EQ(r.calibrated.size(), 13u);
  const double centre = std::abs(r.calibrated[6].amplitude);
  for (const auto& p : r.calibrated)
    EXPECT_NEAR(std::abs(p.amplitude) / centre,
                static_cast<double>(lopsidedness_multiplicity(12, p.ell)) / 924.0, 1e-9)
        << p.ell;
  EXPECT_NEAR(std::abs(r.calibrated[0].amplitude) / centre, 1.0 / 924.0, 1e-9);
}

TEST(Spectrum, PrimingLiftsOuterLinesSixtyFold) {
  auto c = quiet(SequenceKind::none);
  c.relaxation = false;
  const auto thermal = run_experiment(c);
  c.priming = true;
  const auto primed = run_experiment(c);
  for (std::size_t i = 0; i < primed.calibrated.size(); ++i) {
    const int ell = primed.calibrated[i].ell;
    const double ratio = std::abs(primed.peaks[i].amplitude) / std::abs(thermal.peaks[i].amplitude);
    EXPECT_NEAR(ratio, std::abs(amplification(ell, c.system)), 1e-6 * ratio) << ell;
  }
  for (std::size_t i : {std::size_t{0}, primed.peaks.size() - 1}) {
    const double outer = std::abs(primed.peaks[i].amplitude) / std::abs(thermal.peaks[i].amplitude);
    EXPECT_GT(outer, 59.0);
    EXPECT_LT(outer, 62.0);
  }
}

// The transferred part decays during the priming CNOT with the echo T2.
TEST(Spectrum, RelaxedPrimingLosesTransferEfficiency) {
  auto c = quiet(SequenceKind::none);
  const auto thermal = run_experiment(c);
  c.priming = true;
  const auto primed = run_experiment(c);
  const double eff = std::exp(-1.0 / (2.0 * c.system.j_coupling * c.system.t2_peripheral));
  for (std::size_t i = 0; i < primed.calibrated.size(); ++i) {
    const int ell = primed.calibrated[i].ell;
    if (ell == 0) continue;
    const std::complex<double> ratio = primed.peaks[i].amplitude / thermal.peaks[i].amplitude;
    EXPECT_NEAR((ratio.real() - 1.0) / (c.system.gamma_ratio() * ell), eff, 1e-6) << ell;
  }
}

TEST(Spectrum, ZeroDelayRunCalibratesToZeroPhase) {
  for (auto kind : {SequenceKind::original, SequenceKind::seq_b}) {
    auto c = quiet(kind);
    c.delay = 0.0;
    c.b0 = 2e-9;
    c.delta_si = 40.0;
    for (const auto& p : run_experiment(c).calibrated) EXPECT_NEAR(p.phase, 0.0, 1e-9) << p.ell;
  }
}

TEST(Spectrum, RunIsDeterministic) {
  RunConfig c = preset_config("tms");
  c.b0 = 1e-9;
  const auto a = run_experiment(c, 7), b = run_experiment(c, 7), d = run_experiment(c, 8);
  for (std::size_t i = 0; i < a.calibrated.size(); ++i) {
    EXPECT_EQ(a.calibrated[i].amplitude, b.calibrated[i].amplitude);
    EXPECT_NE(a.calibrated[i].amplitude, d.calibrated[i].amplitude);
  }
}

// ---------------------------------------------------------------------------
// Estimation through the full chain

TEST(Estimate, ZeroFieldGivesZeroWithinSigma) {
  RunConfig c = preset_config("tms");
  const auto est = estimate_field(c, run_experiment(c));
  EXPECT_LE(std::abs(est.b0), 4 * est.sigma);
  EXPECT_GT(est.sigma, 0.0);
}

TEST(Estimate, OrderFilterRemovesRelaxationBias) {
  RunConfig c = quiet(SequenceKind::seq_b);
  c.b0 = 1e-9;
  c.order_filter = false;
  const double biased = estimate_field(c, run_experiment(c)).b0;
  c.order_filter = true;
  const double clean = estimate_field(c, run_experiment(c)).b0;
  EXPECT_GT(std::abs(biased - c.b0), 0.02 * c.b0);
  EXPECT_NEAR(clean, c.b0, 1e-9 * c.b0);
}

TEST(Estimate, HardPulseReferenceKeepsItsRefocusingTime) {
  RunConfig c = quiet(SequenceKind::seq_b);
  c.pulses = PulseModel::hard;
  c.relaxation = false;
  c.b0 = 2e-9;
  // Two centre pi pulses of the delay window survive in the zero-delay reference.
  const double pi_c = 2 * 17e-6;
  EXPECT_NEAR(phase_model(c).delay, c.delay - 2 * pi_c, 1e-12);
  EXPECT_NEAR(estimate_field(c, run_experiment(c)).b0, c.b0, 1e-9 * c.b0);
}

TEST(Estimate, SequenceBIgnoresCentreOffset) {
  RunConfig c = preset_config("tms");
  c.b0 = 0.7e-9;
  c.delta_si = 3.5;
  const auto est = estimate_field(c, run_experiment(c));
  for (const auto& p : est.peaks)
    if (p.used) EXPECT_NEAR(p.b0, c.b0, 5 * p.sigma) << p.ell;
  EXPECT_NEAR(est.b0, c.b0, 4 * est.sigma);
}

TEST(Estimate, OriginalSequenceShowsUnmodelledCentreOffset) {
  RunConfig c = preset_config("tms");
  c.sequence = SequenceKind::original;
  c.delay = 0.01;
  c.b0 = 0.7e-9;
  c.delta_si = 3.5;
  const auto est = estimate_field(c, run_experiment(c));
  int checked = 0;
  for (const auto& p : est.peaks) {
    if (!p.used) continue;
    EXPECT_NEAR(p.b0 - c.b0, c.delta_si / p.coefficient, 5 * p.sigma) << p.ell;
    ++checked;
  }
  EXPECT_GE(checked, 9);
  EXPECT_TRUE(est.has_flag("degraded"));
  // Telling the estimator about the offset removes the pattern.
  c.estimator.delta_si = 3.5;
  const auto fixed = estimate_field(c, run_experiment(c));
  EXPECT_NEAR(fixed.b0, c.b0, 4 * fixed.sigma);
}

TEST(Estimate, SequenceAOnTmp) {
  RunConfig c = parse_config(
      R"({"preset": "tmp", "sequence": "a", "priming": true, "delay": 0.05, "b0": -1.2e-9, "delta_si": 20,
          "system": {"gamma_center": 17.235, "j_coupling": 11.0}})");
  const auto est = estimate_field(c, run_experiment(c));
  EXPECT_NEAR(est.b0, c.b0, 4 * est.sigma);
}

TEST(Estimate, NeedsACatSequenceAndADelay) {
  RunConfig c = preset_config("tms");
  c.sequence = SequenceKind::none;
  EXPECT_THROW(phase_model(c), ConfigError);
  c.sequence = SequenceKind::seq_b;
  c.delay = 0.0;
  EXPECT_THROW(phase_model(c), ConfigError);
}

// ---------------------------------------------------------------------------
// Sweeps

TEST(Sweep, ByteIdenticalAcrossThreadCounts) {
  RunConfig c = preset_config("tms");
  c.b0 = 0.4e-9;
  const std::vector<double> v = {-200, -50, 0, 50, 200};
  const auto one = sweep_text(c, SweepAxis::delta_center, v, 1);
  EXPECT_EQ(sweep_text(c, SweepAxis::delta_center, v, 2), one);
  EXPECT_EQ(sweep_text(c, SweepAxis::delta_center, v, 8), one);
  EXPECT_EQ(one.rfind("delta_center,b0_tesla,sigma_tesla,flags,error\n", 0), 0u);
}

TEST(Sweep, IdealCentreOffsetSweepIsFlat) {
  RunConfig c = quiet(SequenceKind::seq_b);
  c.b0 = 0.4e-9;
  const auto pts = run_sweep(c, SweepAxis::delta_center, {-2000, -500, 0, 500, 2000}, 2);
  for (const auto& p : pts) {
    ASSERT_TRUE(p.ok) << p.error;
    EXPECT_NEAR(p.estimate.b0, pts[0].estimate.b0, 1e-12 * std::abs(pts[0].estimate.b0)) << p.value;
  }
}

TEST(Sweep, PeripheralOffsetLooksLikeField) {
  RunConfig c = quiet(SequenceKind::seq_b);
  c.delta_si = 15.0;
  const std::vector<double> v = {-1, -0.3, 0, 0.3, 1};
  const auto pts = run_sweep(c, SweepAxis::delta_peripheral, v, 1);
  for (const auto& p : pts) {
    ASSERT_TRUE(p.ok) << p.error;
    const double want = p.value / (c.system.gamma_peripheral * kMHz);
    EXPECT_NEAR(p.estimate.b0, want, 1e-9 * std::abs(want) + 1e-20) << p.value;
  }
}

// 17 us centre pulses tip off-resonance spins into other coherence orders;
// that shows up as a field error only when the order filter is off.
TEST(Sweep, HardPulseBandwidthDistortsLargeCentreOffsets) {
  RunConfig c = quiet(SequenceKind::seq_b);
  c.pulses = PulseModel::hard;
  c.b0 = 0.6e-9;
  c.order_filter = false;
  const auto raw = run_sweep(c, SweepAxis::delta_center, {500, 3000}, 1);
  ASSERT_TRUE(raw[0].ok && raw[1].ok);
  EXPECT_GT(std::abs(raw[1].estimate.b0 - c.b0), 10 * std::abs(raw[0].estimate.b0 - c.b0));
  EXPECT_GT(std::abs(raw[1].estimate.b0 - c.b0), 1e-9);
  c.order_filter = true;
  const auto filtered = run_sweep(c, SweepAxis::delta_center, {500, 3000}, 1);
  for (const auto& p : filtered) EXPECT_NEAR(p.estimate.b0, c.b0, 1e-11) << p.value;
}

TEST(Sweep, FailedPointsAreRecorded) {
  RunConfig c = quiet(SequenceKind::seq_b);
  const auto pts = run_sweep(c, SweepAxis::b0, {0.0, std::nan(""), 1e-9}, 2);
  EXPECT_TRUE(pts[0].ok);
  EXPECT_FALSE(pts[1].ok);
  EXPECT_NE(pts[1].error.find("b0"), std::string::npos);
  EXPECT_TRUE(pts[2].ok);
  std::ostringstream os;
  write_sweep_csv(os, SweepAxis::b0, pts);
  EXPECT_NE(os.str().find("nan,nan,nan,,"), std::string::npos);
}

TEST(Sweep, RejectsTooFewValues) {
  EXPECT_THROW(run_sweep(preset_config("tms"), SweepAxis::b0, {1e-9}, 1), ConfigError);
  EXPECT_THROW(parse_sweep_axis("j"), ConfigError);
}

// ---------------------------------------------------------------------------
// Plots

TEST(Plot, ParsesCsvWithCommentsAndBlanks) {
  const auto t = parse_csv("# note\nx,y,flags\n1,2,\n3,nan,degraded\n");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.column("y"), 1);
  EXPECT_DOUBLE_EQ(t.rows[0][1], 2.0);
  EXPECT_TRUE(std::isnan(t.rows[1][1]));
  EXPECT_TRUE(std::isnan(t.rows[0][2]));
  EXPECT_THROW(t.column("z"), std::invalid_argument);
}

TEST(Plot, RendersOnlyWhatTheCsvHolds) {
  const std::string csv = "x,y,e\n0,0,0.1\n1,1,0.1\n2,4,0.2\n";
  PlotSpec spec;
  spec.x_column = "x";
  spec.series = {{"y", "line", false}};
  const auto line = render_svg(parse_csv(csv), spec);
  EXPECT_EQ(line.rfind("<svg", 0), 0u);
  EXPECT_NE(line.find("<polyline"), std::string::npos);
  spec.series[0].scatter = true;
  spec.y_error_column = "e";
  const auto dots = render_svg(parse_csv(csv), spec);
  std::size_t circles = 0;
  for (auto pos = dots.find("<circle"); pos != std::string::npos; pos = dots.find("<circle", pos + 1)) ++circles;
  EXPECT_EQ(circles, 3u);
  EXPECT_EQ(render_svg(parse_csv(csv), spec), dots);
}
