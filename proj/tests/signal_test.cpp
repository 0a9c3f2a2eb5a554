#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "stereohaptic/signal.hpp"

namespace sh = stereohaptic;

namespace {

constexpr double kRate = 48000.0;

// |H| of the weighting band-pass at 200 Hz / 48 kHz, from scipy.signal.freqz
// on the same biquad coefficients.
constexpr double kGain200 = 0.9537860425134502;

sh::Waveform sine(double hz, double amplitude, double seconds, double rate = kRate) {
  sh::Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(seconds * rate);
  for (std::size_t i = 0; i < n; ++i)
    w.samples.push_back(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate));
  return w;
}

double peak(const std::vector<double>& v, std::size_t from = 0) {
  double p = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) p = std::max(p, std::abs(v[i]));
  return p;
}

// Smooth positive envelope: offset plus a few slow sinusoids.
sh::IntensityEnvelope smooth_envelope(std::mt19937_64& rng, std::size_t frames, double hop) {
  std::uniform_real_distribution<double> freq(0.2, 4.0), phase(0.0, 6.283), amp(0.0, 0.06);
  sh::IntensityEnvelope env;
  env.hop = hop;
  env.window = 2 * hop;
  double f[3], p[3], a[3];
  for (int j = 0; j < 3; ++j) {
    f[j] = freq(rng);
    p[j] = phase(rng);
    a[j] = amp(rng);
  }
  for (std::size_t m = 0; m < frames; ++m) {
    const double t = static_cast<double>(m) * hop;
    double v = 0.3;
    for (int j = 0; j < 3; ++j) v += a[j] * std::sin(2.0 * std::numbers::pi * f[j] * t + p[j]);
    env.values.push_back(v);
  }
  return env;
}

}  // namespace

TEST(SensitivityFilter, SilenceStaysSilent) {
  sh::Waveform w;
  w.samples.assign(4800, 0.0);
  const auto out = sh::sensitivity_filter(w, {});
  EXPECT_EQ(out.samples.size(), w.samples.size());
  EXPECT_EQ(peak(out.samples), 0.0);
}

TEST(SensitivityFilter, UnityGainAtCenter) {
  const auto out = sh::sensitivity_filter(sine(250.0, 0.5, 0.5), {});
  EXPECT_NEAR(peak(out.samples, 12000) / 0.5, 1.0, 0.02);
}

TEST(SensitivityFilter, DecadeBelowCenterIsAttenuated) {
  const auto out = sh::sensitivity_filter(sine(25.0, 0.5, 2.0), {});
  EXPECT_LT(peak(out.samples, 48000) / 0.5, 0.2);
}

TEST(SensitivityFilter, MagnitudeMatchesReference) {
  const sh::SignalConfig cfg;
  EXPECT_NEAR(sh::sensitivity_gain(cfg, 200.0, kRate), kGain200, 1e-12);
  EXPECT_NEAR(sh::sensitivity_gain(cfg, 250.0, kRate), 1.0, 1e-12);
  // Close to the analog prototype at these frequencies.
  const double analog = 1.0 / std::sqrt(1.0 + 0.49 * std::pow(200.0 / 250.0 - 250.0 / 200.0, 2));
  EXPECT_NEAR(sh::sensitivity_gain(cfg, 200.0, kRate), analog, 1e-4);
}

TEST(Envelope, EmptyAndSilent) {
  EXPECT_TRUE(sh::perceived_intensity_envelope(sh::Waveform{}, {}).values.empty());
  sh::Waveform w;
  w.samples.assign(9600, 0.0);
  const auto env = sh::perceived_intensity_envelope(w, {});
  EXPECT_EQ(env.values.size(), 40u);
  for (double v : env.values) EXPECT_EQ(v, 0.0);
}

TEST(Envelope, LengthIsCeilOfDurationOverHop) {
  for (std::size_t n : {1u, 239u, 240u, 241u, 4801u}) {
    sh::Waveform w;
    w.samples.assign(n, 0.1);
    const auto expected = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / 240.0));
    EXPECT_EQ(sh::perceived_intensity_envelope(w, {}).values.size(), expected) << n;
  }
}

TEST(Envelope, SteadySineAtCenterReadsRmsOfUnitySine) {
  const auto env = sh::perceived_intensity_envelope(sine(250.0, 1.0, 1.0), {});
  for (std::size_t m = 10; m < env.values.size(); ++m) EXPECT_NEAR(env.values[m], 1.0 / std::sqrt(2.0), 0.02 / std::sqrt(2.0));
}

TEST(Envelope, ImpulseDecays) {
  sh::Waveform w;
  w.samples.assign(48000, 0.0);
  w.samples[4800] = 1.0;
  const sh::SignalConfig cfg;
  const auto env = sh::perceived_intensity_envelope(w, cfg);
  // Impulse at 0.1 s; window 10 ms plus ring-down (time constant ~1 ms).
  bool nonzero = false;
  for (std::size_t m = 0; m < env.values.size(); ++m) {
    const double t = static_cast<double>(m) * cfg.hop;
    if (t < 0.1) EXPECT_EQ(env.values[m], 0.0);
    if (t >= 0.1 && t < 0.11) nonzero = nonzero || env.values[m] > 0.0;
    if (t > 0.1 + cfg.window + 0.02) EXPECT_LT(env.values[m], 1e-4) << t;
  }
  EXPECT_TRUE(nonzero);
}

TEST(Envelope, ScaleLinear) {
  const auto base = sh::preset_signal(sh::Preset::rumble, 1.0, {});
  const auto e1 = sh::perceived_intensity_envelope(base, {});
  for (double alpha : {0.0, 0.1, 0.37, 1.0}) {
    sh::Waveform scaled = base;
    for (double& s : scaled.samples) s *= alpha;
    const auto e2 = sh::perceived_intensity_envelope(scaled, {});
    for (std::size_t m = 0; m < e1.values.size(); ++m) EXPECT_NEAR(e2.values[m], alpha * e1.values[m], 1e-6);
  }
}

TEST(Synthesis, ZeroEnvelopeIsSilence) {
  sh::IntensityEnvelope env;
  env.values.assign(100, 0.0);
  const auto out = sh::synthesize_am_carrier(env, {}, kRate);
  EXPECT_EQ(out.waveform.samples.size(), 24000u);
  EXPECT_EQ(peak(out.waveform.samples), 0.0);
  EXPECT_EQ(out.clipped, 0u);
}

TEST(Synthesis, ConstantEnvelopeGivesSteadyCarrier) {
  sh::IntensityEnvelope env;
  env.values.assign(200, 0.1);
  const auto out = sh::synthesize_am_carrier(env, {}, kRate);
  const double expected = std::sqrt(2.0) * 0.1 / kGain200;  // 0.14827366928607075
  EXPECT_NEAR(peak(out.waveform.samples), expected, 1e-9);
}

TEST(Synthesis, RoundTripSmoothEnvelopes) {
  std::mt19937_64 rng(3);
  const sh::SignalConfig cfg;
  for (int i = 0; i < 20; ++i) {
    const auto env = smooth_envelope(rng, 400, cfg.hop);
    const auto synth = sh::synthesize_am_carrier(env, cfg, kRate);
    EXPECT_EQ(synth.clipped, 0u);
    const auto back = sh::perceived_intensity_envelope(synth.waveform, cfg);
    ASSERT_EQ(back.values.size(), env.values.size());
    // Frame m describes the window centred at hop*m - window/2; skip frames
    // centred within one window of either end.
    const std::size_t edge = static_cast<std::size_t>(std::ceil(1.5 * cfg.window / cfg.hop));
    for (std::size_t m = edge; m + edge < env.values.size(); ++m)
      EXPECT_NEAR(back.values[m], env.values[m], 0.05 * env.values[m]) << m;
  }
}

TEST(Synthesis, ClipsAndReports) {
  sh::IntensityEnvelope env;
  env.values.assign(50, 1.0);
  const auto out = sh::synthesize_am_carrier(env, {}, kRate);
  EXPECT_GT(out.clipped, 0u);
  EXPECT_LE(peak(out.waveform.samples), 1.0);
}

TEST(Synthesis, SpectralPeakAtCarrier) {
  sh::IntensityEnvelope env;
  env.values.assign(200, 0.2);
  sh::SignalConfig cfg;
  cfg.carrier_hz = 180.0;
  const auto w = sh::synthesize_am_carrier(env, cfg, kRate).waveform;
  // Direct DFT magnitude over 1 s (1 Hz bins) in 100..400 Hz.
  double best = 0.0;
  int best_hz = 0;
  for (int f = 100; f <= 400; ++f) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < w.samples.size(); ++i)
      acc += w.samples[i] * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(i) / kRate);
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_hz = f;
    }
  }
  EXPECT_NEAR(best_hz, 180, 1);
}

TEST(Synthesis, PhaseIsContinuous) {
  sh::IntensityEnvelope env;
  env.values.assign(200, 0.2);
  const auto w = sh::synthesize_am_carrier(env, {}, kRate).waveform;
  // For a steady carrier the largest sample step is A * 2 sin(pi f / fs).
  const double a = std::sqrt(2.0) * 0.2 / kGain200;
  const double bound = a * 2.0 * std::sin(std::numbers::pi * 200.0 / kRate) * (1.0 + 1e-9);
  for (std::size_t i = 1; i < w.samples.size(); ++i) EXPECT_LE(std::abs(w.samples[i] - w.samples[i - 1]), bound);
}

TEST(Presets, UnknownNameIsAnError) {
  EXPECT_THROW(sh::parse_preset("roar"), sh::Error);
  EXPECT_EQ(sh::parse_preset("footstep"), sh::Preset::footstep);
}

TEST(Presets, DurationZeroIsEmpty) {
  EXPECT_TRUE(sh::preset_signal(sh::Preset::sine, 0.0, {}).samples.empty());
  EXPECT_THROW(sh::preset_signal(sh::Preset::sine, -1.0, {}), sh::Error);
}

TEST(Presets, PeakNormalized) {
  for (auto p : {sh::Preset::sine, sh::Preset::footstep, sh::Preset::rumble}) {
    const auto w = sh::preset_signal(p, 1.0, {}, kRate);
    EXPECT_EQ(w.samples.size(), 48000u);
    EXPECT_NEAR(peak(w.samples), 0.8, 1e-6);
    EXPECT_NO_THROW(w.validate());
  }
}

TEST(Presets, FootstepBurstDecays20dBWithin300ms) {
  const sh::SignalConfig cfg;
  const auto env = sh::perceived_intensity_envelope(sh::preset_signal(sh::Preset::footstep, 1.0, cfg), cfg);
  const auto& v = env.values;
  const std::size_t span = static_cast<std::size_t>(0.3 / cfg.hop);
  int decaying_maxima = 0;
  for (std::size_t m = 1; m + 1 < v.size(); ++m) {
    if (!(v[m] > v[m - 1] && v[m] >= v[m + 1])) continue;
    for (std::size_t j = m + 1; j < std::min(v.size(), m + span); ++j) {
      if (v[j] <= 0.1 * v[m]) {
        ++decaying_maxima;
        break;
      }
    }
  }
  EXPECT_GE(decaying_maxima, 1);
}

TEST(SignalConfig, Validation) {
  sh::SignalConfig cfg;
  EXPECT_NO_THROW(cfg.validate(kRate));
  cfg.hop = 0.02;
  EXPECT_THROW(cfg.validate(kRate), sh::Error);
  cfg = {};
  cfg.carrier_hz = 90.0;
  EXPECT_THROW(cfg.validate(kRate), sh::Error);
  cfg.carrier_hz = 2500.0;
  EXPECT_THROW(cfg.validate(8000.0), sh::Error);
}

TEST(Waveform, Validation) {
  sh::Waveform w;
  w.samples = {0.0, 1.5};
  EXPECT_THROW(w.validate(), sh::Error);
  w.samples = {0.0, 0.5};
  w.sample_rate = 4000.0;
  EXPECT_THROW(w.validate(), sh::Error);
}
