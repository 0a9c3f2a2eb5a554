#pragma once

// Perceived-intensity analysis and fixed-carrier resynthesis.
//
// Analysis: the input passes through a second-order band-pass weighting
// (unity gain at sens_center_hz), then the intensity at hop m is the RMS of the
// weighted signal over the `window` seconds ending at m * hop. Samples before
// t = 0 count as zero.
//
// Synthesis inverts that for a sine carrier: an intensity I is rendered as
// amplitude A = sqrt(2) * I / G_c, G_c being the weighting gain at the carrier
// frequency. The amplitude track is read half a window ahead so that the
// trailing analysis window lines up with the intensity it is meant to measure.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "stereohaptic/error.hpp"

namespace stereohaptic {

inline constexpr double kMinSampleRate = 8000.0;
inline constexpr double kMaxSampleRate = 192000.0;

struct Waveform {
  std::vector<double> samples;
  double sample_rate{48000.0};

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (!(sample_rate >= kMinSampleRate && sample_rate <= kMaxSampleRate))
      throw Error("must be within [8000, 192000]", "sample_rate");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double s = samples[i];
      if (!std::isfinite(s) || s < -1.0 || s > 1.0)
        throw Error("sample outside [-1, 1] or non-finite", "samples[" + std::to_string(i) + "]");
    }
  }
};

struct SignalConfig {
  double carrier_hz{200.0};
  double window{0.010};  // s
  double hop{0.005};     // s
  double sens_center_hz{250.0};
  double sens_q{0.7};

  // Field-level checks. The carrier ceiling depends on the rate in use.
  void validate(double sample_rate) const {
    auto finite = [](double v, const char* name) {
      if (!std::isfinite(v)) throw Error("must be finite", name);
    };
    finite(carrier_hz, "carrier_hz");
    finite(window, "window");
    finite(hop, "hop");
    finite(sens_center_hz, "sens_center_hz");
    finite(sens_q, "sens_q");
    if (!(hop > 0.0)) throw Error("must be > 0", "hop");
    if (!(window >= hop)) throw Error("must be >= hop", "window");
    if (!(carrier_hz >= 100.0)) throw Error("must be >= 100", "carrier_hz");
    if (!(carrier_hz <= sample_rate / 4.0)) throw Error("must be <= sample_rate / 4", "carrier_hz");
    if (!(sens_center_hz > 0.0 && sens_center_hz < sample_rate / 2.0))
      throw Error("must be within (0, sample_rate / 2)", "sens_center_hz");
    if (!(sens_q > 0.0)) throw Error("must be > 0", "sens_q");
  }

  friend bool operator==(const SignalConfig&, const SignalConfig&) = default;
};

struct IntensityEnvelope {
  std::vector<double> values;  // intensity at m * hop, trailing window
  double hop{0.005};
  double window{0.010};
  double origin_rate{48000.0};  // rate of the analyzed waveform

  double duration() const { return static_cast<double>(values.size()) * hop; }

  // Intensity describing the signal around time t: the analysis frame whose
  // window is centered on t, linearly interpolated, held at both ends.
  double value_at(double t) const {
    if (values.empty()) return 0.0;
    const double x = (t + 0.5 * window) / hop;
    const double last = static_cast<double>(values.size() - 1);
    if (!(x > 0.0)) return values.front();
    if (x >= last) return values.back();
    const auto i = static_cast<std::size_t>(x);
    const double f = x - static_cast<double>(i);
    return values[i] + f * (values[i + 1] - values[i]);
  }

  // As value_at, with the envelope repeating every duration().
  double looped_value_at(double t) const {
    if (values.empty()) return 0.0;
    const double n = static_cast<double>(values.size());
    double x = std::fmod((t + 0.5 * window) / hop, n);
    if (x < 0.0) x += n;
    auto i = static_cast<std::size_t>(x);
    if (i >= values.size()) i = values.size() - 1;
    const double f = x - static_cast<double>(i);
    const std::size_t j = (i + 1 == values.size()) ? 0 : i + 1;
    return values[i] + f * (values[j] - values[i]);
  }
};

// RBJ band-pass with 0 dB peak gain.
class BandpassFilter {
 public:
  BandpassFilter(double center_hz, double q, double sample_rate) {
    const double w0 = 2.0 * std::numbers::pi * center_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0_ = alpha / a0;
    b2_ = -alpha / a0;
    a1_ = -2.0 * std::cos(w0) / a0;
    a2_ = (1.0 - alpha) / a0;
  }

  double process(double x) {
    const double y = b0_ * x + s1_;
    s1_ = -a1_ * y + s2_;
    s2_ = b2_ * x - a2_ * y;
    return y;
  }

  void reset() { s1_ = s2_ = 0.0; }

  // |H(e^{jw})| at frequency hz.
  double magnitude(double hz, double sample_rate) const {
    const double w = 2.0 * std::numbers::pi * hz / sample_rate;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    return std::abs((b0_ + b2_ * z2) / (1.0 + a1_ * z1 + a2_ * z2));
  }

 private:
  double b0_{0}, b2_{0}, a1_{0}, a2_{0};
  double s1_{0}, s2_{0};
};

// Weighting gain G at `hz` for the configured band-pass.
inline double sensitivity_gain(const SignalConfig& cfg, double hz, double sample_rate) {
  return BandpassFilter(cfg.sens_center_hz, cfg.sens_q, sample_rate).magnitude(hz, sample_rate);
}

inline Waveform sensitivity_filter(const Waveform& w, const SignalConfig& cfg) {
  BandpassFilter filter(cfg.sens_center_hz, cfg.sens_q, w.sample_rate);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.reserve(w.samples.size());
  for (double s : w.samples) out.samples.push_back(filter.process(s));
  return out;
}

namespace detail {

// Number of hop frames covering n samples: ceil(n / (hop * rate)).
inline std::size_t frame_count(std::size_t n, double hop, double rate) {
  if (n == 0) return 0;
  const double frames = static_cast<double>(n) / (hop * rate);
  return static_cast<std::size_t>(std::ceil(frames - 1e-9));
}

}  // namespace detail

inline IntensityEnvelope perceived_intensity_envelope(const Waveform& w, const SignalConfig& cfg) {
  IntensityEnvelope env;
  env.hop = cfg.hop;
  env.window = cfg.window;
  env.origin_rate = w.sample_rate;
  if (w.samples.empty()) return env;

  const Waveform weighted = sensitivity_filter(w, cfg);
  const auto& y = weighted.samples;
  const auto n = static_cast<std::ptrdiff_t>(y.size());
  const auto win = std::max<std::ptrdiff_t>(1, std::llround(cfg.window * w.sample_rate));
  const std::size_t frames = detail::frame_count(y.size(), cfg.hop, w.sample_rate);

  env.values.resize(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    const auto end = static_cast<std::ptrdiff_t>(std::llround(static_cast<double>(m) * cfg.hop * w.sample_rate));
    const std::ptrdiff_t first = std::max<std::ptrdiff_t>(0, end - win + 1);
    const std::ptrdiff_t last = std::min(end, n - 1);
    double acc = 0.0;
    for (std::ptrdiff_t i = first; i <= last; ++i) acc += y[i] * y[i];
    env.values[m] = std::sqrt(acc / static_cast<double>(win));
  }
  return env;
}

struct SynthesisResult {
  Waveform waveform;
  std::size_t clipped{0};  // samples clamped to [-1, 1]
};

inline SynthesisResult synthesize_am_carrier(const IntensityEnvelope& env, const SignalConfig& cfg,
                                             double sample_rate) {
  SynthesisResult out;
  out.waveform.sample_rate = sample_rate;
  if (env.values.empty()) return out;

  const double scale = std::numbers::sqrt2 / sensitivity_gain(cfg, cfg.carrier_hz, sample_rate);
  const auto n = static_cast<std::size_t>(std::llround(env.duration() * sample_rate));
  const double phase_step = 2.0 * std::numbers::pi * cfg.carrier_hz / sample_rate;
  out.waveform.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double amplitude = scale * env.value_at(t);
    const double phase = std::fmod(phase_step * static_cast<double>(i), 2.0 * std::numbers::pi);
    double s = amplitude * std::sin(phase);
    if (s > 1.0 || s < -1.0) {
      s = std::clamp(s, -1.0, 1.0);
      ++out.clipped;
    }
    out.waveform.samples[i] = s;
  }
  return out;
}

enum class Preset { sine, footstep, rumble };

inline Preset parse_preset(std::string_view name) {
  if (name == "sine") return Preset::sine;
  if (name == "footstep") return Preset::footstep;
  if (name == "rumble") return Preset::rumble;
  throw Error("unknown preset '" + std::string(name) + "' (expected sine, footstep or rumble)", "preset");
}

inline std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::sine:
      return "sine";
    case Preset::footstep:
      return "footstep";
    case Preset::rumble:
      return "rumble";
  }
  return "sine";
}

inline constexpr double kPresetPeak = 0.8;
inline constexpr double kFootstepPeriod = 0.6;  // s between steps
inline constexpr double kFootstepDecay = 0.04;  // s, burst decay time constant

// Demo signals on the configured carrier, peak-normalized to 0.8.
//   sine      steady carrier tone
//   footstep  exponentially decaying carrier bursts every 0.6 s
//   rumble    carrier under slow (1.3 Hz + 3.7 Hz) amplitude fluctuation
inline Waveform preset_signal(Preset preset, double duration, const SignalConfig& cfg,
                              double sample_rate = 48000.0) {
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw Error("must be >= 0", "duration");
  Waveform w;
  w.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  w.samples.resize(n);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double carrier = std::sin(std::fmod(two_pi * cfg.carrier_hz * t, two_pi));
    double a = 1.0;
    switch (preset) {
      case Preset::sine:
        break;
      case Preset::footstep: {
        const double local = std::fmod(t + kFootstepPeriod - 0.05, kFootstepPeriod);
        a = (1.0 - std::exp(-local / 0.002)) * std::exp(-local / kFootstepDecay);
        break;
      }
      case Preset::rumble:
        a = 0.55 + 0.25 * std::sin(two_pi * 1.3 * t) + 0.2 * std::sin(two_pi * 3.7 * t + 1.0);
        break;
    }
    w.samples[i] = a * carrier;
  }
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    const double g = kPresetPeak / peak;
    for (double& s : w.samples) s *= g;
  }
  return w;
}

}  // namespace stereohaptic
