#pragma once

// Block renderer: per-channel amplitude-modulated carriers driven by the
// spatial intensity distribution.
//
// Once per block the engine evaluates every live source (position, gain and
// the source's intensity envelope at the block end), sums the per-channel
// intensities and converts them to carrier amplitudes. Within the block each
// channel ramps linearly toward its target; the per-sample change is capped at
// 1 / (slew * sample_rate), i.e. a full-scale swing takes at least `slew`
// seconds. All channels share one continuous carrier phase.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stereohaptic/error.hpp"
#include "stereohaptic/localization.hpp"
#include "stereohaptic/signal.hpp"
#include "stereohaptic/vec3.hpp"

namespace stereohaptic {

struct Keyframe {
  double t{0.0};
  Vec3 position;
  double gain{1.0};

  friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Keyframe> keyframes) : keyframes_(std::move(keyframes)) { validate(); }

  const std::vector<Keyframe>& keyframes() const noexcept { return keyframes_; }
  bool empty() const noexcept { return keyframes_.empty(); }
  double duration() const { return keyframes_.empty() ? 0.0 : keyframes_.back().t; }

  void validate() const {
    if (keyframes_.empty()) throw Error("trajectory has no keyframes", "trajectory");
    for (std::size_t i = 0; i < keyframes_.size(); ++i) {
      const auto& k = keyframes_[i];
      const std::string where = "keyframes[" + std::to_string(i) + "]";
      if (!std::isfinite(k.t) || !is_finite(k.position) || !std::isfinite(k.gain))
        throw Error("non-finite value", where);
      if (k.gain < 0.0) throw Error("gain must be >= 0", where);
      if (i > 0 && !(k.t > keyframes_[i - 1].t)) throw Error("t must be strictly increasing", where);
    }
  }

 private:
  std::vector<Keyframe> keyframes_;
};

struct TrajectoryPoint {
  Vec3 position;
  double gain{1.0};
};

// Linear interpolation between bracketing keyframes, holding the end values
// outside [t_first, t_last].
inline TrajectoryPoint interpolate_trajectory(const Trajectory& traj, double t) {
  const auto& k = traj.keyframes();
  if (k.empty()) throw Error("trajectory has no keyframes", "trajectory");
  if (t <= k.front().t) return {k.front().position, k.front().gain};
  if (t >= k.back().t) return {k.back().position, k.back().gain};
  const auto hi = std::upper_bound(k.begin(), k.end(), t, [](double v, const Keyframe& f) { return v < f.t; });
  const auto lo = hi - 1;
  const double f = (t - lo->t) / (hi->t - lo->t);
  return {lo->position + (hi->position - lo->position) * f, lo->gain + (hi->gain - lo->gain) * f};
}

// Moves `current` toward `target` by at most `max_delta`.
constexpr double slew_step(double current, double target, double max_delta) {
  const double diff = target - current;
  if (diff > max_delta) return current + max_delta;
  if (diff < -max_delta) return current - max_delta;
  return target;
}

struct MultichannelBuffer {
  std::vector<std::vector<float>> channels;  // channel order = layout actuator order
  double sample_rate{48000.0};

  MultichannelBuffer() = default;
  MultichannelBuffer(std::size_t channel_count, std::size_t frames, double rate)
      : channels(channel_count, std::vector<float>(frames, 0.0f)), sample_rate(rate) {}

  std::size_t channel_count() const noexcept { return channels.size(); }
  std::size_t frames() const noexcept { return channels.empty() ? 0 : channels.front().size(); }

  friend bool operator==(const MultichannelBuffer&, const MultichannelBuffer&) = default;
};

struct RenderConfig {
  double sample_rate{48000.0};
  std::size_t block{256};  // samples per control update
  double slew{0.010};      // s for a full-scale amplitude swing

  void validate() const {
    if (!(sample_rate >= kMinSampleRate && sample_rate <= kMaxSampleRate))
      throw Error("must be within [8000, 192000]", "sample_rate");
    if (block < 16) throw Error("must be >= 16", "block");
    if (!(slew >= 0.0) || !std::isfinite(slew)) throw Error("must be >= 0", "slew");
  }

  double block_duration() const { return static_cast<double>(block) / sample_rate; }

  // Largest per-sample amplitude change.
  double max_delta() const {
    return slew > 0.0 ? 1.0 / (slew * sample_rate) : std::numeric_limits<double>::infinity();
  }

  friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

// Fixed-capacity source identifier, so the render path never allocates for ids.
class SourceId {
 public:
  static constexpr std::size_t kMaxLength = 64;

  SourceId() = default;
  explicit SourceId(std::string_view s) {
    if (!valid(s)) throw Error("id must be 1.." + std::to_string(kMaxLength) + " characters", "id");
    std::copy(s.begin(), s.end(), buf_.begin());
    len_ = static_cast<std::uint8_t>(s.size());
  }

  static bool valid(std::string_view s) noexcept { return !s.empty() && s.size() <= kMaxLength; }

  std::string_view view() const noexcept { return {buf_.data(), len_}; }
  std::string str() const { return std::string(view()); }

  friend bool operator==(const SourceId& a, const SourceId& b) noexcept { return a.view() == b.view(); }

 private:
  std::array<char, kMaxLength> buf_{};
  std::uint8_t len_{0};
};

// What the engine computed for one source in the last block.
struct SourceReport {
  SourceId id;
  Vec3 position;
  double gain{0.0};
  double intensity{0.0};    // I0 at block end
  double attenuation{1.0};  // d
  std::vector<double> weights;            // r_k
  std::vector<double> channel_intensity;  // r_k * d * gain * I0
};

// Per-sample amplitudes of the last rendered block, for inspection.
using AmplitudeTrace = std::vector<std::vector<double>>;

class Engine {
 public:
  static constexpr std::size_t kDefaultMaxSources = 64;
  static constexpr double kDefaultSignalLength = 10.0;  // s, looped

  Engine(ActuatorLayout layout, PanningParams params, SignalConfig signal, RenderConfig render,
         std::size_t max_sources = kDefaultMaxSources)
      : layout_(std::move(layout)),
        params_(params),
        signal_(signal),
        render_(render),
        scratch_(layout_.size()),
        targets_(layout_.size(), 0.0),
        amplitudes_(layout_.size(), 0.0),
        block_(layout_.size(), render.block, render.sample_rate) {
    params_.validate();
    render_.validate();
    signal_.validate(render_.sample_rate);
    default_envelope_ = perceived_intensity_envelope(
        preset_signal(Preset::sine, kDefaultSignalLength, signal_, render_.sample_rate), signal_);
    sources_.resize(max_sources);
    reports_.resize(max_sources);
    for (auto& r : reports_) {
      r.weights.assign(layout_.size(), 0.0);
      r.channel_intensity.assign(layout_.size(), 0.0);
    }
    set_carrier(signal_.carrier_hz);
  }

  const ActuatorLayout& layout() const noexcept { return layout_; }
  const PanningParams& panning() const noexcept { return params_; }
  const SignalConfig& signal_config() const noexcept { return signal_; }
  const RenderConfig& render_config() const noexcept { return render_; }
  std::size_t capacity() const noexcept { return sources_.size(); }
  std::size_t source_count() const noexcept { return count_; }

  // Seconds rendered so far.
  double time() const noexcept { return static_cast<double>(frames_rendered_) / render_.sample_rate; }

  std::span<const double> amplitudes() const noexcept { return amplitudes_; }
  double carrier_phase() const noexcept { return phase_; }
  std::size_t clipped() const noexcept { return clipped_; }

  // Upsert. Returns false when the id is new and the table is full.
  bool set_source(const SourceId& id, const Vec3& position, double gain) {
    if (auto* s = find(id)) {
      s->position = position;
      s->gain = gain;
      return true;
    }
    if (count_ == sources_.size()) return false;
    sources_[count_++] = Slot{id, position, gain, nullptr, 0.0};
    return true;
  }

  // Replaces the source's intensity envelope and restarts its playback. The
  // envelope must outlive its use by the engine; nullptr selects the default
  // sine signal. Returns false for an unknown id.
  bool set_signal(const SourceId& id, const IntensityEnvelope* envelope) {
    auto* s = find(id);
    if (s == nullptr) return false;
    s->envelope = envelope;
    s->playhead = 0.0;
    return true;
  }

  // Idempotent. Returns whether a source was removed.
  bool remove_source(const SourceId& id) {
    auto* s = find(id);
    if (s == nullptr) return false;
    *s = sources_[count_ - 1];
    --count_;
    return true;
  }

  void clear_sources() noexcept { count_ = 0; }

  // Changes the carrier frequency without a phase discontinuity.
  void set_carrier(double hz) {
    if (!(hz >= 100.0 && hz <= render_.sample_rate / 4.0)) throw Error("out of range", "carrier_hz");
    signal_.carrier_hz = hz;
    phase_step_ = 2.0 * std::numbers::pi * hz / render_.sample_rate;
    amplitude_scale_ = std::numbers::sqrt2 / sensitivity_gain(signal_, hz, render_.sample_rate);
  }

  std::span<const SourceReport> reports() const noexcept { return {reports_.data(), count_}; }

  // Renders one block into the engine-owned buffer and returns it.
  const MultichannelBuffer& render_block(AmplitudeTrace* trace = nullptr) {
    const std::size_t n = layout_.size();
    const std::size_t block = render_.block;
    const double block_dt = render_.block_duration();

    std::fill(targets_.begin(), targets_.end(), 0.0);
    for (std::size_t i = 0; i < count_; ++i) {
      Slot& s = sources_[i];
      const IntensityEnvelope& env = s.envelope != nullptr ? *s.envelope : default_envelope_;
      const double intensity = env.looped_value_at(s.playhead + block_dt);
      s.playhead += block_dt;
      if (env.duration() > 0.0) s.playhead = std::fmod(s.playhead, env.duration());

      SourceReport& rep = reports_[i];
      rep.id = s.id;
      rep.position = s.position;
      rep.gain = s.gain;
      rep.intensity = intensity;
      std::fill(rep.channel_intensity.begin(), rep.channel_intensity.end(), 0.0);
      rep.attenuation = channel_intensities_accumulate(layout_, s.position, s.gain, intensity, params_, scratch_,
                                                       rep.channel_intensity);
      std::copy(scratch_.r.begin(), scratch_.r.end(), rep.weights.begin());
      for (std::size_t k = 0; k < n; ++k) targets_[k] += rep.channel_intensity[k];
    }

    if (trace != nullptr) {
      trace->resize(n);
      for (auto& c : *trace) c.resize(block);
    }

    const double max_delta = render_.max_delta();
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t k = 0; k < n; ++k) {
      const double target = amplitude_scale_ * targets_[k];
      double a = amplitudes_[k];
      const double step = std::min(max_delta, std::abs(target - a) / static_cast<double>(block));
      double phase = phase_;
      auto& out = block_.channels[k];
      for (std::size_t i = 0; i < block; ++i) {
        a = (i + 1 == block && step < max_delta) ? target : slew_step(a, target, step);
        double s = a * std::sin(phase);
        if (s > 1.0 || s < -1.0) {
          s = std::clamp(s, -1.0, 1.0);
          ++clipped_;
        }
        out[i] = static_cast<float>(s);
        if (trace != nullptr) (*trace)[k][i] = a;
        phase += phase_step_;
        if (phase >= two_pi) phase -= two_pi;
      }
      amplitudes_[k] = a;
    }
    for (std::size_t i = 0; i < block; ++i) {
      phase_ += phase_step_;
      if (phase_ >= two_pi) phase_ -= two_pi;
    }
    frames_rendered_ += block;
    return block_;
  }

 private:
  struct Slot {
    SourceId id;
    Vec3 position;
    double gain{0.0};
    const IntensityEnvelope* envelope{nullptr};
    double playhead{0.0};  // s into the envelope
  };

  Slot* find(const SourceId& id) {
    for (std::size_t i = 0; i < count_; ++i)
      if (sources_[i].id == id) return &sources_[i];
    return nullptr;
  }

  ActuatorLayout layout_;
  PanningParams params_;
  SignalConfig signal_;
  RenderConfig render_;
  IntensityEnvelope default_envelope_;
  PanningScratch scratch_;

  std::vector<Slot> sources_;
  std::size_t count_{0};
  std::vector<SourceReport> reports_;

  std::vector<double> targets_;
  std::vector<double> amplitudes_;
  double phase_{0.0};
  double phase_step_{0.0};
  double amplitude_scale_{0.0};
  std::uint64_t frames_rendered_{0};
  std::size_t clipped_{0};
  MultichannelBuffer block_;
};

using SignalInput = std::variant<Waveform, Preset>;

struct RenderResult {
  MultichannelBuffer buffer;
  std::size_t clipped{0};
};

// Offline render of one source following `traj`. Output length is
// ceil(duration * sample_rate) rounded up to a whole number of blocks. The
// signal's intensity envelope loops if it is shorter than the trajectory.
inline RenderResult render_trajectory(const Trajectory& traj, const SignalInput& signal, const ActuatorLayout& layout,
                                      const PanningParams& params, const SignalConfig& signal_cfg,
                                      const RenderConfig& cfg) {
  traj.validate();
  cfg.validate();
  signal_cfg.validate(cfg.sample_rate);
  const double duration = traj.duration();

  const IntensityEnvelope envelope = std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Waveform>) {
          return perceived_intensity_envelope(s, signal_cfg);
        } else {
          return perceived_intensity_envelope(preset_signal(s, duration, signal_cfg, cfg.sample_rate), signal_cfg);
        }
      },
      signal);

  const auto wanted = static_cast<std::size_t>(std::ceil(duration * cfg.sample_rate - 1e-9));
  const std::size_t blocks = (wanted + cfg.block - 1) / cfg.block;

  Engine engine(layout, params, signal_cfg, cfg, 1);
  const SourceId id("trajectory");
  const TrajectoryPoint start = interpolate_trajectory(traj, 0.0);
  engine.set_source(id, start.position, start.gain);
  engine.set_signal(id, &envelope);

  RenderResult result;
  result.buffer = MultichannelBuffer(layout.size(), blocks * cfg.block, cfg.sample_rate);
  for (std::size_t b = 0; b < blocks; ++b) {
    const double t_end = static_cast<double>((b + 1) * cfg.block) / cfg.sample_rate;
    const TrajectoryPoint p = interpolate_trajectory(traj, t_end);
    engine.set_source(id, p.position, p.gain);
    const MultichannelBuffer& block = engine.render_block();
    for (std::size_t k = 0; k < layout.size(); ++k) {
      std::copy(block.channels[k].begin(), block.channels[k].end(),
                result.buffer.channels[k].begin() + static_cast<std::ptrdiff_t>(b * cfg.block));
    }
  }
  result.clipped = engine.clipped();
  return result;
}

}  // namespace stereohaptic
