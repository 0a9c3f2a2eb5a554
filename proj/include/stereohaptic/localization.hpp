#pragma once

// Spatial intensity distribution over a body-mounted actuator array.
//
// A virtual source at position p is rendered by scaling its perceived
// intensity I0 with a distance attenuation d(p) and splitting the result over
// the N actuators with distribution ratios r_k that sum to one:
//
//   I_k = r_k * d(p) * gain * I0
//
// r_k is derived from the direction cosine u_k between the actuator vector q_k
// and the source vector, both measured from the perceived origin O:
//
//   u_k = (q_k . p) / (|q_k| |p|)
//   w_k = ((1 + u_k) / 2)^gamma,   r_k = w_k / sum_j w_j
//
// d is a clamped inverse power law, d = (rho0 / max(|p|, rho0))^beta.
//
// Everything here is a pure function of its arguments. The *_into variants
// write into caller storage and never allocate, so the render loop can use
// them directly.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stereohaptic/error.hpp"
#include "stereohaptic/vec3.hpp"

namespace stereohaptic {

// Actuator and source positions closer than this to O have no usable direction.
inline constexpr double kGeomEpsilon = 1e-3;

// Arithmetic mean of a nonempty point set.
inline Vec3 centroid(std::span<const Vec3> points) {
  Vec3 sum;
  for (const auto& a : points) sum += a;
  return sum * (1.0 / static_cast<double>(points.size()));
}

class ActuatorLayout {
 public:
  explicit ActuatorLayout(std::vector<Vec3> actuators, std::optional<Vec3> origin = std::nullopt)
      : actuators_(std::move(actuators)), origin_override_(origin) {
    if (actuators_.empty()) throw Error("layout needs at least one actuator", "actuators");
    for (std::size_t k = 0; k < actuators_.size(); ++k) {
      if (!is_finite(actuators_[k]))
        throw Error("non-finite coordinate", "actuators[" + std::to_string(k) + "]");
    }
    if (origin_override_ && !is_finite(*origin_override_)) throw Error("non-finite coordinate", "origin");

    origin_ = origin_override_ ? *origin_override_ : centroid(actuators_);

    vectors_.reserve(actuators_.size());
    for (std::size_t k = 0; k < actuators_.size(); ++k) {
      const Vec3 q = actuators_[k] - origin_;
      if (!(norm(q) > kGeomEpsilon))
        throw Error("actuator lies within 1 mm of the perceived origin", "actuators[" + std::to_string(k) + "]");
      vectors_.push_back(q);
    }
  }

  std::size_t size() const noexcept { return actuators_.size(); }
  const std::vector<Vec3>& actuators() const noexcept { return actuators_; }
  const std::optional<Vec3>& origin_override() const noexcept { return origin_override_; }

  // Perceived origin O: the override when set, otherwise the actuator centroid.
  const Vec3& origin() const noexcept { return origin_; }

  // q_k = actuator_k - O.
  const std::vector<Vec3>& vectors() const noexcept { return vectors_; }

 private:
  std::vector<Vec3> actuators_;
  std::optional<Vec3> origin_override_;
  Vec3 origin_;
  std::vector<Vec3> vectors_;
};

inline Vec3 perceived_origin(const ActuatorLayout& layout) { return layout.origin(); }

struct PanningParams {
  double gamma{2.0};         // direction sharpness
  double rho0{0.2};          // near-field radius, m
  double beta{1.0};          // attenuation exponent
  double blend_radius{0.05};  // uniform-blend zone around O, m

  // Throws Error naming the offending field.
  void validate() const {
    auto check = [](double v, const char* name) {
      if (!std::isfinite(v)) throw Error("must be finite", name);
    };
    check(gamma, "gamma");
    check(rho0, "rho0");
    check(beta, "beta");
    check(blend_radius, "blend_radius");
    if (gamma < 0.0) throw Error("must be >= 0", "gamma");
    if (rho0 <= 0.0) throw Error("must be > 0", "rho0");
    if (beta < 0.0) throw Error("must be >= 0", "beta");
    if (blend_radius < 0.0) throw Error("must be >= 0", "blend_radius");
  }

  friend bool operator==(const PanningParams&, const PanningParams&) = default;
};

// Nonnegative per-actuator ratios summing to one.
class DistributionWeights {
 public:
  DistributionWeights() = default;
  explicit DistributionWeights(std::vector<double> r) : r_(std::move(r)) {}

  static DistributionWeights uniform(std::size_t n) {
    return DistributionWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const noexcept { return r_.size(); }
  double operator[](std::size_t k) const { return r_[k]; }
  const std::vector<double>& values() const noexcept { return r_; }
  std::span<double> mutable_values() noexcept { return r_; }

  double sum() const {
    double s = 0.0;
    for (double v : r_) s += v;
    return s;
  }

 private:
  std::vector<double> r_;
};

// u_k for every actuator. `out` must hold layout.size() values.
inline void direction_cosines_into(const ActuatorLayout& layout, const Vec3& p, std::span<double> out) {
  assert(out.size() == layout.size());
  const Vec3 s = p - layout.origin();
  const double sn = norm(s);
  if (!(sn > kGeomEpsilon)) throw Error("source lies within 1 mm of the perceived origin", "position");
  const auto& q = layout.vectors();
  for (std::size_t k = 0; k < q.size(); ++k) {
    out[k] = std::clamp(dot(q[k], s) / (norm(q[k]) * sn), -1.0, 1.0);
  }
}

inline std::vector<double> direction_cosines(const ActuatorLayout& layout, const Vec3& p) {
  std::vector<double> u(layout.size());
  direction_cosines_into(layout, p, u);
  return u;
}

// Cosine-power panning law, before normalization.
inline double panning_weight(double u, double gamma) { return std::pow(0.5 * (1.0 + u), gamma); }

// Full weight computation with the intermediate values exposed. `u` and `w`
// are scratch/outputs of size N; `r` receives the normalized ratios. Returns
// the blend factor applied toward the panned weights (0 = uniform, 1 = fully
// panned); u and w are left unspecified when it is 0.
inline double distribute_into(const ActuatorLayout& layout, const Vec3& p, const PanningParams& params,
                              std::span<double> u, std::span<double> w, std::span<double> r) {
  const std::size_t n = layout.size();
  assert(u.size() == n && w.size() == n && r.size() == n);
  if (!is_finite(p)) throw Error("non-finite coordinate", "position");
  const double uniform = 1.0 / static_cast<double>(n);
  const double rho = norm(p - layout.origin());

  if (!(rho > kGeomEpsilon)) {
    std::fill(r.begin(), r.end(), uniform);
    return 0.0;
  }

  direction_cosines_into(layout, p, u);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = panning_weight(u[k], params.gamma);
    total += w[k];
  }
  if (!(total > 0.0)) {
    // Only reachable with N = 1 and the source directly behind the actuator.
    std::fill(r.begin(), r.end(), uniform);
    return 0.0;
  }
  for (std::size_t k = 0; k < n; ++k) r[k] = w[k] / total;

  if (rho < params.blend_radius) {
    const double t = rho / params.blend_radius;
    for (std::size_t k = 0; k < n; ++k) r[k] = (1.0 - t) * uniform + t * r[k];
    return t;
  }
  return 1.0;
}

struct PanningBreakdown {
  std::optional<std::vector<double>> u;  // absent when the source sits at O
  std::optional<std::vector<double>> w;
  DistributionWeights r;
  double blend{0.0};
};

inline PanningBreakdown panning_breakdown(const ActuatorLayout& layout, const Vec3& p, const PanningParams& params) {
  const std::size_t n = layout.size();
  std::vector<double> u(n), w(n), r(n);
  PanningBreakdown out;
  out.blend = distribute_into(layout, p, params, u, w, r);
  if (norm(p - layout.origin()) > kGeomEpsilon) {
    out.u = std::move(u);
    out.w = std::move(w);
  }
  out.r = DistributionWeights(std::move(r));
  return out;
}

inline DistributionWeights distribute(const ActuatorLayout& layout, const Vec3& p, const PanningParams& params) {
  const std::size_t n = layout.size();
  std::vector<double> u(n), w(n), r(n);
  distribute_into(layout, p, params, u, w, r);
  return DistributionWeights(std::move(r));
}

// Distance attenuation d in (0, 1].
inline double attenuation(const Vec3& p, const Vec3& origin, const PanningParams& params) {
  const double rho = norm(p - origin);
  return std::pow(params.rho0 / std::max(rho, params.rho0), params.beta);
}

struct VirtualSource {
  std::string id;
  Vec3 position;
  double gain{1.0};
};

// A source paired with its instantaneous perceived intensity I0.
struct SourceDrive {
  VirtualSource source;
  double intensity{0.0};
};

// Scratch storage for channel_intensities_accumulate.
struct PanningScratch {
  explicit PanningScratch(std::size_t n) : u(n), w(n), r(n) {}
  std::vector<double> u, w, r;
};

// Adds one source's contribution r_k * d * gain * I0 to `out`. Returns d.
inline double channel_intensities_accumulate(const ActuatorLayout& layout, const Vec3& position, double gain,
                                             double intensity, const PanningParams& params,
                                             PanningScratch& scratch, std::span<double> out) {
  distribute_into(layout, position, params, scratch.u, scratch.w, scratch.r);
  const double d = attenuation(position, layout.origin(), params);
  const double scale = d * gain * intensity;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += scratch.r[k] * scale;
  return d;
}

// Per-channel perceived intensity for a set of sources; contributions add linearly.
inline std::vector<double> channel_intensities(const ActuatorLayout& layout, std::span<const SourceDrive> sources,
                                               const PanningParams& params) {
  std::vector<double> out(layout.size(), 0.0);
  PanningScratch scratch(layout.size());
  for (const auto& s : sources) {
    if (!(s.source.gain >= 0.0)) throw Error("must be >= 0", "gain");
    if (!(s.intensity >= 0.0)) throw Error("must be >= 0", "intensity");
    channel_intensities_accumulate(layout, s.source.position, s.source.gain, s.intensity, params, scratch, out);
  }
  return out;
}

}  // namespace stereohaptic
