#pragma once

// Trajectory CSV: header "t,x,y,z,gain", then one keyframe per row.

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "stereohaptic/error.hpp"
#include "stereohaptic/renderer.hpp"

namespace stereohaptic {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline void append_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

}  // namespace detail

inline Trajectory parse_trajectory_csv(std::string_view text) {
  std::vector<Keyframe> keyframes;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = detail::trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);

    if (!header_seen) {
      if (line != "t,x,y,z,gain") throw Error("expected header 't,x,y,z,gain'", where);
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;

    std::array<double, 5> v{};
    std::size_t field = 0;
    std::size_t fs = 0;
    while (true) {
      const std::size_t comma = line.find(',', fs);
      const std::string_view tok = line.substr(fs, comma == std::string_view::npos ? line.size() - fs : comma - fs);
      if (field >= v.size()) throw Error("too many fields (expected 5)", where);
      if (!detail::parse_double(tok, v[field]))
        throw Error("non-numeric field " + std::to_string(field + 1) + " '" + std::string(detail::trim(tok)) + "'",
                    where);
      ++field;
      if (comma == std::string_view::npos) break;
      fs = comma + 1;
    }
    if (field != v.size()) throw Error("expected 5 fields, got " + std::to_string(field), where);
    if (v[4] < 0.0) throw Error("gain must be >= 0", where);
    if (!keyframes.empty() && !(v[0] > keyframes.back().t)) throw Error("t must be strictly increasing", where);
    keyframes.push_back({v[0], {v[1], v[2], v[3]}, v[4]});
  }
  if (!header_seen) throw Error("empty document", "line 1");
  if (keyframes.empty()) throw Error("no keyframes", "trajectory");
  return Trajectory(std::move(keyframes));
}

// Shortest round-trip decimal representation of every value.
inline std::string format_trajectory_csv(const Trajectory& traj) {
  std::string out = "t,x,y,z,gain\n";
  for (const auto& k : traj.keyframes()) {
    for (double v : {k.t, k.position.x, k.position.y, k.position.z}) {
      detail::append_double(out, v);
      out.push_back(',');
    }
    detail::append_double(out, k.gain);
    out.push_back('\n');
  }
  return out;
}

// One counterclockwise revolution (seen from above) in the horizontal plane
// through `center`, starting on the +x axis.
inline Trajectory orbit_trajectory(const Vec3& center, double radius, double duration, std::size_t rows,
                                   double gain = 1.0) {
  if (rows < 2) throw Error("need at least 2 rows", "rows");
  std::vector<Keyframe> k;
  k.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(rows - 1);
    const double a = 2.0 * std::numbers::pi * f;
    k.push_back({duration * f, center + Vec3{radius * std::cos(a), radius * std::sin(a), 0.0}, gain});
  }
  return Trajectory(std::move(k));
}

// Straight walk from `from` to `to` with evenly spaced keyframes.
inline Trajectory walk_trajectory(const Vec3& from, const Vec3& to, double duration, std::size_t rows,
                                  double gain = 1.0) {
  if (rows < 2) throw Error("need at least 2 rows", "rows");
  std::vector<Keyframe> k;
  k.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(rows - 1);
    k.push_back({duration * f, from + (to - from) * f, gain});
  }
  return Trajectory(std::move(k));
}

}  // namespace stereohaptic
