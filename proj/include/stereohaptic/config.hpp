#pragma once

// JSON documents: actuator layouts and engine configuration.
//
// Layout:  {"actuators": [[x,y,z], ...], "origin": [x,y,z] | null}
// Config:  {"panning": {...}, "signal": {...}, "render": {...}, "layout": "path"}
//
// Every config field is optional and defaults to the owning type's default.
// Unknown keys are rejected with their path.

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "stereohaptic/error.hpp"
#include "stereohaptic/localization.hpp"
#include "stereohaptic/renderer.hpp"
#include "stereohaptic/signal.hpp"

namespace stereohaptic {

using json = nlohmann::json;

namespace detail {

inline json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("syntax error: ") + e.what(), what);
  }
}

inline Vec3 point_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw Error("expected [x, y, z]", path);
  Vec3 v;
  double* dst[3] = {&v.x, &v.y, &v.z};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error("expected a number", path + "[" + std::to_string(i) + "]");
    *dst[i] = j[i].get<double>();
  }
  if (!is_finite(v)) throw Error("non-finite coordinate", path);
  return v;
}

inline json point_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    bool found = false;
    for (auto k : known) found = found || key == k;
    if (!found) throw Error("unknown key", prefix.empty() ? key : prefix + "." + key);
  }
}

inline void read_number(const json& obj, std::string_view key, double& dst, const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string path = prefix + "." + std::string(key);
  if (!it->is_number()) throw Error("expected a number", path);
  dst = it->get<double>();
}

inline void read_count(const json& obj, std::string_view key, std::size_t& dst, const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string path = prefix + "." + std::string(key);
  if (!it->is_number_integer() || it->get<long long>() < 0) throw Error("expected a nonnegative integer", path);
  dst = it->get<std::size_t>();
}

inline const json& section(const json& doc, std::string_view key) {
  static const json kEmpty = json::object();
  const auto it = doc.find(key);
  if (it == doc.end()) return kEmpty;
  if (!it->is_object()) throw Error("expected an object", std::string(key));
  return *it;
}

// Re-raise a type's own validation error under its config section.
template <typename F>
void validated(const std::string& prefix, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    throw Error(e.message(), prefix + "." + e.where());
  }
}

}  // namespace detail

inline ActuatorLayout parse_layout(std::string_view text) {
  const json doc = detail::parse_json(text, "layout");
  if (!doc.is_object()) throw Error("expected an object", "layout");
  detail::reject_unknown(doc, {"actuators", "origin"}, "");
  const auto it = doc.find("actuators");
  if (it == doc.end() || !it->is_array()) throw Error("expected an array of [x, y, z]", "actuators");
  std::vector<Vec3> actuators;
  for (std::size_t k = 0; k < it->size(); ++k)
    actuators.push_back(detail::point_from_json((*it)[k], "actuators[" + std::to_string(k) + "]"));
  std::optional<Vec3> origin;
  if (const auto o = doc.find("origin"); o != doc.end() && !o->is_null()) origin = detail::point_from_json(*o, "origin");
  return ActuatorLayout(std::move(actuators), origin);
}

inline json layout_to_json(const ActuatorLayout& layout) {
  json actuators = json::array();
  for (const auto& a : layout.actuators()) actuators.push_back(detail::point_to_json(a));
  return {{"actuators", std::move(actuators)},
          {"origin", layout.origin_override() ? detail::point_to_json(*layout.origin_override()) : json(nullptr)}};
}

struct ConfigDocument {
  PanningParams panning;
  SignalConfig signal;
  RenderConfig render;
  std::optional<std::string> layout;  // path to a layout file

  friend bool operator==(const ConfigDocument&, const ConfigDocument&) = default;
};

inline ConfigDocument load_config(std::string_view text) {
  const json doc = detail::parse_json(text, "config");
  if (!doc.is_object()) throw Error("expected an object", "config");
  detail::reject_unknown(doc, {"panning", "signal", "render", "layout"}, "");

  ConfigDocument cfg;

  const json& p = detail::section(doc, "panning");
  detail::reject_unknown(p, {"gamma", "rho0", "beta", "blend_radius"}, "panning");
  detail::read_number(p, "gamma", cfg.panning.gamma, "panning");
  detail::read_number(p, "rho0", cfg.panning.rho0, "panning");
  detail::read_number(p, "beta", cfg.panning.beta, "panning");
  detail::read_number(p, "blend_radius", cfg.panning.blend_radius, "panning");
  detail::validated("panning", [&] { cfg.panning.validate(); });

  const json& r = detail::section(doc, "render");
  detail::reject_unknown(r, {"sample_rate", "block", "slew"}, "render");
  detail::read_number(r, "sample_rate", cfg.render.sample_rate, "render");
  detail::read_count(r, "block", cfg.render.block, "render");
  detail::read_number(r, "slew", cfg.render.slew, "render");
  detail::validated("render", [&] { cfg.render.validate(); });

  const json& s = detail::section(doc, "signal");
  detail::reject_unknown(s, {"carrier_hz", "window", "hop", "sens_center_hz", "sens_q"}, "signal");
  detail::read_number(s, "carrier_hz", cfg.signal.carrier_hz, "signal");
  detail::read_number(s, "window", cfg.signal.window, "signal");
  detail::read_number(s, "hop", cfg.signal.hop, "signal");
  detail::read_number(s, "sens_center_hz", cfg.signal.sens_center_hz, "signal");
  detail::read_number(s, "sens_q", cfg.signal.sens_q, "signal");
  detail::validated("signal", [&] { cfg.signal.validate(cfg.render.sample_rate); });

  if (const auto it = doc.find("layout"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("expected a path string", "layout");
    cfg.layout = it->get<std::string>();
  }
  return cfg;
}

inline json config_to_json(const ConfigDocument& cfg) {
  json doc = {
      {"panning",
       {{"gamma", cfg.panning.gamma},
        {"rho0", cfg.panning.rho0},
        {"beta", cfg.panning.beta},
        {"blend_radius", cfg.panning.blend_radius}}},
      {"signal",
       {{"carrier_hz", cfg.signal.carrier_hz},
        {"window", cfg.signal.window},
        {"hop", cfg.signal.hop},
        {"sens_center_hz", cfg.signal.sens_center_hz},
        {"sens_q", cfg.signal.sens_q}}},
      {"render", {{"sample_rate", cfg.render.sample_rate}, {"block", cfg.render.block}, {"slew", cfg.render.slew}}},
  };
  if (cfg.layout) doc["layout"] = *cfg.layout;
  return doc;
}

}  // namespace stereohaptic
