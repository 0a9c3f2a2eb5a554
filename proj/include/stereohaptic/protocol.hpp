#pragma once

// Control protocol v1: JSON text frames.
//
// Client -> server (optional "seq" on any message is echoed in the reply):
//   {"type":"set_source","id":"a","pos":[x,y,z],"gain":1.0}
//   {"type":"set_signal","id":"a","preset":"footstep","carrier_hz":200}
//   {"type":"remove_source","id":"a"}
//   {"type":"subscribe_telemetry","rate_hz":30}
//
// Server -> client (every frame carries "v":1):
//   {"type":"layout", ...}     first frame after connect
//   {"type":"ack","seq":..}
//   {"type":"error","message":"...","field":"gain","seq":..}
//   {"type":"telemetry","t":..,"sources":[{"id","pos","gain","I0","d","r":[..],"I":[..],"sum_r"}]}

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "stereohaptic/config.hpp"
#include "stereohaptic/error.hpp"
#include "stereohaptic/realtime.hpp"
#include "stereohaptic/renderer.hpp"
#include "stereohaptic/signal.hpp"

namespace stereohaptic {

inline constexpr int kProtocolVersion = 1;
inline constexpr double kMaxTelemetryRate = 120.0;

struct SetSource {
  std::string id;
  Vec3 pos;
  std::optional<double> gain;  // absent: keep current, or 1 for a new source
};

struct SetSignal {
  std::string id;
  Preset preset{Preset::sine};
  std::optional<double> carrier_hz;
};

struct RemoveSource {
  std::string id;
};

struct SubscribeTelemetry {
  double rate_hz{30.0};
};

using ControlMessage = std::variant<SetSource, SetSignal, RemoveSource, SubscribeTelemetry>;

struct Inbound {
  std::optional<json> seq;
  ControlMessage message;
};

// Raised for messages that cannot be accepted. Carries the seq when the frame
// was readable enough to recover it.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string field, std::optional<json> seq = std::nullopt)
      : Error(what, std::move(field)), seq_(std::move(seq)) {}

  const std::optional<json>& seq() const noexcept { return seq_; }

 private:
  std::optional<json> seq_;
};

namespace detail {

inline std::string require_id(const json& doc, const std::optional<json>& seq) {
  const auto it = doc.find("id");
  if (it == doc.end() || !it->is_string()) throw ProtocolError("expected a string", "id", seq);
  std::string id = it->get<std::string>();
  if (!SourceId::valid(id))
    throw ProtocolError("must be 1.." + std::to_string(SourceId::kMaxLength) + " characters", "id", seq);
  return id;
}

inline void check_keys(const json& doc, std::initializer_list<std::string_view> allowed,
                       const std::optional<json>& seq) {
  for (const auto& [key, value] : doc.items()) {
    if (key == "type" || key == "seq" || key == "v") continue;
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ProtocolError("unknown key", key, seq);
  }
}

}  // namespace detail

inline Inbound parse_control_message(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what(), "");
  }
  if (!doc.is_object()) throw ProtocolError("expected a JSON object", "");

  std::optional<json> seq;
  if (const auto it = doc.find("seq"); it != doc.end()) seq = *it;

  const auto type_it = doc.find("type");
  if (type_it == doc.end() || !type_it->is_string()) throw ProtocolError("expected a string", "type", seq);
  const std::string type = type_it->get<std::string>();

  if (type == "set_source") {
    detail::check_keys(doc, {"id", "pos", "gain"}, seq);
    SetSource m;
    m.id = detail::require_id(doc, seq);
    const auto pos = doc.find("pos");
    if (pos == doc.end()) throw ProtocolError("missing", "pos", seq);
    try {
      m.pos = detail::point_from_json(*pos, "pos");
    } catch (const Error& e) {
      throw ProtocolError(e.message(), e.where(), seq);
    }
    if (const auto g = doc.find("gain"); g != doc.end()) {
      if (!g->is_number()) throw ProtocolError("expected a number", "gain", seq);
      const double gain = g->get<double>();
      if (!std::isfinite(gain) || gain < 0.0) throw ProtocolError("must be finite and >= 0", "gain", seq);
      m.gain = gain;
    }
    return {seq, m};
  }
  if (type == "set_signal") {
    detail::check_keys(doc, {"id", "preset", "carrier_hz"}, seq);
    SetSignal m;
    m.id = detail::require_id(doc, seq);
    const auto preset = doc.find("preset");
    if (preset == doc.end() || !preset->is_string()) throw ProtocolError("expected a string", "preset", seq);
    try {
      m.preset = parse_preset(preset->get<std::string>());
    } catch (const Error& e) {
      throw ProtocolError(e.message(), "preset", seq);
    }
    if (const auto c = doc.find("carrier_hz"); c != doc.end() && !c->is_null()) {
      if (!c->is_number() || !std::isfinite(c->get<double>()))
        throw ProtocolError("expected a number", "carrier_hz", seq);
      m.carrier_hz = c->get<double>();
    }
    return {seq, m};
  }
  if (type == "remove_source") {
    detail::check_keys(doc, {"id"}, seq);
    return {seq, RemoveSource{detail::require_id(doc, seq)}};
  }
  if (type == "subscribe_telemetry") {
    detail::check_keys(doc, {"rate_hz"}, seq);
    const auto r = doc.find("rate_hz");
    if (r == doc.end() || !r->is_number()) throw ProtocolError("expected a number", "rate_hz", seq);
    const double rate = r->get<double>();
    if (!(rate > 0.0 && rate <= kMaxTelemetryRate)) throw ProtocolError("must be within (0, 120]", "rate_hz", seq);
    return {seq, SubscribeTelemetry{rate}};
  }
  throw ProtocolError("unknown message type '" + type + "'", "type", seq);
}

// Mirror of the engine's source table kept on the network side, used for
// validation and acknowledgement. The render loop never touches it.
struct ControlState {
  struct Entry {
    Vec3 position;
    double gain{1.0};
    Preset preset{Preset::sine};
  };

  std::map<std::string, Entry> sources;
  std::size_t capacity{Engine::kDefaultMaxSources};
  double sample_rate{48000.0};
  double carrier_hz{200.0};
};

// Hooks into the render side. `submit` forwards a command (false when the
// queue is full); `envelope` returns a long-lived envelope for a preset.
struct ControlSink {
  std::function<bool(const ControlCommand&)> submit;
  std::function<const IntensityEnvelope*(Preset, double carrier_hz)> envelope;
};

struct HandleResult {
  json reply;
  std::optional<double> subscribe_rate;
};

inline json make_ack(const std::optional<json>& seq) {
  json j = {{"v", kProtocolVersion}, {"type", "ack"}};
  if (seq) j["seq"] = *seq;
  return j;
}

inline json make_error(const std::string& message, const std::string& field, const std::optional<json>& seq) {
  json j = {{"v", kProtocolVersion}, {"type", "error"}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  if (seq) j["seq"] = *seq;
  return j;
}

// Applies one parsed message. Commands are forwarded before the mirror state
// changes, so a rejected forward leaves the state untouched.
inline HandleResult handle_message(const Inbound& in, ControlState& state, const ControlSink& sink) {
  const auto& seq = in.seq;
  auto forward = [&](const ControlCommand& cmd) { return sink.submit ? sink.submit(cmd) : true; };
  auto busy = [&] { return HandleResult{make_error("render queue full, retry", "", seq), std::nullopt}; };

  return std::visit(
      [&](const auto& m) -> HandleResult {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SetSource>) {
          const auto it = state.sources.find(m.id);
          if (it == state.sources.end() && state.sources.size() >= state.capacity)
            return {make_error("source table full", "id", seq), std::nullopt};
          const double gain = m.gain.value_or(it == state.sources.end() ? 1.0 : it->second.gain);
          ControlCommand cmd;
          cmd.kind = ControlCommand::Kind::set_source;
          cmd.id = SourceId(m.id);
          cmd.position = m.pos;
          cmd.gain = gain;
          if (!forward(cmd)) return busy();
          auto& entry = state.sources[m.id];
          entry.position = m.pos;
          entry.gain = gain;
          return {make_ack(seq), std::nullopt};
        } else if constexpr (std::is_same_v<T, SetSignal>) {
          const auto it = state.sources.find(m.id);
          if (it == state.sources.end()) return {make_error("unknown source id", "id", seq), std::nullopt};
          const double carrier = m.carrier_hz.value_or(state.carrier_hz);
          if (!(carrier >= 100.0 && carrier <= state.sample_rate / 4.0))
            return {make_error("must be within [100, sample_rate / 4]", "carrier_hz", seq), std::nullopt};
          if (carrier != state.carrier_hz) {
            ControlCommand c;
            c.kind = ControlCommand::Kind::set_carrier;
            c.carrier_hz = carrier;
            if (!forward(c)) return busy();
            state.carrier_hz = carrier;
          }
          ControlCommand cmd;
          cmd.kind = ControlCommand::Kind::set_signal;
          cmd.id = SourceId(m.id);
          cmd.envelope = sink.envelope ? sink.envelope(m.preset, carrier) : nullptr;
          if (!forward(cmd)) return busy();
          it->second.preset = m.preset;
          return {make_ack(seq), std::nullopt};
        } else if constexpr (std::is_same_v<T, RemoveSource>) {
          if (state.sources.count(m.id) != 0) {
            ControlCommand cmd;
            cmd.kind = ControlCommand::Kind::remove_source;
            cmd.id = SourceId(m.id);
            if (!forward(cmd)) return busy();
            state.sources.erase(m.id);
          }
          return {make_ack(seq), std::nullopt};
        } else {
          return {make_ack(seq), m.rate_hz};
        }
      },
      in.message);
}

// Parse + handle; malformed input becomes an error reply.
inline HandleResult handle_text(std::string_view text, ControlState& state, const ControlSink& sink) {
  try {
    return handle_message(parse_control_message(text), state, sink);
  } catch (const ProtocolError& e) {
    return {make_error(e.message(), e.where(), e.seq()), std::nullopt};
  }
}

inline json layout_frame(const Engine& engine) {
  json frame = layout_to_json(engine.layout());
  frame["v"] = kProtocolVersion;
  frame["type"] = "layout";
  frame["channels"] = engine.layout().size();
  frame["perceived_origin"] = detail::point_to_json(engine.layout().origin());
  frame["sample_rate"] = engine.render_config().sample_rate;
  frame["block"] = engine.render_config().block;
  frame["carrier_hz"] = engine.signal_config().carrier_hz;
  return frame;
}

inline json telemetry_frame(const TelemetrySnapshot& snap) {
  json sources = json::array();
  for (std::size_t i = 0; i < snap.count; ++i) {
    const SourceReport& s = snap.sources[i];
    double sum_r = 0.0;
    for (double r : s.weights) sum_r += r;
    sources.push_back({{"id", s.id.str()},
                       {"pos", detail::point_to_json(s.position)},
                       {"gain", s.gain},
                       {"I0", s.intensity},
                       {"d", s.attenuation},
                       {"r", s.weights},
                       {"I", s.channel_intensity},
                       {"sum_r", sum_r}});
  }
  return {{"v", kProtocolVersion}, {"type", "telemetry"}, {"t", snap.t}, {"sources", std::move(sources)}};
}

}  // namespace stereohaptic
