// stereohaptic: offline rendering, weight inspection, envelope analysis and
// the live control service.
//
//   stereohaptic render  --layout L --trajectory T --signal sine|footstep|rumble|in.wav --out out.wav
//   stereohaptic weights --layout L --pos x,y,z [--gamma g] [--json]
//   stereohaptic analyze --in mono.wav
//   stereohaptic serve   --layout L [--port 8765]
//
// Exit codes: 0 success, 1 runtime failure (e.g. port in use), 2 invalid
// input or usage.

#include <pthread.h>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stereohaptic/config.hpp"
#include "stereohaptic/localization.hpp"
#include "stereohaptic/renderer.hpp"
#include "stereohaptic/service.hpp"
#include "stereohaptic/signal.hpp"
#include "stereohaptic/trajectory_io.hpp"
#include "stereohaptic/wav.hpp"

namespace sh = stereohaptic;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

// Input problems: reported with the file they came from, exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = sh::read_file_bytes(path);
  } catch (const sh::Error&) {
    throw InputError(path + ": cannot open file");
  }
  return {bytes.begin(), bytes.end()};
}

template <typename F>
auto parse_file(const std::string& path, F&& parse) {
  const std::string text = read_text(path);
  try {
    return parse(text);
  } catch (const sh::Error& e) {
    throw InputError(path + ": " + e.what());
  }
}

struct CommonOptions {
  std::string layout;
  std::string config;
  std::optional<double> gamma, rho0, beta, blend_radius;
};

struct Setup {
  sh::ConfigDocument cfg;
  std::optional<sh::ActuatorLayout> layout;
};

Setup load_setup(const CommonOptions& opt, bool need_layout) {
  Setup s;
  std::string layout_path = opt.layout;
  if (!opt.config.empty()) {
    s.cfg = parse_file(opt.config, sh::load_config);
    if (layout_path.empty() && s.cfg.layout) {
      const std::filesystem::path p(*s.cfg.layout);
      layout_path = p.is_absolute() ? p.string() : (std::filesystem::path(opt.config).parent_path() / p).string();
    }
  }
  if (opt.gamma) s.cfg.panning.gamma = *opt.gamma;
  if (opt.rho0) s.cfg.panning.rho0 = *opt.rho0;
  if (opt.beta) s.cfg.panning.beta = *opt.beta;
  if (opt.blend_radius) s.cfg.panning.blend_radius = *opt.blend_radius;
  try {
    s.cfg.panning.validate();
  } catch (const sh::Error& e) {
    std::string flag = e.where();
    std::replace(flag.begin(), flag.end(), '_', '-');
    throw InputError("--" + flag + ": " + e.message());
  }
  if (need_layout) {
    if (layout_path.empty()) throw InputError("no layout given (use --layout or a config with \"layout\")");
    s.layout = parse_file(layout_path, sh::parse_layout);
  }
  return s;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool panning) {
  cmd->add_option("--layout", opt.layout, "Actuator layout JSON file");
  cmd->add_option("--config", opt.config, "Configuration JSON file");
  if (panning) {
    cmd->add_option("--gamma", opt.gamma, "Direction sharpness exponent");
    cmd->add_option("--rho0", opt.rho0, "Near-field radius (m)");
    cmd->add_option("--beta", opt.beta, "Attenuation exponent");
    cmd->add_option("--blend-radius", opt.blend_radius, "Uniform blend zone radius (m)");
  }
}

sh::Vec3 parse_position(const std::string& text) {
  std::vector<double> v;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    double d = 0.0;
    if (!sh::detail::parse_double(std::string_view(text).substr(start, comma - start), d))
      throw InputError("--pos: expected x,y,z in meters, got '" + text + "'");
    v.push_back(d);
    start = comma + 1;
  }
  if (v.size() != 3) throw InputError("--pos: expected x,y,z in meters, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

sh::Waveform mono_from_wav(const std::string& path, std::optional<std::size_t> channel) {
  const auto bytes = [&] {
    try {
      return sh::read_file_bytes(path);
    } catch (const sh::Error&) {
      throw InputError(path + ": cannot open file");
    }
  }();
  sh::WavFile wav;
  try {
    wav = sh::read_wav(bytes);
  } catch (const sh::Error& e) {
    throw InputError(path + ": " + e.what());
  }
  std::size_t k = 0;
  if (channel) {
    if (*channel >= wav.spec.channels)
      throw InputError(path + ": --channel " + std::to_string(*channel) + " out of range (file has " +
                       std::to_string(wav.spec.channels) + " channels)");
    k = *channel;
  } else if (wav.spec.channels != 1) {
    throw InputError(path + ": input has " + std::to_string(wav.spec.channels) +
                     " channels; expected mono (select one with --channel N)");
  }
  sh::Waveform w;
  w.sample_rate = wav.spec.sample_rate;
  w.samples.assign(wav.buffer.channels[k].begin(), wav.buffer.channels[k].end());
  return w;
}

int cmd_render(const CommonOptions& opt, const std::string& trajectory_path, const std::string& signal,
               const std::string& out_path, const std::string& format) {
  const Setup s = load_setup(opt, true);
  const sh::Trajectory traj = parse_file(trajectory_path, sh::parse_trajectory_csv);

  sh::SignalInput input = sh::Preset::sine;
  if (signal == "sine" || signal == "footstep" || signal == "rumble") {
    input = sh::parse_preset(signal);
  } else {
    input = mono_from_wav(signal, std::nullopt);
  }

  const sh::RenderResult result =
      sh::render_trajectory(traj, input, *s.layout, s.cfg.panning, s.cfg.signal, s.cfg.render);

  sh::WavSpec spec;
  spec.format = format == "pcm16" ? sh::WavFormat::pcm16 : sh::WavFormat::float32;
  spec.channels = static_cast<std::uint16_t>(s.layout->size());
  spec.sample_rate = static_cast<std::uint32_t>(s.cfg.render.sample_rate);
  sh::write_file_bytes(out_path, sh::write_wav(result.buffer, spec));

  std::printf("wrote %s\n", out_path.c_str());
  std::printf("duration %.6f s (%zu frames), channels %zu, clipped %zu\n",
              static_cast<double>(result.buffer.frames()) / result.buffer.sample_rate, result.buffer.frames(),
              result.buffer.channel_count(), result.clipped);
  for (std::size_t k = 0; k < result.buffer.channel_count(); ++k) {
    float peak = 0.0f;
    for (float v : result.buffer.channels[k]) peak = std::max(peak, std::abs(v));
    std::printf("  channel %zu peak %.6f\n", k, static_cast<double>(peak));
  }
  return 0;
}

int cmd_weights(const CommonOptions& opt, const std::string& pos_text, bool as_json) {
  const Setup s = load_setup(opt, true);
  const sh::Vec3 p = parse_position(pos_text);
  const sh::ActuatorLayout& layout = *s.layout;
  const sh::PanningBreakdown b = sh::panning_breakdown(layout, p, s.cfg.panning);
  const double d = sh::attenuation(p, layout.origin(), s.cfg.panning);
  const double sum_r = b.r.sum();
  const double distance = sh::norm(p - layout.origin());

  if (as_json) {
    sh::json rows = sh::json::array();
    for (std::size_t k = 0; k < layout.size(); ++k) {
      rows.push_back({{"k", k},
                      {"u", b.u ? sh::json((*b.u)[k]) : sh::json(nullptr)},
                      {"w", b.w ? sh::json((*b.w)[k]) : sh::json(nullptr)},
                      {"r", b.r[k]}});
    }
    const sh::json doc = {{"position", sh::detail::point_to_json(p)},
                          {"origin", sh::detail::point_to_json(layout.origin())},
                          {"distance", distance},
                          {"blend", b.blend},
                          {"d", d},
                          {"actuators", rows},
                          {"sum_r", sum_r}};
    std::cout << doc.dump(2) << "\n";
    return 0;
  }

  std::printf("origin %.6f,%.6f,%.6f  distance %.6f m  blend %.6f\n", layout.origin().x, layout.origin().y,
              layout.origin().z, distance, b.blend);
  std::printf("%3s %12s %12s %12s\n", "k", "u", "w", "r");
  for (std::size_t k = 0; k < layout.size(); ++k) {
    if (b.u) {
      std::printf("%3zu %12.9f %12.9f %12.9f\n", k, (*b.u)[k], (*b.w)[k], b.r[k]);
    } else {
      std::printf("%3zu %12s %12s %12.9f\n", k, "-", "-", b.r[k]);
    }
  }
  std::printf("d %.9f\n", d);
  std::printf("sum_r %.9f\n", sum_r);
  return 0;
}

int cmd_analyze(const CommonOptions& opt, const std::string& in_path, std::optional<std::size_t> channel) {
  const Setup s = load_setup(opt, false);
  const sh::Waveform w = mono_from_wav(in_path, channel);
  try {
    s.cfg.signal.validate(w.sample_rate);
  } catch (const sh::Error& e) {
    throw InputError(in_path + ": signal." + e.where() + " " + e.message() + " at this sample rate");
  }
  const sh::IntensityEnvelope env = sh::perceived_intensity_envelope(w, s.cfg.signal);
  std::printf("t,intensity\n");
  for (std::size_t m = 0; m < env.values.size(); ++m)
    std::printf("%.6f,%.9g\n", static_cast<double>(m) * env.hop, env.values[m]);
  return 0;
}

int cmd_serve(const CommonOptions& opt, const std::string& host, unsigned short port) {
  const Setup s = load_setup(opt, true);
  sh::ServiceConfig sc;
  sc.host = host;
  sc.port = port;
  sc.log = [](const std::string& line) { std::cerr << "[serve] " << line << std::endl; };
  sh::Service service(sh::Engine(*s.layout, s.cfg.panning, s.cfg.signal, s.cfg.render), sc);
  // Blocked before any thread starts so the signal can only be consumed below.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
  try {
    service.start();
  } catch (const sh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  int sig = 0;
  sigwait(&stop_signals, &sig);
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial vibrotactile rendering for body-mounted actuator arrays"};
  app.require_subcommand(1);

  CommonOptions render_opt, weights_opt, analyze_opt, serve_opt;

  auto* render = app.add_subcommand("render", "Render a trajectory to a multichannel WAV file");
  add_common(render, render_opt, true);
  std::string trajectory, signal = "sine", out, format = "float32";
  render->add_option("--trajectory", trajectory, "Trajectory CSV (t,x,y,z,gain)")->required();
  render->add_option("--signal", signal, "Preset (sine, footstep, rumble) or mono WAV path");
  render->add_option("--out", out, "Output WAV path")->required();
  render->add_option("--format", format, "Sample format")->check(CLI::IsMember({"float32", "pcm16"}));

  auto* weights = app.add_subcommand("weights", "Print per-actuator direction cosines and weights");
  add_common(weights, weights_opt, true);
  std::string pos;
  bool as_json = false;
  weights->add_option("--pos", pos, "Source position x,y,z in meters")->required();
  weights->add_flag("--json", as_json, "Machine-readable output");

  auto* analyze = app.add_subcommand("analyze", "Print the perceived-intensity envelope of a mono WAV");
  add_common(analyze, analyze_opt, false);
  std::string in;
  std::optional<std::size_t> channel;
  analyze->add_option("--in", in, "Input WAV path")->required();
  analyze->add_option("--channel", channel, "Channel to analyze in a multichannel file");

  auto* serve = app.add_subcommand("serve", "Run the WebSocket control service");
  add_common(serve, serve_opt, true);
  std::string host = "127.0.0.1";
  unsigned short port = 8765;
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*render) return cmd_render(render_opt, trajectory, signal, out, format);
    if (*weights) return cmd_weights(weights_opt, pos, as_json);
    if (*analyze) return cmd_analyze(analyze_opt, in, channel);
    if (*serve) return cmd_serve(serve_opt, host, port);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
