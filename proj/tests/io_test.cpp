#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stereohaptic/config.hpp"
#include "stereohaptic/trajectory_io.hpp"
#include "stereohaptic/wav.hpp"
#include "support/golden.hpp"
#include "support/oracle.hpp"

namespace sh = stereohaptic;

namespace {

std::string error_where(auto&& f) {
  try {
    f();
  } catch (const sh::Error& e) {
    return e.where();
  }
  return "<no error>";
}

std::string error_what(auto&& f) {
  try {
    f();
  } catch (const sh::Error& e) {
    return e.what();
  }
  return "<no error>";
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST(Wav, EmptyPcm16IsHeaderOnly) {
  const sh::MultichannelBuffer buf(1, 0, 48000.0);
  const auto bytes = sh::write_wav(buf, {sh::WavFormat::pcm16, 1, 48000});
  ASSERT_EQ(bytes.size(), 44u);
  EXPECT_EQ(std::string(bytes.begin() + 36, bytes.begin() + 40), "data");
  EXPECT_EQ(bytes[40] | bytes[41] | bytes[42] | bytes[43], 0);
}

TEST(Wav, Pcm16FullScaleEncoding) {
  sh::MultichannelBuffer buf(1, 2, 48000.0);
  buf.channels[0] = {1.0f, -1.0f};
  const auto bytes = sh::write_wav(buf, {sh::WavFormat::pcm16, 1, 48000});
  ASSERT_EQ(bytes.size(), 48u);
  EXPECT_EQ(golden::hex({bytes.data() + 44, 4}), "ff7f0180");
}

TEST(Wav, GoldenBytes) {
  const auto buf = golden::buffer();
  EXPECT_EQ(golden::hex(sh::write_wav(buf, {sh::WavFormat::pcm16, 8, 48000})), golden::kPcm16Hex);
  EXPECT_EQ(golden::hex(sh::write_wav(buf, {sh::WavFormat::float32, 8, 48000})), golden::kFloat32Hex);
}

TEST(Wav, Float32RoundTripIsLossless) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> s(-1.0f, 1.0f);
  sh::MultichannelBuffer buf(3, 1000, 44100.0);
  for (auto& ch : buf.channels)
    for (auto& v : ch) v = s(rng);
  const sh::WavSpec spec{sh::WavFormat::float32, 3, 44100};
  const auto file = sh::read_wav(sh::write_wav(buf, spec));
  EXPECT_EQ(file.spec, spec);
  EXPECT_TRUE(file.buffer.channels == buf.channels);
  EXPECT_EQ(file.buffer.sample_rate, 44100.0);
}

TEST(Wav, Pcm16RoundTripError) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> s(-1.0f, 1.0f);
  sh::MultichannelBuffer buf(2, 5000, 48000.0);
  for (auto& ch : buf.channels)
    for (auto& v : ch) v = s(rng);
  const auto file = sh::read_wav(sh::write_wav(buf, {sh::WavFormat::pcm16, 2, 48000}));
  ASSERT_EQ(file.buffer.frames(), 5000u);
  // Encoding scales by 32767 and decoding by 32768, so a sample s carries an
  // extra |s|/32768 on top of the half-step rounding error.
  double worst = 0.0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 5000; ++i)
      worst = std::max(worst, std::abs(static_cast<double>(file.buffer.channels[k][i]) - buf.channels[k][i]));
  EXPECT_LE(worst, 1.5 / 32768.0);
}

TEST(Wav, WriteRejectsBadInput) {
  sh::MultichannelBuffer buf(2, 4, 48000.0);
  EXPECT_THROW(sh::write_wav(buf, {sh::WavFormat::float32, 3, 48000}), sh::Error);
  buf.channels[1][2] = NAN;
  EXPECT_THROW(sh::write_wav(buf, {sh::WavFormat::float32, 2, 48000}), sh::Error);
}

TEST(Wav, SkipsUnknownChunks) {
  const auto buf = golden::buffer();
  auto bytes = sh::write_wav(buf, {sh::WavFormat::pcm16, 8, 48000});
  // Odd-sized LIST chunk (with pad byte) between fmt and data.
  const std::vector<std::uint8_t> list = {'L', 'I', 'S', 'T', 5, 0, 0, 0, 'I', 'N', 'F', 'O', 'x', 0};
  bytes.insert(bytes.begin() + 36, list.begin(), list.end());
  put_u32(bytes, 4, static_cast<std::uint32_t>(bytes.size() - 8));
  const auto file = sh::read_wav(bytes);
  EXPECT_EQ(file.spec.channels, 8);
  EXPECT_EQ(file.buffer.frames(), 4u);
  EXPECT_FLOAT_EQ(file.buffer.channels[7][3], std::round(-0.8f * 32767.0f) / 32768.0f);
}

TEST(Wav, ReadErrors) {
  const auto good = sh::write_wav(golden::buffer(), {sh::WavFormat::float32, 8, 48000});
  const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 10);
  EXPECT_NE(error_what([&] { sh::read_wav(truncated); }).find("truncated"), std::string::npos);

  auto bad_code = good;
  bad_code[20] = 2;  // ADPCM
  EXPECT_NE(error_what([&] { sh::read_wav(bad_code); }).find("unsupported format"), std::string::npos);

  std::vector<std::uint8_t> junk(good.begin(), good.end());
  junk[0] = 'X';
  EXPECT_NE(error_what([&] { sh::read_wav(junk); }).find("malformed header"), std::string::npos);
  EXPECT_THROW(sh::read_wav(std::vector<std::uint8_t>{}), sh::Error);
}

TEST(Wav, ExtensibleFormatIsAccepted) {
  // Hand-built WAVE_FORMAT_EXTENSIBLE header, 1 channel float32, one sample.
  std::vector<std::uint8_t> b = {'R', 'I', 'F', 'F', 0, 0, 0, 0, 'W', 'A', 'V', 'E', 'f', 'm', 't', ' ', 40, 0, 0, 0,
                                 0xfe, 0xff, 1, 0, 0x80, 0xbb, 0, 0, 0, 0xee, 2, 0, 4, 0, 32, 0, 22, 0, 32, 0,
                                 4, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0x10, 0, 0x80, 0, 0, 0xaa, 0, 0x38, 0x9b, 0x71,
                                 'd', 'a', 't', 'a', 4, 0, 0, 0, 0, 0, 0, 0x3f};
  put_u32(b, 4, static_cast<std::uint32_t>(b.size() - 8));
  const auto file = sh::read_wav(b);
  EXPECT_EQ(file.spec.format, sh::WavFormat::float32);
  EXPECT_EQ(file.buffer.channels[0][0], 0.5f);
}

TEST(TrajectoryCsv, SingleRow) {
  const auto t = sh::parse_trajectory_csv("t,x,y,z,gain\n0,0,0,0,1\n");
  ASSERT_EQ(t.keyframes().size(), 1u);
  EXPECT_EQ(t.keyframes()[0].gain, 1.0);
}

TEST(TrajectoryCsv, ToleratesCrlfAndBlankLines) {
  const auto t = sh::parse_trajectory_csv("t,x,y,z,gain\r\n0,1,2,3,1\r\n\r\n0.5, 1.5 ,2,3,0.5\r\n");
  ASSERT_EQ(t.keyframes().size(), 2u);
  EXPECT_EQ(t.keyframes()[1].position.x, 1.5);
}

TEST(TrajectoryCsv, ErrorsCiteLines) {
  EXPECT_EQ(error_where([] { sh::parse_trajectory_csv("t,x,y,z,gain\n1.0,0,0,0,1\n1.0,0,0,0,1\n"); }), "line 3");
  EXPECT_EQ(error_where([] { sh::parse_trajectory_csv("time,x,y,z,gain\n0,0,0,0,1\n"); }), "line 1");
  EXPECT_EQ(error_where([] { sh::parse_trajectory_csv("t,x,y,z,gain\n0,0,0,0,1\n1,0,abc,0,1\n"); }), "line 3");
  EXPECT_EQ(error_where([] { sh::parse_trajectory_csv("t,x,y,z,gain\n0,0,0,1\n"); }), "line 2");
  EXPECT_EQ(error_where([] { sh::parse_trajectory_csv("t,x,y,z,gain\n0,0,0,0,-1\n"); }), "line 2");
  EXPECT_EQ(error_where([] { sh::parse_trajectory_csv("t,x,y,z,gain\n0,0,nan,0,1\n"); }), "line 2");
  EXPECT_THROW(sh::parse_trajectory_csv("t,x,y,z,gain\n"), sh::Error);
  EXPECT_THROW(sh::parse_trajectory_csv(""), sh::Error);
}

TEST(TrajectoryCsv, ShippedOrbitMatchesGenerator) {
  const auto parsed = sh::parse_trajectory_csv(oracle::read_data("orbit.csv"));
  const auto generated = sh::orbit_trajectory({0, 0, 0}, 0.5, 8.0, 100);
  ASSERT_EQ(parsed.keyframes().size(), 100u);
  EXPECT_TRUE(parsed.keyframes() == generated.keyframes());
  EXPECT_EQ(parsed.duration(), 8.0);
  for (const auto& k : parsed.keyframes()) EXPECT_NEAR(sh::norm(k.position), 0.5, 1e-12);
}

TEST(TrajectoryCsv, FormatParseRoundTripIsExact) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> v(-10.0, 10.0), g(0.0, 3.0);
  std::vector<sh::Keyframe> k;
  double t = 0.0;
  for (int i = 0; i < 200; ++i) {
    t += g(rng) + 1e-6;
    k.push_back({t, {v(rng), v(rng), v(rng) * 1e-7}, g(rng)});
  }
  const sh::Trajectory traj(k);
  EXPECT_TRUE(sh::parse_trajectory_csv(sh::format_trajectory_csv(traj)).keyframes() == traj.keyframes());
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto cfg = sh::load_config("{}");
  EXPECT_EQ(cfg.panning.gamma, 2.0);
  EXPECT_EQ(cfg.panning.rho0, 0.2);
  EXPECT_EQ(cfg.panning.beta, 1.0);
  EXPECT_EQ(cfg.signal.carrier_hz, 200.0);
  EXPECT_EQ(cfg.render.sample_rate, 48000.0);
  EXPECT_EQ(cfg.render.block, 256u);
  EXPECT_FALSE(cfg.layout.has_value());
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(error_where([] { sh::load_config(R"({"panning":{"gamma":-1}})"); }), "panning.gamma");
  EXPECT_EQ(error_where([] { sh::load_config(R"({"panning":{"gama":2}})"); }), "panning.gama");
  EXPECT_EQ(error_where([] { sh::load_config(R"({"rendr":{}})"); }), "rendr");
  EXPECT_EQ(error_where([] { sh::load_config(R"({"render":{"block":8}})"); }), "render.block");
  EXPECT_EQ(error_where([] { sh::load_config(R"({"render":{"block":2.5}})"); }), "render.block");
  EXPECT_EQ(error_where([] { sh::load_config(R"({"signal":{"carrier_hz":"fast"}})"); }), "signal.carrier_hz");
  EXPECT_EQ(error_where([] { sh::load_config(R"({"signal":{"hop":-0.005}})"); }), "signal.hop");
  EXPECT_EQ(error_where([] { sh::load_config("{"); }), "config");
}

TEST(Config, RoundTrip) {
  sh::ConfigDocument cfg;
  cfg.panning = {3.5, 0.15, 2.0, 0.08};
  cfg.signal.carrier_hz = 180.0;
  cfg.signal.sens_q = 0.9;
  cfg.render = {44100.0, 128, 0.02};
  cfg.layout = "layouts/vest.json";
  EXPECT_EQ(sh::load_config(sh::config_to_json(cfg).dump()), cfg);
  EXPECT_EQ(sh::load_config(sh::config_to_json(sh::ConfigDocument{}).dump(2)), sh::ConfigDocument{});
}

TEST(Config, ShippedConfigLoads) {
  const auto cfg = sh::load_config(oracle::read_data("config.json"));
  EXPECT_EQ(cfg.layout, "jacket_layout.json");
}

TEST(Layout, ShippedLayoutsParse) {
  const auto jacket = sh::parse_layout(oracle::read_data("jacket_layout.json"));
  EXPECT_EQ(jacket.size(), 8u);
  EXPECT_FALSE(jacket.origin_override().has_value());
  const auto square = sh::parse_layout(oracle::read_data("unit_square_layout.json"));
  EXPECT_EQ(square.size(), 4u);
  EXPECT_TRUE(square.origin_override().has_value());
  EXPECT_EQ(sh::parse_layout(sh::layout_to_json(jacket).dump()).actuators(), jacket.actuators());
}

TEST(Layout, Errors) {
  EXPECT_EQ(error_where([] { sh::parse_layout(R"({"actuators":[[0,0,1],[0,1]]})"); }), "actuators[1]");
  EXPECT_EQ(error_where([] { sh::parse_layout(R"({"actuators":[[0,0,1],[0,"a",0]]})"); }), "actuators[1][1]");
  EXPECT_EQ(error_where([] { sh::parse_layout(R"({"actuator":[]})"); }), "actuator");
  EXPECT_EQ(error_where([] { sh::parse_layout(R"({"actuators":[]})"); }), "actuators");
  EXPECT_THROW(sh::parse_layout("[1,2]"), sh::Error);
}
