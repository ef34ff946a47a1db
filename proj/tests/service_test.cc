/*
Copyright 2026 The arir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include "service/control_service.hpp"

#include <chrono>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "arir/io.hpp"
#include "gtest/gtest.h"
#include "support/fixtures.hpp"

namespace arir::service {
namespace {

constexpr double kFs = 48000.0;

// Minimal synchronous client.
class Client {
 public:
  explicit Client(unsigned short port) : port_(port) {}

  http::response<http::string_body> request(http::verb verb, const std::string& target,
                                            const std::string& body = "",
                                            const std::string& type = "audio/wav") {
    net::io_context io;
    tcp::socket socket(io);
    socket.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
    http::request<http::string_body> req(verb, target, 11);
    req.set(http::field::host, "localhost");
    if (!body.empty()) req.set(http::field::content_type, type);
    req.body() = body;
    req.prepare_payload();
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response_parser<http::string_body> parser;
    parser.body_limit(1u << 30);
    http::read(socket, buffer, parser);
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
    return parser.release();
  }

 private:
  unsigned short port_;
};

class PoseChannel {
 public:
  PoseChannel(unsigned short port, const std::string& id) : ws_(io_) {
    net::connect(ws_.next_layer(), std::vector<tcp::endpoint>{
                                       tcp::endpoint(net::ip::make_address("127.0.0.1"), port)});
    ws_.handshake("localhost", "/session/" + id + "/pose");
    ws_.text(true);
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }

  Json receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return Json::parse(beast::buffers_to_string(buffer.data()));
  }

  Json pose(double t, const Vec3& x) {
    send(Json{{"t", t}, {"x", x.x()}, {"y", x.y()}, {"z", x.z()}}.dump());
    return receive();
  }

  websocket::stream<tcp::socket>& stream() { return ws_; }

 private:
  net::io_context io_;
  websocket::stream<tcp::socket> ws_;
};

std::vector<float> Samples(const std::string& body) {
  std::vector<float> out(body.size() / sizeof(float));
  std::memcpy(out.data(), body.data(), out.size() * sizeof(float));
  return out;
}

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ServiceOptions options;
    options.port = 0;
    server_ = new ControlService(options);
    server_->start();
    ShoeboxSpecWav() = encode_wav(testing::shoebox_arir(testing::ShoeboxSpec{}), kFs,
                                  Normalization::kN3D);
  }

  static void TearDownTestSuite() {
    delete server_;
    server_ = nullptr;
  }

  static std::string& ShoeboxSpecWav() {
    static std::string wav;
    return wav;
  }

  Client client() { return Client(server_->port()); }

  // Creates a session from the shoebox fixture.
  Json NewSession(const std::string& query = "") {
    const auto res = client().request(http::verb::post, "/session" + query, ShoeboxSpecWav());
    EXPECT_EQ(res.result(), http::status::created) << res.body();
    return Json::parse(res.body());
  }

  static ControlService* server_;
};

ControlService* ServiceTest::server_ = nullptr;

TEST_F(ServiceTest, CreateSessionReturnsGeometry) {
  const Json a = NewSession();
  EXPECT_EQ(a["version"], kSchemaVersion);
  EXPECT_EQ(a["order"], 3);
  EXPECT_EQ(a["sample_rate"], kFs);
  ASSERT_GE(a["events"].size(), 3u);
  EXPECT_NEAR(a["events"][0]["distance_m"].get<double>(), 2.0, 0.02);
  for (const Json& e : a["events"]) EXPECT_EQ(e["position"].size(), 3u);
  EXPECT_EQ(a["walls"].size(), a["events"].size() - 1);

  const Json b = NewSession("?events=4&order=2");
  EXPECT_NE(a["id"], b["id"]);
  EXPECT_EQ(b["events"].size(), 4u);
  EXPECT_EQ(b["order"], 2);

  const auto got = client().request(http::verb::get, "/session/" + a["id"].get<std::string>());
  ASSERT_EQ(got.result(), http::status::ok);
  EXPECT_EQ(Json::parse(got.body()), a);
}

TEST_F(ServiceTest, CreateSessionErrors) {
  EXPECT_EQ(client().request(http::verb::post, "/session").result(), http::status::bad_request);
  EXPECT_EQ(client().request(http::verb::post, "/session", "RIFF garbage").result(),
            http::status::bad_request);
  EXPECT_EQ(client()
                .request(http::verb::post, "/session", R"({"path": "/no/such/file.wav"})",
                         "application/json")
                .result(),
            http::status::bad_request);
  EXPECT_EQ(client().request(http::verb::post, "/session?events=x", ShoeboxSpecWav()).result(),
            http::status::bad_request);
  const std::string zero = encode_wav(Signal::Zero(4, 4800), kFs, Normalization::kN3D);
  EXPECT_EQ(client().request(http::verb::post, "/session", zero).result(),
            http::status::unprocessable_entity);
  EXPECT_EQ(client().request(http::verb::get, "/session/nope").result(), http::status::not_found);
  EXPECT_EQ(client().request(http::verb::get, "/elsewhere").result(), http::status::not_found);
}

TEST_F(ServiceTest, CreateSessionFromPath) {
  testing::TempDir dir;
  write_hoa(dir.file("a.wav"), testing::shoebox_arir(testing::ShoeboxSpec{}), kFs);
  const auto res = client().request(http::verb::post, "/session",
                                    Json{{"path", dir.file("a.wav")}}.dump(), "application/json");
  ASSERT_EQ(res.result(), http::status::created) << res.body();
  EXPECT_EQ(Json::parse(res.body())["events"].size(), 10u);
}

TEST_F(ServiceTest, NullPoseIsIdentity) {
  const Json s = NewSession();
  PoseChannel ch(server_->port(), s["id"]);
  const Json ack = ch.pose(0.0, Vec3::Zero());
  EXPECT_EQ(ack["type"], "ack");
  EXPECT_EQ(ack["seq"], 1);
  EXPECT_FALSE(ack["clamped"].get<bool>());
  ASSERT_EQ(ack["events"].size(), s["events"].size());
  for (const Json& e : ack["events"]) {
    EXPECT_EQ(e["gain"].get<double>(), 1.0);
    EXPECT_EQ(e["time_shift_ms"].get<double>(), 0.0);
  }
}

TEST_F(ServiceTest, PoseOutsideWallsIsClamped) {
  const Json s = NewSession();
  PoseChannel ch(server_->port(), s["id"]);
  const Json ack = ch.pose(0.5, Vec3(-8.0, 6.0, 5.0));
  EXPECT_TRUE(ack["clamped"].get<bool>());
  const Vec3 p(ack["pose"]["x"].get<double>(), ack["pose"]["y"].get<double>(),
               ack["pose"]["z"].get<double>());
  for (const Json& w : s["walls"]) {
    const Vec3 point(w["point"][0].get<double>(), w["point"][1].get<double>(),
                     w["point"][2].get<double>());
    const Vec3 normal(w["normal"][0].get<double>(), w["normal"][1].get<double>(),
                      w["normal"][2].get<double>());
    EXPECT_GE((p - point).dot(normal), 0.0);
  }
  EXPECT_EQ(ack["pose"]["t"].get<double>(), 0.5);
}

TEST_F(ServiceTest, MalformedMessageKeepsConnection) {
  const Json s = NewSession();
  PoseChannel ch(server_->port(), s["id"]);
  ch.send("not json");
  EXPECT_EQ(ch.receive()["type"], "error");
  ch.send(R"({"t": 0, "x": 1})");
  EXPECT_EQ(ch.receive()["type"], "error");
  const Json ack = ch.pose(0.0, Vec3(0.1, 0, 0));
  EXPECT_EQ(ack["type"], "ack");
  EXPECT_EQ(ack["seq"], 1);
}

TEST_F(ServiceTest, UnknownSessionClosesSocket) {
  PoseChannel ch(server_->port(), "missing");
  beast::flat_buffer buffer;
  beast::error_code ec;
  ch.stream().read(buffer, ec);
  EXPECT_EQ(ec, websocket::error::closed);
  EXPECT_EQ(ch.stream().reason().code, websocket::close_code::policy_error);
}

TEST_F(ServiceTest, ThousandPosesAckedInOrder) {
  const Json s = NewSession();
  PoseChannel ch(server_->port(), s["id"]);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) {
    const double t = i / 60.0;
    ch.send(Json{{"t", t}, {"x", 0.3 * std::sin(t)}, {"y", 0.3 * std::cos(t)}, {"z", 0.0}}.dump());
  }
  for (int i = 0; i < 1000; ++i) {
    const Json ack = ch.receive();
    ASSERT_EQ(ack["type"], "ack");
    EXPECT_EQ(ack["seq"], i + 1);
    EXPECT_EQ(ack["pose"]["t"].get<double>(), i / 60.0);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_GT(1000.0 / elapsed, 30.0);
}

TEST_F(ServiceTest, PreviewErrors) {
  const Json s = NewSession();
  const std::string base = "/session/" + s["id"].get<std::string>() + "/preview";
  EXPECT_EQ(client().request(http::verb::get, base + "?src=opera").result(),
            http::status::not_found);
  EXPECT_EQ(client().request(http::verb::get, base).result(), http::status::not_found);
  EXPECT_EQ(client().request(http::verb::get, "/session/nope/preview?src=noise").result(),
            http::status::not_found);
  EXPECT_EQ(client().request(http::verb::get, base + "?src=noise&seconds=-1").result(),
            http::status::bad_request);
}

TEST_F(ServiceTest, SilenceIsSilent) {
  const Json s = NewSession();
  const auto res = client().request(
      http::verb::get, "/session/" + s["id"].get<std::string>() + "/preview?src=silence&seconds=0.5&pace=0");
  ASSERT_EQ(res.result(), http::status::ok);
  EXPECT_EQ(res[http::field::content_type], "application/octet-stream");
  const std::vector<float> pcm = Samples(res.body());
  EXPECT_EQ(pcm.size(), 2u * 94u * 256u);
  for (float v : pcm) ASSERT_EQ(v, 0.0f);
}

// Offline render of |x| at a fixed pose, decoded to stereo.
std::vector<float> OfflinePreview(const AnalysisPreset& preset, const std::vector<double>& x,
                                  const ListenerPose& pose) {
  RenderConfig config;
  Renderer renderer(preset, config);
  renderer.reset(pose);
  Signal out(renderer.channels(), 256);
  std::vector<float> pcm;
  for (std::size_t b = 0; b * 256 < x.size(); ++b) {
    renderer.process(std::span<const double>(x.data() + b * 256, 256), out);
    const Signal stereo = preview_decode(out);
    for (Eigen::Index t = 0; t < 256; ++t) {
      pcm.push_back(static_cast<float>(stereo(0, t)));
      pcm.push_back(static_cast<float>(stereo(1, t)));
    }
  }
  return pcm;
}

// Relative RMS difference; float32 output and FFT plan rounding differ
// slightly between streams.
double RelativeError(const std::vector<float>& value, const std::vector<float>& reference) {
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < value.size(); ++i) {
    err += std::pow(value[i] - reference[i], 2);
    ref += std::pow(reference[i], 2);
  }
  return ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err);
}

TEST_F(ServiceTest, ImpulsePreviewMatchesOfflineRender) {
  const Json s = NewSession();
  const auto res = client().request(
      http::verb::get, "/session/" + s["id"].get<std::string>() + "/preview?src=impulses&seconds=1.2&pace=0");
  ASSERT_EQ(res.result(), http::status::ok);
  const std::vector<float> pcm = Samples(res.body());

  const AnalysisPreset preset = analyze(make_arir(testing::shoebox_arir(testing::ShoeboxSpec{}), kFs));
  const std::size_t length = 225 * 256;
  const std::vector<float> expected =
      OfflinePreview(preset, builtin_source("impulses", kFs, length), ListenerPose{});
  ASSERT_EQ(pcm.size(), expected.size());
  EXPECT_LT(RelativeError(pcm, expected), 1e-6);
}

TEST_F(ServiceTest, PoseJumpDuringStreamHasNoDropout) {
  const Json s = NewSession();
  const std::string id = s["id"];
  std::string body;
  std::thread reader([&] {
    body = client().request(http::verb::get, "/session/" + id + "/preview?src=noise&seconds=1").body();
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(500));
  PoseChannel ch(server_->port(), id);
  EXPECT_EQ(ch.pose(0.5, Vec3(0.8, 0.0, 0.0))["type"], "ack");
  reader.join();

  const std::vector<float> pcm = Samples(body);
  ASSERT_EQ(pcm.size(), 2u * 188u * 256u);
  // Longest run of silent frames once the direct sound has arrived.
  std::size_t run = 0, longest = 0;
  for (std::size_t f = 512; f < pcm.size() / 2; ++f) {
    run = (pcm[2 * f] == 0.0f && pcm[2 * f + 1] == 0.0f) ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  EXPECT_LE(longest, 256u);

  // The jump reached the stream: the end differs from a still listener.
  const AnalysisPreset preset = analyze(make_arir(testing::shoebox_arir(testing::ShoeboxSpec{}), kFs));
  const std::vector<float> still =
      OfflinePreview(preset, builtin_source("noise", kFs, 188 * 256), ListenerPose{});
  double diff = 0.0;
  for (std::size_t i = pcm.size() - 4096; i < pcm.size(); ++i) diff += std::abs(pcm[i] - still[i]);
  EXPECT_GT(diff, 1.0);
}

TEST_F(ServiceTest, UploadedSource) {
  const Json s = NewSession();
  const std::string base = "/session/" + s["id"].get<std::string>();
  Signal tone(1, 4800);
  for (Eigen::Index t = 0; t < tone.cols(); ++t) tone(0, t) = 0.1 * std::sin(0.05 * t);
  EXPECT_EQ(client().request(http::verb::post, base + "/sources/tone", encode_wav(tone, kFs, std::nullopt)).result(),
            http::status::created);
  EXPECT_EQ(client().request(http::verb::post, base + "/sources/slow", encode_wav(tone, 44100.0, std::nullopt)).result(),
            http::status::unprocessable_entity);
  EXPECT_EQ(client().request(http::verb::post, base + "/sources/noise", encode_wav(tone, kFs, std::nullopt)).result(),
            http::status::conflict);
  EXPECT_EQ(client().request(http::verb::post, base + "/sources/stereo",
                             encode_wav(Signal::Zero(2, 10), kFs, std::nullopt)).result(),
            http::status::bad_request);
  const auto res = client().request(http::verb::get, base + "/preview?src=tone&seconds=0.2&pace=0");
  ASSERT_EQ(res.result(), http::status::ok);
  const std::vector<float> pcm = Samples(res.body());
  EXPECT_GT(*std::max_element(pcm.begin(), pcm.end()), 0.0f);
}

TEST_F(ServiceTest, SessionsAreIndependent) {
  const Json a = NewSession();
  const Json b = NewSession();
  PoseChannel ch(server_->port(), a["id"]);
  ch.pose(0.0, Vec3(0.5, 0.5, 0.0));
  const auto res = client().request(
      http::verb::get, "/session/" + b["id"].get<std::string>() + "/preview?src=impulses&seconds=0.3&pace=0");
  const AnalysisPreset preset = analyze(make_arir(testing::shoebox_arir(testing::ShoeboxSpec{}), kFs));
  const std::vector<float> expected =
      OfflinePreview(preset, builtin_source("impulses", kFs, 57 * 256), ListenerPose{});
  const std::vector<float> pcm = Samples(res.body());
  ASSERT_EQ(pcm.size(), expected.size());
  EXPECT_LT(RelativeError(pcm, expected), 1e-6);
  EXPECT_EQ(client().request(http::verb::delete_, "/session/" + b["id"].get<std::string>()).result(),
            http::status::ok);
  EXPECT_EQ(client().request(http::verb::get, "/session/" + b["id"].get<std::string>()).result(),
            http::status::not_found);
}

}  // namespace
}  // namespace arir::service
