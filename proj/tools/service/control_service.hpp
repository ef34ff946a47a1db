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

#ifndef ARIR_TOOLS_SERVICE_CONTROL_SERVICE_HPP_
#define ARIR_TOOLS_SERVICE_CONTROL_SERVICE_HPP_

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "arir/io.hpp"
#include "arir/preset.hpp"
#include "arir/renderer.hpp"
#include "json.hpp"

namespace arir::service {

namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace websocket = boost::beast::websocket;
namespace net = boost::asio;
using tcp = boost::asio::ip::tcp;
using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Analysis summary and geometry as sent to the UI.
inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json preset_summary(const AnalysisPreset& preset) {
  Json events = Json::array();
  for (const SoundEvent& e : preset.events) {
    events.push_back({
        {"index", e.index},
        {"toa_ms", 1e3 * e.toa},
        {"doa", vec_json(e.doa.vec())},
        {"azimuth_deg", e.doa.azimuth() * 180.0 / kPi},
        {"zenith_deg", e.doa.zenith() * 180.0 / kPi},
        {"position", vec_json(e.position)},
        {"distance_m", e.position.norm()},
        {"exclusion", {e.exclusion(0), e.exclusion(1), e.exclusion(2), e.exclusion(3)}},
    });
  }
  Json walls = Json::array();
  for (const Wall& w : preset.walls.walls) {
    walls.push_back({{"event_index", w.event_index},
                     {"point", vec_json(w.anchor)},
                     {"normal", vec_json(w.normal)}});
  }
  return {{"version", kSchemaVersion},
          {"order", preset.order},
          {"sample_rate", preset.sample_rate},
          {"speed_of_sound", preset.speed_of_sound},
          {"length_s", static_cast<double>(preset.length()) / preset.sample_rate},
          {"envelope_corrected", preset.envelope_corrected},
          {"events", events},
          {"walls", walls}};
}

// Pose after clamping plus the per-event translation, for display.
inline Json pose_ack(const AnalysisPreset& preset, const ClampResult& clamp,
                     const TranslationLimits& limits, std::uint64_t seq) {
  const TranslationParams params = translation_params(preset, clamp.pose, limits);
  Json events = Json::array();
  for (std::size_t n = 0; n < preset.events.size(); ++n) {
    const EventTranslation& et = params.events[n];
    events.push_back({{"index", preset.events[n].index},
                      {"gain", et.gain},
                      {"time_shift_ms", 1e3 * et.time_shift},
                      {"doa", vec_json(et.direction.vec())}});
  }
  const Vec3& p = clamp.pose.position;
  Json ack = {{"type", "ack"},
              {"version", kSchemaVersion},
              {"seq", seq},
              {"pose", {{"t", clamp.pose.time}, {"x", p.x()}, {"y", p.y()}, {"z", p.z()}}},
              {"clamped", clamp.clamped},
              {"events", events}};
  if (clamp.diagnostic) ack["diagnostic"] = *clamp.diagnostic;
  return ack;
}

// Built-in dry sources for auditioning.
inline std::vector<double> builtin_source(const std::string& name, double fs,
                                          std::size_t length) {
  std::vector<double> x(length, 0.0);
  if (name == "silence") return x;
  if (name == "impulses") {
    const auto period = static_cast<std::size_t>(0.5 * fs);
    for (std::size_t t = 0; t < length; t += period) x[t] = 1.0;
    return x;
  }
  if (name == "noise") {
    std::mt19937 rng(7);
    std::normal_distribution<double> n(0.0, 0.1);
    for (double& v : x) v = n(rng);
    return x;
  }
  if (name == "pluck") {
    // Karplus-Strong string, one note per second cycling over a triad.
    const double notes[] = {196.0, 246.9, 293.7};
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const auto note_len = static_cast<std::size_t>(fs);
    for (std::size_t start = 0, k = 0; start < length; start += note_len, ++k) {
      const auto period = static_cast<std::size_t>(std::lround(fs / notes[k % 3]));
      std::vector<double> line(period);
      for (double& v : line) v = u(rng);
      for (std::size_t t = 0; t < note_len && start + t < length; ++t) {
        const std::size_t i = t % period;
        const double out = line[i];
        line[i] = 0.498 * (line[i] + line[(i + 1) % period]);
        x[start + t] = out;
      }
    }
    return x;
  }
  return {};
}

inline bool is_builtin_source(const std::string& name) {
  return name == "silence" || name == "impulses" || name == "noise" || name == "pluck";
}

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::size_t block_size = 256;
  AnalysisOptions analysis;
  TranslationLimits limits;
  // Upper bound for preview streams, seconds.
  double max_preview_s = 600.0;
};

// One analyzed ARIR with its live pose. Pose messages are serialized by
// |mutex|; preview streams poll the generation and publish to their own
// renderer.
struct Session {
  std::string id;
  std::shared_ptr<const AnalysisPreset> preset;
  std::mutex mutex;
  ListenerPose pose;
  std::uint64_t generation = 0;
  std::map<std::string, std::shared_ptr<const std::vector<double>>> sources;
};

class ControlService {
 public:
  explicit ControlService(ServiceOptions options = {})
      : options_(std::move(options)), acceptor_(io_) {
    RenderConfig config;
    config.block_size = options_.block_size;
    config.crossfade = options_.block_size;
    config.validate();
    options_.limits.validate();
    const tcp::endpoint endpoint(net::ip::make_address(options_.address), options_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
  }

  ~ControlService() { stop(); }

  ControlService(const ControlService&) = delete;
  ControlService& operator=(const ControlService&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  // Serves on a background thread.
  void start() {
    accept_next();
    io_thread_ = std::thread([this] { io_.run(); });
  }

  // Serves on the calling thread until stop().
  void run() {
    accept_next();
    io_.run();
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    net::post(io_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
    });
    io_.stop();
    if (io_thread_.joinable()) io_thread_.join();
    std::vector<std::thread> threads;
    {
      std::lock_guard<std::mutex> lock(connections_mutex_);
      for (const auto& socket : sockets_) {
        beast::error_code ec;
        socket->shutdown(tcp::socket::shutdown_both, ec);
      }
      threads.swap(threads_);
    }
    for (std::thread& t : threads) t.join();
  }

  std::size_t session_count() {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    return sessions_.size();
  }

 private:
  using Request = http::request<http::string_body>;
  using Response = http::response<http::string_body>;

  void accept_next() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto shared = std::make_shared<tcp::socket>(std::move(socket));
      {
        std::lock_guard<std::mutex> lock(connections_mutex_);
        if (stopped_) return;
        sockets_.insert(shared);
        threads_.emplace_back([this, shared] {
          serve_connection(*shared);
          std::lock_guard<std::mutex> inner(connections_mutex_);
          sockets_.erase(shared);
        });
      }
      accept_next();
    });
  }

  static std::map<std::string, std::string> query_params(const std::string& query) {
    std::map<std::string, std::string> out;
    std::stringstream ss(query);
    std::string item;
    while (std::getline(ss, item, '&')) {
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos) {
        out[item] = "";
      } else {
        out[item.substr(0, eq)] = item.substr(eq + 1);
      }
    }
    return out;
  }

  static std::vector<std::string> path_parts(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string item;
    while (std::getline(ss, item, '/')) {
      if (!item.empty()) parts.push_back(item);
    }
    return parts;
  }

  static Response json_response(const Request& req, http::status status, const Json& body) {
    Response res(status, req.version());
    res.set(http::field::content_type, "application/json");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
  }

  static Response error_response(const Request& req, http::status status,
                                 const std::string& message) {
    return json_response(req, status, {{"error", message}, {"version", kSchemaVersion}});
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::string new_session_id() {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    static constexpr char kHex[] = "0123456789abcdef";
    for (;;) {
      std::string id;
      const std::uint64_t v = id_rng_();
      for (int i = 0; i < 16; ++i) id += kHex[(v >> (4 * i)) & 15];
      if (sessions_.count(id) == 0) return id;
    }
  }

  void serve_connection(tcp::socket& socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(512u * 1024u * 1024u);
      http::read(socket, buffer, parser, ec);
      if (ec) return;
      Request req = parser.release();
      if (websocket::is_upgrade(req)) {
        serve_websocket(std::move(socket), std::move(req));
        return;
      }
      const bool keep_alive = req.keep_alive();
      const std::string target(req.target());
      const std::size_t qpos = target.find('?');
      const std::string path = target.substr(0, qpos);
      const auto params = query_params(qpos == std::string::npos ? "" : target.substr(qpos + 1));
      const std::vector<std::string> parts = path_parts(path);

      if (req.method() == http::verb::get && parts.size() == 3 && parts[0] == "session" &&
          parts[2] == "preview") {
        if (!serve_preview(socket, req, parts[1], params)) return;
        continue;
      }
      Response res = handle(req, parts, params);
      http::write(socket, res, ec);
      if (ec || !keep_alive) break;
    }
    socket.shutdown(tcp::socket::shutdown_send, ec);
  }

  Response handle(const Request& req, const std::vector<std::string>& parts,
                  const std::map<std::string, std::string>& params) {
    if (req.method() == http::verb::get && parts.size() == 1 && parts[0] == "health") {
      return json_response(req, http::status::ok, {{"status", "ok"}, {"version", kSchemaVersion}});
    }
    if (req.method() == http::verb::post && parts.size() == 1 && parts[0] == "session") {
      return create_session(req, params);
    }
    if (parts.size() >= 2 && parts[0] == "session") {
      const std::shared_ptr<Session> session = find_session(parts[1]);
      if (session == nullptr) return error_response(req, http::status::not_found, "unknown session");
      if (req.method() == http::verb::get && parts.size() == 2) {
        Json body = preset_summary(*session->preset);
        body["id"] = session->id;
        return json_response(req, http::status::ok, body);
      }
      if (req.method() == http::verb::delete_ && parts.size() == 2) {
        std::lock_guard<std::mutex> lock(sessions_mutex_);
        sessions_.erase(parts[1]);
        return json_response(req, http::status::ok, {{"deleted", parts[1]}});
      }
      if (req.method() == http::verb::post && parts.size() == 4 && parts[2] == "sources") {
        return upload_source(req, *session, parts[3]);
      }
    }
    return error_response(req, http::status::not_found, "no such endpoint");
  }

  // Body: a WAV file, or JSON {"path": "..."} naming one on the server.
  Response create_session(const Request& req, const std::map<std::string, std::string>& params) {
    if (req.body().empty()) return error_response(req, http::status::bad_request, "empty body");
    AnalysisOptions options = options_.analysis;
    ArirReadOptions read_options;
    Arir arir;
    try {
      if (const auto it = params.find("events"); it != params.end()) {
        options.detection.max_events = std::stoi(it->second);
      }
      if (const auto it = params.find("order"); it != params.end()) {
        options.order = std::stoi(it->second);
      }
      if (const auto it = params.find("envelope_correction"); it != params.end()) {
        options.envelope_correction = it->second != "0" && it->second != "false";
      }
      if (const auto it = params.find("normalization"); it != params.end()) {
        if (it->second == "n3d") {
          read_options.assume = Normalization::kN3D;
        } else if (it->second == "sn3d") {
          read_options.assume = Normalization::kSN3D;
        } else {
          return error_response(req, http::status::bad_request, "unknown normalization");
        }
      }
    } catch (const std::exception&) {
      return error_response(req, http::status::bad_request, "malformed query parameter");
    }
    try {
      const std::string& body = req.body();
      if (body.front() == '{') {
        const Json j = Json::parse(body);
        arir = read_arir(j.at("path").get<std::string>(), read_options);
      } else {
        arir = arir_from_wav(parse_wav(std::vector<char>(body.begin(), body.end())), read_options);
      }
    } catch (const Json::exception& e) {
      return error_response(req, http::status::bad_request, e.what());
    } catch (const Error& e) {
      return error_response(req, http::status::bad_request, e.what());
    }
    auto session = std::make_shared<Session>();
    try {
      session->preset = std::make_shared<const AnalysisPreset>(analyze(arir, options));
    } catch (const Error& e) {
      return error_response(req, http::status::unprocessable_entity, e.what());
    }
    session->id = new_session_id();
    {
      std::lock_guard<std::mutex> lock(sessions_mutex_);
      sessions_[session->id] = session;
    }
    Json body = preset_summary(*session->preset);
    body["id"] = session->id;
    return json_response(req, http::status::created, body);
  }

  // Mono WAV at the session's sample rate, usable as preview source |name|.
  Response upload_source(const Request& req, Session& session, const std::string& name) {
    if (req.body().empty()) return error_response(req, http::status::bad_request, "empty body");
    if (is_builtin_source(name)) {
      return error_response(req, http::status::conflict, "name of a built-in source");
    }
    double rate = 0.0;
    std::vector<double> x;
    try {
      x = mono_from_wav(parse_wav(std::vector<char>(req.body().begin(), req.body().end())), &rate);
    } catch (const Error& e) {
      return error_response(req, http::status::bad_request, e.what());
    }
    if (rate != session.preset->sample_rate) {
      return error_response(req, http::status::unprocessable_entity, "sample rate mismatch");
    }
    std::lock_guard<std::mutex> lock(session.mutex);
    session.sources[name] = std::make_shared<const std::vector<double>>(std::move(x));
    return json_response(req, http::status::created, {{"source", name}});
  }

  // Chunked float32 little-endian interleaved stereo, one chunk per block.
  // Query: src (required), seconds (default 10), pace (default 1: real time).
  bool serve_preview(tcp::socket& socket, const Request& req, const std::string& id,
                     const std::map<std::string, std::string>& params) {
    beast::error_code ec;
    auto reject = [&](http::status status, const std::string& message) {
      Response res = error_response(req, status, message);
      http::write(socket, res, ec);
      return !ec && req.keep_alive();
    };
    const std::shared_ptr<Session> session = find_session(id);
    if (session == nullptr) return reject(http::status::not_found, "unknown session");
    const AnalysisPreset& preset = *session->preset;
    const double fs = preset.sample_rate;
    const std::size_t block = options_.block_size;

    double seconds = 10.0;
    bool pace = true;
    try {
      if (const auto it = params.find("seconds"); it != params.end()) seconds = std::stod(it->second);
      if (const auto it = params.find("pace"); it != params.end()) pace = it->second != "0";
    } catch (const std::exception&) {
      return reject(http::status::bad_request, "malformed query parameter");
    }
    if (!(seconds > 0.0) || seconds > options_.max_preview_s) {
      return reject(http::status::bad_request, "seconds out of range");
    }
    const auto blocks = static_cast<std::size_t>(std::ceil(seconds * fs / static_cast<double>(block)));
    const auto src = params.find("src");
    if (src == params.end()) return reject(http::status::not_found, "no source selected");
    std::shared_ptr<const std::vector<double>> input;
    if (is_builtin_source(src->second)) {
      input = std::make_shared<const std::vector<double>>(
          builtin_source(src->second, fs, blocks * block));
    } else {
      std::lock_guard<std::mutex> lock(session->mutex);
      const auto it = session->sources.find(src->second);
      if (it == session->sources.end()) return reject(http::status::not_found, "unknown source");
      input = it->second;
    }

    RenderConfig config;
    config.block_size = block;
    config.crossfade = block;
    Renderer renderer(session->preset, config, options_.limits);
    std::uint64_t seen = 0;
    {
      std::lock_guard<std::mutex> lock(session->mutex);
      renderer.reset(session->pose);
      seen = session->generation;
    }

    http::response<http::empty_body> head(http::status::ok, req.version());
    head.set(http::field::content_type, "application/octet-stream");
    head.set("X-Sample-Rate", std::to_string(static_cast<long long>(fs)));
    head.set("X-Channels", "2");
    head.set("X-Sample-Format", "f32le");
    head.set("X-Block-Size", std::to_string(block));
    head.chunked(true);
    head.keep_alive(false);
    http::response_serializer<http::empty_body> serializer(head);
    http::write_header(socket, serializer, ec);
    if (ec) return false;

    Signal out(renderer.channels(), static_cast<Eigen::Index>(block));
    std::vector<double> in(block);
    std::vector<float> pcm(2 * block);
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t b = 0; b < blocks && !stopped_; ++b) {
      {
        std::lock_guard<std::mutex> lock(session->mutex);
        if (session->generation != seen) {
          seen = session->generation;
          renderer.publish(session->pose);
        }
      }
      for (std::size_t t = 0; t < block; ++t) {
        const std::size_t i = b * block + t;
        in[t] = i < input->size() ? (*input)[i] : 0.0;
      }
      renderer.process(in, out);
      const Signal stereo = preview_decode(out);
      for (std::size_t t = 0; t < block; ++t) {
        pcm[2 * t] = static_cast<float>(stereo(0, static_cast<Eigen::Index>(t)));
        pcm[2 * t + 1] = static_cast<float>(stereo(1, static_cast<Eigen::Index>(t)));
      }
      net::write(socket, http::make_chunk(net::buffer(pcm.data(), pcm.size() * sizeof(float))), ec);
      if (ec) return false;
      if (pace) {
        std::this_thread::sleep_until(
            start + std::chrono::duration<double>(static_cast<double>((b + 1) * block) / fs));
      }
    }
    net::write(socket, http::make_chunk_last(), ec);
    return false;
  }

  // Text messages {"t", "x", "y", "z"}; one ack per valid message, an error
  // frame for anything else.
  void serve_websocket(tcp::socket socket, Request req) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    const std::vector<std::string> parts = path_parts(std::string(req.target()).substr(
        0, std::string(req.target()).find('?')));
    std::shared_ptr<Session> session;
    if (parts.size() == 3 && parts[0] == "session" && parts[2] == "pose") {
      session = find_session(parts[1]);
    }
    if (session == nullptr) {
      ws.close(websocket::close_reason(websocket::close_code::policy_error, "unknown session"), ec);
      return;
    }
    ws.text(true);
    std::uint64_t seq = 0;
    beast::flat_buffer buffer;
    for (;;) {
      buffer.clear();
      ws.read(buffer, ec);
      if (ec) return;
      Json reply;
      try {
        const Json msg = Json::parse(beast::buffers_to_string(buffer.data()));
        ListenerPose pose;
        pose.time = msg.value("t", 0.0);
        pose.position = Vec3(msg.at("x").get<double>(), msg.at("y").get<double>(),
                             msg.at("z").get<double>());
        if (!pose.position.allFinite() || !std::isfinite(pose.time)) {
          throw std::invalid_argument("non-finite pose");
        }
        const ClampResult clamp = clamp_pose(pose, session->preset->walls);
        {
          std::lock_guard<std::mutex> lock(session->mutex);
          session->pose = clamp.pose;
          ++session->generation;
        }
        reply = pose_ack(*session->preset, clamp, options_.limits, ++seq);
      } catch (const std::exception& e) {
        reply = {{"type", "error"}, {"version", kSchemaVersion}, {"message", e.what()}};
      }
      ws.write(net::buffer(reply.dump()), ec);
      if (ec) return;
    }
  }

  ServiceOptions options_;
  net::io_context io_;
  tcp::acceptor acceptor_;
  std::thread io_thread_;
  std::atomic<bool> stopped_{false};

  std::mutex connections_mutex_;
  std::set<std::shared_ptr<tcp::socket>> sockets_;
  std::vector<std::thread> threads_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 id_rng_{std::random_device{}()};
};

}  // namespace arir::service

#endif  // ARIR_TOOLS_SERVICE_CONTROL_SERVICE_HPP_
