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

// Command-line entry points: analyze, render, walls, bench, serve.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "arir/bench.hpp"
#include "arir/io.hpp"
#include "arir/preset.hpp"
#include "arir/renderer.hpp"
#include "json.hpp"
#include "service/control_service.hpp"

namespace arir::cli {
namespace {

// ARIR_LOG_LEVEL: "quiet" suppresses summaries, "debug" adds diagnostics.
enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("ARIR_LOG_LEVEL");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet" || v == "error") return LogLevel::kQuiet;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

struct AnalyzeArgs {
  std::string input;
  std::string output;
  int events = 10;
  int order = 3;
  double min_peak_dist_ms = 1.0;
  double max_seg_ms = 5.0;
  double speed_of_sound = 343.0;
  bool no_envelope_correction = false;
  std::string normalization;
};

struct RenderArgs {
  std::string preset;
  std::string dry;
  std::string trajectory;
  std::string output;
  std::size_t block = 256;
  bool no_walls = false;
  double max_gain = 4.0;
  std::string pose_log;
};

struct WallsArgs {
  std::string preset;
  bool json = false;
};

struct BenchArgs {
  std::string preset;
  double seconds = 2.0;
  std::size_t block = 256;
};

struct ServeArgs {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  std::size_t block = 256;
};

std::string format(const char* fmt, double a, double b = 0, double c = 0, double d = 0,
                   double e = 0, double f = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d, e, f);
  return buf;
}

int run_analyze(const AnalyzeArgs& args) {
  ArirReadOptions read_options;
  if (args.normalization == "n3d") read_options.assume = Normalization::kN3D;
  if (args.normalization == "sn3d") read_options.assume = Normalization::kSN3D;
  const Arir arir = read_arir(args.input, read_options);

  AnalysisOptions options;
  options.order = args.order;
  options.detection.max_events = args.events;
  options.detection.min_peak_distance_s = 1e-3 * args.min_peak_dist_ms;
  options.detection.max_flat_s = 1e-3 * args.max_seg_ms;
  options.detection.speed_of_sound = args.speed_of_sound;
  options.envelope_correction = !args.no_envelope_correction;
  const AnalysisPreset preset = analyze(arir, options);
  save_preset(preset, args.output);

  if (log_level() == LogLevel::kQuiet) return 0;
  std::cout << "events: " << preset.events.size() << ", order " << preset.order << ", "
            << preset.sample_rate << " Hz, envelope correction "
            << (preset.envelope_corrected ? "on" : "off") << "\n";
  std::cout << "  n   toa_ms   azi_deg   zen_deg   dist_m    r0      r1      r2      r3\n";
  for (const SoundEvent& e : preset.events) {
    std::cout << format("%3.0f %8.3f %9.2f %9.2f %8.3f", e.index, 1e3 * e.toa,
                        e.doa.azimuth() * 180.0 / kPi, e.doa.zenith() * 180.0 / kPi,
                        e.position.norm())
              << format(" %7.4f %7.4f %7.4f %7.4f", e.exclusion(0), e.exclusion(1),
                        e.exclusion(2), e.exclusion(3))
              << "\n";
  }
  std::cout << "walls: " << preset.walls.walls.size() << "\n";
  if (log_level() == LogLevel::kDebug && preset.envelope_corrected) {
    std::cout << "largest band correction: " << preset.correction_db.cwiseAbs().maxCoeff()
              << " dB\n";
  }
  return 0;
}

// One pose per block at the block start time; the output covers the full
// convolution length of the dry signal with the preset.
int run_render(const RenderArgs& args) {
  auto preset = std::make_shared<const AnalysisPreset>(load_preset(args.preset));
  double dry_rate = 0.0;
  const std::vector<double> dry = read_mono(args.dry, &dry_rate);
  if (dry_rate != preset->sample_rate) {
    throw RateMismatchError("dry signal at " + std::to_string(dry_rate) + " Hz, preset at " +
                            std::to_string(preset->sample_rate) + " Hz");
  }
  const Trajectory trajectory = read_trajectory(args.trajectory);

  RenderConfig config;
  config.block_size = args.block;
  config.crossfade = args.block;
  TranslationLimits limits;
  limits.max_gain = args.max_gain;
  Renderer renderer(preset, config, limits);

  const std::size_t block = args.block;
  const std::size_t length = dry.size() + static_cast<std::size_t>(preset->length()) - 1;
  const std::size_t blocks = (length + block - 1) / block;
  Signal output(renderer.channels(), static_cast<Eigen::Index>(blocks * block));
  Signal out(renderer.channels(), static_cast<Eigen::Index>(block));
  std::vector<double> in(block);
  std::size_t clamped = 0;
  Trajectory applied;
  for (std::size_t b = 0; b < blocks; ++b) {
    ListenerPose pose{trajectory.at(static_cast<double>(b * block) / preset->sample_rate),
                      static_cast<double>(b * block) / preset->sample_rate};
    if (!args.no_walls) {
      const ClampResult c = clamp_pose(pose, preset->walls);
      clamped += c.clamped ? 1 : 0;
      pose = c.pose;
    }
    applied.times.push_back(pose.time);
    applied.positions.push_back(pose.position);
    if (b == 0) {
      renderer.reset(pose);
    } else {
      renderer.publish(pose);
    }
    for (std::size_t t = 0; t < block; ++t) {
      const std::size_t i = b * block + t;
      in[t] = i < dry.size() ? dry[i] : 0.0;
    }
    renderer.process(in, out);
    output.middleCols(static_cast<Eigen::Index>(b * block), static_cast<Eigen::Index>(block)) = out;
  }
  write_hoa(args.output, output.leftCols(static_cast<Eigen::Index>(length)), preset->sample_rate);
  if (!args.pose_log.empty()) write_trajectory(args.pose_log, applied);
  if (log_level() != LogLevel::kQuiet) {
    std::cout << "rendered " << length << " samples in " << blocks << " blocks, " << clamped
              << " clamped poses, " << renderer.clamped_delays() << " clamped delays\n";
  }
  return 0;
}

int run_walls(const WallsArgs& args) {
  const AnalysisPreset preset = load_preset(args.preset);
  if (args.json) {
    std::cout << service::preset_summary(preset)["walls"].dump(2) << "\n";
    return 0;
  }
  if (preset.walls.walls.empty()) {
    std::cout << "no walls: movement is unrestricted\n";
    return 0;
  }
  std::cout << " event   point_x  point_y  point_z   normal_x normal_y normal_z  dist_m\n";
  for (const Wall& w : preset.walls.walls) {
    // Distance from the recording position to the wall plane.
    const double dist = w.condition(Vec3::Zero()) / w.normal.norm();
    std::cout << format("%6.0f  %8.3f %8.3f %8.3f", w.event_index, w.anchor.x(), w.anchor.y(),
                        w.anchor.z())
              << format("   %8.3f %8.3f %8.3f  %6.3f", w.normal.x(), w.normal.y(),
                        w.normal.z(), dist)
              << "\n";
  }
  return 0;
}

int run_bench_command(const BenchArgs& args) {
  auto preset = std::make_shared<const AnalysisPreset>(load_preset(args.preset));
  BenchOptions options;
  options.seconds = args.seconds;
  options.block_size = args.block;
  const BenchReport r = run_bench(preset, options);
  std::cout << "audio: " << r.seconds << " s in " << r.blocks << " blocks of " << r.block_size
            << "\n";
  std::cout << "split_static_rtf " << r.split_static_rtf << "\n";
  std::cout << "naive_dynamic_rtf " << r.naive_dynamic_rtf << "\n";
  std::cout << "speedup " << r.naive_dynamic_rtf / r.split_static_rtf << "\n";
  std::cout << "worst_block_ratio " << r.worst_block_ratio << "\n";
  return 0;
}

int run_serve(const ServeArgs& args) {
  service::ServiceOptions options;
  options.address = args.address;
  options.port = args.port;
  options.block_size = args.block;
  service::ControlService server(options);
  std::cout << "listening on http://" << args.address << ":" << server.port() << std::endl;
  server.run();
  return 0;
}

}  // namespace
}  // namespace arir::cli

int main(int argc, char** argv) {
  using namespace arir::cli;
  CLI::App app{"Ambisonic room impulse response analysis and 6DoF rendering"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  CLI::App* a = app.add_subcommand("analyze", "Analyze an ARIR into a preset");
  a->add_option("arir", analyze.input, "First-order ARIR, float32 WAV")->required();
  a->add_option("-o,--output", analyze.output, "Preset file to write")->required();
  a->add_option("--events", analyze.events, "Maximum number of sound events P")
      ->check(CLI::PositiveNumber);
  a->add_option("--order", analyze.order, "Output Ambisonic order N")->check(CLI::Range(1, 7));
  a->add_option("--min-peak-dist", analyze.min_peak_dist_ms, "Minimum peak distance, ms");
  a->add_option("--max-seg-ms", analyze.max_seg_ms, "Maximum flat segment length, ms");
  a->add_option("--speed-of-sound", analyze.speed_of_sound, "m/s");
  a->add_flag("--no-envelope-correction", analyze.no_envelope_correction,
              "Skip the residual envelope correction");
  a->add_option("--normalization", analyze.normalization,
                "Normalization of untagged files (default sn3d)")
      ->check(CLI::IsMember({"sn3d", "n3d"}));

  RenderArgs render;
  CLI::App* r = app.add_subcommand("render", "Render dry audio along a trajectory");
  r->add_option("preset", render.preset)->required();
  r->add_option("dry", render.dry, "Mono dry WAV")->required();
  r->add_option("trajectory", render.trajectory, "CSV time_s,x_m,y_m,z_m")->required();
  r->add_option("-o,--output", render.output, "HOA WAV to write")->required();
  r->add_option("--block", render.block, "Block size");
  r->add_flag("--no-walls", render.no_walls, "Do not clamp poses to the walls");
  r->add_option("--max-gain", render.max_gain, "Largest distance gain");
  r->add_option("--pose-log", render.pose_log, "CSV of the pose applied to each block");

  WallsArgs walls;
  CLI::App* w = app.add_subcommand("walls", "Print the movement limits of a preset");
  w->add_option("preset", walls.preset)->required();
  w->add_flag("--json", walls.json, "Print as JSON");

  BenchArgs bench;
  CLI::App* b = app.add_subcommand("bench", "Compare split-static and naive rendering cost");
  b->add_option("preset", bench.preset)->required();
  b->add_option("--seconds", bench.seconds, "Audio duration to render");
  b->add_option("--block", bench.block, "Block size");

  ServeArgs serve;
  CLI::App* s = app.add_subcommand("serve", "Start the control service");
  s->add_option("--address", serve.address, "Listen address");
  s->add_option("--port", serve.port, "Listen port, 0 for any");
  s->add_option("--block", serve.block, "Preview block size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (a->parsed()) return run_analyze(analyze);
    if (r->parsed()) return run_render(render);
    if (w->parsed()) return run_walls(walls);
    if (b->parsed()) return run_bench_command(bench);
    if (s->parsed()) return run_serve(serve);
  } catch (const arir::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
