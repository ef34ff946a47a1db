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

#ifndef ARIR_BENCH_HPP_
#define ARIR_BENCH_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "arir/convolution.hpp"
#include "arir/errors.hpp"
#include "arir/preset.hpp"
#include "arir/renderer.hpp"
#include "arir/translation.hpp"

namespace arir {

struct BenchOptions {
  double seconds = 2.0;
  std::size_t block_size = 256;
  std::uint32_t seed = 1;
};

struct BenchReport {
  double seconds = 0.0;
  std::size_t block_size = 0;
  std::size_t blocks = 0;
  double split_static_rtf = 0.0;
  double naive_dynamic_rtf = 0.0;
  double worst_block_ratio = 0.0;  // slowest split-static block / block duration
};

// Pose path shared by both methods: a slow circle of 0.5 m radius in the
// horizontal plane, kept inside the walls.
inline std::vector<ListenerPose> bench_poses(const AnalysisPreset& preset,
                                             std::size_t blocks,
                                             std::size_t block_size) {
  std::vector<ListenerPose> poses(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const double t = static_cast<double>(b * block_size) / preset.sample_rate;
    ListenerPose pose{Vec3(0.5 * std::cos(t), 0.5 * std::sin(t), 0.0), t};
    poses[b] = clamp_pose(pose, preset.walls).pose;
  }
  return poses;
}

// Real-time factors of the split static-convolution renderer and of a naive
// renderer that reassembles the translated ARIR for every pose and convolves
// the input with all of it.
inline BenchReport run_bench(std::shared_ptr<const AnalysisPreset> preset,
                             const BenchOptions& options) {
  if (!(options.seconds > 0.0)) {
    throw ConfigError("benchmark duration must be positive (empty report)");
  }
  RenderConfig config;
  config.block_size = options.block_size;
  config.crossfade = options.block_size;
  config.validate();

  const std::size_t block = options.block_size;
  const auto blocks = static_cast<std::size_t>(
      std::ceil(options.seconds * preset->sample_rate / static_cast<double>(block)));
  std::mt19937 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> input(blocks * block);
  for (double& v : input) v = noise(rng);
  const std::vector<ListenerPose> poses = bench_poses(*preset, blocks, block);

  using Clock = std::chrono::steady_clock;
  const double audio_seconds = static_cast<double>(blocks * block) / preset->sample_rate;
  const double block_seconds = static_cast<double>(block) / preset->sample_rate;
  BenchReport report;
  report.seconds = audio_seconds;
  report.block_size = block;
  report.blocks = blocks;

  {
    Renderer renderer(preset, config);
    renderer.reset(poses.front());
    Signal out(renderer.channels(), static_cast<Eigen::Index>(block));
    double total = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
      const auto start = Clock::now();
      renderer.publish(poses[b]);
      out.setZero();
      renderer.process(std::span<const double>(input.data() + b * block, block), out);
      const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
      total += elapsed;
      report.worst_block_ratio = std::max(report.worst_block_ratio, elapsed / block_seconds);
    }
    report.split_static_rtf = total / audio_seconds;
  }

  {
    const TranslationLimits limits;
    Signal arir = translated_arir(*preset, translation_params(*preset, poses.front(), limits), false);
    std::vector<std::vector<double>> filters(static_cast<std::size_t>(arir.rows()),
                                             std::vector<double>(static_cast<std::size_t>(arir.cols())));
    PartitionedConvolver conv(block, filters);
    Signal out(arir.rows(), static_cast<Eigen::Index>(block));
    const auto start = Clock::now();
    for (std::size_t b = 0; b < blocks; ++b) {
      arir = translated_arir(*preset, translation_params(*preset, poses[b], limits), false);
      for (Eigen::Index c = 0; c < arir.rows(); ++c) {
        conv.load_filter(static_cast<std::size_t>(c), row_span(arir, c));
      }
      conv.process(std::span<const double>(input.data() + b * block, block), out.data(), block);
    }
    report.naive_dynamic_rtf =
        std::chrono::duration<double>(Clock::now() - start).count() / audio_seconds;
  }
  return report;
}

}  // namespace arir

#endif  // ARIR_BENCH_HPP_
