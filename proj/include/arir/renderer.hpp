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

#ifndef ARIR_RENDERER_HPP_
#define ARIR_RENDERER_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "arir/ambisonics.hpp"
#include "arir/convolution.hpp"
#include "arir/dsp.hpp"
#include "arir/errors.hpp"
#include "arir/preset.hpp"
#include "arir/snapshot.hpp"
#include "arir/translation.hpp"

namespace arir {

struct RenderConfig {
  std::size_t block_size = 256;
  std::size_t crossfade = 256;
  double max_delay_s = 1.0;
  // Largest delay change per block, samples.
  double max_delay_slew = 8.0;

  void validate() const {
    const bool pow2 = block_size != 0 && (block_size & (block_size - 1)) == 0;
    if (!pow2 || block_size < 64 || block_size > 4096) {
      throw ConfigError("block size must be a power of two in [64, 4096]");
    }
    if (crossfade == 0 || crossfade > block_size) {
      throw ConfigError("crossfade must be in [1, block size]");
    }
    if (!(max_delay_s > 0.0) || !(max_delay_slew > 0.0)) {
      throw ConfigError("delay limits must be positive");
    }
  }
};

struct EventRenderParams {
  Eigen::MatrixXd encoder;  // (N+1)^2 x 4, gain and rotation included
  double delay = 0.0;       // samples, relative to the residual path
};

// Immutable once published.
struct PoseSnapshot {
  std::uint64_t generation = 0;
  ListenerPose pose;
  double direct_shift = 0.0;
  std::vector<EventRenderParams> events;
  int clamped_delays = 0;
};

// Static convolution of the input with every event's four directional
// signals. Output rows 4n .. 4n+3 belong to event n.
class EventConvolver {
 public:
  EventConvolver(const std::vector<SoundEvent>& events, std::size_t block_size)
      : convolver_(block_size, filters(events)) {}

  std::size_t channels() const { return convolver_.channels(); }

  void process(std::span<const double> in, Signal& out) {
    convolver_.process(in, out.data(), static_cast<std::size_t>(out.cols()));
  }

  void reset() { convolver_.reset(); }

 private:
  static std::vector<std::vector<double>> filters(
      const std::vector<SoundEvent>& events) {
    std::vector<std::vector<double>> f;
    for (const SoundEvent& e : events) {
      for (int c = 0; c < 4; ++c) {
        const auto row = row_span(e.directional, c);
        f.emplace_back(row.begin(), row.end());
      }
    }
    return f;
  }

  PartitionedConvolver convolver_;
};

// Static convolution with the upmixed residual, one output per channel.
class ResidualConvolver {
 public:
  ResidualConvolver(const Signal& residual, std::size_t block_size)
      : convolver_(block_size, filters(residual)) {}

  void process(std::span<const double> in, Signal& out) {
    convolver_.process(in, out.data(), static_cast<std::size_t>(out.cols()));
  }

  void reset() { convolver_.reset(); }

 private:
  static std::vector<std::vector<double>> filters(const Signal& residual) {
    std::vector<std::vector<double>> f;
    for (Eigen::Index c = 0; c < residual.rows(); ++c) {
      const auto row = row_span(residual, c);
      f.emplace_back(row.begin(), row.end());
    }
    return f;
  }

  PartitionedConvolver convolver_;
};

// Streaming 6DoF renderer. A control context calls publish(); one audio
// context calls process() once per block.
class Renderer {
 public:
  Renderer(std::shared_ptr<const AnalysisPreset> preset, RenderConfig config = {},
           TranslationLimits limits = {})
      : preset_(std::move(preset)),
        config_((config.validate(), config)),
        limits_((limits.validate(), limits)),
        events_(preset_->events, config_.block_size),
        residual_(preset_->residual, config_.block_size),
        exchange_(snapshot_for(ListenerPose{})) {
    const std::size_t block = config_.block_size;
    const std::size_t n_events = preset_->events.size();
    max_delay_ = std::floor(config_.max_delay_s * preset_->sample_rate);
    ring_size_ = 1;
    while (ring_size_ < static_cast<std::size_t>(max_delay_) + block + 8) ring_size_ <<= 1;
    rings_.assign(n_events * 4 * ring_size_, 0.0);
    event_block_ = Signal::Zero(static_cast<Eigen::Index>(4 * n_events),
                                static_cast<Eigen::Index>(block));
    taps_old_ = Signal::Zero(4, static_cast<Eigen::Index>(block));
    taps_new_ = Signal::Zero(4, static_cast<Eigen::Index>(block));
    pending_.assign(n_events, false);
    current_ = exchange_.front().events;
  }

  Renderer(const AnalysisPreset& preset, RenderConfig config = {},
           TranslationLimits limits = {})
      : Renderer(std::make_shared<const AnalysisPreset>(preset), config, limits) {}

  const AnalysisPreset& preset() const { return *preset_; }
  const RenderConfig& config() const { return config_; }
  int channels() const { return sh_channels(preset_->order); }
  std::uint64_t generation() const { return applied_generation_.load(); }
  std::uint64_t clamped_delays() const { return clamped_delays_.load(); }

  // Control context: parameters for |pose| (pose is used as given; clamp to
  // the walls beforehand if desired).
  PoseSnapshot snapshot_for(const ListenerPose& pose) const {
    const TranslationParams params = translation_params(*preset_, pose, limits_);
    PoseSnapshot snap;
    snap.pose = pose;
    snap.direct_shift = params.direct_shift;
    snap.events.resize(params.events.size());
    for (std::size_t n = 0; n < params.events.size(); ++n) {
      const SoundEvent& e = preset_->events[n];
      EventRenderParams& ep = snap.events[n];
      ep.encoder = translated_encoder(e, params.events[n], preset_->order);
      ep.delay = segment_onset_samples(e, params.events[n], params.direct_shift,
                                       preset_->sample_rate);
      const double bounded = std::clamp(ep.delay, 0.0, max_delay_bound());
      if (bounded != ep.delay) {
        ++snap.clamped_delays;
        ep.delay = bounded;
      }
    }
    return snap;
  }

  // Control context, single writer.
  void publish(const ListenerPose& pose) {
    PoseSnapshot& slot = exchange_.back();
    slot = snapshot_for(pose);
    slot.generation = ++published_generation_;
    clamped_delays_ += static_cast<std::uint64_t>(slot.clamped_delays);
    exchange_.publish();
  }

  // Clears all signal state and applies |pose| without transition. Not to be
  // called concurrently with process().
  void reset(const ListenerPose& pose) {
    events_.reset();
    residual_.reset();
    std::fill(rings_.begin(), rings_.end(), 0.0);
    written_ = 0;
    exchange_.acquire();
    const PoseSnapshot snap = snapshot_for(pose);
    current_ = snap.events;
    targets_ = nullptr;
    std::fill(pending_.begin(), pending_.end(), false);
  }

  // Audio context. |in| holds one block; |out| must be channels x block.
  void process(std::span<const double> in, Signal& out) {
    const auto block = static_cast<Eigen::Index>(config_.block_size);
    if (in.size() != config_.block_size || out.cols() != block ||
        out.rows() != channels()) {
      throw ConfigError("process() expects exactly one block");
    }
    if (exchange_.acquire()) {
      targets_ = &exchange_.front();
      applied_generation_.store(targets_->generation);
      std::fill(pending_.begin(), pending_.end(), true);
    }

    residual_.process(in, out);
    if (preset_->events.empty()) return;
    events_.process(in, event_block_);
    const std::size_t mask = ring_size_ - 1;
    for (std::size_t n = 0; n < current_.size(); ++n) {
      for (std::size_t c = 0; c < 4; ++c) {
        double* ring = ring_(n, c);
        const double* src = event_block_.row(static_cast<Eigen::Index>(4 * n + c)).data();
        for (Eigen::Index t = 0; t < block; ++t) {
          ring[(written_ + static_cast<std::size_t>(t)) & mask] = src[t];
        }
      }
    }

    for (std::size_t n = 0; n < current_.size(); ++n) {
      EventRenderParams& cur = current_[n];
      if (!pending_[n] || targets_ == nullptr) {
        read_delayed(n, cur.delay, taps_old_);
        mix(cur.encoder, taps_old_, out, nullptr, nullptr);
        continue;
      }
      const EventRenderParams& target = targets_->events[n];
      const double step = std::clamp(target.delay - cur.delay,
                                     -config_.max_delay_slew,
                                     config_.max_delay_slew);
      const double next_delay = cur.delay + step;
      read_delayed(n, cur.delay, taps_old_);
      read_delayed(n, next_delay, taps_new_);
      mix(cur.encoder, taps_old_, out, &target.encoder, &taps_new_);
      cur.encoder = target.encoder;
      cur.delay = next_delay;
      pending_[n] = cur.delay != target.delay;
    }
    written_ += config_.block_size;
  }

 private:
  double max_delay_bound() const {
    return std::floor(config_.max_delay_s * preset_->sample_rate);
  }

  double* ring_(std::size_t event, std::size_t channel) {
    return rings_.data() + (event * 4 + channel) * ring_size_;
  }

  // Fractionally delayed block of event |n|'s four convolved channels.
  void read_delayed(std::size_t n, double delay, Signal& dst) {
    const dsp::FractionalDelay fd = dsp::lagrange3(delay);
    const std::size_t mask = ring_size_ - 1;
    const auto block = static_cast<std::ptrdiff_t>(config_.block_size);
    for (std::size_t c = 0; c < 4; ++c) {
      const double* ring = ring_(n, c);
      double* row = dst.row(static_cast<Eigen::Index>(c)).data();
      for (std::ptrdiff_t t = 0; t < block; ++t) {
        double acc = 0.0;
        for (std::ptrdiff_t k = 0; k < 4; ++k) {
          const auto abs = static_cast<std::ptrdiff_t>(written_) + t - fd.base - k;
          if (abs < 0) continue;
          acc += fd.taps[static_cast<std::size_t>(k)] *
                 ring[static_cast<std::size_t>(abs) & mask];
        }
        row[t] = acc;
      }
    }
  }

  // out += enc * src, or a linear crossfade from (enc, src) to
  // (*next_enc, *next_src) over the configured crossfade length.
  void mix(const Eigen::MatrixXd& enc, const Signal& src, Signal& out,
           const Eigen::MatrixXd* next_enc, const Signal* next_src) {
    const Eigen::Index block = out.cols();
    const auto fade = static_cast<double>(config_.crossfade);
    for (Eigen::Index ch = 0; ch < out.rows(); ++ch) {
      double* dst = out.row(ch).data();
      const double e0 = enc(ch, 0), e1 = enc(ch, 1), e2 = enc(ch, 2), e3 = enc(ch, 3);
      const double* s0 = src.row(0).data();
      const double* s1 = src.row(1).data();
      const double* s2 = src.row(2).data();
      const double* s3 = src.row(3).data();
      if (next_enc == nullptr) {
        for (Eigen::Index t = 0; t < block; ++t) {
          dst[t] += e0 * s0[t] + e1 * s1[t] + e2 * s2[t] + e3 * s3[t];
        }
        continue;
      }
      const Eigen::MatrixXd& ne = *next_enc;
      const double f0 = ne(ch, 0), f1 = ne(ch, 1), f2 = ne(ch, 2), f3 = ne(ch, 3);
      const double* n0 = next_src->row(0).data();
      const double* n1 = next_src->row(1).data();
      const double* n2 = next_src->row(2).data();
      const double* n3 = next_src->row(3).data();
      for (Eigen::Index t = 0; t < block; ++t) {
        const double a = std::min(1.0, static_cast<double>(t + 1) / fade);
        const double old_v = e0 * s0[t] + e1 * s1[t] + e2 * s2[t] + e3 * s3[t];
        const double new_v = f0 * n0[t] + f1 * n1[t] + f2 * n2[t] + f3 * n3[t];
        dst[t] += (1.0 - a) * old_v + a * new_v;
      }
    }
  }

  std::shared_ptr<const AnalysisPreset> preset_;
  RenderConfig config_;
  TranslationLimits limits_;
  EventConvolver events_;
  ResidualConvolver residual_;
  SnapshotExchange<PoseSnapshot> exchange_;
  std::uint64_t published_generation_ = 0;
  std::atomic<std::uint64_t> applied_generation_{0};
  std::atomic<std::uint64_t> clamped_delays_{0};

  double max_delay_ = 0.0;
  std::size_t ring_size_ = 1;
  std::vector<double> rings_;
  std::size_t written_ = 0;
  Signal event_block_;
  Signal taps_old_;
  Signal taps_new_;
  std::vector<EventRenderParams> current_;
  const PoseSnapshot* targets_ = nullptr;
  std::vector<bool> pending_;
};

// Cardioid pair at +-90 degrees from W and Y, for auditioning only.
inline Signal preview_decode(const Signal& hoa) {
  if (hoa.rows() < 4) throw ConfigError("preview decode needs first order");
  const double w_gain = std::sqrt(4.0 * kPi);
  const double y_gain = std::sqrt(4.0 * kPi / 3.0);
  Signal stereo(2, hoa.cols());
  for (Eigen::Index t = 0; t < hoa.cols(); ++t) {
    const double w = w_gain * hoa(0, t);
    const double y = y_gain * hoa(1, t);
    stereo(0, t) = 0.5 * (w + y);
    stereo(1, t) = 0.5 * (w - y);
  }
  return stereo;
}

}  // namespace arir

#endif  // ARIR_RENDERER_HPP_
