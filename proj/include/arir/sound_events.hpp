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

#ifndef ARIR_SOUND_EVENTS_HPP_
#define ARIR_SOUND_EVENTS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "arir/ambisonics.hpp"
#include "arir/analysis.hpp"
#include "arir/dsp.hpp"
#include "arir/errors.hpp"

namespace arir {

struct DetectionParams {
  int max_events = 10;
  double search_window_s = 100e-3;
  double min_peak_distance_s = 1e-3;
  // Decay threshold behind every accepted peak a at time tau:
  // a * 10^(offset/20) * exp(-(t - tau) / decay_time).
  double decay_offset_db = -3.0;
  double decay_time_s = 2e-3;
  double speed_of_sound = 343.0;
  double taper_s = 0.5e-3;
  double max_flat_s = 5e-3;
  double direct_min_flat_s = 1e-3;
  double relevant_peak_db = -12.0;
  double median_window_s = 10e-3;
  // Removes the whole direct-sound segment instead of its directional part.
  bool cut_direct_sound = false;

  void validate() const {
    if (max_events < 1) throw ConfigError("at least one event is required");
    if (!(min_peak_distance_s > 0.0)) {
      throw ConfigError("minimum peak distance must be positive");
    }
    if (!(speed_of_sound > 0.0)) throw ConfigError("speed of sound must be positive");
    if (!(search_window_s > 0.0) || !(decay_time_s > 0.0) ||
        !(taper_s > 0.0) || !(max_flat_s > 0.0) || direct_min_flat_s < 0.0 ||
        direct_min_flat_s > max_flat_s || !(median_window_s > 0.0)) {
      throw ConfigError("invalid segmentation timing parameters");
    }
  }
};

struct DetectedPeak {
  std::ptrdiff_t sample = 0;
  double toa = 0.0;
  double amplitude = 0.0;
  Direction doa;
};

// Segment window in absolute samples (all bounds inclusive). Raised-cosine
// slopes of |taper| samples run from start to flat_begin and from flat_end to
// end; start/end may be clipped to the signal.
struct SegmentWindow {
  std::ptrdiff_t start = 0;
  std::ptrdiff_t flat_begin = 0;
  std::ptrdiff_t flat_end = 0;
  std::ptrdiff_t end = 0;
  std::ptrdiff_t taper = 0;

  std::ptrdiff_t length() const { return end - start + 1; }

  double weight(std::ptrdiff_t t) const {
    if (t < start || t > end) return 0.0;
    if (t >= flat_begin && t <= flat_end) return 1.0;
    if (t < flat_begin) {
      const double k = static_cast<double>(t - (flat_begin - taper));
      return 0.5 * (1.0 - std::cos(kPi * k / static_cast<double>(taper)));
    }
    const double k = static_cast<double>(t - flat_end);
    return 0.5 * (1.0 + std::cos(kPi * k / static_cast<double>(taper)));
  }
};

inline SegmentWindow make_window(std::ptrdiff_t flat_begin,
                                 std::ptrdiff_t flat_end, std::ptrdiff_t taper,
                                 std::ptrdiff_t signal_length) {
  SegmentWindow w;
  w.flat_begin = flat_begin;
  w.flat_end = std::max(flat_begin, flat_end);
  w.taper = std::max<std::ptrdiff_t>(taper, 1);
  w.start = std::max<std::ptrdiff_t>(0, w.flat_begin - w.taper);
  w.end = std::min<std::ptrdiff_t>(signal_length - 1, w.flat_end + w.taper);
  return w;
}

struct SoundEvent {
  int index = 1;  // 1 is the direct sound
  double toa = 0.0;
  std::ptrdiff_t toa_sample = 0;
  double amplitude = 0.0;
  Direction doa;
  Vec3 position = Vec3::Zero();
  SteeringSet steering;
  Eigen::Vector4d exclusion = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
  double exclusion_ratio = std::numeric_limits<double>::infinity();
  SegmentWindow window;
  // 4 x window.length(); column 0 is absolute sample window.start.
  Signal directional;
};

// Picks the direct sound and up to max_events - 1 later peaks of the
// short-time amplitude, strongest first, subject to the minimum peak distance
// and the decay thresholds of already accepted peaks. Sorted by TOA.
inline std::vector<DetectedPeak> detect_events(const AmplitudeEnvelope& env,
                                               const DoaTrack& doa,
                                               const DetectionParams& p,
                                               double sample_rate) {
  p.validate();
  if (env.size() == 0 || doa.size() != env.size()) {
    throw ConfigError("envelope and DOA track must be non-empty and aligned");
  }
  const auto n = static_cast<std::ptrdiff_t>(env.size());
  std::ptrdiff_t direct = 0;
  for (std::ptrdiff_t t = 1; t < n; ++t) {
    if (env.values[t] > env.values[direct]) direct = t;
  }
  if (!(env.values[direct] > 0.0)) {
    throw NoDirectSoundError("no direct sound: the ARIR envelope is all zero");
  }

  struct Candidate {
    std::ptrdiff_t sample;
    double amplitude;
  };
  const auto window_end = std::min<std::ptrdiff_t>(
      n - 1, direct + std::llround(p.search_window_s * sample_rate));
  std::vector<Candidate> candidates;
  for (std::ptrdiff_t t = direct + 1; t <= window_end; ++t) {
    const double v = env.values[t];
    const double prev = env.values[t - 1];
    const double next = t + 1 < n ? env.values[t + 1] : 0.0;
    if (v > prev && v >= next && v > 0.0) candidates.push_back({t, v});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.amplitude > b.amplitude;
                   });

  const double min_distance = p.min_peak_distance_s * sample_rate;
  const double offset = std::pow(10.0, p.decay_offset_db / 20.0);
  const double decay_samples = p.decay_time_s * sample_rate;
  std::vector<Candidate> accepted{{direct, env.values[direct]}};
  for (const Candidate& c : candidates) {
    if (static_cast<int>(accepted.size()) >= p.max_events) break;
    bool ok = true;
    for (const Candidate& a : accepted) {
      const auto gap = static_cast<double>(c.sample - a.sample);
      if (std::abs(gap) < min_distance) {
        ok = false;
        break;
      }
      if (gap > 0.0 &&
          c.amplitude <= a.amplitude * offset * std::exp(-gap / decay_samples)) {
        ok = false;
        break;
      }
    }
    if (ok) accepted.push_back(c);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Candidate& a, const Candidate& b) { return a.sample < b.sample; });

  std::vector<DetectedPeak> peaks;
  for (const Candidate& c : accepted) {
    peaks.push_back({c.sample, static_cast<double>(c.sample) / sample_rate,
                     c.amplitude, doa[static_cast<std::size_t>(c.sample)]});
  }
  return peaks;
}

// Event position for a recording perspective at the origin.
inline Vec3 localize_event(double toa, const Direction& doa,
                           double speed_of_sound) {
  return speed_of_sound * toa * doa.vec();
}

// Windowed first-order segment, 4 x window.length().
inline Signal extract_segment(const Signal& first_order,
                              const SegmentWindow& window) {
  Signal seg(4, window.length());
  for (std::ptrdiff_t k = 0; k < window.length(); ++k) {
    const std::ptrdiff_t t = window.start + k;
    seg.col(k) = window.weight(t) * first_order.block(0, t, 4, 1);
  }
  return seg;
}

inline Eigen::Vector4d exclusion_vector(double ratio) {
  const double keep = std::max(1.0 - ratio, 0.0);
  return {1.0, keep, keep, keep};
}

struct ExclusionResult {
  double ratio = std::numeric_limits<double>::infinity();
  Eigen::Vector4d exclusion = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
};

// Compares the median short-time amplitude around the event with the
// short-time amplitude of the single-beam residual segment at the peak.
// |segment| is the windowed segment, |peak_offset| the peak's column in it.
inline ExclusionResult exclusion_factor(const AmplitudeEnvelope& full_envelope,
                                        std::ptrdiff_t toa_sample,
                                        const Signal& segment,
                                        std::ptrdiff_t peak_offset,
                                        const Direction& doa,
                                        double sample_rate,
                                        const DetectionParams& p,
                                        const AnalysisFilters& f = {}) {
  const Eigen::Vector4d beam = real_sh(1, doa);
  const Eigen::RowVectorXd single = kPi * beam.transpose() * segment;
  const Signal candidate = segment - beam * single;
  const AmplitudeEnvelope residual_env =
      short_time_amplitude(candidate, sample_rate, f);
  const double numerator = dsp::local_median(
      full_envelope.values, toa_sample,
      std::llround(0.5 * p.median_window_s * sample_rate));
  const double denominator =
      residual_env.values[static_cast<std::size_t>(peak_offset)];

  ExclusionResult out;
  if (!(denominator > 0.0)) return out;  // nothing left to exclude
  out.ratio = numerator / denominator;
  out.exclusion = exclusion_vector(out.ratio);
  return out;
}

// pi * diag(r) * Y1(steering)^T * segment.
inline Signal directional_signals(const Signal& segment,
                                  const SteeringSet& steering,
                                  const Eigen::Vector4d& exclusion) {
  const Eigen::Matrix4d y1 = sh_reencode_matrix(steering, 1);
  const Eigen::Matrix4d beams = kPi * exclusion.asDiagonal() * y1.transpose();
  return beams * segment;
}

// First-order reconstruction Y1(steering) * s_d of one event.
inline Signal first_order_reconstruction(const SoundEvent& e) {
  return sh_reencode_matrix(e.steering, 1) * e.directional;
}

// h - sum of the events' first-order reconstructions placed at their windows.
inline Signal residual_first_order(const Signal& first_order,
                                   const std::vector<SoundEvent>& events) {
  Signal residual = first_order.topRows(4);
  for (const SoundEvent& e : events) {
    residual.block(0, e.window.start, 4, e.window.length()) -=
        first_order_reconstruction(e);
  }
  return residual;
}

namespace detail {

// Flat-region end for the event at |toa|: limited by the next detected event,
// by the next strong peak of the look-direction beam, and by max_flat_s.
inline std::ptrdiff_t flat_end_for(const Signal& first_order,
                                   std::ptrdiff_t toa, const Direction& doa,
                                   std::ptrdiff_t next_toa, bool is_direct,
                                   const DetectionParams& p,
                                   double sample_rate) {
  const std::ptrdiff_t n = first_order.cols();
  const std::ptrdiff_t taper = std::max<std::ptrdiff_t>(
      1, std::llround(p.taper_s * sample_rate));
  const std::ptrdiff_t max_flat = std::llround(p.max_flat_s * sample_rate);
  const std::ptrdiff_t min_flat =
      is_direct ? std::llround(p.direct_min_flat_s * sample_rate) : 0;

  std::ptrdiff_t limit = toa + max_flat;
  if (next_toa >= 0) limit = std::min(limit, next_toa - 2 * taper);

  const Eigen::RowVector4d beam = kPi * real_sh(1, doa).transpose();
  auto beam_at = [&](std::ptrdiff_t t) {
    if (t < 0 || t >= n) return 0.0;
    return std::abs(beam.dot(first_order.block(0, t, 4, 1).col(0)));
  };
  double peak = 0.0;
  for (std::ptrdiff_t t = toa - taper; t <= toa + taper; ++t) {
    peak = std::max(peak, beam_at(t));
  }
  const double threshold = peak * std::pow(10.0, p.relevant_peak_db / 20.0);
  const std::ptrdiff_t search_end = std::min(limit + 2 * taper, n - 2);
  for (std::ptrdiff_t t = toa + 2 * taper + 1; t <= search_end; ++t) {
    const double v = beam_at(t);
    if (v >= threshold && v > beam_at(t - 1) && v >= beam_at(t + 1)) {
      limit = std::min(limit, t - 2 * taper);
      break;
    }
  }
  return std::max(limit, toa + min_flat);
}

}  // namespace detail

struct EventAnalysis {
  std::vector<SoundEvent> events;
  Signal residual;  // first order, same length as the input
  DoaTrack doa;
  AmplitudeEnvelope envelope;
};

// Detection, localization, segmentation and first-order residual.
inline EventAnalysis analyze_events(const Arir& arir,
                                    const DetectionParams& p = {},
                                    const AnalysisFilters& f = {}) {
  p.validate();
  EventAnalysis out;
  out.doa = doa_track(arir, f);
  out.envelope = short_time_amplitude(arir, f);
  const std::vector<DetectedPeak> peaks =
      detect_events(out.envelope, out.doa, p, arir.sample_rate);

  const Signal first_order = arir.samples.topRows(4);
  const double fs = arir.sample_rate;
  const std::ptrdiff_t taper =
      std::max<std::ptrdiff_t>(1, std::llround(p.taper_s * fs));
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const DetectedPeak& pk = peaks[i];
    SoundEvent e;
    e.index = static_cast<int>(i) + 1;
    e.toa = pk.toa;
    e.toa_sample = pk.sample;
    e.amplitude = pk.amplitude;
    e.doa = pk.doa;
    e.position = localize_event(pk.toa, pk.doa, p.speed_of_sound);
    e.steering = steer_tetrahedron(pk.doa);
    const std::ptrdiff_t next = i + 1 < peaks.size() ? peaks[i + 1].sample : -1;
    const std::ptrdiff_t flat_end = detail::flat_end_for(
        first_order, pk.sample, pk.doa, next, i == 0, p, fs);
    e.window = make_window(pk.sample, flat_end, taper, arir.length());

    const Signal segment = extract_segment(first_order, e.window);
    if (i == 0 && p.cut_direct_sound) {
      e.exclusion = Eigen::Vector4d::Ones();
      e.exclusion_ratio = 0.0;
    } else {
      const ExclusionResult ex =
          exclusion_factor(out.envelope, pk.sample, segment,
                           pk.sample - e.window.start, pk.doa, fs, p, f);
      e.exclusion = ex.exclusion;
      e.exclusion_ratio = ex.ratio;
    }
    e.directional = directional_signals(segment, e.steering, e.exclusion);
    out.events.push_back(std::move(e));
  }
  out.residual = residual_first_order(first_order, out.events);
  return out;
}

}  // namespace arir

#endif  // ARIR_SOUND_EVENTS_HPP_
