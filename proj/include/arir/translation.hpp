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

#ifndef ARIR_TRANSLATION_HPP_
#define ARIR_TRANSLATION_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arir/ambisonics.hpp"
#include "arir/analysis.hpp"
#include "arir/dsp.hpp"
#include "arir/errors.hpp"
#include "arir/sound_events.hpp"

namespace arir {

struct ListenerPose {
  Vec3 position = Vec3::Zero();
  double time = 0.0;
};

struct TranslationLimits {
  double max_gain = 4.0;
  // Gains above knee_ratio * max_gain are compressed towards max_gain.
  double knee_ratio = 0.8;
  // Reflections stay at least this far behind the direct sound ...
  double min_gap_s = 0.25e-3;
  // ... approached through an arctan knee of this width.
  double gap_knee_s = 0.5e-3;

  void validate() const {
    if (!(knee_ratio > 0.0) || !(knee_ratio < 1.0)) {
      throw ConfigError("gain knee ratio must be in (0, 1)");
    }
    if (!(max_gain * knee_ratio > 1.0)) {
      throw ConfigError("max gain knee must lie above unity gain");
    }
    if (!(min_gap_s > 0.0) || !(gap_knee_s > 0.0)) {
      throw ConfigError("ordering limits must be positive");
    }
  }
};

// Identity below the knee, then a tanh segment that is C1 at the knee and
// approaches |max_gain| asymptotically.
inline double soft_limit_gain(double gain, const TranslationLimits& limits) {
  const double knee = limits.knee_ratio * limits.max_gain;
  if (gain <= knee) return gain;
  if (std::isinf(gain)) return limits.max_gain;
  const double headroom = limits.max_gain - knee;
  return knee + headroom * std::tanh((gain - knee) / headroom);
}

// Identity above floor + knee; below, an arctan segment that is C1 at the
// knee and approaches |floor| from above.
inline double soft_floor(double value, double floor, double knee) {
  const double corner = floor + knee;
  if (value >= corner) return value;
  const double u = value - corner;
  return corner + (2.0 * knee / kPi) * std::atan(kPi * u / (2.0 * knee));
}

struct EventTranslation {
  Mat3 rotation = Mat3::Identity();
  double gain = 1.0;
  double time_shift = 0.0;  // seconds; positive means earlier arrival
  double raw_gain = 1.0;
  double raw_time_shift = 0.0;
  Direction direction;  // translated DOA
};

struct TranslationParams {
  ListenerPose pose;
  std::vector<EventTranslation> events;
  double direct_shift = 0.0;
};

// Rotation, distance gain and time shift of one event for |pose|, before the
// ordering limit (which needs the direct sound, see translation_params).
inline EventTranslation translate_event(const SoundEvent& event,
                                        const ListenerPose& pose,
                                        double speed_of_sound,
                                        const TranslationLimits& limits) {
  const double distance = event.position.norm();
  if (!(distance > 0.0)) {
    throw GeometryError("sound event at the recording position (T_s = 0)");
  }
  const Vec3 offset = event.position - pose.position;
  const double new_distance = offset.norm();

  EventTranslation out;
  out.direction = event.doa;
  if (pose.position.isZero(0.0)) return out;  // exact identity
  out.raw_time_shift = (distance - new_distance) / speed_of_sound;
  out.time_shift = out.raw_time_shift;
  if (new_distance < 1e-9) {
    out.raw_gain = std::numeric_limits<double>::infinity();
    out.gain = limits.max_gain;
    return out;
  }
  out.raw_gain = distance / new_distance;
  out.gain = soft_limit_gain(out.raw_gain, limits);
  out.direction = Direction::from_vector(offset);
  out.rotation = rotation_z(out.direction.azimuth()) *
                 rotation_y(out.direction.zenith() - event.doa.zenith()) *
                 rotation_z(-event.doa.azimuth());
  return out;
}

// Parameters of all events for |pose|. Reflections are kept strictly behind
// the direct sound; the limit never engages at the recording position.
inline TranslationParams translation_params(const std::vector<SoundEvent>& events,
                                            const ListenerPose& pose,
                                            double speed_of_sound,
                                            const TranslationLimits& limits) {
  limits.validate();
  TranslationParams params;
  params.pose = pose;
  params.events.reserve(events.size());
  for (const SoundEvent& e : events) {
    params.events.push_back(translate_event(e, pose, speed_of_sound, limits));
  }
  if (events.empty()) return params;
  params.direct_shift = params.events.front().time_shift;
  const double direct_arrival = events.front().toa - params.direct_shift;
  for (std::size_t n = 1; n < events.size(); ++n) {
    const double original_gap = events[n].toa - events.front().toa;
    if (!(original_gap > 0.0)) {
      throw GeometryError("reflection does not follow the direct sound");
    }
    EventTranslation& et = params.events[n];
    const double gap = (events[n].toa - et.time_shift) - direct_arrival;
    const double floor = std::min(limits.min_gap_s, 0.25 * original_gap);
    const double knee = std::min(limits.gap_knee_s, 0.5 * original_gap);
    if (gap >= floor + knee) continue;
    et.time_shift = events[n].toa - direct_arrival - soft_floor(gap, floor, knee);
  }
  return params;
}

// Onset of a translated segment on the output timeline, in samples.
// |reference_shift| is subtracted from every path's advance: 0 for the plain
// translated ARIR, the direct-sound shift for the delay-compensated one.
inline double segment_onset_samples(const SoundEvent& event,
                                    const EventTranslation& et,
                                    double reference_shift,
                                    double sample_rate) {
  return static_cast<double>(event.window.start) -
         (et.time_shift - reference_shift) * sample_rate;
}

// g * Y_N(R * steering): maps the 4 directional signals to the output.
inline Eigen::MatrixXd translated_encoder(const SoundEvent& event,
                                          const EventTranslation& et,
                                          int order) {
  SteeringSet rotated;
  rotated.directions = et.rotation * event.steering.directions;
  return et.gain * sh_reencode_matrix(rotated, order);
}

struct TranslatedSegment {
  Signal samples;       // (N+1)^2 x window length
  double onset = 0.0;   // fractional sample position of column 0
};

inline TranslatedSegment translate_segment(const SoundEvent& event,
                                           const EventTranslation& et,
                                           int order, double sample_rate) {
  return {translated_encoder(event, et, order) * event.directional,
          segment_onset_samples(event, et, 0.0, sample_rate)};
}

// h_r(t + shift): advances the residual by the direct-sound time shift.
inline Signal adapt_residual(const Signal& residual, double direct_shift,
                             double sample_rate) {
  if (direct_shift == 0.0) return residual;
  Signal out(residual.rows(), residual.cols());
  for (Eigen::Index c = 0; c < residual.rows(); ++c) {
    const std::vector<double> shifted = dsp::fractional_shift(
        row_span(residual, c), -direct_shift * sample_rate,
        static_cast<std::size_t>(residual.cols()));
    std::copy(shifted.begin(), shifted.end(), out.row(c).data());
  }
  return out;
}

// Adds |segment| into |out| starting at fractional sample |onset|.
inline void add_placed(Signal& out, const Signal& segment, double onset) {
  const dsp::FractionalDelay fd = dsp::lagrange3(onset);
  const Eigen::Index length = out.cols();
  for (Eigen::Index k = 0; k < segment.cols(); ++k) {
    for (int tap = 0; tap < 4; ++tap) {
      const Eigen::Index t = k + fd.base + tap;
      if (t < 0 || t >= length) continue;
      out.col(t) += fd.taps[static_cast<std::size_t>(tap)] * segment.col(k);
    }
  }
}

// Translated ARIR: adapted residual plus every translated segment at its
// shifted onset. The result has the residual's length.
inline Signal assemble(const Signal& adapted_residual,
                       const std::vector<TranslatedSegment>& segments) {
  Signal out = adapted_residual;
  for (const TranslatedSegment& s : segments) add_placed(out, s.samples, s.onset);
  return out;
}

// Virtual wall between the direct sound and reflection |event_index|:
// feasible side satisfies (x - anchor) . normal >= 0.
struct Wall {
  int event_index = 2;
  Vec3 anchor = Vec3::Zero();  // reflection position + normal
  Vec3 normal = Vec3::Zero();  // (direct - reflection) / 2, pointing inwards

  double condition(const Vec3& x) const { return (x - anchor).dot(normal); }
};

struct WallSet {
  std::vector<Wall> walls;

  bool contains(const Vec3& x) const {
    return std::all_of(walls.begin(), walls.end(),
                       [&](const Wall& w) { return w.condition(x) >= 0.0; });
  }
};

inline WallSet build_walls(const std::vector<SoundEvent>& events) {
  WallSet set;
  if (events.size() < 2) return set;
  const Vec3& direct = events.front().position;
  for (std::size_t n = 1; n < events.size(); ++n) {
    Wall w;
    w.event_index = events[n].index;
    w.normal = 0.5 * (direct - events[n].position);
    w.anchor = events[n].position + w.normal;
    if (w.normal.squaredNorm() > 0.0) set.walls.push_back(w);
  }
  return set;
}

struct ClampResult {
  ListenerPose pose;
  bool clamped = false;
  std::optional<std::string> diagnostic;
};

namespace detail {

// Projection of |x| onto the intersection of the planes of |active| walls.
inline std::optional<Vec3> project_onto_planes(
    const Vec3& x, const std::vector<const Wall*>& active) {
  const auto k = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd a(k, 3);
  Eigen::VectorXd r(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Wall& w = *active[static_cast<std::size_t>(i)];
    a.row(i) = w.normal.transpose();
    r(i) = w.normal.dot(x - w.anchor);
  }
  const Eigen::MatrixXd gram = a * a.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (lu.rank() < k) return std::nullopt;
  return Vec3(x - a.transpose() * lu.solve(r));
}

}  // namespace detail

// Nearest pose inside every wall. In three dimensions the projection onto a
// polyhedron lies on the affine hull of at most three active planes, so all
// such subsets are tried and the closest feasible candidate wins. The result
// is then pulled towards the origin until every condition holds exactly.
inline ClampResult clamp_pose(const ListenerPose& pose, const WallSet& set) {
  ClampResult out;
  out.pose = pose;
  if (set.contains(pose.position)) return out;
  out.clamped = true;

  const Vec3 origin = Vec3::Zero();
  if (!set.contains(origin)) {
    out.pose.position = origin;
    out.diagnostic = "walls leave no interior around the recording position";
    return out;
  }

  double scale = 1.0;
  for (const Wall& w : set.walls) {
    scale = std::max({scale, w.anchor.norm(), w.normal.norm()});
  }
  const double tolerance = 1e-9 * scale * scale;
  auto nearly_feasible = [&](const Vec3& y) {
    return std::all_of(set.walls.begin(), set.walls.end(), [&](const Wall& w) {
      return w.condition(y) >= -tolerance;
    });
  };

  const Vec3& x = pose.position;
  std::optional<Vec3> best;
  double best_distance = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<const Wall*>& active) {
    const std::optional<Vec3> y = detail::project_onto_planes(x, active);
    if (!y || !nearly_feasible(*y)) return;
    const double d = (*y - x).squaredNorm();
    if (d < best_distance) {
      best_distance = d;
      best = *y;
    }
  };
  const std::size_t n = set.walls.size();
  for (std::size_t i = 0; i < n; ++i) {
    consider({&set.walls[i]});
    for (std::size_t j = i + 1; j < n; ++j) {
      consider({&set.walls[i], &set.walls[j]});
      for (std::size_t k = j + 1; k < n; ++k) {
        consider({&set.walls[i], &set.walls[j], &set.walls[k]});
      }
    }
  }
  if (!best) {
    out.pose.position = origin;
    out.diagnostic = "no feasible projection found; pose held at origin";
    return out;
  }

  Vec3 y = *best;
  double shrink = 1e-15;
  while (!set.contains(y) && shrink < 1.0) {
    y = (1.0 - shrink) * *best;
    shrink *= 2.0;
  }
  if (!set.contains(y)) y = origin;
  out.pose.position = y;
  return out;
}

}  // namespace arir

#endif  // ARIR_TRANSLATION_HPP_
