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

#ifndef ARIR_PRESET_HPP_
#define ARIR_PRESET_HPP_

#include <vector>

#include <Eigen/Dense>

#include "arir/analysis.hpp"
#include "arir/sound_events.hpp"
#include "arir/translation.hpp"
#include "arir/upmix.hpp"

namespace arir {

struct AnalysisOptions {
  int order = 3;
  DetectionParams detection;
  AnalysisFilters filters;
  bool envelope_correction = true;
  EnvelopeCorrectionParams correction;
};

// Everything the real-time stage needs, produced once offline.
struct AnalysisPreset {
  double sample_rate = 48000.0;
  int order = 3;
  double speed_of_sound = 343.0;
  std::vector<SoundEvent> events;
  Signal residual;  // (order+1)^2 x L, upmixed
  WallSet walls;
  bool envelope_corrected = false;
  std::vector<double> band_centers;
  Eigen::MatrixXd correction_db;  // (order+1) x bands
  DetectionParams detection;      // settings used for the analysis

  Eigen::Index length() const { return residual.cols(); }
};

// Offline stage: parameters, events, first-order residual, 4DE upmix and
// optional envelope correction of the residual.
inline AnalysisPreset analyze(const Arir& arir, const AnalysisOptions& options = {}) {
  if (options.order < 1 || options.order > kMaxOrder) {
    throw ConfigError("output order must be in [1, 7]");
  }
  EventAnalysis ev = analyze_events(arir, options.detection, options.filters);

  AnalysisPreset preset;
  preset.sample_rate = arir.sample_rate;
  preset.order = options.order;
  preset.speed_of_sound = options.detection.speed_of_sound;
  preset.detection = options.detection;
  preset.residual = upmix_residual(ev.residual, ev.doa, options.order);
  if (options.envelope_correction) {
    // The residual's own first-order part is the reference, so energy that
    // left with the sound events is not put back.
    EnvelopeCorrection corr = envelope_correction(
        preset.residual, ev.residual, arir.sample_rate, options.correction);
    preset.residual = std::move(corr.corrected);
    preset.band_centers = std::move(corr.band_centers);
    preset.correction_db = std::move(corr.applied_db);
    preset.envelope_corrected = true;
  }
  preset.events = std::move(ev.events);
  preset.walls = build_walls(preset.events);
  return preset;
}

inline TranslationParams translation_params(const AnalysisPreset& preset,
                                            const ListenerPose& pose,
                                            const TranslationLimits& limits) {
  return translation_params(preset.events, pose, preset.speed_of_sound, limits);
}

// Translated ARIR for fixed parameters. With |compensated| the output is
// delayed by the direct-sound shift, which leaves the residual in place; this
// is the response the streaming renderer realizes.
inline Signal translated_arir(const AnalysisPreset& preset,
                              const TranslationParams& params,
                              bool compensated) {
  std::vector<TranslatedSegment> segments;
  segments.reserve(preset.events.size());
  const double reference = compensated ? params.direct_shift : 0.0;
  for (std::size_t n = 0; n < preset.events.size(); ++n) {
    const SoundEvent& e = preset.events[n];
    const EventTranslation& et = params.events[n];
    segments.push_back(
        {translated_encoder(e, et, preset.order) * e.directional,
         segment_onset_samples(e, et, reference, preset.sample_rate)});
  }
  const Signal residual =
      compensated ? preset.residual
                  : adapt_residual(preset.residual, params.direct_shift,
                                   preset.sample_rate);
  return assemble(residual, segments);
}

}  // namespace arir

#endif  // ARIR_PRESET_HPP_
