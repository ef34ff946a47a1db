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

#ifndef ARIR_ANALYSIS_HPP_
#define ARIR_ANALYSIS_HPP_

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arir/ambisonics.hpp"
#include "arir/dsp.hpp"
#include "arir/errors.hpp"

namespace arir {

// channels x samples, one contiguous row per channel.
using Signal =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const Signal& s, Eigen::Index row) {
  return {s.row(row).data(), static_cast<std::size_t>(s.cols())};
}

inline std::span<double> row_span(Signal& s, Eigen::Index row) {
  return {s.row(row).data(), static_cast<std::size_t>(s.cols())};
}

// Ambisonic room impulse response. Internal processing is always ACN with
// orthonormal (N3D) scaling; conversions happen at file boundaries.
struct Arir {
  Signal samples;
  double sample_rate = 48000.0;
  int order = 1;

  Eigen::Index length() const { return samples.cols(); }
  Eigen::Index channels() const { return samples.rows(); }
};

// Builds an Arir, inferring the order from the channel count.
inline Arir make_arir(Signal samples, double sample_rate) {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    throw ConfigError("sample rate must be positive");
  }
  const auto channels = static_cast<int>(samples.rows());
  const int order = static_cast<int>(std::lround(std::sqrt(channels))) - 1;
  if (order < 0 || sh_channels(order) != channels) {
    throw UnsupportedInputError("channel count " + std::to_string(channels) +
                                " is not a perfect square");
  }
  if (!samples.allFinite()) {
    throw UnsupportedInputError("ARIR contains non-finite samples");
  }
  return Arir{std::move(samples), sample_rate, order};
}

struct AnalysisFilters {
  double bandpass_low_hz = 200.0;
  double bandpass_high_hz = 3000.0;
  double doa_average_s = 0.25e-3;
  double amplitude_window_s = 0.5e-3;
  // Below this fraction of the peak PIV magnitude the direction is held.
  double underflow_ratio = 1e-12;
};

// Per-sample direction of arrival from the band-limited, time-averaged
// pseudo-intensity vector.
struct DoaTrack {
  std::vector<Direction> directions;
  // |averaged PIV|; entries below the underflow floor carry a held direction.
  std::vector<double> magnitude;
  double underflow_floor = 0.0;

  std::size_t size() const { return directions.size(); }
  const Direction& operator[](std::size_t t) const { return directions[t]; }
};

struct AmplitudeEnvelope {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t t) const { return values[t]; }
};

// Zero-phase band-pass: 4th-order Butterworth high- and low-pass, applied
// forward and backward.
inline std::vector<double> bandpass_zero_phase(std::span<const double> x,
                                               double low_hz, double high_hz,
                                               double sample_rate) {
  if (!(low_hz > 0.0) || !(low_hz < high_hz) ||
      !(high_hz < sample_rate / 2.0)) {
    throw ConfigError("band edges must satisfy 0 < low < high < fs/2");
  }
  dsp::Cascade cascade = dsp::butterworth(4, low_hz, sample_rate, true);
  const dsp::Cascade lowpass = dsp::butterworth(4, high_hz, sample_rate, false);
  cascade.insert(cascade.end(), lowpass.begin(), lowpass.end());
  return dsp::filtfilt(cascade, x, dsp::settle_padding(low_hz, sample_rate));
}

namespace detail {

inline void require_first_order(const Arir& arir) {
  if (arir.order < 1 || arir.channels() < 4) {
    throw UnsupportedInputError("analysis needs at least first-order input");
  }
}

// W * [X, Y, Z] for ACN channels 0..3 (W, Y, Z, X).
inline std::array<std::vector<double>, 3> intensity(
    std::span<const double> w, std::span<const double> y,
    std::span<const double> z, std::span<const double> x) {
  std::array<std::vector<double>, 3> piv;
  for (auto& c : piv) c.resize(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) {
    piv[0][t] = w[t] * x[t];
    piv[1][t] = w[t] * y[t];
    piv[2][t] = w[t] * z[t];
  }
  return piv;
}

}  // namespace detail

inline DoaTrack doa_track(const Arir& arir, const AnalysisFilters& f = {}) {
  detail::require_first_order(arir);
  std::array<std::vector<double>, 4> bp;
  for (int c = 0; c < 4; ++c) {
    bp[static_cast<std::size_t>(c)] =
        bandpass_zero_phase(row_span(arir.samples, c), f.bandpass_low_hz,
                            f.bandpass_high_hz, arir.sample_rate);
  }
  const auto piv = detail::intensity(bp[0], bp[1], bp[2], bp[3]);
  const std::vector<double> kernel =
      dsp::boxcar(dsp::odd_length(f.doa_average_s, arir.sample_rate));
  std::array<std::vector<double>, 3> avg;
  for (std::size_t i = 0; i < 3; ++i) avg[i] = dsp::centered_fir(piv[i], kernel);

  const std::size_t n = static_cast<std::size_t>(arir.length());
  DoaTrack track;
  track.directions.resize(n);
  track.magnitude.resize(n);
  double peak = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    track.magnitude[t] = std::sqrt(avg[0][t] * avg[0][t] +
                                   avg[1][t] * avg[1][t] +
                                   avg[2][t] * avg[2][t]);
    peak = std::max(peak, track.magnitude[t]);
  }
  track.underflow_floor = f.underflow_ratio * peak;
  Direction held;  // +x until the first valid sample
  for (std::size_t t = 0; t < n; ++t) {
    if (track.magnitude[t] > track.underflow_floor && track.magnitude[t] > 0.0) {
      held = Direction::from_vector(Vec3(avg[0][t], avg[1][t], avg[2][t]));
    }
    track.directions[t] = held;
  }
  return track;
}

// Short-time amplitude of a first-order signal block (rows W, Y, Z, X):
// sqrt of the Hamming-smoothed broadband PIV magnitude.
inline AmplitudeEnvelope short_time_amplitude(const Signal& first_order,
                                              double sample_rate,
                                              const AnalysisFilters& f = {}) {
  const auto piv = detail::intensity(row_span(first_order, 0),
                                     row_span(first_order, 1),
                                     row_span(first_order, 2),
                                     row_span(first_order, 3));
  std::vector<double> magnitude(piv[0].size());
  for (std::size_t t = 0; t < magnitude.size(); ++t) {
    magnitude[t] = std::sqrt(piv[0][t] * piv[0][t] + piv[1][t] * piv[1][t] +
                             piv[2][t] * piv[2][t]);
  }
  const std::vector<double> smoothed = dsp::centered_fir(
      magnitude,
      dsp::hamming(dsp::odd_length(f.amplitude_window_s, sample_rate)));
  AmplitudeEnvelope env;
  env.values.resize(smoothed.size());
  for (std::size_t t = 0; t < smoothed.size(); ++t) {
    env.values[t] = std::sqrt(std::max(smoothed[t], 0.0));
  }
  return env;
}

inline AmplitudeEnvelope short_time_amplitude(const Arir& arir,
                                              const AnalysisFilters& f = {}) {
  detail::require_first_order(arir);
  return short_time_amplitude(Signal(arir.samples.topRows(4)),
                              arir.sample_rate, f);
}

}  // namespace arir

#endif  // ARIR_ANALYSIS_HPP_
