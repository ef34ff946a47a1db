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

#ifndef ARIR_UPMIX_HPP_
#define ARIR_UPMIX_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "arir/ambisonics.hpp"
#include "arir/analysis.hpp"
#include "arir/dsp.hpp"
#include "arir/errors.hpp"

namespace arir {

// Y_N(steering) * s_d: four-directional enhancement of one event segment.
inline Signal upmix_segment(const Signal& directional,
                            const SteeringSet& steering, int order) {
  if (order < 1) throw ConfigError("upmix order must be >= 1");
  return sh_reencode_matrix(steering, order) * directional;
}

// Per-sample re-encoding pi * Y_N(T_t) * Y_1(T_t)^T * h_r1(t), with T_t the
// tetrahedron steered to the DOA at t.
inline Signal upmix_residual(const Signal& residual_fo, const DoaTrack& doa,
                             int order) {
  if (order < 1) throw ConfigError("upmix order must be >= 1");
  if (static_cast<Eigen::Index>(doa.size()) != residual_fo.cols() ||
      residual_fo.rows() != 4) {
    throw ConfigError("residual and DOA track must be 4 x L and length L");
  }
  const Eigen::Index length = residual_fo.cols();
  Signal out(sh_channels(order), length);
  Eigen::MatrixXd mix;
  Vec3 cached(0.0, 0.0, 0.0);
  for (Eigen::Index t = 0; t < length; ++t) {
    const Direction& dir = doa[static_cast<std::size_t>(t)];
    if (t == 0 || dir.vec() != cached) {
      const Eigen::MatrixXd y = sh_reencode_matrix(steer_tetrahedron(dir), order);
      mix = kPi * y * y.topRows(4).transpose();
      cached = dir.vec();
    }
    out.col(t) = mix * residual_fo.col(t);
  }
  return out;
}

struct EnvelopeCorrectionParams {
  double smoothing_s = 2e-3;
  int passes = 2;
  double hop_s = 1e-3;
  double max_gain_db = 40.0;
};

struct EnvelopeCorrection {
  Signal corrected;
  std::vector<double> band_centers;
  // (order + 1) x bands: energy change applied to each order group, dB.
  Eigen::MatrixXd applied_db;
};

namespace detail {

inline std::vector<double> smoothed_energy(const std::vector<double>& power,
                                           std::size_t taps) {
  std::vector<double> kernel(taps);
  double sum = 0.0;
  for (std::size_t k = 0; k < taps; ++k) {
    kernel[k] = 0.5 - 0.5 * std::cos(2.0 * kPi * (k + 1.0) / (taps + 1.0));
    sum += kernel[k];
  }
  for (double& v : kernel) v /= sum;
  return dsp::centered_fir(power, kernel);
}

}  // namespace detail

namespace detail {

inline EnvelopeCorrection correction_pass(const Signal& upmixed, const Signal& reference,
                                          double sample_rate,
                                          const EnvelopeCorrectionParams& params) {
  if (reference.rows() < 4 || reference.cols() != upmixed.cols()) {
    throw ConfigError("reference must be first order and equally long");
  }
  const int order = static_cast<int>(std::lround(std::sqrt(upmixed.rows()))) - 1;
  if (order < 0 || sh_channels(order) != upmixed.rows()) {
    throw ConfigError("upmixed signal must have (N+1)^2 channels");
  }
  const auto length = static_cast<std::size_t>(upmixed.cols());
  const dsp::OctaveBank bank(sample_rate);
  const std::size_t taps = dsp::odd_length(params.smoothing_s, sample_rate);
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(params.hop_s * sample_rate)));
  const double max_gain = std::pow(10.0, params.max_gain_db / 20.0);

  EnvelopeCorrection out;
  out.corrected = Signal::Zero(upmixed.rows(), upmixed.cols());
  out.band_centers = bank.centers();
  out.applied_db = Eigen::MatrixXd::Zero(order + 1, static_cast<Eigen::Index>(bank.bands()));

  // Reference band energies averaged over the four first-order channels.
  std::vector<std::vector<double>> ref_power(bank.bands(),
                                             std::vector<double>(length, 0.0));
  for (int c = 0; c < 4; ++c) {
    const auto bands = bank.split(row_span(reference, c));
    for (std::size_t b = 0; b < bands.size(); ++b) {
      for (std::size_t t = 0; t < length; ++t) {
        ref_power[b][t] += 0.25 * bands[b][t] * bands[b][t];
      }
    }
  }

  std::vector<std::vector<std::vector<double>>> channel_bands(
      static_cast<std::size_t>(upmixed.rows()));
  for (Eigen::Index c = 0; c < upmixed.rows(); ++c) {
    channel_bands[static_cast<std::size_t>(c)] = bank.split(row_span(upmixed, c));
  }

  for (std::size_t b = 0; b < bank.bands(); ++b) {
    const std::vector<double> target = detail::smoothed_energy(ref_power[b], taps);
    for (int l = 0; l <= order; ++l) {
      const int first = l * l;
      const int count = 2 * l + 1;
      std::vector<double> power(length, 0.0);
      for (int c = first; c < first + count; ++c) {
        const auto& x = channel_bands[static_cast<std::size_t>(c)][b];
        for (std::size_t t = 0; t < length; ++t) power[t] += x[t] * x[t] / count;
      }
      const std::vector<double> current = detail::smoothed_energy(power, taps);

      // Gains on a hop grid, linearly interpolated in between.
      auto gain_at = [&](std::size_t t) {
        if (!(current[t] > 0.0)) return 1.0;
        return std::clamp(std::sqrt(std::max(target[t], 0.0) / current[t]),
                          1.0 / max_gain, max_gain);
      };
      std::vector<double> gain(length, 1.0);
      for (std::size_t t0 = 0; t0 < length; t0 += hop) {
        const std::size_t t1 = std::min(t0 + hop, length - 1);
        const double g0 = gain_at(t0);
        const double g1 = gain_at(t1);
        for (std::size_t t = t0; t <= t1; ++t) {
          const double a = t1 > t0 ? static_cast<double>(t - t0) / (t1 - t0) : 0.0;
          gain[t] = (1.0 - a) * g0 + a * g1;
        }
      }

      double before = 0.0;
      double after = 0.0;
      for (int c = first; c < first + count; ++c) {
        const auto& x = channel_bands[static_cast<std::size_t>(c)][b];
        for (std::size_t t = 0; t < length; ++t) {
          const double y = gain[t] * x[t];
          out.corrected(c, static_cast<Eigen::Index>(t)) += y;
          before += x[t] * x[t];
          after += y * y;
        }
      }
      if (before > 0.0 && after > 0.0) {
        out.applied_db(l, static_cast<Eigen::Index>(b)) =
            10.0 * std::log10(after / before);
      }
    }
  }
  return out;
}

}  // namespace detail

// Matches, per octave band and over time, the mean channel energy of every
// order group of |upmixed| to the 4-channel mean energy of |reference|.
// Orders 0 and 1 are equalized against the same target as the higher orders.
// Band gains also act on the skirts of the neighbouring bands, so the
// matching is repeated on its own output; |applied_db| is the total.
inline EnvelopeCorrection envelope_correction(
    const Signal& upmixed, const Signal& reference, double sample_rate,
    const EnvelopeCorrectionParams& params = {}) {
  if (params.passes < 1) throw ConfigError("envelope correction needs >= 1 pass");
  EnvelopeCorrection out = detail::correction_pass(upmixed, reference, sample_rate, params);
  for (int pass = 1; pass < params.passes; ++pass) {
    EnvelopeCorrection next =
        detail::correction_pass(out.corrected, reference, sample_rate, params);
    out.corrected = std::move(next.corrected);
    out.applied_db += next.applied_db;
  }
  return out;
}

}  // namespace arir

#endif  // ARIR_UPMIX_HPP_
