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

#ifndef ARIR_DSP_HPP_
#define ARIR_DSP_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "arir/errors.hpp"

namespace arir::dsp {

// Second-order section, transposed direct form II. a0 is normalized to 1.
struct Biquad {
  double b0 = 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;

  void process(std::span<double> x) const {
    double s1 = 0.0;
    double s2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = b0 * in + s1;
      s1 = b1 * in - a1 * out + s2;
      s2 = b2 * in - a2 * out;
      v = out;
    }
  }
};

using Cascade = std::vector<Biquad>;

namespace detail {

// Bilinear-transformed second-order low/high-pass with quality |q|,
// frequency pre-warped to |cutoff|.
inline Biquad second_order(double cutoff, double sample_rate, double q,
                           bool highpass) {
  const double w0 = 2.0 * std::numbers::pi * cutoff / sample_rate;
  const double cos_w0 = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad bq;
  if (highpass) {
    bq.b0 = (1.0 + cos_w0) / 2.0 / a0;
    bq.b1 = -(1.0 + cos_w0) / a0;
    bq.b2 = bq.b0;
  } else {
    bq.b0 = (1.0 - cos_w0) / 2.0 / a0;
    bq.b1 = (1.0 - cos_w0) / a0;
    bq.b2 = bq.b0;
  }
  bq.a1 = -2.0 * cos_w0 / a0;
  bq.a2 = (1.0 - alpha) / a0;
  return bq;
}

}  // namespace detail

// Even-order Butterworth low/high-pass as a biquad cascade.
inline Cascade butterworth(int order, double cutoff, double sample_rate,
                           bool highpass) {
  if (order < 2 || order % 2 != 0) {
    throw ConfigError("butterworth order must be even and >= 2");
  }
  if (!(cutoff > 0.0) || !(cutoff < sample_rate / 2.0)) {
    throw ConfigError("butterworth cutoff outside (0, fs/2)");
  }
  Cascade cascade;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order);
    const double q = 1.0 / (2.0 * std::sin(theta));
    cascade.push_back(detail::second_order(cutoff, sample_rate, q, highpass));
  }
  return cascade;
}

inline void filter_in_place(const Cascade& cascade, std::span<double> x) {
  for (const Biquad& bq : cascade) bq.process(x);
}

// Forward-backward filtering with |pad| zeros on both sides, so the
// effective response is the squared magnitude with zero phase.
inline std::vector<double> filtfilt(const Cascade& cascade,
                                    std::span<const double> x,
                                    std::size_t pad) {
  std::vector<double> work(x.size() + 2 * pad, 0.0);
  std::copy(x.begin(), x.end(), work.begin() + static_cast<std::ptrdiff_t>(pad));
  filter_in_place(cascade, work);
  std::reverse(work.begin(), work.end());
  filter_in_place(cascade, work);
  std::reverse(work.begin(), work.end());
  return {work.begin() + static_cast<std::ptrdiff_t>(pad),
          work.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

// Zero padding long enough for a Butterworth response with lowest corner
// |lowest_corner| to decay far below double precision.
inline std::size_t settle_padding(double lowest_corner, double sample_rate) {
  return std::max<std::size_t>(
      1024, static_cast<std::size_t>(std::ceil(25.0 * sample_rate / lowest_corner)));
}

// Duration in seconds to a sample count, rounded to nearest and forced odd.
inline std::size_t odd_length(double seconds, double sample_rate) {
  auto n = static_cast<std::size_t>(std::lround(seconds * sample_rate));
  if (n % 2 == 0) ++n;
  return n;
}

inline std::vector<double> boxcar(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

// Symmetric Hamming window normalized to unit sum.
inline std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n > 1) {
    for (std::size_t k = 0; k < n; ++k) {
      w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k /
                                    static_cast<double>(n - 1));
    }
  }
  double sum = 0.0;
  for (double v : w) sum += v;
  for (double& v : w) v /= sum;
  return w;
}

// Centered (zero-phase) FIR with an odd-length kernel; zeros outside |x|.
inline std::vector<double> centered_fir(std::span<const double> x,
                                        std::span<const double> kernel) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double acc = 0.0;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, t + half);
    for (std::ptrdiff_t s = lo; s <= hi; ++s) {
      acc += kernel[static_cast<std::size_t>(s - t + half)] *
             x[static_cast<std::size_t>(s)];
    }
    y[static_cast<std::size_t>(t)] = acc;
  }
  return y;
}

// Median of x[center - half .. center + half], clipped to the signal.
inline double local_median(std::span<const double> x, std::ptrdiff_t center,
                           std::ptrdiff_t half) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(center - half, 0, n);
  const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(center + half + 1, 0, n);
  if (hi <= lo) return 0.0;
  std::vector<double> window(x.begin() + lo, x.begin() + hi);
  auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  std::nth_element(window.begin(), mid, window.end());
  if (window.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(window.begin(), mid);
  return 0.5 * (lower + upper);
}

// Third-order Lagrange fractional delay: y[t] = sum_k taps[k] x[t - base - k].
struct FractionalDelay {
  std::ptrdiff_t base = 0;
  std::array<double, 4> taps{1.0, 0.0, 0.0, 0.0};
};

// The interpolation point is kept between the two middle taps whenever the
// delay allows it; delays in [0, 1) use the causal taps 0..3.
inline FractionalDelay lagrange3(double delay_samples) {
  FractionalDelay fd;
  const double whole = std::floor(delay_samples);
  fd.base = static_cast<std::ptrdiff_t>(whole) - 1;
  if (delay_samples >= 0.0 && fd.base < 0) fd.base = 0;
  const double d = delay_samples - static_cast<double>(fd.base);
  for (int k = 0; k < 4; ++k) {
    double v = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j != k) v *= (d - j) / static_cast<double>(k - j);
    }
    fd.taps[static_cast<std::size_t>(k)] = v;
  }
  return fd;
}

// Delays |x| by |delay_samples| (negative advances), zero outside the input,
// output length |out_length|.
inline std::vector<double> fractional_shift(std::span<const double> x,
                                            double delay_samples,
                                            std::size_t out_length) {
  const FractionalDelay fd = lagrange3(delay_samples);
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> y(out_length, 0.0);
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(out_length); ++t) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < 4; ++k) {
      const std::ptrdiff_t s = t - fd.base - k;
      if (s >= 0 && s < n) acc += fd.taps[static_cast<std::size_t>(k)] * x[s];
    }
    y[static_cast<std::size_t>(t)] = acc;
  }
  return y;
}

// Octave bands centered 63 Hz .. 16 kHz, split by zero-phase Butterworth
// low-passes at the geometric band edges. Each band is the difference of two
// adjacent low-passes, so the bands sum back to the input exactly.
class OctaveBank {
 public:
  explicit OctaveBank(double sample_rate) : sample_rate_(sample_rate) {
    static constexpr std::array<double, 9> kCenters = {
        62.5, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0};
    for (double fc : kCenters) {
      if (fc < 0.45 * sample_rate) centers_.push_back(fc);
    }
    for (std::size_t b = 0; b + 1 < centers_.size(); ++b) {
      const double edge = centers_[b] * std::numbers::sqrt2;
      if (edge < 0.45 * sample_rate) {
        lowpasses_.push_back(butterworth(4, edge, sample_rate, false));
      }
    }
    centers_.resize(lowpasses_.size() + 1);
    pad_ = settle_padding(centers_.front() * std::numbers::sqrt2, sample_rate);
  }

  std::size_t bands() const { return centers_.size(); }
  const std::vector<double>& centers() const { return centers_; }
  double sample_rate() const { return sample_rate_; }

  std::vector<std::vector<double>> split(std::span<const double> x) const {
    std::vector<std::vector<double>> out;
    out.reserve(bands());
    std::vector<double> previous(x.size(), 0.0);
    for (const Cascade& lp : lowpasses_) {
      std::vector<double> low = filtfilt(lp, x, pad_);
      std::vector<double> band(x.size());
      for (std::size_t t = 0; t < x.size(); ++t) band[t] = low[t] - previous[t];
      out.push_back(std::move(band));
      previous = std::move(low);
    }
    std::vector<double> top(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) top[t] = x[t] - previous[t];
    out.push_back(std::move(top));
    return out;
  }

 private:
  double sample_rate_;
  std::vector<double> centers_;
  std::vector<Cascade> lowpasses_;
  std::size_t pad_ = 0;
};

}  // namespace arir::dsp

#endif  // ARIR_DSP_HPP_
