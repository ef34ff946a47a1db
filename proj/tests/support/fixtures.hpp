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

// Test fixtures and reference implementations. Everything here is written
// independently of the library code it is used to check: first-order
// encoding uses closed-form monomials, convolution uses direct sums or
// Eigen's FFT module rather than the FFTW-based partitioned convolver.

#ifndef ARIR_TESTS_SUPPORT_FIXTURES_HPP_
#define ARIR_TESTS_SUPPORT_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "arir/analysis.hpp"

namespace arir::testing {

inline constexpr double kTestPi = 3.141592653589793238462643383279502884;

// N3D first-order encoding [W, Y, Z, X] written out directly.
inline Eigen::Vector4d encode_first_order(const Vec3& unit) {
  const double w = 1.0 / std::sqrt(4.0 * kTestPi);
  const double d = std::sqrt(3.0 / (4.0 * kTestPi));
  return {w, d * unit.y(), d * unit.z(), d * unit.x()};
}

inline Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// ---------------------------------------------------------------------------
// Shoebox image-source model with frequency-independent reflection factor.

struct ShoeboxSpec {
  Vec3 room = Vec3(6.0, 4.0, 3.0);
  Vec3 receiver = Vec3(1.5, 1.3, 1.1);
  Vec3 source = Vec3(3.5, 1.3, 1.1);
  double reflection = 0.8;
  int max_order = 3;
  double sample_rate = 48000.0;
  double speed_of_sound = 343.0;
  double length_s = 0.25;
};

struct ImageSource {
  Vec3 relative;  // image position relative to the receiver
  double distance = 0.0;
  double amplitude = 0.0;  // direct sound has amplitude 1
  int order = 0;
  std::ptrdiff_t sample = 0;
};

inline std::vector<ImageSource> image_sources(const ShoeboxSpec& s) {
  std::vector<ImageSource> out;
  const double direct = (s.source - s.receiver).norm();
  const int m = s.max_order;
  for (int nx = -m; nx <= m; ++nx) {
    for (int ny = -m; ny <= m; ++ny) {
      for (int nz = -m; nz <= m; ++nz) {
        for (int p = 0; p < 8; ++p) {
          const int px = p & 1, py = (p >> 1) & 1, pz = (p >> 2) & 1;
          const int order = std::abs(2 * nx - px) + std::abs(2 * ny - py) +
                            std::abs(2 * nz - pz);
          if (order > m) continue;
          const Vec3 image(2 * nx * s.room.x() + (1 - 2 * px) * s.source.x(),
                           2 * ny * s.room.y() + (1 - 2 * py) * s.source.y(),
                           2 * nz * s.room.z() + (1 - 2 * pz) * s.source.z());
          ImageSource is;
          is.relative = image - s.receiver;
          is.distance = is.relative.norm();
          is.order = order;
          is.amplitude = std::pow(s.reflection, order) * direct / is.distance;
          is.sample = std::llround(is.distance / s.speed_of_sound * s.sample_rate);
          out.push_back(is);
        }
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ImageSource& a, const ImageSource& b) { return a.distance < b.distance; });
  return out;
}

// First-order ARIR with one ideal (single-sample, wideband) impulse per
// image source. Arrivals are placed at the nearest sample.
inline Signal shoebox_arir(const ShoeboxSpec& s, std::vector<ImageSource>* sources = nullptr) {
  const auto length = static_cast<Eigen::Index>(std::llround(s.length_s * s.sample_rate));
  Signal h = Signal::Zero(4, length);
  const std::vector<ImageSource> images = image_sources(s);
  for (const ImageSource& is : images) {
    if (is.sample >= length) continue;
    h.col(is.sample) += is.amplitude * encode_first_order(is.relative / is.distance);
  }
  if (sources != nullptr) *sources = images;
  return h;
}

// Exponentially decaying, spatially diffuse noise with equal energy in the
// four N3D channels, starting at |onset_s| with a short fade-in.
inline Signal noise_tail(double sample_rate, Eigen::Index length, double onset_s,
                         double rt60_s, double level, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Signal tail = Signal::Zero(4, length);
  const double decay = 3.0 * std::log(10.0) / rt60_s;  // amplitude, 60 dB
  const auto onset = static_cast<Eigen::Index>(onset_s * sample_rate);
  const double fade = 2e-3 * sample_rate;
  for (Eigen::Index t = onset; t < length; ++t) {
    const double since = static_cast<double>(t - onset);
    const double env = level * std::exp(-decay * since / sample_rate) *
                       std::min(1.0, since / fade);
    for (int c = 0; c < 4; ++c) tail(c, t) = env * n(rng);
  }
  return tail;
}

// Fixture |k| of a family of rooms: random receiver and source direction at
// 2 m, third-order image sources, and a noise tail.
inline Signal fixture_arir(int k, double sample_rate = 48000.0, double length_s = 0.25) {
  std::mt19937 rng(1000u + static_cast<std::uint32_t>(k));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ShoeboxSpec s;
  s.sample_rate = sample_rate;
  s.length_s = length_s;
  s.room = Vec3(5.0 + 2.0 * u(rng), 3.5 + 1.5 * u(rng), 2.7 + 0.6 * u(rng));
  s.reflection = 0.6 + 0.3 * u(rng);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    s.receiver = Vec3(0.5 + (s.room.x() - 1.0) * u(rng), 0.5 + (s.room.y() - 1.0) * u(rng),
                      0.5 + (s.room.z() - 1.0) * u(rng));
    s.source = s.receiver + 2.0 * random_unit(rng);
    if ((s.source.array() > 0.3).all() && (s.source.array() < s.room.array() - 0.3).all()) break;
  }
  Signal h = shoebox_arir(s);
  h += noise_tail(sample_rate, h.cols(), 0.01 + 0.01 * u(rng), 0.3 + 0.4 * u(rng), 0.02,
                  2000u + static_cast<std::uint32_t>(k));
  return h;
}

// ---------------------------------------------------------------------------
// Numerical helpers.

inline double rms(const Signal& a) {
  return std::sqrt(a.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(a.size(), 1)));
}

inline double relative_rms(const Signal& value, const Signal& reference) {
  return (value - reference).norm() / reference.norm();
}

inline double db(double ratio) { return 20.0 * std::log10(ratio); }

// Full linear convolution by direct summation, one row of |h| per output row.
inline Signal direct_convolve(const std::vector<double>& x, const Signal& h) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Signal y = Signal::Zero(h.rows(), n + h.cols() - 1);
  for (Eigen::Index c = 0; c < h.rows(); ++c) {
    const double* hc = h.row(c).data();
    double* yc = y.row(c).data();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      if (xi == 0.0) continue;
      for (Eigen::Index k = 0; k < h.cols(); ++k) yc[i + k] += xi * hc[k];
    }
  }
  return y;
}

// Full linear convolution with a single large transform (Eigen's FFT).
inline Signal fft_convolve(const std::vector<double>& x, const Signal& h) {
  const std::size_t out_len = x.size() + static_cast<std::size_t>(h.cols()) - 1;
  std::size_t size = 1;
  while (size < out_len) size <<= 1;
  Eigen::FFT<double> fft;
  std::vector<double> xp(x);
  xp.resize(size, 0.0);
  std::vector<std::complex<double>> xf;
  fft.fwd(xf, xp);
  Signal y(h.rows(), static_cast<Eigen::Index>(out_len));
  for (Eigen::Index c = 0; c < h.rows(); ++c) {
    std::vector<double> hp(h.row(c).data(), h.row(c).data() + h.cols());
    hp.resize(size, 0.0);
    std::vector<std::complex<double>> hf;
    fft.fwd(hf, hp);
    for (std::size_t k = 0; k < hf.size(); ++k) hf[k] *= xf[k];
    std::vector<double> yt;
    fft.inv(yt, hf);
    for (std::size_t t = 0; t < out_len; ++t) y(c, static_cast<Eigen::Index>(t)) = yt[t];
  }
  return y;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
inline void gauss_legendre(int n, std::vector<double>* nodes, std::vector<double>* weights) {
  nodes->resize(static_cast<std::size_t>(n));
  weights->resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kTestPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    (*nodes)[static_cast<std::size_t>(i)] = x;
    (*weights)[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

inline std::vector<double> white_noise(std::size_t n, std::uint32_t seed, double sigma = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> x(n);
  for (double& v : x) v = d(rng);
  return x;
}

// ---------------------------------------------------------------------------
// Octave-band energy decay curves. Bands are defined in the frequency domain
// as differences of zero-phase low-passes |L(f)| = 1 / (1 + (f / fe)^8) with
// edges fe = fc * sqrt(2), applied by weighting FFT bins.

inline double octave_lowpass(double hz, double edge) {
  return 1.0 / (1.0 + std::pow(hz / edge, 8.0));
}

// Octave band around |fc| of every row of |x|. The lowest band (62.5 Hz)
// extends to DC and the highest (16 kHz) to Nyquist.
inline Signal octave_band(const Signal& x, double sample_rate, double fc) {
  std::size_t size = 1;
  while (size < 2 * static_cast<std::size_t>(x.cols())) size <<= 1;
  Eigen::FFT<double> fft;
  Signal out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    std::vector<double> v(x.row(c).data(), x.row(c).data() + x.cols());
    v.resize(size, 0.0);
    std::vector<std::complex<double>> f;
    fft.fwd(f, v);
    for (std::size_t k = 0; k < f.size(); ++k) {
      const std::size_t bin = std::min(k, size - k);
      const double hz = static_cast<double>(bin) * sample_rate / static_cast<double>(size);
      const double upper = fc >= 16000.0 ? 1.0 : octave_lowpass(hz, fc * std::sqrt(2.0));
      const double lower = fc <= 62.5 ? 0.0 : octave_lowpass(hz, fc / std::sqrt(2.0));
      f[k] *= upper - lower;
    }
    fft.inv(v, f);
    for (Eigen::Index t = 0; t < x.cols(); ++t) out(c, t) = v[static_cast<std::size_t>(t)];
  }
  return out;
}

// Backward-integrated energy of the mean over rows [first, first + count).
inline std::vector<double> schroeder_edc(const Signal& x, Eigen::Index first, Eigen::Index count) {
  std::vector<double> edc(static_cast<std::size_t>(x.cols()));
  double acc = 0.0;
  for (Eigen::Index t = x.cols() - 1; t >= 0; --t) {
    acc += x.block(first, t, count, 1).squaredNorm() / static_cast<double>(count);
    edc[static_cast<std::size_t>(t)] = acc;
  }
  return edc;
}

// Largest deviation, in dB, between the energy decay curve of each order
// group (orders >= |min_order|) of |hoa| and the four-channel mean decay of
// |reference|, per octave band (62.5 Hz .. 16 kHz), evaluated over the range
// where the reference decay is within |range_db| of its start.
inline double max_band_edc_error_db(const Signal& hoa, const Signal& reference,
                                    double sample_rate, int min_order, double range_db) {
  const int order = static_cast<int>(std::lround(std::sqrt(hoa.rows()))) - 1;
  double worst = 0.0;
  for (double fc = 62.5; fc <= 16000.0; fc *= 2.0) {
    const Signal ref_band = octave_band(reference.topRows(4), sample_rate, fc);
    const Signal hoa_band = octave_band(hoa, sample_rate, fc);
    const std::vector<double> ref = schroeder_edc(ref_band, 0, 4);
    for (int l = min_order; l <= order; ++l) {
      const std::vector<double> got = schroeder_edc(hoa_band, l * l, 2 * l + 1);
      for (std::size_t t = 0; t < ref.size(); ++t) {
        if (10.0 * std::log10(ref[t] / ref[0]) < -range_db) break;
        worst = std::max(worst, std::abs(10.0 * std::log10(got[t] / ref[t])));
      }
    }
  }
  return worst;
}

// Diffuse first-order tail with frequency-dependent decay: a long,
// low-passed part plus a short broadband part.
inline Signal colored_diffuse_tail(double sample_rate, double length_s, std::uint32_t seed = 0) {
  const auto length = static_cast<Eigen::Index>(length_s * sample_rate);
  Signal slow = noise_tail(sample_rate, length, 0.0, 0.8, 1.0, seed + 11);
  const double a = std::exp(-2.0 * kTestPi * 1000.0 / sample_rate);
  for (Eigen::Index c = 0; c < 4; ++c) {
    double state = 0.0;
    for (Eigen::Index t = 0; t < length; ++t) {
      state = (1.0 - a) * slow(c, t) + a * state;
      slow(c, t) = state;
    }
  }
  return slow + noise_tail(sample_rate, length, 0.0, 0.3, 0.05, seed + 12);
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("arir_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace arir::testing

#endif  // ARIR_TESTS_SUPPORT_FIXTURES_HPP_
