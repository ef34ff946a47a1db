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

#include "arir/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "support/fixtures.hpp"

namespace arir::dsp {

namespace {

using testing::kTestPi;

// |H(f)| from an impulse response by direct evaluation of its DTFT.
double MagnitudeAt(const std::vector<double>& h, double f, double fs) {
  std::complex<double> acc = 0.0;
  for (std::size_t t = 0; t < h.size(); ++t) {
    acc += h[t] * std::polar(1.0, -2.0 * kTestPi * f * static_cast<double>(t) / fs);
  }
  return std::abs(acc);
}

std::vector<double> ImpulseResponse(const Cascade& c, std::size_t n) {
  std::vector<double> h(n, 0.0);
  h[0] = 1.0;
  filter_in_place(c, h);
  return h;
}

// Bilinear-transformed Butterworth magnitude.
double ButterworthMagnitude(int order, double fc, double f, double fs, bool highpass) {
  double ratio = std::tan(kTestPi * f / fs) / std::tan(kTestPi * fc / fs);
  if (highpass) ratio = 1.0 / ratio;
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2.0 * order));
}

TEST(ButterworthTest, MatchesAnalyticMagnitude) {
  const double fs = 48000.0;
  for (bool highpass : {false, true}) {
    for (int order : {2, 4, 6}) {
      const double fc = highpass ? 200.0 : 3000.0;
      const std::vector<double> h = ImpulseResponse(butterworth(order, fc, fs, highpass), 1 << 15);
      for (double f : {50.0, 100.0, 200.0, 1000.0, 3000.0, 6000.0, 12000.0}) {
        EXPECT_NEAR(MagnitudeAt(h, f, fs), ButterworthMagnitude(order, fc, f, fs, highpass), 1e-6)
            << "order " << order << " f " << f << " highpass " << highpass;
      }
    }
  }
}

TEST(ButterworthTest, RejectsBadParameters) {
  EXPECT_THROW(butterworth(3, 100.0, 48000.0, false), ConfigError);
  EXPECT_THROW(butterworth(4, 30000.0, 48000.0, false), ConfigError);
  EXPECT_THROW(butterworth(4, 0.0, 48000.0, true), ConfigError);
}

TEST(FiltfiltTest, ImpulseResponseIsEven) {
  const Cascade lp = butterworth(4, 1000.0, 48000.0, false);
  std::vector<double> x(2001, 0.0);
  x[1000] = 1.0;
  const std::vector<double> y = filtfilt(lp, x, settle_padding(1000.0, 48000.0));
  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  for (int k = 1; k <= 1000; ++k) EXPECT_NEAR(y[1000 - k], y[1000 + k], 1e-12 * peak);
  EXPECT_EQ(std::max_element(y.begin(), y.end()) - y.begin(), 1000);
}

TEST(WindowTest, HammingIsSymmetricUnitSum) {
  for (std::size_t n : {1u, 5u, 25u, 24u}) {
    const std::vector<double> w = hamming(n);
    double sum = 0.0;
    for (double v : w) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-15);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(w[k], w[n - 1 - k], 1e-16);
  }
  // Raw Hamming endpoints are 0.08 of the center value.
  const std::vector<double> w = hamming(25);
  EXPECT_NEAR(w[0] / w[12], 0.08, 1e-12);
}

TEST(WindowTest, OddLengths) {
  EXPECT_EQ(odd_length(0.25e-3, 48000.0), 13u);  // 12 -> 13
  EXPECT_EQ(odd_length(0.5e-3, 48000.0), 25u);   // 24 -> 25
  EXPECT_EQ(odd_length(0.5e-3, 44100.0), 23u);   // 22.05 -> 22 -> 23
}

TEST(CenteredFirTest, ZeroPaddedMovingAverage) {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y = centered_fir(x, boxcar(3));
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  EXPECT_NEAR(y[1], 2.0, 1e-15);
  EXPECT_NEAR(y[3], 7.0 / 3.0, 1e-15);
}

TEST(LocalMedianTest, MatchesSortedWindow) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(200);
  for (double& v : x) v = u(rng);
  for (std::ptrdiff_t center : {0, 3, 100, 199}) {
    for (std::ptrdiff_t half : {0, 2, 7}) {
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, center - half);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(200, center + half + 1);
      std::vector<double> w(x.begin() + lo, x.begin() + hi);
      std::sort(w.begin(), w.end());
      const std::size_t m = w.size();
      const double expected = m % 2 ? w[m / 2] : 0.5 * (w[m / 2 - 1] + w[m / 2]);
      EXPECT_DOUBLE_EQ(local_median(x, center, half), expected);
    }
  }
}

TEST(LagrangeTest, IntegerDelaysAreExact) {
  for (int d : {0, 1, 2, 17}) {
    const FractionalDelay fd = lagrange3(d);
    std::vector<double> x = {0.5, -1.0, 2.0, 3.0, 0.25};
    const std::vector<double> y = fractional_shift(x, d, x.size() + 20);
    for (std::size_t t = 0; t < y.size(); ++t) {
      const double expected = t >= static_cast<std::size_t>(d) && t - d < x.size() ? x[t - d] : 0.0;
      EXPECT_EQ(y[t], expected) << "delay " << d;
    }
    double sum = 0.0;
    for (double v : fd.taps) sum += v;
    EXPECT_EQ(sum, 1.0);
  }
}

TEST(LagrangeTest, CubicsAreReproducedExactly) {
  // Third-order Lagrange interpolation is exact on cubic polynomials.
  auto p = [](double t) { return 0.3 + 0.1 * t - 0.02 * t * t + 0.001 * t * t * t; };
  std::vector<double> x(64);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = p(static_cast<double>(t));
  for (double d : {0.3, 2.5, 7.75, -3.4}) {
    const std::vector<double> y = fractional_shift(x, d, x.size());
    for (std::size_t t = 12; t < 50; ++t) {
      EXPECT_NEAR(y[t], p(static_cast<double>(t) - d), 1e-9) << "delay " << d;
    }
  }
}

TEST(LagrangeTest, ShiftAndInverseShiftRoundTrip) {
  // Band-limited content well below Nyquist.
  const double fs = 48000.0;
  std::vector<double> x(4800);
  for (std::size_t t = 0; t < x.size(); ++t) {
    x[t] = std::sin(2.0 * kTestPi * 300.0 * t / fs) + 0.5 * std::sin(2.0 * kTestPi * 1100.0 * t / fs);
  }
  const double shift = 0.002915 * fs;
  const std::vector<double> forward = fractional_shift(x, -shift, x.size());
  const std::vector<double> back = fractional_shift(forward, shift, x.size());
  double err = 0.0, ref = 0.0;
  for (std::size_t t = 400; t < 4400; ++t) {
    err += (back[t] - x[t]) * (back[t] - x[t]);
    ref += x[t] * x[t];
  }
  EXPECT_LT(testing::db(std::sqrt(err / ref)), -60.0);
}

TEST(OctaveBankTest, BandsSumToInput) {
  const OctaveBank bank(48000.0);
  EXPECT_EQ(bank.bands(), 9u);
  EXPECT_EQ(bank.centers().front(), 62.5);
  EXPECT_EQ(bank.centers().back(), 16000.0);
  const std::vector<double> x = testing::white_noise(9600, 3);
  const auto bands = bank.split(x);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double sum = 0.0;
    for (const auto& b : bands) sum += b[t];
    EXPECT_NEAR(sum, x[t], 1e-12);
  }
}

TEST(OctaveBankTest, SineLandsInItsBand) {
  const double fs = 48000.0;
  const OctaveBank bank(fs);
  std::vector<double> x(48000);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(2.0 * kTestPi * 1000.0 * t / fs);
  const auto bands = bank.split(x);
  std::vector<double> energy;
  for (const auto& b : bands) {
    double e = 0.0;
    for (std::size_t t = 8000; t < 40000; ++t) e += b[t] * b[t];
    energy.push_back(e);
  }
  const auto loudest = std::max_element(energy.begin(), energy.end()) - energy.begin();
  EXPECT_EQ(bank.centers()[static_cast<std::size_t>(loudest)], 1000.0);
}

TEST(OctaveBankTest, LowRatesDropUpperBands) {
  const OctaveBank bank(16000.0);
  EXPECT_EQ(bank.centers().back(), 4000.0);
}

}  // namespace

}  // namespace arir::dsp
