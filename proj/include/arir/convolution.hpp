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

#ifndef ARIR_CONVOLUTION_HPP_
#define ARIR_CONVOLUTION_HPP_

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <memory>
#include <mutex>
#include <new>
#include <span>
#include <vector>

#include <fftw3.h>

#include "arir/errors.hpp"

namespace arir {

namespace detail {

// The FFTW planner is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  std::memset(static_cast<void*>(p), 0, sizeof(T) * n);
  return FftwBuffer<T>(p);
}

}  // namespace detail

// Real FFT of a fixed even size with owned, aligned buffers. Spectra are kept
// as separate real/imaginary arrays of size/2 + 1 bins.
class RealFft {
 public:
  explicit RealFft(std::size_t size)
      : size_(size),
        time_(detail::fftw_alloc<double>(size)),
        freq_(detail::fftw_alloc<fftw_complex>(size / 2 + 1)) {
    if (size < 2 || size % 2 != 0) throw ConfigError("FFT size must be even");
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    const int n = static_cast<int>(size);
    forward_ = fftw_plan_dft_r2c_1d(n, time_.get(), freq_.get(), FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, freq_.get(), time_.get(), FFTW_ESTIMATE);
  }

  ~RealFft() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return size_; }
  std::size_t bins() const { return size_ / 2 + 1; }

  // |in| is zero-extended to the FFT size.
  void forward(std::span<const double> in, double* re, double* im) {
    const std::size_t n = std::min(in.size(), size_);
    std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(n), time_.get());
    std::fill(time_.get() + n, time_.get() + size_, 0.0);
    fftw_execute(forward_);
    for (std::size_t k = 0; k < bins(); ++k) {
      re[k] = freq_[k][0];
      im[k] = freq_[k][1];
    }
  }

  // Unnormalized inverse; the result is scaled by size().
  const double* inverse(const double* re, const double* im) {
    for (std::size_t k = 0; k < bins(); ++k) {
      freq_[k][0] = re[k];
      freq_[k][1] = im[k];
    }
    fftw_execute(inverse_);
    return time_.get();
  }

 private:
  std::size_t size_;
  detail::FftwBuffer<double> time_;
  detail::FftwBuffer<fftw_complex> freq_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

// Uniformly partitioned overlap-save convolution of one input stream with a
// fixed set of filters (one output channel per filter). Partition size equals
// the block size. process() does not allocate.
class PartitionedConvolver {
 public:
  PartitionedConvolver(std::size_t block_size,
                       const std::vector<std::vector<double>>& filters)
      : block_(block_size), fft_(2 * block_size) {
    if (block_size == 0) throw ConfigError("block size must be positive");
    channels_ = filters.size();
    std::size_t longest = 1;
    for (const auto& f : filters) longest = std::max(longest, f.size());
    partitions_ = (longest + block_ - 1) / block_;
    bins_ = fft_.bins();

    filter_re_.assign(channels_ * partitions_ * bins_, 0.0);
    filter_im_.assign(channels_ * partitions_ * bins_, 0.0);
    for (std::size_t c = 0; c < channels_; ++c) load_filter(c, filters[c]);
    fdl_re_.assign(partitions_ * bins_, 0.0);
    fdl_im_.assign(partitions_ * bins_, 0.0);
    acc_re_.assign(bins_, 0.0);
    acc_im_.assign(bins_, 0.0);
    input_.assign(2 * block_, 0.0);
  }

  std::size_t block_size() const { return block_; }
  std::size_t channels() const { return channels_; }
  std::size_t partitions() const { return partitions_; }

  // Replaces the filter of channel |c| without touching the input history.
  // Filters longer than the partitioned length are truncated.
  void load_filter(std::size_t c, std::span<const double> f) {
    for (std::size_t k = 0; k < partitions_; ++k) {
      const std::size_t begin = std::min(k * block_, f.size());
      const std::size_t end = std::min(begin + block_, f.size());
      const std::size_t offset = (c * partitions_ + k) * bins_;
      fft_.forward(f.subspan(begin, end - begin), filter_re_.data() + offset,
                   filter_im_.data() + offset);
    }
  }

  void reset() {
    std::fill(fdl_re_.begin(), fdl_re_.end(), 0.0);
    std::fill(fdl_im_.begin(), fdl_im_.end(), 0.0);
    std::fill(input_.begin(), input_.end(), 0.0);
    head_ = 0;
  }

  // Consumes one block of |in| and writes one block per channel: output
  // channel c goes to out[c * out_stride .. + block_size).
  void process(std::span<const double> in, double* out, std::size_t out_stride) {
    std::copy(input_.begin() + static_cast<std::ptrdiff_t>(block_), input_.end(),
              input_.begin());
    std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(block_),
              input_.begin() + static_cast<std::ptrdiff_t>(block_));
    head_ = (head_ + partitions_ - 1) % partitions_;
    fft_.forward(input_, fdl_re_.data() + head_ * bins_,
                 fdl_im_.data() + head_ * bins_);

    const double scale = 1.0 / static_cast<double>(fft_.size());
    for (std::size_t c = 0; c < channels_; ++c) {
      std::fill(acc_re_.begin(), acc_re_.end(), 0.0);
      std::fill(acc_im_.begin(), acc_im_.end(), 0.0);
      for (std::size_t k = 0; k < partitions_; ++k) {
        const std::size_t slot = ((head_ + k) % partitions_) * bins_;
        const double* xr = fdl_re_.data() + slot;
        const double* xi = fdl_im_.data() + slot;
        const std::size_t offset = (c * partitions_ + k) * bins_;
        const double* hr = filter_re_.data() + offset;
        const double* hi = filter_im_.data() + offset;
        double* ar = acc_re_.data();
        double* ai = acc_im_.data();
        for (std::size_t b = 0; b < bins_; ++b) {
          ar[b] += xr[b] * hr[b] - xi[b] * hi[b];
          ai[b] += xr[b] * hi[b] + xi[b] * hr[b];
        }
      }
      const double* y = fft_.inverse(acc_re_.data(), acc_im_.data());
      double* dst = out + c * out_stride;
      for (std::size_t t = 0; t < block_; ++t) dst[t] = y[block_ + t] * scale;
    }
  }

 private:
  std::size_t block_;
  RealFft fft_;
  std::size_t channels_ = 0;
  std::size_t partitions_ = 0;
  std::size_t bins_ = 0;
  std::size_t head_ = 0;
  std::vector<double> filter_re_;
  std::vector<double> filter_im_;
  std::vector<double> fdl_re_;
  std::vector<double> fdl_im_;
  std::vector<double> acc_re_;
  std::vector<double> acc_im_;
  std::vector<double> input_;
};

}  // namespace arir

#endif  // ARIR_CONVOLUTION_HPP_
