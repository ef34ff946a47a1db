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

#ifndef ARIR_SNAPSHOT_HPP_
#define ARIR_SNAPSHOT_HPP_

#include <array>
#include <atomic>

namespace arir {

// Single-writer / single-reader triple buffer. The writer fills back() and
// publishes it; the reader picks up the newest published slot with acquire()
// and reads front(). Neither side blocks or allocates.
template <typename T>
class SnapshotExchange {
 public:
  explicit SnapshotExchange(const T& initial) : slots_{initial, initial, initial} {}

  SnapshotExchange(const SnapshotExchange&) = delete;
  SnapshotExchange& operator=(const SnapshotExchange&) = delete;

  // Writer side.
  T& back() { return slots_[back_]; }

  void publish() {
    const unsigned previous =
        state_.exchange(back_ | kFresh, std::memory_order_acq_rel);
    back_ = previous & kIndexMask;
  }

  // Reader side. Returns true if a newer snapshot became the front.
  bool acquire() {
    if ((state_.load(std::memory_order_acquire) & kFresh) == 0) return false;
    const unsigned previous = state_.exchange(front_, std::memory_order_acq_rel);
    front_ = previous & kIndexMask;
    return true;
  }

  const T& front() const { return slots_[front_]; }

 private:
  static constexpr unsigned kFresh = 4u;
  static constexpr unsigned kIndexMask = 3u;

  std::array<T, 3> slots_;
  std::atomic<unsigned> state_{1u};  // middle slot index | fresh flag
  unsigned back_ = 2u;
  unsigned front_ = 0u;
};

}  // namespace arir

#endif  // ARIR_SNAPSHOT_HPP_
