/**
 * Copyright 2026 The CDL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdl/error.hpp"

namespace cdl::tee {

using AllocationId = std::uint64_t;

template <typename T>
class SecureBuffer;

// Capped allocator standing in for a trusted application's secure memory.
// Usage never exceeds capacity: a failing allocation leaves the arena as it
// was. Not thread-safe; an arena belongs to exactly one session.
class SecureArena {
 public:
  static constexpr std::size_t kDefaultCapacity = std::size_t{7} << 20;

  explicit SecureArena(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {}

  SecureArena(const SecureArena&) = delete;
  SecureArena& operator=(const SecureArena&) = delete;

  AllocationId allocate(std::size_t bytes) {
    if (bytes == 0) throw ValidationError("secure allocation of zero bytes");
    if (bytes > capacity_ - usage_) {
      throw OutOfSecureMemory("secure arena: allocating " + std::to_string(bytes) +
                              " bytes with " + std::to_string(usage_) + " of " +
                              std::to_string(capacity_) + " in use");
    }
    const AllocationId id = next_id_++;
    live_.emplace(id, bytes);
    usage_ += bytes;
    peak_ = std::max(peak_, usage_);
    window_peak_ = std::max(window_peak_, usage_);
    return id;
  }

  void release(AllocationId id) {
    auto it = live_.find(id);
    if (it == live_.end()) throw StateError("release of unknown secure allocation");
    usage_ -= it->second;
    live_.erase(it);
  }

  template <typename T>
  SecureBuffer<T> make_buffer(std::size_t count);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t usage() const noexcept { return usage_; }
  std::size_t peak() const noexcept { return peak_; }
  std::size_t live_allocations() const noexcept { return live_.size(); }

  // Peak since the last reset_window(); used for per-partition records.
  std::size_t window_peak() const noexcept { return window_peak_; }
  void reset_window() noexcept { window_peak_ = usage_; }

  // Sessions claim the arena while open.
  void bind(std::uint32_t session) {
    if (owner_ != 0 && owner_ != session) {
      throw StateError("secure arena already belongs to session " + std::to_string(owner_));
    }
    owner_ = session;
  }
  void unbind(std::uint32_t session) noexcept {
    if (owner_ == session) owner_ = 0;
  }

 private:
  std::size_t capacity_;
  std::size_t usage_ = 0;
  std::size_t peak_ = 0;
  std::size_t window_peak_ = 0;
  AllocationId next_id_ = 1;
  std::uint32_t owner_ = 0;
  std::unordered_map<AllocationId, std::size_t> live_;
};

// Typed storage charged against a SecureArena; released on destruction.
// Zero-length buffers do not touch the arena.
template <typename T>
class SecureBuffer {
 public:
  SecureBuffer() = default;

  SecureBuffer(SecureArena& arena, std::size_t count) : arena_(&arena) {
    if (count == 0) return;
    id_ = arena.allocate(count * sizeof(T));
    data_.resize(count);
  }

  SecureBuffer(SecureBuffer&& o) noexcept
      : arena_(std::exchange(o.arena_, nullptr)), id_(std::exchange(o.id_, 0)),
        data_(std::move(o.data_)) {}

  SecureBuffer& operator=(SecureBuffer&& o) noexcept {
    if (this != &o) {
      reset();
      arena_ = std::exchange(o.arena_, nullptr);
      id_ = std::exchange(o.id_, 0);
      data_ = std::move(o.data_);
    }
    return *this;
  }

  SecureBuffer(const SecureBuffer&) = delete;
  SecureBuffer& operator=(const SecureBuffer&) = delete;

  ~SecureBuffer() { reset(); }

  void reset() noexcept {
    if (arena_ && id_ != 0) arena_->release(id_);
    id_ = 0;
    std::fill(data_.begin(), data_.end(), T{});
    data_.clear();
    data_.shrink_to_fit();
  }

  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::span<std::uint8_t> bytes() noexcept {
    return {reinterpret_cast<std::uint8_t*>(data_.data()), data_.size() * sizeof(T)};
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

 private:
  SecureArena* arena_ = nullptr;
  AllocationId id_ = 0;
  std::vector<T> data_;
};

template <typename T>
SecureBuffer<T> SecureArena::make_buffer(std::size_t count) {
  return SecureBuffer<T>(*this, count);
}

}  // namespace cdl::tee
