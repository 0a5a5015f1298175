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

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "cdl/io/bytes.hpp"
#include "cdl/tee/shared_buffer.hpp"

namespace cdl::tee {

// Audits shared-memory write logs for confidential plaintext. Indexes every
// 8-byte window of every logged write; a secret leaks if any of its windows
// is present. Windows with fewer than kMinNonZero non-zero bytes are skipped:
// runs of zeros are common in container headers and ReLU outputs, and a
// window carrying one or two bytes of information matches by chance.
class TaintScanner {
 public:
  static constexpr std::size_t kWindow = 8;
  static constexpr int kMinNonZero = 4;

  static bool informative(std::uint64_t w) noexcept {
    int n = 0;
    for (int i = 0; i < 8; ++i) n += ((w >> (8 * i)) & 0xff) != 0;
    return n >= kMinNonZero;
  }

  explicit TaintScanner(std::span<const SharedBuffer* const> buffers) {
    for (const SharedBuffer* b : buffers) {
      for (const auto& rec : b->log()) add(rec.content);
      add(b->contents());  // windows straddling adjacent writes
    }
  }

  // Offset of the first leaked window of `secret`, if any.
  std::optional<std::size_t> find(io::ByteView secret) const {
    if (secret.size() < kWindow) return std::nullopt;
    for (std::size_t i = 0; i + kWindow <= secret.size(); ++i) {
      const std::uint64_t w = window(secret, i);
      if (informative(w) && windows_.count(w)) return i;
    }
    return std::nullopt;
  }

  bool clean(std::span<const io::ByteView> secrets) const {
    for (auto s : secrets) {
      if (find(s)) return false;
    }
    return true;
  }

  std::size_t indexed_windows() const noexcept { return windows_.size(); }

 private:
  static std::uint64_t window(io::ByteView b, std::size_t at) {
    std::uint64_t w;
    std::memcpy(&w, b.data() + at, kWindow);
    return w;
  }

  void add(io::ByteView b) {
    for (std::size_t i = 0; i + kWindow <= b.size(); ++i) windows_.insert(window(b, i));
  }

  std::unordered_set<std::uint64_t> windows_;
};

}  // namespace cdl::tee
