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
#include <string>
#include <utility>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/io/bytes.hpp"

namespace cdl::tee {

// What a write into shared memory may contain. There is deliberately no tag
// for confidential plaintext.
enum class Taint { public_data, ciphertext };

struct WriteRecord {
  std::size_t offset = 0;
  Taint tag = Taint::public_data;
  io::Bytes content;
};

// Normal-world memory registered with the TEE. Every write is logged with its
// taint tag and a copy of the bytes written, so a run can be audited after
// the fact even if regions were later overwritten.
class SharedBuffer {
 public:
  explicit SharedBuffer(std::string name = {}) : name_(std::move(name)) {}

  void write(std::size_t offset, io::ByteView data, Taint tag) {
    if (offset + data.size() > bytes_.size()) bytes_.resize(offset + data.size());
    std::copy(data.begin(), data.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(offset));
    log_.push_back({offset, tag, io::Bytes(data.begin(), data.end())});
  }

  std::size_t append(io::ByteView data, Taint tag) {
    const std::size_t at = bytes_.size();
    write(at, data, tag);
    return at;
  }

  io::ByteView read(std::size_t offset, std::size_t length) const {
    if (offset > bytes_.size() || length > bytes_.size() - offset) {
      throw RangeError("shared buffer '" + name_ + "': read past end");
    }
    return io::ByteView(bytes_).subspan(offset, length);
  }

  // Models the untrusted OS modifying shared memory behind the TEE's back.
  // Not logged: the log records what the system wrote.
  void tamper(std::size_t offset, std::uint8_t xor_mask) {
    if (offset >= bytes_.size()) throw RangeError("tamper past end of shared buffer");
    bytes_[offset] ^= xor_mask;
  }

  void clear() { bytes_.clear(); }

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return bytes_.size(); }
  io::ByteView contents() const noexcept { return bytes_; }
  const std::vector<WriteRecord>& log() const noexcept { return log_; }

 private:
  std::string name_;
  io::Bytes bytes_;
  std::vector<WriteRecord> log_;
};

}  // namespace cdl::tee
