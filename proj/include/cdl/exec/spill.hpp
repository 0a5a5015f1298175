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
#include <vector>

#include "cdl/error.hpp"
#include "cdl/io/bytes.hpp"
#include "cdl/io/container.hpp"
#include "cdl/tee/arena.hpp"
#include "cdl/tee/ledger.hpp"
#include "cdl/tee/session.hpp"
#include "cdl/tee/shared_buffer.hpp"

namespace cdl::exec {

// Partition id stamped on spill chunk containers.
inline constexpr std::uint16_t kSpillPartitionId = 0xffff;

// Activations parked in shared memory as a sequence of encrypted chunks.
struct SpilledActivations {
  struct Chunk {
    std::size_t offset = 0;  // container position in the shared buffer
    std::size_t length = 0;  // container length
    std::size_t first = 0;   // index of the chunk's first activation
    std::size_t count = 0;   // activations in the chunk
  };

  const tee::SharedBuffer* buffer = nullptr;
  std::vector<Chunk> chunks;
  std::size_t chunk_bytes = 0;
  std::size_t total = 0;
};

// Encrypts `activations` in chunks of `chunk_bytes` plaintext bytes (rounded
// down to whole floats) and appends them to `buffer` as ciphertext.
inline SpilledActivations spill_activations(std::span<const float> activations,
                                            std::size_t chunk_bytes, const io::Key& key,
                                            tee::SharedBuffer& buffer) {
  const std::size_t per_chunk = chunk_bytes / sizeof(float);
  if (per_chunk == 0) throw ValidationError("spill chunk must hold at least one activation");
  SpilledActivations out;
  out.buffer = &buffer;
  out.chunk_bytes = per_chunk * sizeof(float);
  out.total = activations.size();
  for (std::size_t first = 0; first < activations.size(); first += per_chunk) {
    const std::size_t n = std::min(per_chunk, activations.size() - first);
    const io::Bytes c = io::encrypt_partition(io::as_bytes(activations.subspan(first, n)), key,
                                              kSpillPartitionId, io::random_nonce());
    const std::size_t at = buffer.append(c, tee::Taint::ciphertext);
    out.chunks.push_back({at, c.size(), first, n});
  }
  return out;
}

// Decrypts spilled chunks one at a time into the arena and hands each to
// `consume(values, first_index)`. Each chunk is released before the next is
// decrypted, so every pass over the activations is charged in full.
template <typename Consumer>
void stream_spilled(const SpilledActivations& spilled, const io::Key& key, tee::SecureArena& arena,
                    tee::CostLedger& ledger, Consumer&& consume) {
  for (const auto& chunk : spilled.chunks) {
    const io::ByteView container = spilled.buffer->read(chunk.offset, chunk.length);
    tee::SecureBuffer<float> values =
        tee::ledger_decrypt<float>(arena, ledger, container, key, kSpillPartitionId);
    if (values.size() != chunk.count) throw FormatError("spill chunk has the wrong length");
    consume(std::span<const float>(values.span()), chunk.first);
  }
}

}  // namespace cdl::exec
