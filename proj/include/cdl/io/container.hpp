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

// Partition container, all integers little-endian:
//
//   magic "CDLP" | version u16 = 1 | partition_id u16 | nonce[16] |
//   plaintext_len u64 | ciphertext[plaintext_len] | mac[32]
//
// Ciphertext is AES-128-CTR under the master key with the nonce as initial
// counter. The MAC is HMAC-SHA256 over every byte before it, keyed with
// HMAC-SHA256(master key, "mac"). Encrypt-then-MAC: the MAC is checked before
// any plaintext is produced.

#include <array>
#include <cstdint>
#include <cstring>
#include <span>

#include "cdl/error.hpp"
#include "cdl/io/bytes.hpp"
#include "cdl/io/crypto.hpp"

namespace cdl::io {

inline constexpr std::array<std::uint8_t, 4> kContainerMagic{'C', 'D', 'L', 'P'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 2 + 2 + kNonceBytes + 8;
inline constexpr std::size_t kContainerOverheadBytes = kContainerHeaderBytes + kMacBytes;

struct ContainerHeader {
  std::uint16_t version = kContainerVersion;
  std::uint16_t partition_id = 0;
  Nonce nonce{};
  std::uint64_t plaintext_len = 0;
};

inline Mac derive_mac_key(const Key& key) {
  static constexpr std::uint8_t label[] = {'m', 'a', 'c'};
  return hmac_sha256(key, label);
}

// Structural checks only; no authentication.
inline ContainerHeader parse_container_header(ByteView container) {
  if (container.size() < kContainerOverheadBytes) {
    throw FormatError("container is " + std::to_string(container.size()) +
                      " bytes, shorter than the fixed " +
                      std::to_string(kContainerOverheadBytes) + "-byte frame");
  }
  ByteReader rd(container);
  auto magic = rd.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kContainerMagic.begin())) {
    throw FormatError("bad container magic");
  }
  ContainerHeader h;
  h.version = rd.u16();
  if (h.version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(h.version));
  }
  h.partition_id = rd.u16();
  auto nonce = rd.raw(kNonceBytes);
  std::copy(nonce.begin(), nonce.end(), h.nonce.begin());
  h.plaintext_len = rd.u64();
  if (h.plaintext_len != container.size() - kContainerOverheadBytes) {
    throw FormatError("container declares " + std::to_string(h.plaintext_len) +
                      " plaintext bytes but frames " +
                      std::to_string(container.size() - kContainerOverheadBytes));
  }
  return h;
}

inline Bytes encrypt_partition(ByteView blob, const Key& key, std::uint16_t partition_id,
                               const Nonce& nonce) {
  Bytes out;
  out.reserve(kContainerOverheadBytes + blob.size());
  ByteWriter wr(out);
  wr.raw(kContainerMagic);
  wr.u16(kContainerVersion);
  wr.u16(partition_id);
  wr.raw(nonce);
  wr.u64(blob.size());
  out.resize(kContainerHeaderBytes + blob.size());
  aes128_ctr(key, nonce, blob, std::span(out).subspan(kContainerHeaderBytes));
  const Mac mac = hmac_sha256(derive_mac_key(key), out);
  wr.raw(mac);
  return out;
}

// Authenticates the container. Returns its header.
inline ContainerHeader verify_container(ByteView container, const Key& key) {
  ContainerHeader h = parse_container_header(container);
  const std::size_t mac_at = container.size() - kMacBytes;
  const Mac expected = hmac_sha256(derive_mac_key(key), container.first(mac_at));
  if (!equal_constant_time(expected, container.subspan(mac_at))) {
    throw IntegrityError("partition " + std::to_string(h.partition_id) +
                         " failed authentication");
  }
  return h;
}

// Verifies, then decrypts into `out`, which must be exactly plaintext_len
// bytes. `out` is untouched when verification fails.
inline ContainerHeader decrypt_partition_into(ByteView container, const Key& key,
                                              std::span<std::uint8_t> out) {
  ContainerHeader h = verify_container(container, key);
  if (out.size() != h.plaintext_len) throw ValidationError("decrypt buffer size mismatch");
  aes128_ctr(key, h.nonce, container.subspan(kContainerHeaderBytes, h.plaintext_len), out);
  return h;
}

inline Bytes decrypt_partition(ByteView container, const Key& key) {
  const ContainerHeader h = parse_container_header(container);
  Bytes out(h.plaintext_len);
  decrypt_partition_into(container, key, out);
  return out;
}

inline Bytes encrypt_partition(ByteView blob, ByteView key, std::uint16_t partition_id,
                               const Nonce& nonce) {
  return encrypt_partition(blob, make_key(key), partition_id, nonce);
}

inline Bytes decrypt_partition(ByteView container, ByteView key) {
  return decrypt_partition(container, make_key(key));
}

}  // namespace cdl::io
