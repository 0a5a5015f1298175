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

// Thin RAII wrappers over OpenSSL for the two primitives partition containers
// need: AES-128-CTR and HMAC-SHA256.

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/params.h>
#include <openssl/rand.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "cdl/error.hpp"
#include "cdl/io/bytes.hpp"

namespace cdl::io {

inline constexpr std::size_t kKeyBytes = 16;
inline constexpr std::size_t kNonceBytes = 16;
inline constexpr std::size_t kMacBytes = 32;

using Key = std::array<std::uint8_t, kKeyBytes>;
using Nonce = std::array<std::uint8_t, kNonceBytes>;
using Mac = std::array<std::uint8_t, kMacBytes>;

class CryptoError : public Error {
 public:
  using Error::Error;
};

inline Key make_key(ByteView key) {
  if (key.size() != kKeyBytes) {
    throw ValidationError("key must be " + std::to_string(kKeyBytes) + " bytes, got " +
                          std::to_string(key.size()));
  }
  Key k;
  std::copy(key.begin(), key.end(), k.begin());
  return k;
}

// 32 hex characters -> 16-byte key.
inline Key parse_key_hex(std::string_view hex) {
  if (hex.size() != 2 * kKeyBytes) {
    throw ValidationError("key must be " + std::to_string(2 * kKeyBytes) + " hex characters, got " +
                          std::to_string(hex.size()));
  }
  auto nibble = [&](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw ValidationError("key contains non-hex character '" + std::string(1, c) + "'");
  };
  Key k;
  for (std::size_t i = 0; i < kKeyBytes; ++i) {
    k[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return k;
}

inline void random_bytes(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw CryptoError("RAND_bytes failed");
  }
}

inline Nonce random_nonce() {
  Nonce n;
  random_bytes(n);
  return n;
}

inline Key random_key() {
  Key k;
  random_bytes(k);
  return k;
}

// AES-128 in CTR mode with `iv` as the initial 128-bit counter block.
// `out` may alias `in`.
inline void aes128_ctr(const Key& key, const Nonce& iv, ByteView in, std::span<std::uint8_t> out) {
  if (out.size() != in.size()) throw CryptoError("aes128_ctr: output size mismatch");
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                      &EVP_CIPHER_CTX_free);
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(), iv.data()) != 1) {
    throw CryptoError("AES-128-CTR init failed");
  }
  std::size_t done = 0;
  // EVP_EncryptUpdate takes an int length.
  constexpr std::size_t kStep = std::size_t{1} << 30;
  while (done < in.size()) {
    const std::size_t n = std::min(kStep, in.size() - done);
    int written = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data() + done, &written, in.data() + done,
                          static_cast<int>(n)) != 1 ||
        static_cast<std::size_t>(written) != n) {
      throw CryptoError("AES-128-CTR update failed");
    }
    done += n;
  }
}

// Incremental HMAC-SHA256.
class HmacSha256 {
 public:
  explicit HmacSha256(ByteView key)
      : mac_(EVP_MAC_fetch(nullptr, "HMAC", nullptr), &EVP_MAC_free), ctx_(nullptr, &EVP_MAC_CTX_free) {
    if (!mac_) throw CryptoError("HMAC unavailable");
    ctx_.reset(EVP_MAC_CTX_new(mac_.get()));
    char digest[] = "SHA256";
    OSSL_PARAM params[] = {OSSL_PARAM_construct_utf8_string("digest", digest, 0),
                           OSSL_PARAM_construct_end()};
    if (!ctx_ || EVP_MAC_init(ctx_.get(), key.data(), key.size(), params) != 1) {
      throw CryptoError("HMAC init failed");
    }
  }

  HmacSha256& update(ByteView data) {
    if (!data.empty() && EVP_MAC_update(ctx_.get(), data.data(), data.size()) != 1) {
      throw CryptoError("HMAC update failed");
    }
    return *this;
  }

  Mac finish() {
    Mac out;
    std::size_t len = 0;
    if (EVP_MAC_final(ctx_.get(), out.data(), &len, out.size()) != 1 || len != out.size()) {
      throw CryptoError("HMAC final failed");
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MAC, decltype(&EVP_MAC_free)> mac_;
  std::unique_ptr<EVP_MAC_CTX, decltype(&EVP_MAC_CTX_free)> ctx_;
};

inline Mac hmac_sha256(ByteView key, ByteView data) { return HmacSha256(key).update(data).finish(); }

inline bool equal_constant_time(ByteView a, ByteView b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace cdl::io
