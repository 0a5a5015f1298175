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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>

#include "cdl/error.hpp"
#include "cdl/io/container.hpp"
#include "cdl/tee/arena.hpp"
#include "cdl/tee/ledger.hpp"
#include "cdl/tee/shared_buffer.hpp"

namespace cdl::tee {

// What a trusted function sees while a session invocation is in progress.
struct TrustedEnv {
  SecureArena& arena;
  CostLedger& ledger;
  std::span<SharedBuffer* const> buffers;
  std::uint32_t command = 0;
};

enum class SessionState { open, closed };

// A client-to-trusted-application session. Each invoke is one round trip
// into the Secure world: one switch in, one switch out, counted even when the
// trusted function throws.
class Session {
 public:
  Session(std::uint32_t id, std::string trusted_app, SecureArena& arena, CostLedger& ledger)
      : id_(id), trusted_app_(std::move(trusted_app)), arena_(&arena), ledger_(&ledger) {
    arena_->bind(id_);
  }

  Session(Session&& o) noexcept
      : id_(o.id_), trusted_app_(std::move(o.trusted_app_)), state_(o.state_),
        arena_(o.arena_), ledger_(o.ledger_) {
    o.state_ = SessionState::closed;
    o.arena_ = nullptr;
  }
  Session& operator=(Session&&) = delete;
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  ~Session() { close(); }

  void close() noexcept {
    if (state_ == SessionState::open && arena_) arena_->unbind(id_);
    state_ = SessionState::closed;
  }

  template <typename Fn>
  decltype(auto) invoke(std::uint32_t command, std::span<SharedBuffer* const> buffers, Fn&& fn) {
    if (state_ != SessionState::open) {
      throw StateError("invoke on closed session " + std::to_string(id_));
    }
    struct Switch {
      CostLedger& ledger;
      explicit Switch(CostLedger& l) : ledger(l) { ledger.record_context_switch(); }
      ~Switch() { ledger.record_context_switch(); }
    } guard(*ledger_);
    TrustedEnv env{*arena_, *ledger_, buffers, command};
    return std::forward<Fn>(fn)(env);
  }

  std::uint32_t id() const noexcept { return id_; }
  const std::string& trusted_app() const noexcept { return trusted_app_; }
  SessionState state() const noexcept { return state_; }

 private:
  std::uint32_t id_;
  std::string trusted_app_;
  SessionState state_ = SessionState::open;
  SecureArena* arena_;
  CostLedger* ledger_;
};

// Hands out sessions with unique ids.
class TeeContext {
 public:
  Session open_session(std::string trusted_app, SecureArena& arena, CostLedger& ledger) {
    return Session(next_id_++, std::move(trusted_app), arena, ledger);
  }

 private:
  std::uint32_t next_id_ = 1;
};

// Authenticates and decrypts a partition container straight into secure
// memory and charges its plaintext length to the ledger. On any failure
// nothing is allocated and the ledger is unchanged.
template <typename T = std::uint8_t>
SecureBuffer<T> ledger_decrypt(SecureArena& arena, CostLedger& ledger, io::ByteView container,
                               const io::Key& key,
                               std::optional<std::uint16_t> expected_partition = std::nullopt) {
  static_assert(std::is_trivially_copyable_v<T>);
  const io::ContainerHeader h = io::parse_container_header(container);
  if (h.plaintext_len % sizeof(T) != 0) {
    throw FormatError("partition payload of " + std::to_string(h.plaintext_len) +
                      " bytes is not a whole number of elements");
  }
  SecureBuffer<T> out(arena, h.plaintext_len / sizeof(T));
  io::decrypt_partition_into(container, key, out.bytes());
  if (expected_partition && h.partition_id != *expected_partition) {
    throw IntegrityError("container holds partition " + std::to_string(h.partition_id) +
                         ", expected " + std::to_string(*expected_partition));
  }
  ledger.record_decrypt(h.plaintext_len);
  return out;
}

}  // namespace cdl::tee
