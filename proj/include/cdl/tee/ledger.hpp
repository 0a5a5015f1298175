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
#include <string>
#include <vector>

#include "cdl/error.hpp"

namespace cdl::tee {

// Per-event costs. t_cs is one one-way world switch; t_d is one decrypted
// byte. Defaults are the Raspberry Pi 3 / OP-TEE measurements.
struct CostConstants {
  double context_switch_seconds = 75.1e-6;
  double decrypt_seconds_per_byte = 163.7e-9;

  void validate() const {
    if (!(context_switch_seconds > 0.0) || !(decrypt_seconds_per_byte > 0.0)) {
      throw ValidationError("cost constants must be positive");
    }
  }
};

struct PartitionRecord {
  std::uint32_t partition_id = 0;
  std::uint64_t decrypted_bytes = 0;
  std::uint64_t arena_peak = 0;
};

// Confidentiality-relevant event counters. Counters only ever grow.
class CostLedger {
 public:
  void record_context_switch() noexcept { ++context_switches_; }
  void record_decrypt(std::uint64_t bytes) noexcept { decrypted_bytes_ += bytes; }
  void record_partition(const PartitionRecord& r) { partitions_.push_back(r); }

  std::uint64_t context_switches() const noexcept { return context_switches_; }
  std::uint64_t decrypted_bytes() const noexcept { return decrypted_bytes_; }
  const std::vector<PartitionRecord>& partitions() const noexcept { return partitions_; }

 private:
  std::uint64_t context_switches_ = 0;
  std::uint64_t decrypted_bytes_ = 0;
  std::vector<PartitionRecord> partitions_;
};

// Added latency of running `invocations` trusted calls (two switches each)
// that together decrypt `bytes`: 2 * L * t_cs + B * t_d.
inline double estimate_overhead(std::uint64_t invocations, std::uint64_t bytes,
                                const CostConstants& c = {}) {
  c.validate();
  return 2.0 * static_cast<double>(invocations) * c.context_switch_seconds +
         static_cast<double>(bytes) * c.decrypt_seconds_per_byte;
}

inline double ledger_to_overhead(const CostLedger& ledger, const CostConstants& c = {}) {
  return estimate_overhead(ledger.context_switches() / 2, ledger.decrypted_bytes(), c);
}

}  // namespace cdl::tee
