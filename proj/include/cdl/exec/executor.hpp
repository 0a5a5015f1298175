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
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/exec/spill.hpp"
#include "cdl/io/bytes.hpp"
#include "cdl/io/crypto.hpp"
#include "cdl/io/partition_blobs.hpp"
#include "cdl/nn/kernels.hpp"
#include "cdl/nn/model.hpp"
#include "cdl/nn/reference.hpp"
#include "cdl/planner/plan.hpp"
#include "cdl/tee/arena.hpp"
#include "cdl/tee/ledger.hpp"
#include "cdl/tee/session.hpp"
#include "cdl/tee/shared_buffer.hpp"

namespace cdl::exec {

inline constexpr std::uint32_t kCmdRunPartition = 1;
inline constexpr const char* kInferenceApp = "cdl.inference";

struct RunResult {
  nn::Tensor output;
  tee::CostLedger ledger;
  std::size_t arena_peak = 0;
  // Wall-clock seconds per partition, in plan order. Informational only.
  std::vector<double> partition_seconds;
  // Shared memory as the run left it (io, partition staging, spill), with
  // complete write logs for auditing.
  std::vector<tee::SharedBuffer> shared;
};

namespace detail {

// A slice [offset, offset + size) of the activations at one layer boundary,
// held in secure memory. Boundary b is the input of layer b.
struct Resident {
  std::size_t boundary = 0;
  std::size_t offset = 0;
  tee::SecureBuffer<float> values;

  bool covers(std::size_t lo, std::size_t hi) const {
    return offset <= lo && hi <= offset + values.size();
  }
};

// Public activations (model input or Normal-world features) in the io buffer.
struct PublicActivations {
  std::size_t boundary = 0;
  std::size_t at = 0;  // byte offset in the io buffer
  std::size_t count = 0;
};

inline std::vector<float> floats_from(io::ByteView bytes) {
  if (bytes.size() % 4 != 0) throw FormatError("blob is not a whole number of floats");
  std::vector<float> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

class Runner {
 public:
  Runner(const nn::ModelSpec& spec, const io::PartitionSet& parts,
         const planner::PartitionPlan& plan, tee::SecureArena& arena, const io::Key& key)
      : spec_(spec), parts_(parts), plan_(plan), arena_(arena), key_(key),
        shapes_(nn::layer_shapes(spec)), dims_(nn::layer_dims(spec)),
        io_("io"), staging_("partitions"), spill_("spill"), spill_key_(io::random_key()) {}

  RunResult run(const nn::Tensor& input) {
    const nn::Tensor shaped = nn::shape_input(spec_, input);
    RunResult result;
    if (spec_.layers.empty()) {
      result.output = shaped;
      return result;
    }
    public_ = {0, io_.append(io::as_bytes(shaped.data()), tee::Taint::public_data), shaped.size()};
    normal_ = shaped.data();
    final_.assign(shapes_.back().size(), 0.0f);

    tee::TeeContext context;
    tee::Session session = context.open_session(kInferenceApp, arena_, ledger_);
    arena_.reset_window();
    const std::size_t peak_before = arena_.usage();
    std::size_t run_peak = peak_before;
    std::array<tee::SharedBuffer*, 3> buffers{&io_, &staging_, &spill_};

    const auto& ps = plan_.partitions;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const planner::Partition& p = ps[i];
      const auto started = std::chrono::steady_clock::now();
      if (p.world == planner::World::normal) {
        run_normal(p, i + 1 == ps.size() || ps[i + 1].world == planner::World::secure);
      } else {
        auto it = parts_.containers.find(p.id);
        if (it == parts_.containers.end()) {
          throw ValidationError("no encrypted container for partition " + std::to_string(p.id));
        }
        const std::size_t at = staging_.append(it->second, tee::Taint::ciphertext);
        const io::ByteView container = staging_.read(at, it->second.size());
        const std::uint64_t decrypted_before = ledger_.decrypted_bytes();
        arena_.reset_window();
        const bool last_of_layer = i + 1 == ps.size() || ps[i + 1].layer != p.layer;
        session.invoke(kCmdRunPartition, buffers,
                       [&](tee::TrustedEnv&) { run_secure(p, container, last_of_layer); });
        run_peak = std::max(run_peak, arena_.window_peak());
        ledger_.record_partition({p.id, ledger_.decrypted_bytes() - decrypted_before,
                                  arena_.window_peak()});
      }
      result.partition_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    }
    input_.reset();
    output_.reset();
    session.close();

    result.output = nn::Tensor(dims_.back(), final_);
    result.ledger = ledger_;
    result.arena_peak = run_peak;
    result.shared.push_back(std::move(io_));
    result.shared.push_back(std::move(staging_));
    result.shared.push_back(std::move(spill_));
    return result;
  }

 private:
  std::size_t per_unit(std::size_t layer) const {
    return planner::elements_per_unit(spec_, layer, shapes_);
  }

  void run_normal(const planner::Partition& p, bool hand_off) {
    if (p.begin != 0 || p.end != nn::partition_units(spec_, p.layer)) {
      throw ValidationError("normal-world partitions must cover whole layers");
    }
    if (public_.boundary != p.layer && normal_boundary_ != p.layer) {
      throw StateError("normal-world partition " + std::to_string(p.id) + " has no input");
    }
    auto blob = parts_.plaintext.find(p.id);
    if (blob == parts_.plaintext.end()) {
      throw ValidationError("no plaintext weights for normal-world partition " +
                            std::to_string(p.id));
    }
    const auto ws = nn::weight_shape(spec_.layers[p.layer], shapes_[p.layer]);
    std::vector<float> flat = floats_from(blob->second);
    if (flat.size() != ws.rows * (ws.row_length + 1)) {
      throw FormatError("partition " + std::to_string(p.id) + " blob has the wrong length");
    }
    nn::LayerWeights w{ws.rows, ws.row_length,
                       std::vector<float>(flat.begin() + static_cast<std::ptrdiff_t>(ws.rows), flat.end()),
                       std::vector<float>(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(ws.rows))};
    nn::Tensor in(dims_[p.layer], normal_);
    nn::Tensor out = nn::layer_forward(spec_.layers[p.layer], w, in);
    normal_ = out.data();
    normal_boundary_ = p.layer + 1;
    if (p.layer + 1 == spec_.layers.size()) final_ = normal_;
    if (hand_off) {
      // Features computed in the Normal world are public by construction.
      public_ = {p.layer + 1, io_.append(io::as_bytes(normal_), tee::Taint::public_data),
                 normal_.size()};
    }
  }

  // Runs inside the trusted application. Once the last partition of a layer
  // is done its inputs are released.
  void run_secure(const planner::Partition& p, io::ByteView container, bool last_of_layer) {
    const std::size_t layer = p.layer;
    const nn::LayerSpec& spec = spec_.layers[layer];
    const std::size_t in_size = shapes_[layer].size();
    const std::size_t out_size = shapes_[layer + 1].size();
    const auto [in_lo, in_hi] = planner::input_range(spec_, shapes_, p);
    const bool spill = plan_.layers[layer].spill;

    std::size_t out_lo = 0, out_hi = out_size;
    if (p.branch) {
      const std::size_t k = spec_.branch->branches;
      out_lo = *p.branch * (out_size / k);
      out_hi = out_lo + out_size / k;
    }

    // The previous layer's finished output becomes this layer's input.
    if (output_ && output_->boundary == layer) {
      input_.reset();
      input_ = std::move(output_);
      output_.reset();
    }
    if (output_ && !(output_->boundary == layer + 1 && output_->offset == out_lo &&
                     output_->values.size() == out_hi - out_lo)) {
      output_.reset();
    }

    const bool public_input = public_.boundary == layer;
    if (spill) {
      if (!public_input && spilled_boundary_ != layer) {
        if (!input_ || input_->boundary != layer || !input_->covers(0, in_size)) {
          throw StateError("inputs of layer " + std::to_string(layer) + " are not resident");
        }
        spilled_ = spill_activations(input_->values.span(), plan_.spill_chunk_bytes, spill_key_,
                                     spill_);
        spilled_boundary_ = layer;
      }
      input_.reset();
    } else if (!(input_ && input_->boundary == layer && input_->covers(in_lo, in_hi))) {
      input_.reset();
      if (!public_input) {
        throw StateError("inputs of partition " + std::to_string(p.id) + " are not resident");
      }
      Resident r{layer, in_lo, arena_.make_buffer<float>(in_hi - in_lo)};
      const io::ByteView src = io_.read(public_.at + 4 * in_lo, 4 * (in_hi - in_lo));
      std::memcpy(r.values.data(), src.data(), src.size());
      input_ = std::move(r);
    }

    if (!output_) output_ = Resident{layer + 1, out_lo, arena_.make_buffer<float>(out_hi - out_lo)};

    tee::SecureBuffer<float> blob = tee::ledger_decrypt<float>(arena_, ledger_, container, key_, p.id);
    const auto ws = nn::weight_shape(spec, shapes_[layer]);
    const std::size_t units = p.units();
    if (blob.size() != (ws.rows ? units * (ws.row_length + 1) : 0)) {
      throw FormatError("partition " + std::to_string(p.id) + " decrypted to " +
                        std::to_string(blob.size()) + " floats, expected " +
                        std::to_string(units * (ws.row_length + 1)));
    }
    const std::span<const float> biases = blob.span().first(ws.rows ? units : 0);
    const std::span<const float> weights = blob.span().subspan(biases.size());

    const std::size_t elem_lo = p.begin * per_unit(layer);
    const std::size_t elem_hi = p.end * per_unit(layer);
    if (elem_lo < out_lo || elem_hi > out_hi) throw StateError("partition outside its output slice");
    std::span<float> out = output_->values.span().subspan(elem_lo - out_lo, elem_hi - elem_lo);

    switch (spec.kind()) {
      case nn::LayerKind::connected: {
        const auto& c = spec.as<nn::Connected>();
        const nn::ConnectedGeometry g{in_size, c.outputs, c.groups};
        std::fill(out.begin(), out.end(), 0.0f);
        auto feed = [&](std::span<const float> chunk, std::size_t first) {
          nn::connected_accumulate(chunk, first, g, weights, p.begin, out);
        };
        if (!spill) {
          feed(input_->values.span(), input_->offset);
        } else if (public_input) {
          stream_public(layer, feed);
        } else {
          stream_spilled(*spilled_, spill_key_, arena_, ledger_, feed);
        }
        nn::connected_finish(biases, c.activation, out);
        break;
      }
      case nn::LayerKind::convolutional: {
        const auto g = nn::conv_geometry(spec.as<nn::Convolutional>(), shapes_[layer]);
        nn::conv_channels(input_->values.span(), g, weights, biases,
                          spec.as<nn::Convolutional>().activation, out);
        break;
      }
      case nn::LayerKind::maxpool:
      case nn::LayerKind::softmax: {
        if (p.begin != 0 || p.end != nn::partition_units(spec_, layer)) {
          throw ValidationError(std::string(nn::to_string(spec.kind())) +
                                " layers execute as a single partition");
        }
        if (spec.is<nn::Maxpool>()) {
          nn::maxpool_map(input_->values.span(), shapes_[layer], spec.as<nn::Maxpool>(), out);
        } else {
          nn::softmax_values(input_->values.span(), out);
        }
        break;
      }
    }

    if (layer + 1 == spec_.layers.size()) {
      io_.append(io::as_bytes(out), tee::Taint::public_data);
      std::copy(out.begin(), out.end(), final_.begin() + static_cast<std::ptrdiff_t>(elem_lo));
    }
    blob.reset();
    if (last_of_layer) input_.reset();
  }

  // First-layer spill: the model input is public, so chunks are copied from
  // the io buffer without decryption.
  template <typename Feed>
  void stream_public(std::size_t layer, Feed& feed) {
    const std::size_t per = planner::effective_chunk_bytes(plan_.spill_chunk_bytes,
                                                         shapes_[layer].size()) / 4;
    for (std::size_t first = 0; first < public_.count; first += per) {
      const std::size_t n = std::min(per, public_.count - first);
      tee::SecureBuffer<float> chunk = arena_.make_buffer<float>(n);
      const io::ByteView src = io_.read(public_.at + 4 * first, 4 * n);
      std::memcpy(chunk.data(), src.data(), src.size());
      feed(std::span<const float>(chunk.span()), first);
    }
  }

  const nn::ModelSpec& spec_;
  const io::PartitionSet& parts_;
  const planner::PartitionPlan& plan_;
  tee::SecureArena& arena_;
  const io::Key& key_;
  std::vector<nn::Shape> shapes_;
  std::vector<std::vector<std::size_t>> dims_;

  tee::CostLedger ledger_;
  tee::SharedBuffer io_;
  tee::SharedBuffer staging_;
  tee::SharedBuffer spill_;
  io::Key spill_key_;

  PublicActivations public_;
  std::vector<float> normal_;
  std::size_t normal_boundary_ = 0;
  std::vector<float> final_;
  std::optional<Resident> input_;
  std::optional<Resident> output_;
  std::optional<SpilledActivations> spilled_;
  std::size_t spilled_boundary_ = static_cast<std::size_t>(-1);
};

}  // namespace detail

// Executes `plan` over the simulated TEE. Secure partitions are each one
// session invocation: the container is staged in shared memory, decrypted
// into the arena, run, and its weights released before the next partition.
// Activations between secure partitions stay in the arena unless the plan
// spills them.
inline RunResult run_partitioned(const nn::ModelSpec& spec, const io::PartitionSet& parts,
                                 const planner::PartitionPlan& plan, const nn::Tensor& input,
                                 tee::SecureArena& arena, const io::Key& key) {
  planner::require_valid(plan, spec, 0);
  return detail::Runner(spec, parts, plan, arena, key).run(input);
}

// Normal-world baseline: all weights in plaintext memory, no TEE.
inline nn::Tensor run_reference(const nn::ModelSpec& spec, const nn::WeightStore& weights,
                                const nn::Tensor& input) {
  return nn::reference_forward(spec, weights, input);
}

// Mean wall time of run_reference over `repeats` runs, in seconds.
inline double time_reference(const nn::ModelSpec& spec, const nn::WeightStore& weights,
                             const nn::Tensor& input, std::size_t repeats = 10) {
  repeats = std::max<std::size_t>(repeats, 1);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < repeats; ++i) {
    volatile float sink = run_reference(spec, weights, input).data().front();
    (void)sink;
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() /
         static_cast<double>(repeats);
}

struct CompareReport {
  bool bitwise_equal = false;
  double max_abs_diff = 0.0;
  std::optional<std::size_t> first_mismatch;
};

inline CompareReport compare_runs(const nn::Tensor& a, const nn::Tensor& b) {
  CompareReport r;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) {
      if (!r.first_mismatch) r.first_mismatch = i;
      r.max_abs_diff = std::max(r.max_abs_diff,
                                std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
  }
  if (a.size() != b.size() && !r.first_mismatch) r.first_mismatch = n;
  r.bitwise_equal = !r.first_mismatch && a.dims() == b.dims();
  return r;
}

}  // namespace cdl::exec
