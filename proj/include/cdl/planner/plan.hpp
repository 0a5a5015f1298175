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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::planner {

enum class Scheme { layered, sublayer, branched };
enum class World { secure, normal };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::layered: return "layered";
    case Scheme::sublayer: return "sublayer";
    case Scheme::branched: return "branched";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "layered") return Scheme::layered;
  if (s == "sublayer") return Scheme::sublayer;
  if (s == "branched") return Scheme::branched;
  throw ValidationError("unknown scheme '" + std::string(s) + "'");
}

inline std::string_view to_string(World w) { return w == World::secure ? "secure" : "normal"; }

// One unit of execution: a contiguous range of a layer's partition units
// (neurons, or output channels for convolution) placed in one world.
struct Partition {
  std::uint16_t id = 0;
  std::size_t layer = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  World world = World::secure;
  // Estimated peak secure memory while this partition runs; 0 in the Normal world.
  std::size_t footprint_bytes = 0;
  bool encrypted = true;
  // Branch group for partitions of a branched plan's Secure-world suffix.
  std::optional<std::size_t> branch;

  std::size_t units() const noexcept { return end - begin; }
  friend bool operator==(const Partition&, const Partition&) = default;
};

struct LayerPlan {
  std::size_t subset_size = 0;   // s
  std::size_t subset_count = 0;  // p
  // Input activations of this layer live encrypted in shared memory and are
  // streamed back chunk by chunk for every subset.
  bool spill = false;
  friend bool operator==(const LayerPlan&, const LayerPlan&) = default;
};

inline constexpr std::size_t kDefaultSpillChunkBytes = 4096;

struct PartitionPlan {
  Scheme scheme = Scheme::layered;
  std::vector<Partition> partitions;
  std::vector<LayerPlan> layers;
  std::size_t spill_chunk_bytes = kDefaultSpillChunkBytes;

  std::size_t secure_partitions() const {
    return static_cast<std::size_t>(std::count_if(partitions.begin(), partitions.end(),
                                                  [](const Partition& p) {
                                                    return p.world == World::secure;
                                                  }));
  }
  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

// ---------------------------------------------------------------------------
// Footprints. Every term is a float32 buffer the executor actually holds in
// the arena: layer inputs, the layer's output buffer, the partition's weight
// rows, and its biases. Spilled layers trade the resident input for a
// single decrypted chunk.

// Elements of the layer output produced by one partition unit.
inline std::size_t elements_per_unit(const nn::ModelSpec& spec, std::size_t layer,
                                     const std::vector<nn::Shape>& shapes) {
  if (spec.layers[layer].is<nn::Convolutional>()) {
    return shapes[layer + 1].height * shapes[layer + 1].width;
  }
  return 1;
}

// Plaintext bytes of one spill chunk for a layer with `inputs` activations.
inline std::size_t effective_chunk_bytes(std::size_t chunk_bytes, std::size_t inputs) {
  return std::min(chunk_bytes / 4 * 4, 4 * inputs);
}

inline std::size_t partition_footprint(const nn::ModelSpec& spec,
                                       const std::vector<nn::Shape>& shapes, std::size_t layer,
                                       std::size_t units, bool spill,
                                       std::optional<std::size_t> branch,
                                       std::size_t chunk_bytes = kDefaultSpillChunkBytes) {
  const nn::LayerSpec& l = spec.layers.at(layer);
  const std::size_t in = shapes[layer].size();
  const std::size_t out = shapes[layer + 1].size();
  switch (l.kind()) {
    case nn::LayerKind::connected: {
      const std::size_t groups = l.as<nn::Connected>().groups;
      const std::size_t row = in / groups;
      const std::size_t params = units * row + units;
      if (branch) return 4 * (in / groups + params + out / groups);
      if (spill) return 4 * (params + out) + effective_chunk_bytes(chunk_bytes, in);
      return 4 * (in + out + params);
    }
    case nn::LayerKind::convolutional: {
      const auto ws = nn::weight_shape(l, shapes[layer]);
      return 4 * (in + out + units * ws.row_length + units);
    }
    case nn::LayerKind::maxpool:
    case nn::LayerKind::softmax: return 4 * (in + out);
  }
  return 0;
}

inline std::size_t estimate_layer_footprint(const nn::ModelSpec& spec, std::size_t layer) {
  if (layer >= spec.layers.size()) throw RangeError("layer index " + std::to_string(layer));
  const auto shapes = nn::layer_shapes(spec);
  return partition_footprint(spec, shapes, layer, nn::partition_units(spec, layer), false,
                             std::nullopt);
}

// Footprint the plan implies for partition `p`. Normal-world partitions use
// no secure memory.
inline std::size_t partition_footprint(const nn::ModelSpec& spec,
                                       const std::vector<nn::Shape>& shapes,
                                       const PartitionPlan& plan, const Partition& p) {
  if (p.world == World::normal) return 0;
  const bool spill = p.layer < plan.layers.size() && plan.layers[p.layer].spill;
  return partition_footprint(spec, shapes, p.layer, p.units(), spill, p.branch,
                             plan.spill_chunk_bytes);
}

// Range of the previous layer's output (in elements) a partition reads.
inline std::pair<std::size_t, std::size_t> input_range(const nn::ModelSpec& spec,
                                                       const std::vector<nn::Shape>& shapes,
                                                       const Partition& p) {
  const std::size_t in = shapes[p.layer].size();
  const nn::LayerSpec& l = spec.layers[p.layer];
  if (!l.is<nn::Connected>() || l.as<nn::Connected>().groups == 1 || p.units() == 0) {
    return {0, in};
  }
  const auto& c = l.as<nn::Connected>();
  const std::size_t row = in / c.groups;
  const std::size_t per_group = c.outputs / c.groups;
  return {(p.begin / per_group) * row, ((p.end - 1) / per_group + 1) * row};
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { structure, coverage, ordering, world, budget };

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::structure: return "structure";
    case ViolationKind::coverage: return "coverage";
    case ViolationKind::ordering: return "ordering";
    case ViolationKind::world: return "world";
    case ViolationKind::budget: return "budget";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::optional<std::uint16_t> partition;
  std::string message;
};

inline std::string describe(const std::vector<Violation>& vs) {
  std::string out;
  for (const auto& v : vs) {
    out += std::string(to_string(v.kind)) + ": ";
    if (v.partition) out += "partition " + std::to_string(*v.partition) + ": ";
    out += v.message + "\n";
  }
  return out;
}

// Every problem with `plan`, not just the first. A cap of 0 skips budget checks.
inline std::vector<Violation> validate_plan(const PartitionPlan& plan, const nn::ModelSpec& spec,
                                            std::size_t cap) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind k, std::optional<std::uint16_t> id, std::string msg) {
    out.push_back({k, id, std::move(msg)});
  };

  std::vector<nn::Shape> shapes;
  try {
    shapes = nn::layer_shapes(spec);
  } catch (const Error& e) {
    add(ViolationKind::structure, std::nullopt, std::string("model geometry: ") + e.what());
    return out;
  }
  const std::size_t n_layers = spec.layers.size();
  if (plan.layers.size() != n_layers) {
    add(ViolationKind::structure, std::nullopt,
        "plan describes " + std::to_string(plan.layers.size()) + " layers, model has " +
            std::to_string(n_layers));
  }
  if (plan.spill_chunk_bytes < 4) {
    add(ViolationKind::structure, std::nullopt, "spill chunk must hold at least one activation");
  }

  std::vector<std::size_t> units(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) units[l] = nn::partition_units(spec, l);

  std::vector<std::vector<const Partition*>> by_layer(n_layers);
  std::vector<std::uint16_t> ids;
  for (const auto& p : plan.partitions) {
    ids.push_back(p.id);
    if (p.layer >= n_layers) {
      add(ViolationKind::structure, p.id, "layer " + std::to_string(p.layer) + " does not exist");
      continue;
    }
    if (p.begin >= p.end || p.end > units[p.layer]) {
      add(ViolationKind::coverage, p.id,
          "range " + std::to_string(p.begin) + ".." + std::to_string(p.end) +
              " invalid for layer " + std::to_string(p.layer) + " with " +
              std::to_string(units[p.layer]) + " units");
      continue;
    }
    if ((p.world == World::secure) != p.encrypted) {
      add(ViolationKind::world, p.id,
          p.encrypted ? "normal-world partition marked encrypted"
                      : "secure-world partition not encrypted");
    }
    by_layer[p.layer].push_back(&p);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    add(ViolationKind::structure, std::nullopt, "duplicate partition ids");
  }

  for (std::size_t l = 0; l < n_layers; ++l) {
    auto parts = by_layer[l];
    std::sort(parts.begin(), parts.end(),
              [](const Partition* a, const Partition* b) { return a->begin < b->begin; });
    std::size_t next = 0;
    for (const Partition* p : parts) {
      if (p->begin < next) {
        add(ViolationKind::coverage, p->id,
            "overlaps units " + std::to_string(p->begin) + ".." + std::to_string(next) +
                " of layer " + std::to_string(l));
      } else if (p->begin > next) {
        add(ViolationKind::coverage, std::nullopt,
            "layer " + std::to_string(l) + " units " + std::to_string(next) + ".." +
                std::to_string(p->begin) + " are not covered");
      }
      next = std::max(next, p->end);
    }
    if (next < units[l]) {
      add(ViolationKind::coverage, std::nullopt,
          "layer " + std::to_string(l) + " units " + std::to_string(next) + ".." +
              std::to_string(units[l]) + " are not covered");
    }
    if (!parts.empty()) {
      const World w = parts.front()->world;
      for (const Partition* p : parts) {
        if (p->world != w) {
          add(ViolationKind::world, p->id, "layer " + std::to_string(l) + " mixes worlds");
          break;
        }
      }
    }
    if (l < plan.layers.size()) {
      const LayerPlan& lp = plan.layers[l];
      if (lp.subset_count != parts.size()) {
        add(ViolationKind::structure, std::nullopt,
            "layer " + std::to_string(l) + " declares " + std::to_string(lp.subset_count) +
                " subsets but has " + std::to_string(parts.size()) + " partitions");
      }
      if (lp.spill) {
        if (!spec.layers[l].is<nn::Connected>()) {
          add(ViolationKind::structure, std::nullopt,
              "layer " + std::to_string(l) + " spills but only connected layers can stream inputs");
        }
        for (const Partition* p : parts) {
          if (p->world != World::secure || p->branch) {
            add(ViolationKind::structure, p->id, "spilled layers must be unbranched secure partitions");
            break;
          }
        }
      }
    }
  }

  // Execution order: a partition runs after every partition producing its inputs.
  for (std::size_t i = 0; i < plan.partitions.size(); ++i) {
    const Partition& p = plan.partitions[i];
    if (p.layer == 0 || p.layer >= n_layers || p.begin >= p.end || p.end > units[p.layer]) continue;
    const auto [lo, hi] = input_range(spec, shapes, p);
    const std::size_t per = elements_per_unit(spec, p.layer - 1, shapes);
    for (std::size_t j = 0; j < plan.partitions.size(); ++j) {
      const Partition& q = plan.partitions[j];
      if (q.layer != p.layer - 1) continue;
      if (q.begin * per >= hi || q.end * per <= lo) continue;
      if (j > i) {
        add(ViolationKind::ordering, p.id,
            "runs before partition " + std::to_string(q.id) + " that produces its inputs");
      }
      if (p.world == World::normal && q.world == World::secure) {
        add(ViolationKind::world, p.id,
            "normal-world partition consumes secure activations of partition " +
                std::to_string(q.id));
      }
    }
  }

  if (cap > 0) {
    for (const auto& p : plan.partitions) {
      if (p.world != World::secure || p.layer >= n_layers || p.begin >= p.end ||
          p.end > units[p.layer]) {
        continue;
      }
      const std::size_t need = std::max(p.footprint_bytes, partition_footprint(spec, shapes, plan, p));
      if (need > cap) {
        add(ViolationKind::budget, p.id,
            "needs " + std::to_string(need) + " bytes of secure memory, cap is " +
                std::to_string(cap));
      }
    }
  }
  return out;
}

inline void require_valid(const PartitionPlan& plan, const nn::ModelSpec& spec, std::size_t cap) {
  auto v = validate_plan(plan, spec, cap);
  if (!v.empty()) throw ValidationError("invalid partition plan:\n" + describe(v));
}

}  // namespace cdl::planner
