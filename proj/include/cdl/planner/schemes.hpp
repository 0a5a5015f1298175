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
#include <limits>
#include <map>
#include <optional>
#include <string>

#include "cdl/error.hpp"
#include "cdl/nn/model.hpp"
#include "cdl/planner/plan.hpp"

namespace cdl::planner {

namespace detail {

inline std::uint16_t next_id(const PartitionPlan& plan) {
  if (plan.partitions.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw PlanningError("plan exceeds 65536 partitions");
  }
  return static_cast<std::uint16_t>(plan.partitions.size());
}

inline void add_secure_range(PartitionPlan& plan, const nn::ModelSpec& spec,
                             const std::vector<nn::Shape>& shapes, std::size_t layer,
                             std::size_t begin, std::size_t end, bool spill) {
  Partition p;
  p.id = next_id(plan);
  p.layer = layer;
  p.begin = begin;
  p.end = end;
  p.world = World::secure;
  p.encrypted = true;
  p.footprint_bytes = partition_footprint(spec, shapes, layer, end - begin, spill, std::nullopt,
                                          plan.spill_chunk_bytes);
  plan.partitions.push_back(p);
}

// Splits a layer into ceil(units / s) contiguous subsets of s units.
inline void add_subsets(PartitionPlan& plan, const nn::ModelSpec& spec,
                        const std::vector<nn::Shape>& shapes, std::size_t layer, std::size_t s,
                        bool spill) {
  const std::size_t units = nn::partition_units(spec, layer);
  std::size_t count = 0;
  for (std::size_t b = 0; b < units; b += s, ++count) {
    add_secure_range(plan, spec, shapes, layer, b, std::min(units, b + s), spill);
  }
  plan.layers.push_back({s, count, spill});
}

// Largest s in [1, units] with fp(s) <= cap, or 0 when even s = 1 does not fit.
template <typename Fp>
std::size_t largest_fitting(std::size_t units, std::size_t cap, Fp fp) {
  if (fp(1) > cap) return 0;
  std::size_t lo = 1, hi = units;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (fp(mid) <= cap) lo = mid; else hi = mid - 1;
  }
  return lo;
}

}  // namespace detail

// One secure partition per layer.
inline PartitionPlan plan_layered(const nn::ModelSpec& spec, std::size_t cap) {
  if (cap == 0) throw ValidationError("secure memory cap must be positive");
  const auto shapes = nn::layer_shapes(spec);
  PartitionPlan plan;
  plan.scheme = Scheme::layered;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const std::size_t fp = estimate_layer_footprint(spec, l);
    if (fp > cap) throw LayerTooLargeError(l, fp, cap);
    detail::add_subsets(plan, spec, shapes, l, nn::partition_units(spec, l), false);
  }
  return plan;
}

struct SublayerOptions {
  // Requested subset size per layer index; other layers are sized automatically.
  std::map<std::size_t, std::size_t> subset_sizes;
  std::size_t spill_chunk_bytes = kDefaultSpillChunkBytes;
};

// Layers that fit stay whole; oversized connected and convolutional layers
// are split into the fewest equal subsets that fit. A connected layer whose
// input activations cannot stay resident next to even one weight row streams
// them from an encrypted spill instead.
inline PartitionPlan plan_sublayer(const nn::ModelSpec& spec, std::size_t cap,
                                   const SublayerOptions& opts = {}) {
  if (cap == 0) throw ValidationError("secure memory cap must be positive");
  if (opts.spill_chunk_bytes < 4) throw ValidationError("spill chunk must be at least 4 bytes");
  const auto shapes = nn::layer_shapes(spec);
  PartitionPlan plan;
  plan.scheme = Scheme::sublayer;
  plan.spill_chunk_bytes = opts.spill_chunk_bytes;

  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    const std::size_t units = nn::partition_units(spec, l);
    auto fp = [&](bool spill) {
      return [&, spill](std::size_t s) {
        return partition_footprint(spec, shapes, l, s, spill, std::nullopt, plan.spill_chunk_bytes);
      };
    };
    const bool splittable = layer.is<nn::Connected>() || layer.is<nn::Convolutional>();
    const bool can_spill = layer.is<nn::Connected>();

    if (auto it = opts.subset_sizes.find(l); it != opts.subset_sizes.end()) {
      const std::size_t s = it->second;
      if (s < 1 || s > units) {
        throw ValidationError("subset size " + std::to_string(s) + " for layer " +
                              std::to_string(l) + " outside [1, " + std::to_string(units) + "]");
      }
      if (!splittable && s != units) {
        throw ValidationError("layer " + std::to_string(l) + " (" +
                              std::string(nn::to_string(layer.kind())) + ") cannot be split");
      }
      if (fp(false)(s) <= cap) {
        detail::add_subsets(plan, spec, shapes, l, s, false);
      } else if (can_spill && fp(true)(s) <= cap) {
        detail::add_subsets(plan, spec, shapes, l, s, true);
      } else {
        throw PlanningError("layer " + std::to_string(l) + " with subsets of " +
                            std::to_string(s) + " needs " + std::to_string(fp(false)(s)) +
                            " bytes, cap is " + std::to_string(cap));
      }
      continue;
    }

    if (!splittable) {
      const std::size_t need = fp(false)(units);
      if (need > cap) throw LayerTooLargeError(l, need, cap);
      detail::add_subsets(plan, spec, shapes, l, units, false);
      continue;
    }
    if (std::size_t s = detail::largest_fitting(units, cap, fp(false)); s > 0) {
      detail::add_subsets(plan, spec, shapes, l, s, false);
      continue;
    }
    if (can_spill) {
      if (std::size_t s = detail::largest_fitting(units, cap, fp(true)); s > 0) {
        detail::add_subsets(plan, spec, shapes, l, s, true);
        continue;
      }
      throw PlanningError("layer " + std::to_string(l) +
                          ": one neuron's weights plus one activation chunk need " +
                          std::to_string(fp(true)(1)) + " bytes, cap is " + std::to_string(cap));
    }
    throw LayerTooLargeError(l, fp(false)(1), cap);
  }
  return plan;
}

// Layers before the branch point run in the Normal world; every later layer
// contributes one secure partition per branch. Partitions are ordered branch
// by branch so only one branch's activations are resident at a time.
inline PartitionPlan plan_branched(const nn::ModelSpec& spec, std::size_t cap) {
  if (cap == 0) throw ValidationError("secure memory cap must be positive");
  if (!spec.branch) throw ValidationError("model has no branch topology");
  nn::validate_model(spec);
  const auto shapes = nn::layer_shapes(spec);
  const std::size_t first = spec.branch->layer_index;
  const std::size_t k = spec.branch->branches;

  PartitionPlan plan;
  plan.scheme = Scheme::branched;
  for (std::size_t l = 0; l < first; ++l) {
    Partition p;
    p.id = detail::next_id(plan);
    p.layer = l;
    p.begin = 0;
    p.end = nn::partition_units(spec, l);
    p.world = World::normal;
    p.encrypted = false;
    p.footprint_bytes = 0;
    plan.partitions.push_back(p);
    plan.layers.push_back({p.end, 1, false});
  }
  for (std::size_t l = first; l < spec.layers.size(); ++l) {
    plan.layers.push_back({nn::partition_units(spec, l) / k, k, false});
  }
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t l = first; l < spec.layers.size(); ++l) {
      const std::size_t per = nn::partition_units(spec, l) / k;
      Partition p;
      p.id = detail::next_id(plan);
      p.layer = l;
      p.begin = g * per;
      p.end = (g + 1) * per;
      p.world = World::secure;
      p.encrypted = true;
      p.branch = g;
      p.footprint_bytes = partition_footprint(spec, shapes, l, per, false, g);
      if (p.footprint_bytes > cap) {
        throw PlanningError("branch " + std::to_string(g) + " of layer " + std::to_string(l) +
                            " needs " + std::to_string(p.footprint_bytes) +
                            " bytes of secure memory, cap is " + std::to_string(cap));
      }
      plan.partitions.push_back(p);
    }
  }
  return plan;
}

inline PartitionPlan make_plan(const nn::ModelSpec& spec, Scheme scheme, std::size_t cap,
                               const SublayerOptions& opts = {}) {
  switch (scheme) {
    case Scheme::layered: return plan_layered(spec, cap);
    case Scheme::sublayer: return plan_sublayer(spec, cap, opts);
    case Scheme::branched: return plan_branched(spec, cap);
  }
  throw ValidationError("unknown scheme");
}

}  // namespace cdl::planner
