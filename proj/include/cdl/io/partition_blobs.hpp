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
#include <map>
#include <optional>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/io/bytes.hpp"
#include "cdl/io/container.hpp"
#include "cdl/io/crypto.hpp"
#include "cdl/io/weights.hpp"
#include "cdl/nn/model.hpp"
#include "cdl/planner/plan.hpp"

namespace cdl::io {

// Serializes the weights of units [begin, end) of one layer: the bias slice,
// then the matching weight rows, as in the weights file.
inline Bytes layer_slice(const nn::LayerWeights& w, std::size_t begin, std::size_t end) {
  Bytes out;
  if (w.rows == 0) return out;
  ByteWriter wr(out);
  wr.floats(std::span(w.biases).subspan(begin, end - begin));
  wr.floats(std::span(w.weights).subspan(begin * w.row_length, (end - begin) * w.row_length));
  return out;
}

// One blob per partition, in plan order.
inline std::vector<Bytes> split_weights(const nn::WeightStore& store, const nn::ModelSpec& spec,
                                        const planner::PartitionPlan& plan) {
  auto violations = planner::validate_plan(plan, spec, 0);
  if (!violations.empty()) {
    throw ValidationError("plan does not match model:\n" + planner::describe(violations));
  }
  if (store.layers.size() != spec.layers.size()) {
    throw ValidationError("weight store has " + std::to_string(store.layers.size()) +
                          " layers, model has " + std::to_string(spec.layers.size()));
  }
  const auto shapes = nn::layer_shapes(spec);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto ws = nn::weight_shape(spec.layers[l], shapes[l]);
    const auto& w = store.layers[l];
    if (w.rows != ws.rows || w.row_length != ws.row_length ||
        w.weights.size() != ws.rows * ws.row_length || w.biases.size() != ws.rows) {
      throw ValidationError("weights of layer " + std::to_string(l) + " do not match the model");
    }
  }
  std::vector<Bytes> blobs;
  blobs.reserve(plan.partitions.size());
  for (const auto& p : plan.partitions) blobs.push_back(layer_slice(store.layers[p.layer], p.begin, p.end));
  return blobs;
}

// Distribution form of a partitioned model: encrypted containers for
// Secure-world partitions, plaintext blobs for Normal-world ones.
struct PartitionSet {
  std::map<std::uint16_t, Bytes> containers;
  std::map<std::uint16_t, Bytes> plaintext;
};

inline PartitionSet package_partitions(const nn::WeightStore& store, const nn::ModelSpec& spec,
                                       const planner::PartitionPlan& plan, const Key& key) {
  auto blobs = split_weights(store, spec, plan);
  PartitionSet set;
  for (std::size_t i = 0; i < plan.partitions.size(); ++i) {
    const auto& p = plan.partitions[i];
    if (p.world == planner::World::secure) {
      set.containers.emplace(p.id, encrypt_partition(blobs[i], key, p.id, random_nonce()));
    } else {
      set.plaintext.emplace(p.id, std::move(blobs[i]));
    }
  }
  return set;
}

}  // namespace cdl::io
