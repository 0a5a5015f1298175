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
#include <vector>

#include "cdl/error.hpp"
#include "cdl/nn/kernels.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::nn {

// Input in model geometry; flat inputs of the right length are reshaped.
inline Tensor shape_input(const ModelSpec& spec, const Tensor& input) {
  if (input.size() != spec.input.size()) {
    throw DimensionError("input has " + std::to_string(input.size()) + " values, model expects " +
                         std::to_string(spec.input.size()));
  }
  return Tensor({spec.input.channels, spec.input.height, spec.input.width}, input.data());
}

// Output of every layer in order; element i is the output of layer i.
inline std::vector<Tensor> reference_activations(const ModelSpec& spec, const WeightStore& weights,
                                                 const Tensor& input) {
  if (weights.layers.size() != spec.layers.size()) {
    throw DimensionError("weight store has " + std::to_string(weights.layers.size()) +
                         " layers, model has " + std::to_string(spec.layers.size()));
  }
  std::vector<Tensor> acts;
  acts.reserve(spec.layers.size());
  Tensor current = shape_input(spec, input);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    current = layer_forward(spec.layers[i], weights.layers[i], current);
    acts.push_back(current);
  }
  return acts;
}

// Plain sequential forward pass with all weights in memory. This is the
// oracle every partitioned execution must match bitwise.
inline Tensor reference_forward(const ModelSpec& spec, const WeightStore& weights,
                                const Tensor& input) {
  if (spec.layers.empty()) return input;
  return reference_activations(spec, weights, input).back();
}

}  // namespace cdl::nn
