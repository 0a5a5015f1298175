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

// Weights file: a 16-byte header of four little-endian u32 (major 0, minor 2,
// revision 0, seen 0), then for every layer in order its biases followed by
// its weight matrix, all float32 little-endian, matrices row-major.
//
// Input tensor file: three little-endian u32 dims (c, h, w), then c*h*w
// float32 values.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/io/bytes.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::io {

inline constexpr std::size_t kWeightsHeaderBytes = 16;
inline constexpr std::uint32_t kWeightsMajor = 0;
inline constexpr std::uint32_t kWeightsMinor = 2;
inline constexpr std::uint32_t kWeightsRevision = 0;

inline std::size_t layer_section_bytes(const nn::LayerWeights& w) {
  return 4 * (w.biases.size() + w.weights.size());
}

inline std::size_t serialized_weights_size(const nn::ModelSpec& spec) {
  auto shapes = nn::layer_shapes(spec);
  std::size_t total = kWeightsHeaderBytes;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto ws = nn::weight_shape(spec.layers[i], shapes[i]);
    total += 4 * (ws.rows + ws.rows * ws.row_length);
  }
  return total;
}

inline void append_layer_section(Bytes& out, const nn::LayerWeights& w) {
  ByteWriter wr(out);
  wr.floats(w.biases);
  wr.floats(w.weights);
}

inline Bytes serialize_weights(const nn::WeightStore& store) {
  Bytes out;
  ByteWriter wr(out);
  wr.u32(kWeightsMajor);
  wr.u32(kWeightsMinor);
  wr.u32(kWeightsRevision);
  wr.u32(0);
  for (const auto& layer : store.layers) append_layer_section(out, layer);
  return out;
}

inline nn::WeightStore load_weights(ByteView bytes, const nn::ModelSpec& spec) {
  ByteReader rd(bytes);
  const std::uint32_t major = rd.u32(), minor = rd.u32(), revision = rd.u32();
  rd.u32();  // seen
  if (major != kWeightsMajor || minor != kWeightsMinor || revision != kWeightsRevision) {
    throw FormatError("unsupported weights version " + std::to_string(major) + "." +
                      std::to_string(minor) + "." + std::to_string(revision));
  }
  const std::size_t expected = serialized_weights_size(spec);
  if (bytes.size() != expected) {
    throw FormatError("weights file has " + std::to_string(bytes.size()) +
                      " bytes, model needs exactly " + std::to_string(expected));
  }
  auto shapes = nn::layer_shapes(spec);
  nn::WeightStore store;
  store.layers.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto ws = nn::weight_shape(spec.layers[i], shapes[i]);
    nn::LayerWeights w{ws.rows, ws.row_length, std::vector<float>(ws.rows * ws.row_length),
                       std::vector<float>(ws.rows)};
    rd.floats(w.biases);
    rd.floats(w.weights);
    store.layers.push_back(std::move(w));
  }
  store.total_bytes = bytes.size();
  return store;
}

// Uniform weights scaled by 1/sqrt(fan_in), deterministic for a given seed.
inline nn::WeightStore random_weights(const nn::ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto shapes = nn::layer_shapes(spec);
  nn::WeightStore store;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto ws = nn::weight_shape(spec.layers[i], shapes[i]);
    const float scale = ws.row_length ? 1.0f / std::sqrt(static_cast<float>(ws.row_length)) : 1.0f;
    std::uniform_real_distribution<float> dist(-scale, scale);
    nn::LayerWeights w{ws.rows, ws.row_length, std::vector<float>(ws.rows * ws.row_length),
                       std::vector<float>(ws.rows)};
    for (auto& v : w.weights) v = dist(rng);
    for (auto& v : w.biases) v = dist(rng);
    store.layers.push_back(std::move(w));
  }
  store.total_bytes = serialized_weights_size(spec);
  return store;
}

inline Bytes encode_input(const nn::Tensor& t) {
  const nn::Shape s = t.shape();
  Bytes out;
  ByteWriter wr(out);
  wr.u32(static_cast<std::uint32_t>(s.channels));
  wr.u32(static_cast<std::uint32_t>(s.height));
  wr.u32(static_cast<std::uint32_t>(s.width));
  wr.floats(t.data());
  return out;
}

inline nn::Tensor decode_input(ByteView bytes) {
  ByteReader rd(bytes);
  const std::size_t c = rd.u32(), h = rd.u32(), w = rd.u32();
  const std::size_t n = c * h * w;
  if (n == 0) throw FormatError("input tensor has a zero dimension");
  if (rd.remaining() != 4 * n) {
    throw FormatError("input tensor payload is " + std::to_string(rd.remaining()) +
                      " bytes, dims need " + std::to_string(4 * n));
  }
  std::vector<float> data(n);
  rd.floats(data);
  return nn::Tensor({c, h, w}, std::move(data));
}

inline nn::Tensor random_input(const nn::ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> data(spec.input.size());
  for (auto& v : data) v = dist(rng);
  return nn::Tensor({spec.input.channels, spec.input.height, spec.input.width}, std::move(data));
}

}  // namespace cdl::io
