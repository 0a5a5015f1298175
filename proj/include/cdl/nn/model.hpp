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
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cdl/error.hpp"

namespace cdl::nn {

// (channels, height, width). Flat vectors are (n, 1, 1).
struct Shape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense single-sample activation tensor, row-major.
class Tensor {
 public:
  Tensor() : dims_{0} {}

  Tensor(std::vector<std::size_t> dims, std::vector<float> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    if (dims_.empty() || product(dims_) != data_.size()) {
      throw DimensionError("tensor dims do not match data length " +
                           std::to_string(data_.size()));
    }
  }

  static Tensor zeros(std::vector<std::size_t> dims) {
    std::vector<float> data(product(dims), 0.0f);
    return Tensor(std::move(dims), std::move(data));
  }

  static Tensor flat(std::vector<float> data) {
    std::size_t n = data.size();
    return Tensor({n}, std::move(data));
  }

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  const std::vector<float>& data() const noexcept { return data_; }
  std::vector<float>& data() noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float operator[](std::size_t i) const { return data_[i]; }

  // (c, h, w) view of the dims; 1-D tensors read as (n, 1, 1).
  Shape shape() const {
    if (dims_.size() == 3) return {dims_[0], dims_[1], dims_[2]};
    if (dims_.size() == 1) return {dims_[0], 1, 1};
    throw DimensionError("tensor of rank " + std::to_string(dims_.size()) +
                         " has no (c,h,w) interpretation");
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

enum class Activation { linear, relu };

inline std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "linear";
}

struct Convolutional {
  std::size_t filters = 1;
  std::size_t kernel_size = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Activation activation = Activation::linear;
  friend bool operator==(const Convolutional&, const Convolutional&) = default;
};

struct Maxpool {
  std::size_t size = 2;
  std::size_t stride = 2;
  friend bool operator==(const Maxpool&, const Maxpool&) = default;
};

// A connected layer. groups > 1 restricts connectivity to k independent
// branches: output neuron j of group g = j / (outputs / groups) sees only the
// g-th slice of the input, and its weight row has inputs / groups entries.
struct Connected {
  std::size_t outputs = 1;
  Activation activation = Activation::linear;
  std::size_t groups = 1;
  friend bool operator==(const Connected&, const Connected&) = default;
};

struct Softmax {
  friend bool operator==(const Softmax&, const Softmax&) = default;
};

enum class LayerKind { convolutional, maxpool, connected, softmax };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::convolutional: return "convolutional";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::connected: return "connected";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

struct LayerSpec {
  std::variant<Convolutional, Maxpool, Connected, Softmax> params;

  LayerKind kind() const noexcept { return static_cast<LayerKind>(params.index()); }

  template <typename T>
  const T& as() const {
    return std::get<T>(params);
  }
  template <typename T>
  bool is() const noexcept {
    return std::holds_alternative<T>(params);
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct BranchTopology {
  std::size_t layer_index = 0;
  std::size_t branches = 2;
  friend bool operator==(const BranchTopology&, const BranchTopology&) = default;
};

struct ModelSpec {
  Shape input;
  std::vector<LayerSpec> layers;
  std::optional<BranchTopology> branch;
  // Length of the configuration text this spec was parsed from.
  std::size_t config_bytes = 0;
};

inline std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride,
                                      std::size_t pad) {
  if (in + 2 * pad < k) throw DimensionError("kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

// Output geometry of one layer given its input geometry.
inline Shape output_shape(const LayerSpec& layer, const Shape& in) {
  return std::visit(
      [&](const auto& p) -> Shape {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Convolutional>) {
          if (p.filters == 0 || p.kernel_size == 0 || p.stride == 0) {
            throw DimensionError("convolutional parameters must be >= 1");
          }
          return {p.filters, conv_output_extent(in.height, p.kernel_size, p.stride, p.padding),
                  conv_output_extent(in.width, p.kernel_size, p.stride, p.padding)};
        } else if constexpr (std::is_same_v<P, Maxpool>) {
          if (p.size == 0 || p.stride == 0) throw DimensionError("maxpool parameters must be >= 1");
          if (in.height < p.size || in.width < p.size || (in.height - p.size) % p.stride != 0 ||
              (in.width - p.size) % p.stride != 0) {
            throw DimensionError("maxpool window " + std::to_string(p.size) + "/" +
                                 std::to_string(p.stride) + " does not tile " +
                                 std::to_string(in.height) + "x" + std::to_string(in.width));
          }
          return {in.channels, (in.height - p.size) / p.stride + 1,
                  (in.width - p.size) / p.stride + 1};
        } else if constexpr (std::is_same_v<P, Connected>) {
          if (p.outputs == 0 || p.groups == 0) throw DimensionError("connected outputs must be >= 1");
          if (in.size() % p.groups != 0 || p.outputs % p.groups != 0) {
            throw DimensionError("connected layer " + std::to_string(in.size()) + "->" +
                                 std::to_string(p.outputs) + " not divisible into " +
                                 std::to_string(p.groups) + " branches");
          }
          return {p.outputs, 1, 1};
        } else {
          return in;
        }
      },
      layer.params);
}

// shapes[0] is the model input, shapes[i + 1] the output of layer i.
inline std::vector<Shape> layer_shapes(const ModelSpec& spec) {
  std::vector<Shape> shapes{spec.input};
  shapes.reserve(spec.layers.size() + 1);
  for (const auto& layer : spec.layers) shapes.push_back(output_shape(layer, shapes.back()));
  return shapes;
}

// Tensor dims produced at each boundary, mirroring the kernels: conv and
// maxpool emit (c,h,w), connected emits (n), softmax keeps its input dims.
inline std::vector<std::vector<std::size_t>> layer_dims(const ModelSpec& spec) {
  auto shapes = layer_shapes(spec);
  std::vector<std::vector<std::size_t>> dims{
      {spec.input.channels, spec.input.height, spec.input.width}};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Shape& s = shapes[i + 1];
    switch (spec.layers[i].kind()) {
      case LayerKind::convolutional:
      case LayerKind::maxpool: dims.push_back({s.channels, s.height, s.width}); break;
      case LayerKind::connected: dims.push_back({s.channels}); break;
      case LayerKind::softmax: dims.push_back(dims.back()); break;
    }
  }
  return dims;
}

// Checks the geometry chain and branch topology. Throws DimensionError or
// ValidationError.
inline void validate_model(const ModelSpec& spec) {
  if (spec.input.size() == 0) throw DimensionError("model input has zero size");
  auto shapes = layer_shapes(spec);
  if (!spec.branch) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      if (spec.layers[i].is<Connected>() && spec.layers[i].as<Connected>().groups != 1) {
        throw ValidationError("layer " + std::to_string(i) +
                              " has branch groups but the model has no branch topology");
      }
    }
    return;
  }
  const auto& b = *spec.branch;
  if (b.branches < 2) throw ValidationError("branch topology needs at least 2 branches");
  if (b.layer_index >= spec.layers.size()) {
    throw ValidationError("branch point " + std::to_string(b.layer_index) +
                          " is past the last layer");
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    bool branched = i >= b.layer_index;
    if (branched && !layer.is<Connected>()) {
      throw ValidationError("layer " + std::to_string(i) +
                            " follows the branch point but is not a connected layer");
    }
    if (layer.is<Connected>()) {
      std::size_t want = branched ? b.branches : 1;
      if (layer.as<Connected>().groups != want) {
        throw ValidationError("layer " + std::to_string(i) + " has " +
                              std::to_string(layer.as<Connected>().groups) +
                              " groups, expected " + std::to_string(want));
      }
    }
  }
}

// Weight matrix (row-major, rows x row_length) and bias vector of one layer.
// Layers without parameters hold empty vectors.
struct LayerWeights {
  std::size_t rows = 0;
  std::size_t row_length = 0;
  std::vector<float> weights;
  std::vector<float> biases;

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct WeightShape {
  std::size_t rows = 0;
  std::size_t row_length = 0;
};

inline WeightShape weight_shape(const LayerSpec& layer, const Shape& in) {
  if (layer.is<Convolutional>()) {
    const auto& c = layer.as<Convolutional>();
    return {c.filters, in.channels * c.kernel_size * c.kernel_size};
  }
  if (layer.is<Connected>()) {
    const auto& c = layer.as<Connected>();
    return {c.outputs, in.size() / c.groups};
  }
  return {};
}

struct WeightStore {
  std::vector<LayerWeights> layers;
  // Length of the serialized weights file.
  std::size_t total_bytes = 0;
};

// Number of partitionable units in a layer: output channels for convolution,
// neurons for connected layers, output elements for maxpool and softmax.
inline std::size_t partition_units(const ModelSpec& spec, std::size_t layer) {
  auto shapes = layer_shapes(spec);
  const auto& l = spec.layers.at(layer);
  if (l.is<Convolutional>()) return l.as<Convolutional>().filters;
  return shapes[layer + 1].size();
}

}  // namespace cdl::nn
