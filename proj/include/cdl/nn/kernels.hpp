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

// Forward kernels. Every kernel accumulates each output in a fixed order
// (connected: ascending input index; convolution: input channel, then kernel
// row, then kernel column) starting from +0.0f, then adds the bias, then
// applies the activation. Partitioned execution reuses these exact loops, so
// partial results compose bitwise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "cdl/error.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::nn {

inline float activate(float x, Activation a) noexcept {
  return a == Activation::relu ? (x > 0.0f ? x : 0.0f) : x;
}

struct ConnectedGeometry {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::size_t groups = 1;

  std::size_t row_length() const noexcept { return inputs / groups; }
  std::size_t input_offset(std::size_t neuron) const noexcept {
    return (neuron / (outputs / groups)) * row_length();
  }
};

// Adds the contribution of input[offset, offset + chunk.size()) to the
// running sums of neurons [start, start + acc.size()). `weights` holds exactly
// the rows of those neurons. Feeding the input in ascending chunks performs
// the same sequence of float operations as one pass over the whole input.
inline void connected_accumulate(std::span<const float> chunk, std::size_t offset,
                                 const ConnectedGeometry& g, std::span<const float> weights,
                                 std::size_t start, std::span<float> acc) {
  const std::size_t row = g.row_length();
  const std::size_t chunk_end = offset + chunk.size();
  for (std::size_t r = 0; r < acc.size(); ++r) {
    const std::size_t first = g.input_offset(start + r);
    const std::size_t lo = std::max(first, offset);
    const std::size_t hi = std::min(first + row, chunk_end);
    const float* w = weights.data() + r * row;
    float sum = acc[r];
    for (std::size_t i = lo; i < hi; ++i) sum += w[i - first] * chunk[i - offset];
    acc[r] = sum;
  }
}

inline void connected_finish(std::span<const float> biases, Activation act, std::span<float> acc) {
  for (std::size_t r = 0; r < acc.size(); ++r) acc[r] = activate(acc[r] + biases[r], act);
}

inline void connected_rows(std::span<const float> input, const ConnectedGeometry& g,
                           std::span<const float> weights, std::span<const float> biases,
                           std::size_t start, Activation act, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  connected_accumulate(input, 0, g, weights, start, out);
  connected_finish(biases, act, out);
}

struct ConvGeometry {
  Shape input;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t out_height = 0;
  std::size_t out_width = 0;

  std::size_t filter_length() const noexcept { return input.channels * kernel * kernel; }
  std::size_t map_size() const noexcept { return out_height * out_width; }
};

inline ConvGeometry conv_geometry(const Convolutional& c, const Shape& in) {
  return {in,
          c.kernel_size,
          c.stride,
          c.padding,
          conv_output_extent(in.height, c.kernel_size, c.stride, c.padding),
          conv_output_extent(in.width, c.kernel_size, c.stride, c.padding)};
}

// Computes output channels whose filters are given in `weights` (one row of
// filter_length() per channel). Zero padding: out-of-bounds taps are skipped.
inline void conv_channels(std::span<const float> input, const ConvGeometry& g,
                          std::span<const float> weights, std::span<const float> biases,
                          Activation act, std::span<float> out) {
  const std::size_t count = biases.size();
  const std::size_t k = g.kernel;
  const auto H = static_cast<long>(g.input.height);
  const auto W = static_cast<long>(g.input.width);
  for (std::size_t f = 0; f < count; ++f) {
    const float* filter = weights.data() + f * g.filter_length();
    float* map = out.data() + f * g.map_size();
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        float sum = 0.0f;
        for (std::size_t ch = 0; ch < g.input.channels; ++ch) {
          const float* plane = input.data() + ch * g.input.height * g.input.width;
          const float* taps = filter + ch * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long y = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
            if (y < 0 || y >= H) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long x = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
              if (x < 0 || x >= W) continue;
              sum += plane[y * W + x] * taps[ky * k + kx];
            }
          }
        }
        map[oy * g.out_width + ox] = activate(sum + biases[f], act);
      }
    }
  }
}

inline void maxpool_map(std::span<const float> input, const Shape& in, const Maxpool& p,
                        std::span<float> out) {
  const Shape o = output_shape(LayerSpec{p}, in);
  for (std::size_t c = 0; c < in.channels; ++c) {
    const float* plane = input.data() + c * in.height * in.width;
    for (std::size_t oy = 0; oy < o.height; ++oy) {
      for (std::size_t ox = 0; ox < o.width; ++ox) {
        float m = plane[(oy * p.stride) * in.width + ox * p.stride];
        for (std::size_t ky = 0; ky < p.size; ++ky) {
          for (std::size_t kx = 0; kx < p.size; ++kx) {
            const float v = plane[(oy * p.stride + ky) * in.width + ox * p.stride + kx];
            if (v > m) m = v;
          }
        }
        out[(c * o.height + oy) * o.width + ox] = m;
      }
    }
  }
}

inline void softmax_values(std::span<const float> input, std::span<float> out) {
  if (input.empty()) throw DimensionError("softmax of an empty vector");
  const float top = *std::max_element(input.begin(), input.end());
  double total = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = std::exp(input[i] - top);
    total += out[i];
  }
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = static_cast<float>(out[i] / total);
  }
}

namespace detail {

inline void check_weights(const LayerWeights& w, const WeightShape& want, const char* what) {
  if (w.rows != want.rows || w.row_length != want.row_length ||
      w.weights.size() != want.rows * want.row_length || w.biases.size() != want.rows) {
    throw DimensionError(std::string(what) + " weights are " + std::to_string(w.rows) + "x" +
                         std::to_string(w.row_length) + ", expected " +
                         std::to_string(want.rows) + "x" + std::to_string(want.row_length));
  }
}

}  // namespace detail

inline Tensor connected_forward_subset(const Tensor& input, const LayerWeights& w,
                                       const LayerSpec& spec, std::size_t start,
                                       std::size_t count) {
  if (!spec.is<Connected>()) throw DimensionError("connected_forward on a non-connected layer");
  const auto& c = spec.as<Connected>();
  const ConnectedGeometry g{input.size(), c.outputs, c.groups};
  if (g.inputs % g.groups != 0 || g.outputs % g.groups != 0) {
    throw DimensionError("input length " + std::to_string(g.inputs) + " not divisible into " +
                         std::to_string(g.groups) + " branches");
  }
  detail::check_weights(w, {c.outputs, g.row_length()}, "connected");
  if (start > c.outputs || count > c.outputs - start) {
    throw RangeError("neuron subset [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside [0, " +
                     std::to_string(c.outputs) + ")");
  }
  std::vector<float> out(count);
  const std::span<const float> rows(w.weights.data() + start * g.row_length(),
                                    count * g.row_length());
  connected_rows(input.data(), g, rows, std::span(w.biases).subspan(start, count), start,
                 c.activation, out);
  return Tensor::flat(std::move(out));
}

inline Tensor connected_forward(const Tensor& input, const LayerWeights& w, const LayerSpec& spec) {
  if (!spec.is<Connected>()) throw DimensionError("connected_forward on a non-connected layer");
  return connected_forward_subset(input, w, spec, 0, spec.as<Connected>().outputs);
}

inline Tensor conv_forward(const Tensor& input, const LayerWeights& w, const LayerSpec& spec) {
  if (!spec.is<Convolutional>()) throw DimensionError("conv_forward on a non-convolutional layer");
  const auto& c = spec.as<Convolutional>();
  const Shape in = input.shape();
  const ConvGeometry g = conv_geometry(c, in);
  detail::check_weights(w, {c.filters, g.filter_length()}, "convolutional");
  std::vector<float> out(c.filters * g.map_size());
  conv_channels(input.data(), g, w.weights, w.biases, c.activation, out);
  return Tensor({c.filters, g.out_height, g.out_width}, std::move(out));
}

inline Tensor maxpool_forward(const Tensor& input, const LayerSpec& spec) {
  if (!spec.is<Maxpool>()) throw DimensionError("maxpool_forward on a non-maxpool layer");
  const Shape in = input.shape();
  const Shape o = output_shape(spec, in);
  std::vector<float> out(o.size());
  maxpool_map(input.data(), in, spec.as<Maxpool>(), out);
  return Tensor({o.channels, o.height, o.width}, std::move(out));
}

inline Tensor softmax_forward(const Tensor& input) {
  if (input.empty()) throw DimensionError("softmax of an empty tensor");
  std::vector<float> out(input.size());
  softmax_values(input.data(), out);
  return Tensor(input.dims(), std::move(out));
}

inline Tensor layer_forward(const LayerSpec& spec, const LayerWeights& w, const Tensor& input) {
  switch (spec.kind()) {
    case LayerKind::convolutional: return conv_forward(input, w, spec);
    case LayerKind::maxpool: return maxpool_forward(input, spec);
    case LayerKind::connected: return connected_forward(input, w, spec);
    case LayerKind::softmax: return softmax_forward(input);
  }
  throw DimensionError("unknown layer kind");
}

}  // namespace cdl::nn
