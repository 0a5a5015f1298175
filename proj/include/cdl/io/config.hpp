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

// DarkNet-style model configuration:
//
//   [net]            channels, height, width
//   [convolutional]  filters, kernel_size, stride=1, padding=0, activation=linear
//   [maxpool]        size, stride=size
//   [connected]      outputs, activation=linear
//   [softmax]
//   [branch]         branches       (every later layer splits into k branches)
//
// `#` starts a comment; whitespace around `=` is ignored.

#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, Entry> keys;
};

class SectionReader {
 public:
  explicit SectionReader(Section& s) : s_(s) {}

  std::size_t number(const std::string& key, std::optional<std::size_t> fallback,
                     std::size_t minimum = 1) {
    auto it = s_.keys.find(key);
    if (it == s_.keys.end()) {
      if (!fallback) {
        throw ParseError(s_.line, "[" + s_.name + "] is missing required key '" + key + "'");
      }
      return *fallback;
    }
    const std::string& v = it->second.value;
    std::size_t out = 0;
    auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || end != v.data() + v.size() || v.empty()) {
      throw ParseError(it->second.line, "'" + key + "' expects a non-negative integer, got '" +
                                            v + "'");
    }
    if (out < minimum) {
      throw ParseError(it->second.line,
                       "'" + key + "' must be >= " + std::to_string(minimum));
    }
    used_.push_back(key);
    return out;
  }

  nn::Activation activation() {
    auto it = s_.keys.find("activation");
    if (it == s_.keys.end()) return nn::Activation::linear;
    used_.push_back("activation");
    if (it->second.value == "linear") return nn::Activation::linear;
    if (it->second.value == "relu") return nn::Activation::relu;
    throw ParseError(it->second.line, "unsupported activation '" + it->second.value + "'");
  }

  void reject_unknown() const {
    for (const auto& [key, entry] : s_.keys) {
      bool known = false;
      for (const auto& u : used_) known = known || u == key;
      if (!known) throw ParseError(entry.line, "unknown key '" + key + "' in [" + s_.name + "]");
    }
  }

 private:
  Section& s_;
  std::vector<std::string> used_;
};

inline std::vector<Section> split_sections(const std::string& text) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      sections.push_back({std::string(trim(line.substr(1, line.size() - 2))), line_no, {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    if (sections.empty()) throw ParseError(line_no, "key outside of any section");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError(line_no, "empty key");
    auto& keys = sections.back().keys;
    if (keys.count(key)) throw ParseError(line_no, "duplicate key '" + key + "'");
    keys.emplace(std::move(key), Entry{std::move(value), line_no});
  }
  return sections;
}

}  // namespace detail

inline nn::ModelSpec parse_config(const std::string& text) {
  auto sections = detail::split_sections(text);
  nn::ModelSpec spec;
  spec.config_bytes = text.size();

  // Pass 1: per-section keys and values.
  std::optional<std::size_t> net_line;
  std::vector<std::size_t> layer_lines;
  std::size_t branch_line = 0;
  for (auto& section : sections) {
    detail::SectionReader r(section);
    if (section.name == "net") {
      if (net_line) throw ParseError(section.line, "duplicate [net] section");
      if (!layer_lines.empty() || spec.branch) {
        throw ParseError(section.line, "[net] must come before any layer");
      }
      net_line = section.line;
      spec.input = {r.number("channels", std::nullopt), r.number("height", std::nullopt),
                    r.number("width", std::nullopt)};
      r.reject_unknown();
      continue;
    }
    if (section.name == "branch") {
      if (spec.branch) throw ParseError(section.line, "only one [branch] section is allowed");
      spec.branch = nn::BranchTopology{spec.layers.size(), r.number("branches", std::nullopt, 2)};
      branch_line = section.line;
      r.reject_unknown();
      continue;
    }

    nn::LayerSpec layer;
    if (section.name == "convolutional") {
      nn::Convolutional c;
      c.filters = r.number("filters", std::nullopt);
      c.kernel_size = r.number("kernel_size", std::nullopt);
      c.stride = r.number("stride", 1);
      c.padding = r.number("padding", 0, 0);
      c.activation = r.activation();
      layer.params = c;
    } else if (section.name == "maxpool") {
      nn::Maxpool m;
      m.size = r.number("size", std::nullopt);
      m.stride = r.number("stride", m.size);
      layer.params = m;
    } else if (section.name == "connected") {
      nn::Connected c;
      c.outputs = r.number("outputs", std::nullopt);
      c.activation = r.activation();
      c.groups = spec.branch ? spec.branch->branches : 1;
      layer.params = c;
    } else if (section.name == "softmax") {
      layer.params = nn::Softmax{};
    } else {
      throw ParseError(section.line, "unknown section [" + section.name + "]");
    }
    r.reject_unknown();
    spec.layers.push_back(layer);
    layer_lines.push_back(section.line);
  }

  if (!net_line) throw ParseError(sections.empty() ? 1 : sections.front().line, "missing [net] section");
  if (spec.layers.empty()) throw ParseError(sections.back().line, "model has no layers");

  // Pass 2: geometry chain and branch topology.
  nn::Shape shape = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      shape = nn::output_shape(spec.layers[i], shape);
    } catch (const DimensionError& e) {
      throw ParseError(layer_lines[i], e.what());
    }
  }
  if (spec.branch) {
    try {
      nn::validate_model(spec);
    } catch (const Error& e) {
      throw ParseError(branch_line, e.what());
    }
  }
  return spec;
}

// Canonical text for a spec; parse_config(to_config_text(s)) reproduces s.
inline std::string to_config_text(const nn::ModelSpec& spec) {
  std::ostringstream out;
  out << "[net]\nchannels=" << spec.input.channels << "\nheight=" << spec.input.height
      << "\nwidth=" << spec.input.width << "\n";
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.branch && spec.branch->layer_index == i) {
      out << "\n[branch]\nbranches=" << spec.branch->branches << "\n";
    }
    const auto& l = spec.layers[i];
    out << "\n[" << nn::to_string(l.kind()) << "]\n";
    if (l.is<nn::Convolutional>()) {
      const auto& c = l.as<nn::Convolutional>();
      out << "filters=" << c.filters << "\nkernel_size=" << c.kernel_size
          << "\nstride=" << c.stride << "\npadding=" << c.padding
          << "\nactivation=" << nn::to_string(c.activation) << "\n";
    } else if (l.is<nn::Maxpool>()) {
      const auto& m = l.as<nn::Maxpool>();
      out << "size=" << m.size << "\nstride=" << m.stride << "\n";
    } else if (l.is<nn::Connected>()) {
      const auto& c = l.as<nn::Connected>();
      out << "outputs=" << c.outputs << "\nactivation=" << nn::to_string(c.activation) << "\n";
    }
  }
  return out.str();
}

}  // namespace cdl::io
