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

// Line-oriented plan manifest:
//
//   scheme sublayer
//   chunk 4096
//   layer 0 s 30 p 2 spill 0
//   partition 0 layer 0 range 0..30 world secure bytes 95880
//   partition 7 layer 5 range 0..8 world secure bytes 1312 branch 0
//
// `#` starts a comment.

#include <charconv>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cdl/error.hpp"
#include "cdl/planner/plan.hpp"

namespace cdl::planner {

inline std::string to_manifest(const PartitionPlan& plan) {
  std::ostringstream out;
  out << "# partition plan\n";
  out << "scheme " << to_string(plan.scheme) << "\n";
  out << "chunk " << plan.spill_chunk_bytes << "\n";
  for (std::size_t l = 0; l < plan.layers.size(); ++l) {
    const auto& lp = plan.layers[l];
    out << "layer " << l << " s " << lp.subset_size << " p " << lp.subset_count << " spill "
        << (lp.spill ? 1 : 0) << "\n";
  }
  for (const auto& p : plan.partitions) {
    out << "partition " << p.id << " layer " << p.layer << " range " << p.begin << ".." << p.end
        << " world " << to_string(p.world) << " bytes " << p.footprint_bytes;
    if (p.branch) out << " branch " << *p.branch;
    out << "\n";
  }
  return out.str();
}

namespace detail {

inline std::size_t manifest_number(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || end != tok.data() + tok.size() || tok.empty()) {
    throw FormatError("manifest line " + std::to_string(line) + ": expected a number, got '" +
                      std::string(tok) + "'");
  }
  return v;
}

}  // namespace detail

inline PartitionPlan parse_manifest(const std::string& text) {
  PartitionPlan plan;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool have_scheme = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto bad = [&](const std::string& why) {
      return FormatError("manifest line " + std::to_string(line_no) + ": " + why);
    };
    auto num = [&](std::size_t i) { return detail::manifest_number(tok.at(i), line_no); };
    auto expect = [&](std::size_t i, std::string_view word) {
      if (i >= tok.size() || tok[i] != word) throw bad("expected '" + std::string(word) + "'");
    };
    if (tok[0] == "scheme" && tok.size() == 2) {
      try {
        plan.scheme = parse_scheme(tok[1]);
      } catch (const ValidationError& e) {
        throw bad(e.what());
      }
      have_scheme = true;
    } else if (tok[0] == "chunk" && tok.size() == 2) {
      plan.spill_chunk_bytes = num(1);
    } else if (tok[0] == "layer" && tok.size() == 8) {
      expect(2, "s");
      expect(4, "p");
      expect(6, "spill");
      if (num(1) != plan.layers.size()) throw bad("layer lines must be in order");
      plan.layers.push_back({num(3), num(5), num(7) != 0});
    } else if (tok[0] == "partition" && (tok.size() == 10 || tok.size() == 12)) {
      expect(2, "layer");
      expect(4, "range");
      expect(6, "world");
      expect(8, "bytes");
      Partition p;
      const std::size_t id = num(1);
      if (id > 0xffff) throw bad("partition id out of range");
      p.id = static_cast<std::uint16_t>(id);
      p.layer = num(3);
      const std::string& range = tok[5];
      const auto dots = range.find("..");
      if (dots == std::string::npos) throw bad("range must be a..b");
      p.begin = detail::manifest_number(std::string_view(range).substr(0, dots), line_no);
      p.end = detail::manifest_number(std::string_view(range).substr(dots + 2), line_no);
      if (tok[7] == "secure") p.world = World::secure;
      else if (tok[7] == "normal") p.world = World::normal;
      else throw bad("world must be secure or normal");
      p.encrypted = p.world == World::secure;
      p.footprint_bytes = num(9);
      if (tok.size() == 12) {
        expect(10, "branch");
        p.branch = num(11);
      }
      plan.partitions.push_back(p);
    } else {
      throw bad("unrecognized entry '" + tok[0] + "'");
    }
  }
  if (!have_scheme) throw FormatError("manifest has no scheme line");
  return plan;
}

inline nlohmann::json to_json(const PartitionPlan& plan) {
  nlohmann::json j;
  j["scheme"] = std::string(to_string(plan.scheme));
  j["spill_chunk_bytes"] = plan.spill_chunk_bytes;
  j["secure_partitions"] = plan.secure_partitions();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < plan.layers.size(); ++l) {
    layers.push_back({{"layer", l},
                      {"s", plan.layers[l].subset_size},
                      {"p", plan.layers[l].subset_count},
                      {"spill", plan.layers[l].spill}});
  }
  auto& parts = j["partitions"] = nlohmann::json::array();
  for (const auto& p : plan.partitions) {
    nlohmann::json e{{"id", p.id},
                     {"layer", p.layer},
                     {"begin", p.begin},
                     {"end", p.end},
                     {"world", std::string(to_string(p.world))},
                     {"encrypted", p.encrypted},
                     {"footprint_bytes", p.footprint_bytes}};
    if (p.branch) e["branch"] = *p.branch;
    parts.push_back(std::move(e));
  }
  return j;
}

// Human-readable summary.
inline std::string plan_report(const PartitionPlan& plan, const nn::ModelSpec& spec) {
  std::ostringstream out;
  out << "scheme " << to_string(plan.scheme) << ": " << plan.partitions.size() << " partitions ("
      << plan.secure_partitions() << " secure)\n";
  for (std::size_t l = 0; l < plan.layers.size() && l < spec.layers.size(); ++l) {
    const auto& lp = plan.layers[l];
    out << "  layer " << std::setw(2) << l << " " << std::left << std::setw(14)
        << nn::to_string(spec.layers[l].kind()) << std::right << " s=" << lp.subset_size
        << " p=" << lp.subset_count << (lp.spill ? " spill" : "") << "\n";
  }
  for (const auto& p : plan.partitions) {
    out << "  partition " << std::setw(4) << p.id << "  layer " << std::setw(2) << p.layer
        << "  range " << p.begin << ".." << p.end << "  " << to_string(p.world)
        << "  footprint " << p.footprint_bytes << " B";
    if (p.branch) out << "  branch " << *p.branch;
    out << "\n";
  }
  return out.str();
}

}  // namespace cdl::planner
