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

// Command-line front end. Exit codes: 0 success, 2 usage or unreadable input,
// 3 planning failure, 4 runtime or integrity failure.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdl/cdl.hpp"

namespace cdl::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kPlanning = 3, kRuntime = 4 };

struct RunReport {
  std::string scheme;
  std::size_t partitions = 0;
  std::uint64_t context_switches = 0;
  std::uint64_t decrypted_bytes = 0;
  double estimated_overhead_seconds = 0.0;
  std::optional<double> baseline_seconds;
  std::optional<bool> equivalent;
  std::size_t arena_peak = 0;

  // (baseline + overhead) / baseline.
  std::optional<double> overhead_ratio() const {
    if (!baseline_seconds || *baseline_seconds <= 0.0) return std::nullopt;
    return (*baseline_seconds + estimated_overhead_seconds) / *baseline_seconds;
  }
  // overhead / baseline: how many baselines of extra time confidentiality adds.
  std::optional<double> added_overhead_factor() const {
    if (!baseline_seconds || *baseline_seconds <= 0.0) return std::nullopt;
    return estimated_overhead_seconds / *baseline_seconds;
  }
};

inline RunReport make_report(std::string scheme, std::size_t partitions,
                             std::uint64_t context_switches, std::uint64_t decrypted_bytes,
                             const tee::CostConstants& c, std::optional<double> baseline_seconds) {
  RunReport r;
  r.scheme = std::move(scheme);
  r.partitions = partitions;
  r.context_switches = context_switches;
  r.decrypted_bytes = decrypted_bytes;
  r.estimated_overhead_seconds = tee::estimate_overhead(context_switches / 2, decrypted_bytes, c);
  r.baseline_seconds = baseline_seconds;
  return r;
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j{{"scheme", r.scheme},
                   {"partitions", r.partitions},
                   {"context_switches", r.context_switches},
                   {"decrypted_bytes", r.decrypted_bytes},
                   {"estimated_overhead_seconds", r.estimated_overhead_seconds},
                   {"arena_peak_bytes", r.arena_peak}};
  if (r.baseline_seconds) j["baseline_seconds"] = *r.baseline_seconds;
  if (auto v = r.overhead_ratio()) j["overhead_ratio"] = *v;
  if (auto v = r.added_overhead_factor()) j["added_overhead_factor"] = *v;
  if (r.equivalent) j["equivalent"] = *r.equivalent;
  return j;
}

// "key value" lines carrying exactly the numbers of the JSON form.
inline std::string to_text(const nlohmann::json& j) {
  std::ostringstream out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    out << it.key() << " " << (it->is_string() ? it->get<std::string>() : it->dump()) << "\n";
  }
  return out.str();
}

namespace detail {

struct Failure {
  int code;
  std::string message;
};

inline std::string require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw Failure{kUsage, "no such file: " + path};
  return path;
}

// Loads inputs; anything wrong with them is a usage error.
template <typename F>
auto load(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Failure&) {
    throw;
  } catch (const std::exception& e) {
    throw Failure{kUsage, e.what()};
  }
}

inline std::filesystem::path part_path(const std::filesystem::path& dir, const planner::Partition& p) {
  return dir / ("part_" + std::to_string(p.id) + (p.encrypted ? ".cdlp" : ".bin"));
}

inline constexpr const char* kManifestName = "plan.txt";

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidential CNN inference over a simulated TrustZone TEE"};
  app.require_subcommand(1);
  bool json = false;

  // encrypt
  auto* enc = app.add_subcommand("encrypt", "Split weights by plan and encrypt secure partitions");
  std::string enc_cfg, enc_weights, enc_plan, enc_key, enc_out;
  enc->add_option("--cfg", enc_cfg, "Model configuration")->required();
  enc->add_option("--weights", enc_weights, "Plaintext weights file")->required();
  enc->add_option("--plan", enc_plan, "Plan manifest")->required();
  enc->add_option("--key", enc_key, "Master key, 32 hex characters")->required();
  enc->add_option("--out", enc_out, "Output directory")->required();
  enc->add_flag("--json", json, "Machine-readable output");

  // plan
  auto* pln = app.add_subcommand("plan", "Partition a model under a secure-memory cap");
  std::string pln_cfg, pln_scheme, pln_manifest;
  std::size_t pln_cap = tee::SecureArena::kDefaultCapacity;
  std::optional<std::size_t> pln_s;
  std::size_t pln_chunk = planner::kDefaultSpillChunkBytes;
  pln->add_option("--cfg", pln_cfg, "Model configuration")->required();
  pln->add_option("--scheme", pln_scheme, "layered | sublayer | branched")
      ->required()
      ->check(CLI::IsMember({"layered", "sublayer", "branched"}));
  pln->add_option("--cap", pln_cap, "Secure memory cap in bytes");
  pln->add_option("--s", pln_s, "Subset size for sub-layer partitioning");
  pln->add_option("--chunk", pln_chunk, "Spill chunk size in bytes");
  pln->add_option("--manifest", pln_manifest, "Write the plan manifest here");
  pln->add_flag("--json", json, "Machine-readable output");

  // run
  auto* run = app.add_subcommand("run", "Run partitioned inference in the simulated TEE");
  std::string run_cfg, run_parts, run_plan, run_key, run_input, run_weights, run_output;
  std::size_t run_cap = tee::SecureArena::kDefaultCapacity;
  bool run_oracle = false;
  std::optional<double> run_baseline_ms;
  tee::CostConstants run_costs;
  run->add_option("--cfg", run_cfg, "Model configuration")->required();
  run->add_option("--parts", run_parts, "Directory of partition files")->required();
  run->add_option("--plan", run_plan, "Plan manifest")->required();
  run->add_option("--key", run_key, "Master key, 32 hex characters")->required();
  run->add_option("--input", run_input, "Input tensor file")->required();
  run->add_option("--cap", run_cap, "Secure memory cap in bytes");
  run->add_flag("--oracle", run_oracle, "Also run the plaintext reference and compare");
  run->add_option("--weights", run_weights, "Plaintext weights (for --oracle)");
  run->add_option("--baseline-ms", run_baseline_ms, "Baseline inference time in ms");
  run->add_option("--tcs", run_costs.context_switch_seconds, "Seconds per context switch");
  run->add_option("--td", run_costs.decrypt_seconds_per_byte, "Seconds per decrypted byte");
  run->add_option("--output", run_output, "Write the output tensor here");
  run->add_flag("--json", json, "Machine-readable output");

  // estimate
  auto* est = app.add_subcommand("estimate", "Predict the confidentiality overhead");
  std::uint64_t est_layers = 0, est_bytes = 0;
  tee::CostConstants est_costs;
  std::optional<double> est_baseline_ms;
  est->add_option("--layers", est_layers, "Secure partition invocations")->required();
  est->add_option("--bytes", est_bytes, "Decrypted bytes")->required();
  est->add_option("--tcs", est_costs.context_switch_seconds, "Seconds per context switch");
  est->add_option("--td", est_costs.decrypt_seconds_per_byte, "Seconds per decrypted byte");
  est->add_option("--baseline-ms", est_baseline_ms, "Baseline inference time in ms");
  est->add_flag("--json", json, "Machine-readable output");

  // gen-weights / gen-input
  auto* gw = app.add_subcommand("gen-weights", "Write deterministic random weights for a model");
  std::string gw_cfg, gw_out;
  std::uint64_t gw_seed = 1;
  gw->add_option("--cfg", gw_cfg, "Model configuration")->required();
  gw->add_option("--seed", gw_seed, "RNG seed");
  gw->add_option("--out", gw_out, "Output weights file")->required();
  gw->add_flag("--json", json, "Machine-readable output");

  auto* gi = app.add_subcommand("gen-input", "Write a deterministic random input tensor");
  std::string gi_cfg, gi_out;
  std::uint64_t gi_seed = 1;
  gi->add_option("--cfg", gi_cfg, "Model configuration")->required();
  gi->add_option("--seed", gi_seed, "RNG seed");
  gi->add_option("--out", gi_out, "Output tensor file")->required();
  gi->add_flag("--json", json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? kOk : kUsage;
  }

  auto emit = [&](const nlohmann::json& j, const std::string& text) {
    if (json) out << j.dump(2) << "\n";
    else out << text;
  };

  try {
    if (enc->parsed()) {
      const auto key = detail::load([&] { return io::parse_key_hex(enc_key); });
      const auto spec = detail::load([&] {
        return io::parse_config(io::read_text_file(detail::require_file(enc_cfg)));
      });
      const auto store = detail::load([&] {
        return io::load_weights(io::read_file(detail::require_file(enc_weights)), spec);
      });
      const auto plan = detail::load([&] {
        return planner::parse_manifest(io::read_text_file(detail::require_file(enc_plan)));
      });
      if (auto v = planner::validate_plan(plan, spec, 0); !v.empty()) {
        throw detail::Failure{kPlanning, planner::describe(v)};
      }
      const auto set = io::package_partitions(store, spec, plan, key);
      detail::load([&] {
        std::filesystem::create_directories(enc_out);
        return 0;
      });
      nlohmann::json files = nlohmann::json::array();
      for (const auto& p : plan.partitions) {
        const auto path = detail::part_path(enc_out, p);
        io::write_file(path, p.encrypted ? set.containers.at(p.id) : set.plaintext.at(p.id));
        files.push_back(path.filename().string());
      }
      io::write_file(std::filesystem::path(enc_out) / detail::kManifestName, planner::to_manifest(plan));
      nlohmann::json j{{"encrypted_partitions", set.containers.size()},
                       {"plaintext_partitions", set.plaintext.size()},
                       {"files", files},
                       {"manifest", detail::kManifestName}};
      emit(j, "encrypted " + std::to_string(set.containers.size()) + " partitions into " + enc_out +
                  "\n" + to_text(j));
      return kOk;
    }

    if (pln->parsed()) {
      const auto spec = detail::load([&] {
        return io::parse_config(io::read_text_file(detail::require_file(pln_cfg)));
      });
      planner::SublayerOptions opts;
      opts.spill_chunk_bytes = pln_chunk;
      if (pln_s) {
        if (*pln_s == 0) throw detail::Failure{kUsage, "--s must be >= 1"};
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
          const auto& layer = spec.layers[l];
          if (layer.is<nn::Connected>() || layer.is<nn::Convolutional>()) {
            opts.subset_sizes[l] = std::min(*pln_s, nn::partition_units(spec, l));
          }
        }
      }
      planner::PartitionPlan plan;
      try {
        plan = planner::make_plan(spec, planner::parse_scheme(pln_scheme), pln_cap, opts);
      } catch (const PlanningError& e) {
        throw detail::Failure{kPlanning, e.what()};
      } catch (const ValidationError& e) {
        throw detail::Failure{kPlanning, e.what()};
      }
      if (auto v = planner::validate_plan(plan, spec, pln_cap); !v.empty()) {
        throw detail::Failure{kPlanning, planner::describe(v)};
      }
      if (!pln_manifest.empty()) io::write_file(pln_manifest, planner::to_manifest(plan));
      emit(planner::to_json(plan), planner::plan_report(plan, spec));
      return kOk;
    }

    if (run->parsed()) {
      const auto key = detail::load([&] { return io::parse_key_hex(run_key); });
      const auto spec = detail::load([&] {
        return io::parse_config(io::read_text_file(detail::require_file(run_cfg)));
      });
      const auto plan = detail::load([&] {
        return planner::parse_manifest(io::read_text_file(detail::require_file(run_plan)));
      });
      const auto input = detail::load([&] {
        return io::decode_input(io::read_file(detail::require_file(run_input)));
      });
      if (auto v = planner::validate_plan(plan, spec, run_cap); !v.empty()) {
        throw detail::Failure{kPlanning, planner::describe(v)};
      }
      if (run_oracle && run_weights.empty()) {
        throw detail::Failure{kUsage, "--oracle needs --weights"};
      }
      if (run_baseline_ms && !(*run_baseline_ms > 0.0)) {
        throw detail::Failure{kUsage, "--baseline-ms must be positive"};
      }
      detail::load([&] {
        run_costs.validate();
        return 0;
      });
      io::PartitionSet set = detail::load([&] {
        io::PartitionSet s;
        for (const auto& p : plan.partitions) {
          auto bytes = io::read_file(detail::require_file(detail::part_path(run_parts, p).string()));
          (p.encrypted ? s.containers : s.plaintext).emplace(p.id, std::move(bytes));
        }
        return s;
      });

      tee::SecureArena arena(run_cap);
      exec::RunResult result;
      try {
        result = exec::run_partitioned(spec, set, plan, input, arena, key);
      } catch (const std::exception& e) {
        throw detail::Failure{kRuntime, e.what()};
      }

      std::optional<double> baseline;
      if (run_baseline_ms) baseline = *run_baseline_ms / 1000.0;
      std::optional<bool> equivalent;
      if (run_oracle) {
        const auto store = detail::load([&] {
          return io::load_weights(io::read_file(detail::require_file(run_weights)), spec);
        });
        const nn::Tensor ref = exec::run_reference(spec, store, input);
        equivalent = exec::compare_runs(result.output, ref).bitwise_equal;
        if (!baseline) baseline = exec::time_reference(spec, store, input);
      }
      if (!run_output.empty()) io::write_file(run_output, io::encode_input(result.output));

      RunReport report = make_report(std::string(planner::to_string(plan.scheme)),
                                     plan.partitions.size(), result.ledger.context_switches(),
                                     result.ledger.decrypted_bytes(), run_costs, baseline);
      report.equivalent = equivalent;
      report.arena_peak = result.arena_peak;
      const auto j = to_json(report);
      emit(j, to_text(j));
      return equivalent.value_or(true) ? kOk : kRuntime;
    }

    if (est->parsed()) {
      detail::load([&] {
        est_costs.validate();
        return 0;
      });
      std::optional<double> baseline;
      if (est_baseline_ms) {
        if (!(*est_baseline_ms > 0.0)) throw detail::Failure{kUsage, "--baseline-ms must be positive"};
        baseline = *est_baseline_ms / 1000.0;
      }
      RunReport r = make_report("estimate", est_layers, 2 * est_layers, est_bytes, est_costs, baseline);
      nlohmann::json j{{"layers", est_layers},
                       {"bytes", est_bytes},
                       {"context_switch_seconds", est_costs.context_switch_seconds},
                       {"decrypt_seconds_per_byte", est_costs.decrypt_seconds_per_byte},
                       {"overhead_seconds", r.estimated_overhead_seconds}};
      if (baseline) {
        j["baseline_seconds"] = *baseline;
        j["overhead_ratio"] = *r.overhead_ratio();
        j["added_overhead_factor"] = *r.added_overhead_factor();
      }
      emit(j, to_text(j));
      return kOk;
    }

    if (gw->parsed()) {
      const auto spec = detail::load([&] {
        return io::parse_config(io::read_text_file(detail::require_file(gw_cfg)));
      });
      const auto bytes = io::serialize_weights(io::random_weights(spec, gw_seed));
      io::write_file(gw_out, bytes);
      nlohmann::json j{{"bytes", bytes.size()}, {"layers", spec.layers.size()}};
      emit(j, to_text(j));
      return kOk;
    }

    if (gi->parsed()) {
      const auto spec = detail::load([&] {
        return io::parse_config(io::read_text_file(detail::require_file(gi_cfg)));
      });
      const auto bytes = io::encode_input(io::random_input(spec, gi_seed));
      io::write_file(gi_out, bytes);
      nlohmann::json j{{"bytes", bytes.size()}};
      emit(j, to_text(j));
      return kOk;
    }
  } catch (const detail::Failure& f) {
    err << "error: " << f.message << (f.message.empty() || f.message.back() == '\n' ? "" : "\n");
    return f.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace cdl::cli
