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

// Acceptance driver: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cdl/cdl.hpp"
#include "cdl/cli.hpp"
#include "oracles.hpp"
#include "testkit.hpp"

namespace {

namespace nn = cdl::nn;
namespace pl = cdl::planner;

constexpr std::size_t kCap = cdl::tee::SecureArena::kDefaultCapacity;

// Shared-memory audit and tamper results gathered from criteria 3 to 6.
struct TaintTally {
  std::size_t runs = 0;
  std::size_t tampered = 0;
  std::optional<std::string> failure;

  void audit(const testkit::Pipeline& p, const cdl::exec::RunResult& r, std::size_t cap,
             std::mt19937_64& rng) {
    ++runs;
    if (failure) return;
    if (auto leak = testkit::audit(p, r)) {
      failure = *leak;
      return;
    }
    for (const auto& part : p.plan.partitions) {
      if (part.world != pl::World::secure) continue;
      ++tampered;
      if (!testkit::tamper_detected(p, cap, part.id, rng)) {
        failure = "tampering partition " + std::to_string(part.id) + " went undetected";
        return;
      }
    }
  }
};

TaintTally g_taint;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<float> oracle_forward(const nn::ModelSpec& spec, const nn::WeightStore& store,
                                  const nn::Tensor& input) {
  return oracle::forward(spec, store.layers, input.data());
}

bool bitwise_equal(const nn::Tensor& a, const nn::Tensor& b) {
  return cdl::exec::compare_runs(a, b).bitwise_equal;
}

// Smallest cap under which plan_sublayer succeeds.
std::size_t min_feasible_cap(const nn::ModelSpec& spec, const pl::SublayerOptions& opts) {
  std::size_t lo = 1, hi = kCap;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    try {
      (void)pl::plan_sublayer(spec, mid, opts);
      hi = mid;
    } catch (const cdl::PlanningError&) {
      lo = mid + 1;
    }
  }
  return lo;
}

nn::ModelSpec canonical() {
  return cdl::io::parse_config(cdl::io::read_text_file(CDL_MODELS_DIR "/lenet11.cfg"));
}

std::string criterion1() {
  const double s = cdl::tee::estimate_overhead(11, 191790);
  if (std::abs(s * 1e3 - 33.05) > 0.01) return "FAIL overhead " + fmt("%.4f", s * 1e3) + " ms";

  std::ostringstream out, err;
  const char* argv[] = {"cdl", "estimate", "--layers", "11", "--bytes", "191790", "--json"};
  if (cdl::cli::run_cli(7, argv, out, err) != 0) return "FAIL cli estimate: " + err.str();
  const double cli = nlohmann::json::parse(out.str()).at("overhead_seconds").get<double>();
  if (cli != s) return "FAIL cli reports " + fmt("%.9f", cli);
  return "PASS overhead(L=11, B=191790) = " + fmt("%.4f", s * 1e3) + " ms";
}

std::string criterion2() {
  auto r = cdl::cli::make_report("layered", 11, 22, 191790, {}, 8.23e-3);
  const double ratio = *r.overhead_ratio();
  const double added = *r.added_overhead_factor();
  if (std::abs(ratio - 5.0) > 0.1 || std::abs(added - 4.0) > 0.1) {
    return "FAIL ratio " + fmt("%.4f", ratio) + " added " + fmt("%.4f", added);
  }
  return "PASS ratio " + fmt("%.3f", ratio) + " total, added overhead " + fmt("%.3f", added) +
         "x baseline";
}

std::string criterion3() {
  std::mt19937_64 rng(20261014);
  std::size_t runs = 0, spilled_runs = 0;
  for (int m = 0; m < 100; ++m) {
    const nn::ModelSpec spec = testkit::random_model(rng);
    const auto store = cdl::io::random_weights(spec, 1000 + m);
    const auto input = cdl::io::random_input(spec, 2000 + m);
    const std::vector<float> want = oracle_forward(spec, store, input);

    for (auto scheme : {pl::Scheme::layered, pl::Scheme::sublayer, pl::Scheme::branched}) {
      std::size_t cap = kCap;
      pl::SublayerOptions opts;
      if (scheme == pl::Scheme::sublayer) {
        // A tight cap and small chunks push layers into subsets and spill.
        std::size_t largest = 0;
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
          largest = std::max(largest, pl::estimate_layer_footprint(spec, l));
        }
        opts.spill_chunk_bytes = 4 * std::uniform_int_distribution<std::size_t>(1, 8)(rng);
        if (m % 2 == 0) {
          cap = min_feasible_cap(spec, opts);
        } else {
          cap = std::max<std::size_t>(64, largest * std::uniform_int_distribution<int>(20, 100)(rng) / 100);
        }
      }
      pl::PartitionPlan plan;
      for (;;) {
        try {
          plan = pl::make_plan(spec, scheme, cap, opts);
          break;
        } catch (const cdl::PlanningError&) {
          cap += cap / 4 + 16;
        }
      }
      testkit::Pipeline p = testkit::make_pipeline(spec, plan, 1000 + m);
      p.input = input;
      const auto result = testkit::run(p, cap);
      ++runs;
      for (const auto& lp : plan.layers) spilled_runs += lp.spill ? 1 : 0;
      if (result.output.data() != want) {
        return "FAIL model " + std::to_string(m) + " scheme " +
               std::string(pl::to_string(scheme)) + " differs from the oracle";
      }
      if (!bitwise_equal(result.output, nn::reference_forward(spec, store, input))) {
        return "FAIL model " + std::to_string(m) + " differs from reference_forward";
      }
      if (result.arena_peak > cap) return "FAIL arena peak above cap";
      g_taint.audit(p, result, cap, rng);
    }
  }
  if (spilled_runs == 0) return "FAIL no sub-layer run exercised spilling";
  return "PASS " + std::to_string(runs) + " runs over 100 models bitwise equal (" +
         std::to_string(spilled_runs) + " spilled layers)";
}

std::string criterion4() {
  std::mt19937_64 rng(4);
  const nn::ModelSpec spec = canonical();
  auto p = testkit::make_pipeline(spec, pl::plan_layered(spec, kCap), 4);
  const auto r = testkit::run(p, kCap);
  g_taint.audit(p, r, kCap, rng);
  if (r.ledger.context_switches() != 22) {
    return "FAIL context_switches = " + std::to_string(r.ledger.context_switches());
  }
  return "PASS layered canonical run: 11 partitions, 22 context switches";
}

std::string criterion5() {
  std::mt19937_64 rng(5);
  const nn::ModelSpec spec = canonical();
  std::size_t largest = 0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    largest = std::max(largest, pl::estimate_layer_footprint(spec, l));
  }
  {
    auto p = testkit::make_pipeline(spec, pl::plan_layered(spec, kCap), 5);
    const auto r = testkit::run(p, kCap);
    if (!bitwise_equal(r.output, nn::reference_forward(spec, p.store, p.input))) {
      return "FAIL layered run at 7 MiB differs from reference";
    }
    g_taint.audit(p, r, kCap, rng);
  }
  std::string caps;
  for (std::size_t cap : {largest - 1, largest / 2, std::size_t{40000}}) {
    try {
      (void)pl::plan_layered(spec, cap);
      return "FAIL plan_layered accepted cap " + std::to_string(cap);
    } catch (const cdl::LayerTooLargeError&) {
    }
    auto p = testkit::make_pipeline(spec, pl::plan_sublayer(spec, cap), 5);
    const auto r = testkit::run(p, cap);
    if (r.arena_peak > cap) {
      return "FAIL arena peak " + std::to_string(r.arena_peak) + " over cap " + std::to_string(cap);
    }
    if (!bitwise_equal(r.output, nn::reference_forward(spec, p.store, p.input))) {
      return "FAIL sub-layer run at cap " + std::to_string(cap) + " differs from reference";
    }
    g_taint.audit(p, r, cap, rng);
    caps += " " + std::to_string(cap) + "->" + std::to_string(r.arena_peak);
  }
  return "PASS largest layer " + std::to_string(largest) + " B; layered refuses, sub-layer peaks:" + caps;
}

std::string criterion6() {
  std::mt19937_64 rng(6);
  nn::ModelSpec spec;
  spec.input = {16, 1, 1};
  spec.layers = {nn::LayerSpec{nn::Connected{1000, nn::Activation::relu, 1}},
                 nn::LayerSpec{nn::Connected{8, nn::Activation::linear, 1}}};
  pl::SublayerOptions opts;
  opts.subset_sizes[1] = 2;
  opts.spill_chunk_bytes = 1024;

  const std::size_t tight = 10000;
  const pl::PartitionPlan spill_plan = pl::plan_sublayer(spec, tight, opts);
  const pl::PartitionPlan plain_plan = pl::plan_sublayer(spec, kCap, opts);
  if (!spill_plan.layers[1].spill || plain_plan.layers[1].spill) return "FAIL spill choice";
  if (spill_plan.layers[1].subset_count != 4 || plain_plan.layers[1].subset_count != 4) {
    return "FAIL expected p=4";
  }
  auto a = testkit::make_pipeline(spec, spill_plan, 6);
  auto b = testkit::make_pipeline(spec, plain_plan, 6);
  const auto ra = testkit::run(a, tight);
  const auto rb = testkit::run(b, kCap);
  const std::int64_t extra = static_cast<std::int64_t>(ra.ledger.decrypted_bytes()) -
                             static_cast<std::int64_t>(rb.ledger.decrypted_bytes());
  if (extra != 4 * 4 * 1000) return "FAIL extra decrypted bytes " + std::to_string(extra);
  const nn::Tensor ref = nn::reference_forward(spec, a.store, a.input);
  if (!bitwise_equal(ra.output, ref) || !bitwise_equal(rb.output, ref)) {
    return "FAIL spilled output differs from reference";
  }
  if (ra.arena_peak > tight) return "FAIL arena peak over cap";
  g_taint.audit(a, ra, tight, rng);
  g_taint.audit(b, rb, kCap, rng);
  return "PASS spill adds " + std::to_string(extra) + " decrypted bytes (" +
         std::to_string(rb.ledger.decrypted_bytes()) + " -> " +
         std::to_string(ra.ledger.decrypted_bytes()) + "), output bitwise equal";
}

std::string criterion7() {
  if (g_taint.failure) return "FAIL " + *g_taint.failure;
  if (g_taint.runs == 0) return "FAIL no runs audited";
  return "PASS " + std::to_string(g_taint.runs) + " runs leak nothing; " +
         std::to_string(g_taint.tampered) + " single-bit tampers all rejected";
}

std::string criterion8() {
  std::mt19937_64 rng(8);
  for (int m = 0; m < 50; ++m) {
    const nn::ModelSpec spec = testkit::random_model(rng, m % 2 == 0);
    pl::SublayerOptions opts;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) opts.subset_sizes[l] = nn::partition_units(spec, l);
    const auto layered = pl::plan_layered(spec, kCap);
    const auto sub = pl::plan_sublayer(spec, kCap, opts);
    if (layered.partitions != sub.partitions || layered.layers != sub.layers) {
      return "FAIL model " + std::to_string(m) + " plans differ";
    }
  }
  return "PASS sub-layer with s = n_out matches layered on 50 models";
}

}  // namespace

int main() {
  const std::pair<int, std::function<std::string()>> criteria[] = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8}};
  int failures = 0;
  for (const auto& [n, fn] : criteria) {
    std::string line;
    try {
      line = fn();
    } catch (const std::exception& e) {
      line = std::string("FAIL exception: ") + e.what();
    }
    if (line.rfind("PASS", 0) != 0) ++failures;
    std::printf("criterion %d: %s\n", n, line.c_str());
  }
  return failures == 0 ? 0 : 1;
}
