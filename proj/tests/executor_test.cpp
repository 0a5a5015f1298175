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

#include <array>
#include <random>

#include <gtest/gtest.h>

#include "cdl/cdl.hpp"
#include "oracles.hpp"
#include "testkit.hpp"

namespace {

using namespace cdl;
using planner::Scheme;
using planner::World;

constexpr std::size_t kCap = tee::SecureArena::kDefaultCapacity;

nn::ModelSpec load(const char* name) {
  return io::parse_config(io::read_text_file(std::string(CDL_MODELS_DIR "/") + name));
}

std::uint64_t blob_bytes(const testkit::Pipeline& p) {
  std::uint64_t total = 0;
  for (const auto& part : p.plan.partitions) {
    if (part.world == World::secure) total += testkit::expected_blob(p.store.layers[part.layer], part.begin, part.end).size();
  }
  return total;
}

TEST(Executor, AllSchemesMatchReferenceOnSampleModels) {
  for (const char* name : {"lenet11.cfg", "lenet_branched.cfg"}) {
    const auto spec = load(name);
    for (Scheme scheme : {Scheme::layered, Scheme::sublayer, Scheme::branched}) {
      if (scheme == Scheme::branched && !spec.branch) continue;
      const std::size_t cap = scheme == Scheme::sublayer ? 60000 : kCap;
      const auto p = testkit::make_pipeline(spec, planner::make_plan(spec, scheme, cap), 31);
      const auto r = testkit::run(p, cap);
      EXPECT_EQ(r.output.data(), oracle::forward(spec, p.store.layers, p.input.data())) << name;
      EXPECT_EQ(r.output.dims(), nn::layer_dims(spec).back());
      EXPECT_LE(r.arena_peak, cap);
      EXPECT_EQ(r.ledger.context_switches(), 2 * p.plan.secure_partitions());
      EXPECT_EQ(r.ledger.decrypted_bytes(), blob_bytes(p));
      EXPECT_EQ(r.partition_seconds.size(), p.plan.partitions.size());
      EXPECT_FALSE(testkit::audit(p, r)) << *testkit::audit(p, r);
    }
  }
}

TEST(Executor, PartitionPeaksMatchPlannedFootprints) {
  const auto spec = load("lenet11.cfg");
  for (std::size_t cap : {kCap, std::size_t{100000}, std::size_t{30000}}) {
    const auto p = testkit::make_pipeline(spec, planner::plan_sublayer(spec, cap), 32);
    const auto r = testkit::run(p, cap);
    ASSERT_EQ(r.ledger.partitions().size(), p.plan.partitions.size());
    for (std::size_t i = 0; i < p.plan.partitions.size(); ++i) {
      EXPECT_EQ(r.ledger.partitions()[i].partition_id, p.plan.partitions[i].id);
      EXPECT_EQ(r.ledger.partitions()[i].arena_peak, p.plan.partitions[i].footprint_bytes)
          << "cap " << cap << " partition " << i;
    }
  }
}

TEST(Executor, ArenaIsEmptyAfterRun) {
  const auto spec = load("lenet11.cfg");
  const auto p = testkit::make_pipeline(spec, planner::plan_layered(spec, kCap), 33);
  tee::SecureArena arena;
  (void)exec::run_partitioned(p.spec, p.parts, p.plan, p.input, arena, p.key);
  EXPECT_EQ(arena.usage(), 0u);
  EXPECT_EQ(arena.live_allocations(), 0u);
  // The arena is free for another session.
  EXPECT_NO_THROW(exec::run_partitioned(p.spec, p.parts, p.plan, p.input, arena, p.key));
}

TEST(Executor, RandomModelsAllSchemes) {
  std::mt19937_64 rng(34);
  for (int m = 0; m < 40; ++m) {
    const auto spec = testkit::random_model(rng);
    for (Scheme scheme : {Scheme::layered, Scheme::sublayer, Scheme::branched}) {
      planner::SublayerOptions opts;
      opts.spill_chunk_bytes = 8;
      std::size_t cap = 256;
      planner::PartitionPlan plan;
      for (;;) {
        try {
          plan = planner::make_plan(spec, scheme, cap, opts);
          break;
        } catch (const PlanningError&) {
          cap *= 2;
        }
      }
      const auto p = testkit::make_pipeline(spec, plan, m);
      const auto r = testkit::run(p, cap);
      EXPECT_TRUE(exec::compare_runs(r.output, nn::reference_forward(spec, p.store, p.input)).bitwise_equal)
          << io::to_config_text(spec) << planner::to_manifest(plan);
      EXPECT_FALSE(testkit::audit(p, r));
    }
  }
}

nn::ModelSpec spill_model() {
  nn::ModelSpec spec;
  spec.input = {16, 1, 1};
  spec.layers = {nn::LayerSpec{nn::Connected{1000, nn::Activation::relu, 1}},
                 nn::LayerSpec{nn::Connected{8, nn::Activation::linear, 1}}};
  return spec;
}

TEST(Spill, RedecryptsInputsOncePerSubset) {
  const auto spec = spill_model();
  for (std::size_t s : {1, 2, 3, 8}) {
    planner::SublayerOptions opts;
    opts.subset_sizes[1] = s;
    opts.spill_chunk_bytes = 1000;
    const auto plan = planner::plan_sublayer(spec, 4 * (s * 1001 + 8) + 1000, opts);
    ASSERT_TRUE(plan.layers[1].spill);
    const auto p = testkit::make_pipeline(spec, plan, 35);
    const auto r = testkit::run(p, kCap);
    const std::size_t subsets = (8 + s - 1) / s;
    EXPECT_EQ(r.ledger.decrypted_bytes(), blob_bytes(p) + subsets * 4000);
    EXPECT_EQ(r.output.data(), oracle::forward(spec, p.store.layers, p.input.data()));
    // The spill buffer only ever receives ciphertext.
    const auto& spill = r.shared.at(2);
    EXPECT_EQ(spill.log().size(), 4u);
    for (const auto& rec : spill.log()) EXPECT_EQ(rec.tag, tee::Taint::ciphertext);
    EXPECT_FALSE(testkit::audit(p, r));
  }
}

TEST(Spill, FirstLayerStreamsPublicInput) {
  nn::ModelSpec spec;
  spec.input = {600, 1, 1};
  spec.layers = {nn::LayerSpec{nn::Connected{4, nn::Activation::relu, 1}}};
  planner::SublayerOptions opts;
  opts.spill_chunk_bytes = 256;
  const auto plan = planner::plan_sublayer(spec, 4 * (601 + 4) + 256, opts);
  ASSERT_TRUE(plan.layers[0].spill);
  const auto p = testkit::make_pipeline(spec, plan, 36);
  const auto r = testkit::run(p, 4 * (601 + 4) + 256);
  EXPECT_EQ(r.ledger.decrypted_bytes(), blob_bytes(p));
  EXPECT_TRUE(r.shared.at(2).log().empty());
  EXPECT_EQ(r.output.data(), oracle::forward(spec, p.store.layers, p.input.data()));
}

TEST(Spill, ChunkRoundTripAndTamper) {
  const io::Key key = io::random_key();
  std::vector<float> values(37);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.5f * static_cast<float>(i) - 3.0f;
  tee::SharedBuffer buf("spill");
  const auto spilled = exec::spill_activations(values, 22, key, buf);
  EXPECT_EQ(spilled.chunk_bytes, 20u);
  EXPECT_EQ(spilled.chunks.size(), 8u);
  tee::SecureArena arena(64);
  tee::CostLedger ledger;
  std::vector<float> seen(values.size(), -99.0f);
  exec::stream_spilled(spilled, key, arena, ledger, [&](std::span<const float> chunk, std::size_t first) {
    EXPECT_EQ(arena.usage(), chunk.size() * 4);
    std::copy(chunk.begin(), chunk.end(), seen.begin() + static_cast<std::ptrdiff_t>(first));
  });
  EXPECT_EQ(seen, values);
  EXPECT_EQ(ledger.decrypted_bytes(), 37u * 4);
  EXPECT_EQ(arena.usage(), 0u);

  buf.tamper(spilled.chunks[3].offset + 40, 0x01);
  EXPECT_THROW(exec::stream_spilled(spilled, key, arena, ledger, [](auto, auto) {}), IntegrityError);
  EXPECT_THROW(exec::spill_activations(values, 3, key, buf), ValidationError);
}

TEST(Tamper, AnyContainerBitAborts) {
  const auto spec = load("lenet_branched.cfg");
  const auto p = testkit::make_pipeline(spec, planner::plan_branched(spec, kCap), 37);
  std::mt19937_64 rng(37);
  for (const auto& part : p.plan.partitions) {
    if (part.world == World::secure) EXPECT_TRUE(testkit::tamper_detected(p, kCap, part.id, rng));
  }
}

TEST(Tamper, SwappedContainersAreRejected) {
  const auto spec = load("lenet11.cfg");
  auto p = testkit::make_pipeline(spec, planner::plan_layered(spec, kCap), 38);
  std::swap(p.parts.containers.at(7), p.parts.containers.at(8));
  EXPECT_THROW(testkit::run(p, kCap), IntegrityError);
}

TEST(Tamper, WrongKeyIsRejected) {
  const auto spec = load("lenet11.cfg");
  auto p = testkit::make_pipeline(spec, planner::plan_layered(spec, kCap), 39);
  p.key = io::random_key();
  EXPECT_THROW(testkit::run(p, kCap), IntegrityError);
}

TEST(Executor, InputErrors) {
  const auto spec = load("lenet11.cfg");
  auto p = testkit::make_pipeline(spec, planner::plan_layered(spec, kCap), 40);
  EXPECT_THROW(testkit::run(p, 100000), OutOfSecureMemory);

  auto missing = p;
  missing.parts.containers.erase(3);
  EXPECT_THROW(testkit::run(missing, kCap), ValidationError);

  auto invalid = p;
  invalid.plan.partitions.pop_back();
  EXPECT_THROW(testkit::run(invalid, kCap), ValidationError);

  auto wrong_input = p;
  wrong_input.input = nn::Tensor::flat({1, 2, 3});
  EXPECT_THROW(testkit::run(wrong_input, kCap), DimensionError);
}

TEST(Executor, BranchedKeepsNormalWorldFeaturesPublic) {
  const auto spec = load("lenet_branched.cfg");
  const auto p = testkit::make_pipeline(spec, planner::plan_branched(spec, kCap), 41);
  const auto r = testkit::run(p, kCap);
  const auto acts = nn::reference_activations(spec, p.store, p.input);
  // The io buffer holds the input, the Normal-world features handed over at
  // the branch point, and the final output slices.
  const auto& io_log = r.shared.at(0).log();
  ASSERT_GE(io_log.size(), 2u);
  EXPECT_EQ(io_log[1].content, testkit::float_bytes(acts[3].data()));
  for (const auto& rec : io_log) EXPECT_EQ(rec.tag, tee::Taint::public_data);
  EXPECT_EQ(r.ledger.context_switches(), 12u);
  EXPECT_EQ(r.arena_peak, p.plan.partitions[4].footprint_bytes);
}

TEST(Compare, ReportsMismatch) {
  const nn::Tensor a = nn::Tensor::flat({1, 2, 3});
  EXPECT_TRUE(exec::compare_runs(a, a).bitwise_equal);
  const auto r = exec::compare_runs(a, nn::Tensor::flat({1, 2.5f, 3}));
  EXPECT_FALSE(r.bitwise_equal);
  EXPECT_EQ(r.first_mismatch, 1u);
  EXPECT_DOUBLE_EQ(r.max_abs_diff, 0.5);
  EXPECT_FALSE(exec::compare_runs(a, nn::Tensor::flat({1, 2})).bitwise_equal);
  EXPECT_FALSE(exec::compare_runs(nn::Tensor::flat({0.0f}), nn::Tensor::flat({-0.0f})).bitwise_equal);
}

TEST(Baseline, TimesReferenceRuns) {
  const auto spec = load("lenet11.cfg");
  const auto store = io::random_weights(spec, 1);
  EXPECT_GT(exec::time_reference(spec, store, io::random_input(spec, 1), 3), 0.0);
}

}  // namespace
