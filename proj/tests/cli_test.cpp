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

#include <filesystem>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cdl/cli.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kKey = "00112233445566778899aabbccddeeff";
const std::string kCanonical = CDL_MODELS_DIR "/lenet11.cfg";
const std::string kBranched = CDL_MODELS_DIR "/lenet_branched.cfg";

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::initializer_list<std::string> args) {
  std::vector<std::string> words{"cdl"};
  words.insert(words.end(), args);
  std::vector<const char*> argv;
  for (const auto& w : words) argv.push_back(w.c_str());
  std::ostringstream out, err;
  const int code = cdl::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cdl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // gen-weights, gen-input, plan and encrypt for one model.
  void prepare(const std::string& cfg, const std::string& scheme, const std::string& cap,
               std::initializer_list<std::string> extra = {}) {
    ASSERT_EQ(cli({"gen-weights", "--cfg", cfg, "--seed", "5", "--out", path("w.bin")}).code, 0);
    ASSERT_EQ(cli({"gen-input", "--cfg", cfg, "--seed", "6", "--out", path("in.bin")}).code, 0);
    std::vector<std::string> plan{"plan", "--cfg", cfg, "--scheme", scheme, "--cap", cap,
                                  "--manifest", path("plan.txt")};
    plan.insert(plan.end(), extra);
    std::vector<const char*> argv{"cdl"};
    for (const auto& w : plan) argv.push_back(w.c_str());
    std::ostringstream out, err;
    ASSERT_EQ(cdl::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err), 0) << err.str();
    const auto enc = cli({"encrypt", "--cfg", cfg, "--weights", path("w.bin"), "--plan",
                          path("plan.txt"), "--key", kKey, "--out", path("parts")});
    ASSERT_EQ(enc.code, 0) << enc.err;
  }

  Outcome run(const std::string& cfg, const std::string& cap, bool as_json = true) {
    if (as_json) {
      return cli({"run", "--cfg", cfg, "--parts", path("parts"), "--plan", path("parts/plan.txt"),
                  "--key", kKey, "--input", path("in.bin"), "--cap", cap, "--oracle", "--weights",
                  path("w.bin"), "--baseline-ms", "8.23", "--output", path("out.bin"), "--json"});
    }
    return cli({"run", "--cfg", cfg, "--parts", path("parts"), "--plan", path("parts/plan.txt"),
                "--key", kKey, "--input", path("in.bin"), "--cap", cap, "--oracle", "--weights",
                path("w.bin"), "--baseline-ms", "8.23"});
  }

  fs::path dir_;
};

TEST(Estimate, PublishedCase) {
  const auto r = cli({"estimate", "--layers", "11", "--bytes", "191790", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out).at("overhead_seconds").get<double>(), 0.03305, 1e-5);
}

TEST(Estimate, ZeroCase) {
  const auto r = cli({"estimate", "--layers", "0", "--bytes", "0", "--json"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out).at("overhead_seconds").get<double>(), 0.0);
}

TEST(Estimate, HalvingDecryptCostHalvesThatTerm) {
  auto seconds = [](const std::string& td) {
    return json::parse(cli({"estimate", "--layers", "0", "--bytes", "191790", "--td", td, "--json"}).out)
        .at("overhead_seconds")
        .get<double>();
  };
  EXPECT_DOUBLE_EQ(seconds("8.185e-08"), seconds("1.637e-07") / 2);
}

TEST(Estimate, RatioAndTextMatchJson) {
  const auto j = json::parse(
      cli({"estimate", "--layers", "11", "--bytes", "191790", "--baseline-ms", "8.23", "--json"}).out);
  EXPECT_NEAR(j.at("overhead_ratio").get<double>(), 5.0, 0.1);
  EXPECT_NEAR(j.at("added_overhead_factor").get<double>(), 4.0, 0.1);
  const auto text = cli({"estimate", "--layers", "11", "--bytes", "191790", "--baseline-ms", "8.23"});
  EXPECT_EQ(text.out, cdl::cli::to_text(j));
}

TEST(Estimate, UsageErrors) {
  EXPECT_EQ(cli({"estimate", "--layers", "11"}).code, 2);
  EXPECT_EQ(cli({"estimate", "--layers", "x", "--bytes", "1"}).code, 2);
  EXPECT_EQ(cli({"estimate", "--layers", "1", "--bytes", "1", "--tcs", "0"}).code, 2);
  EXPECT_EQ(cli({"estimate", "--layers", "1", "--bytes", "1", "--baseline-ms", "0"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(Cli, PlanLayeredCanonical) {
  const auto r = cli({"plan", "--cfg", kCanonical, "--scheme", "layered", "--cap", "7340032",
                      "--manifest", path("m.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("11 partitions (11 secure)"), std::string::npos);
  EXPECT_NE(r.out.find("footprint 154048 B"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("m.txt")));
  const auto j = json::parse(cli({"plan", "--cfg", kCanonical, "--scheme", "layered", "--json"}).out);
  EXPECT_EQ(j.at("partitions").size(), 11u);
  EXPECT_EQ(j.at("partitions")[5].at("footprint_bytes"), 154048);
}

TEST_F(Cli, PlanSublayerTinyCapShowsSpill) {
  cdl::io::write_file(path("wide.cfg"),
                      std::string("[net]\nchannels=8\nheight=1\nwidth=1\n[connected]\noutputs=200\n"
                                  "activation=relu\n[connected]\noutputs=2\n"));
  const auto r = cli({"plan", "--cfg", path("wide.cfg"), "--scheme", "sublayer", "--cap", "1000",
                      "--chunk", "64"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("layer  1 connected      s=1 p=2 spill"), std::string::npos) << r.out;
  const auto j = json::parse(cli({"plan", "--cfg", path("wide.cfg"), "--scheme", "sublayer", "--cap",
                                  "1000", "--chunk", "64", "--json"}).out);
  EXPECT_TRUE(j.at("layers")[1].at("spill").get<bool>());
  EXPECT_EQ(j.at("layers")[0].at("s"), 4);
  EXPECT_EQ(j.at("layers")[0].at("p"), 50);

  prepare(path("wide.cfg"), "sublayer", "1000", {"--chunk", "64"});
  const auto out = run(path("wide.cfg"), "1000");
  ASSERT_EQ(out.code, 0) << out.err;
  const auto rep = json::parse(out.out);
  EXPECT_TRUE(rep.at("equivalent").get<bool>());
  EXPECT_LE(rep.at("arena_peak_bytes").get<int>(), 1000);
}

TEST_F(Cli, PlanInfeasibleCap) {
  const auto r = cli({"plan", "--cfg", kCanonical, "--scheme", "layered", "--cap", "100000"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("layer 5"), std::string::npos);
  EXPECT_EQ(cli({"plan", "--cfg", kCanonical, "--scheme", "sublayer", "--cap", "100"}).code, 3);
  EXPECT_EQ(cli({"plan", "--cfg", kCanonical, "--scheme", "branched"}).code, 3);
  EXPECT_EQ(cli({"plan", "--cfg", kCanonical, "--scheme", "diagonal"}).code, 2);
  EXPECT_EQ(cli({"plan", "--cfg", path("missing.cfg"), "--scheme", "layered"}).code, 2);
}

TEST_F(Cli, PlanSubsetSizeIsClampedPerLayer) {
  const auto j = json::parse(cli({"plan", "--cfg", kCanonical, "--scheme", "sublayer", "--s", "20", "--json"}).out);
  EXPECT_EQ(j.at("layers")[0].at("s"), 4);
  EXPECT_EQ(j.at("layers")[1].at("s"), 784);
  EXPECT_EQ(j.at("layers")[5].at("s"), 20);
  EXPECT_EQ(j.at("layers")[5].at("p"), 3);
  EXPECT_EQ(cli({"plan", "--cfg", kCanonical, "--scheme", "sublayer", "--s", "0"}).code, 2);
}

TEST_F(Cli, EncryptWritesOneContainerPerSecurePartition) {
  prepare(kCanonical, "layered", "7340032");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(path("parts"))) files += e.path().extension() == ".cdlp";
  EXPECT_EQ(files, 11u);
  EXPECT_TRUE(fs::exists(path("parts/plan.txt")));

  const auto first = cdl::io::read_file(path("parts/part_5.cdlp"));
  ASSERT_EQ(cli({"encrypt", "--cfg", kCanonical, "--weights", path("w.bin"), "--plan", path("plan.txt"),
                 "--key", kKey, "--out", path("again")}).code, 0);
  const auto second = cdl::io::read_file(path("again/part_5.cdlp"));
  EXPECT_NE(first, second);
  const auto key = cdl::io::parse_key_hex(kKey);
  EXPECT_EQ(cdl::io::decrypt_partition(first, key), cdl::io::decrypt_partition(second, key));
}

TEST_F(Cli, EncryptBranchedWritesPlainPrefix) {
  prepare(kBranched, "branched", "7340032");
  EXPECT_TRUE(fs::exists(path("parts/part_0.bin")));
  EXPECT_TRUE(fs::exists(path("parts/part_4.cdlp")));
  EXPECT_FALSE(fs::exists(path("parts/part_4.bin")));
  const auto r = run(kBranched, "7340032");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(json::parse(r.out).at("equivalent").get<bool>());
}

TEST_F(Cli, EncryptBadKeyWritesNothing) {
  ASSERT_EQ(cli({"gen-weights", "--cfg", kCanonical, "--out", path("w.bin")}).code, 0);
  ASSERT_EQ(cli({"plan", "--cfg", kCanonical, "--scheme", "layered", "--manifest", path("plan.txt")}).code, 0);
  const auto r = cli({"encrypt", "--cfg", kCanonical, "--weights", path("w.bin"), "--plan",
                      path("plan.txt"), "--key", "0011", "--out", path("parts")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("key"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("parts")));
  EXPECT_EQ(cli({"encrypt", "--cfg", kCanonical, "--weights", path("nope.bin"), "--plan", path("plan.txt"),
                 "--key", kKey, "--out", path("parts")}).code, 2);
  EXPECT_FALSE(fs::exists(path("parts")));
}

TEST_F(Cli, RunLayeredWithOracle) {
  prepare(kCanonical, "layered", "7340032");
  const auto r = run(kCanonical, "7340032");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j.at("equivalent").get<bool>());
  EXPECT_EQ(j.at("context_switches"), 22);
  EXPECT_EQ(j.at("partitions"), 11);
  EXPECT_EQ(j.at("scheme"), "layered");
  const auto bytes = j.at("decrypted_bytes").get<std::uint64_t>();
  EXPECT_EQ(bytes, cdl::io::serialized_weights_size(cdl::io::parse_config(cdl::io::read_text_file(kCanonical))) - 16);
  EXPECT_DOUBLE_EQ(j.at("estimated_overhead_seconds").get<double>(), cdl::tee::estimate_overhead(11, bytes));
  const double base = j.at("baseline_seconds").get<double>();
  EXPECT_DOUBLE_EQ(j.at("overhead_ratio").get<double>(), (base + j.at("estimated_overhead_seconds").get<double>()) / base);

  const auto out = cdl::io::decode_input(cdl::io::read_file(path("out.bin")));
  EXPECT_EQ(out.size(), 10u);

  const auto text = run(kCanonical, "7340032", false);
  ASSERT_EQ(text.code, 0);
  json same = j;
  EXPECT_EQ(text.out, cdl::cli::to_text(same));
}

TEST_F(Cli, RunCorruptedPartitionFails) {
  prepare(kCanonical, "layered", "7340032");
  auto bytes = cdl::io::read_file(path("parts/part_3.cdlp"));
  bytes[40] ^= 0x04;
  cdl::io::write_file(path("parts/part_3.cdlp"), bytes);
  const auto r = run(kCanonical, "7340032");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("partition 3"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_FALSE(fs::exists(path("out.bin")));
}

TEST_F(Cli, RunUsageAndPlanningErrors) {
  prepare(kCanonical, "layered", "7340032");
  EXPECT_EQ(run(kCanonical, "100000").code, 3);
  fs::remove(path("parts/part_2.cdlp"));
  EXPECT_EQ(run(kCanonical, "7340032").code, 2);
  EXPECT_EQ(cli({"run", "--cfg", kCanonical, "--parts", path("parts"), "--plan", path("parts/plan.txt"),
                 "--key", "xyz", "--input", path("in.bin")}).code, 2);
  EXPECT_EQ(cli({"run", "--cfg", kCanonical, "--parts", path("parts"), "--plan", path("parts/plan.txt"),
                 "--key", kKey, "--input", path("in.bin"), "--oracle"}).code, 2);
}

TEST_F(Cli, RunWrongKeyIsIntegrityFailure) {
  prepare(kCanonical, "layered", "7340032");
  const auto r = cli({"run", "--cfg", kCanonical, "--parts", path("parts"), "--plan", path("parts/plan.txt"),
                      "--key", "ffffffffffffffffffffffffffffffff", "--input", path("in.bin")});
  EXPECT_EQ(r.code, 4);
}

TEST_F(Cli, GeneratorsAreDeterministic) {
  ASSERT_EQ(cli({"gen-weights", "--cfg", kCanonical, "--seed", "9", "--out", path("a.bin")}).code, 0);
  ASSERT_EQ(cli({"gen-weights", "--cfg", kCanonical, "--seed", "9", "--out", path("b.bin")}).code, 0);
  EXPECT_EQ(cdl::io::read_file(path("a.bin")), cdl::io::read_file(path("b.bin")));
  EXPECT_EQ(fs::file_size(path("a.bin")), 172344u);
  ASSERT_EQ(cli({"gen-input", "--cfg", kCanonical, "--out", path("i.bin")}).code, 0);
  EXPECT_EQ(fs::file_size(path("i.bin")), 12 + 4 * 784u);
}

TEST(Report, RatioDefinitions) {
  const auto r = cdl::cli::make_report("layered", 11, 22, 191790, {}, 8.23e-3);
  EXPECT_NEAR(r.estimated_overhead_seconds * 1e3, 33.05, 0.01);
  EXPECT_NEAR(*r.overhead_ratio(), 5.0, 0.1);
  EXPECT_NEAR(*r.added_overhead_factor(), 4.0, 0.1);
  EXPECT_DOUBLE_EQ(*r.overhead_ratio(), 1.0 + *r.added_overhead_factor());
  EXPECT_FALSE(cdl::cli::make_report("layered", 1, 2, 0, {}, std::nullopt).overhead_ratio());
}

}  // namespace
