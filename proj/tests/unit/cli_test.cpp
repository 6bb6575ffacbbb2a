#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "cli_harness.hpp"

namespace fs = std::filesystem;
using hetplan::testing::fresh_dir;
using hetplan::testing::read_csv;
using hetplan::testing::read_json;
using hetplan::testing::run_cli;
using hetplan::testing::slurp;
using hetplan::testing::write_file;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fresh_dir("cli");
    ASSERT_EQ(run_cli({"fixtures", "--out", (root_ / "fx").string()}).code, 0);
  }

  static fs::path fx(const std::string& scenario, const std::string& file) {
    return root_ / "fx" / scenario / file;
  }

  static hetplan::testing::CliRun plan(const std::string& scenario, const fs::path& out,
                                       std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"plan",
                                     "--cluster", fx(scenario, "cluster.json").string(),
                                     "--model", fx(scenario, "model.json").string(),
                                     "--profile", fx(scenario, "profile.json").string(),
                                     "--slo", fx(scenario, "slo.json").string(),
                                     "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }

  static int count_phase(const nlohmann::json& plan_doc, const std::string& phase) {
    int n = 0;
    for (const auto& r : plan_doc.at("replicas")) n += r.at("phase") == phase;
    return n;
  }

  static fs::path root_;
};

fs::path Cli::root_;

}  // namespace

TEST_F(Cli, FixturesWriteEveryScenario) {
  for (const auto& entry : fs::directory_iterator(root_ / "fx")) {
    if (!entry.is_directory()) continue;
    for (const char* f : {"cluster.json", "model.json", "profile.json", "slo.json"}) {
      EXPECT_TRUE(fs::exists(entry.path() / f)) << entry.path() << " " << f;
    }
  }
  EXPECT_TRUE(fs::exists(root_ / "fx" / "config.json"));
  EXPECT_TRUE(fs::exists(fx("cloud-coding", "cluster.json")));
}

TEST_F(Cli, PlanWritesPlanAndConvergence) {
  const auto out = fresh_dir("plan-toy", root_);
  const auto r = plan("toy-two-type", out);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("prefill"), std::string::npos);
  const auto doc = read_json(out / "plan.json");
  for (const char* k : {"cluster", "model", "workload", "slo", "config", "replicas", "routing",
                        "kv_bits", "provenance"}) {
    EXPECT_TRUE(doc.contains(k)) << k;
  }
  const auto& p = doc;
  EXPECT_GE(count_phase(doc, "prefill"), 1);
  EXPECT_GE(count_phase(doc, "decode"), 1);
  EXPECT_TRUE(p.at("routing").contains("x"));
  EXPECT_TRUE(p.at("routing").contains("y"));
  const auto conv = read_csv(out / "convergence.csv");
  ASSERT_GE(conv.size(), 2u);
  EXPECT_EQ(conv[0], (std::vector<std::string>{"step", "best_score"}));
  for (std::size_t k = 2; k < conv.size(); ++k) {
    EXPECT_GE(std::stod(conv[k][1]), std::stod(conv[k - 1][1]));
  }
}

TEST_F(Cli, MalformedClusterExitsTwoWithViolations) {
  const auto dir = fresh_dir("bad-cluster", root_);
  auto cluster = read_json(fx("toy-two-type", "cluster.json"));
  cluster["beta"][0][1] = -1.0;
  write_file(dir / "cluster.json", cluster.dump());
  const auto r = run_cli({"plan", "--cluster", (dir / "cluster.json").string(), "--model",
                          fx("toy-two-type", "model.json").string(), "--profile",
                          fx("toy-two-type", "profile.json").string(), "--slo",
                          fx("toy-two-type", "slo.json").string(), "--out",
                          (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  const auto v = nlohmann::json::parse(r.err);
  ASSERT_TRUE(v.contains("violations"));
  EXPECT_FALSE(v.at("violations").empty());
  EXPECT_FALSE(fs::exists(dir / "out" / "plan.json"));
}

TEST_F(Cli, UnparsableInputExitsTwo) {
  const auto dir = fresh_dir("garbage", root_);
  write_file(dir / "cluster.json", "{not json");
  const auto r = run_cli({"plan", "--cluster", (dir / "cluster.json").string(), "--model",
                          fx("toy-two-type", "model.json").string(), "--profile",
                          fx("toy-two-type", "profile.json").string(), "--slo",
                          fx("toy-two-type", "slo.json").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run_cli({"plan"}).code, 2);
  EXPECT_EQ(run_cli({"bogus"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(Cli, SimulateWritesMetricsAndMonotoneCurve) {
  const auto dir = fresh_dir("sim", root_);
  ASSERT_EQ(plan("toy-two-type", dir / "plan").code, 0);
  ASSERT_EQ(run_cli({"gen-trace", "--rate", "3", "--n", "150", "--input", "512", "--output", "64",
                     "--input-sigma", "0.5", "--seed", "4", "--out", (dir / "t.jsonl").string()})
                .code,
            0);
  const auto r = run_cli({"simulate", "--plan", (dir / "plan" / "plan.json").string(), "--trace",
                          (dir / "t.jsonl").string(), "--out", (dir / "sim").string(),
                          "--slo-scale-sweep", "0.5:8:0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_json(dir / "sim" / "metrics.json");
  for (const char* k : {"attainment_ttft", "attainment_tpot", "attainment_e2e", "throughput_rps",
                        "throughput_tps", "requests", "completed"}) {
    EXPECT_TRUE(m.contains(k)) << k;
  }
  EXPECT_EQ(m.at("requests"), 150);
  const auto curve = read_csv(dir / "sim" / "attainment_curve.csv");
  ASSERT_EQ(curve[0], (std::vector<std::string>{"slo_scale", "ttft", "tpot", "e2e"}));
  ASSERT_EQ(curve.size(), 17u);
  for (std::size_t k = 2; k < curve.size(); ++k) {
    for (std::size_t c = 1; c < 4; ++c) EXPECT_GE(std::stod(curve[k][c]), std::stod(curve[k - 1][c]));
  }
  const auto req = read_csv(dir / "sim" / "requests.csv");
  EXPECT_EQ(req.size(), 151u);
  EXPECT_EQ(req[0][0], "id");
}

TEST_F(Cli, SimulateEmptyTraceExitsTwo) {
  const auto dir = fresh_dir("sim-empty", root_);
  ASSERT_EQ(plan("toy-two-type", dir / "plan").code, 0);
  write_file(dir / "t.jsonl", "");
  const auto r = run_cli({"simulate", "--plan", (dir / "plan" / "plan.json").string(), "--trace",
                          (dir / "t.jsonl").string(), "--out", (dir / "sim").string()});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, SimulateInvalidPlanExitsTwo) {
  const auto dir = fresh_dir("sim-invalid", root_);
  ASSERT_EQ(plan("toy-two-type", dir / "plan").code, 0);
  auto doc = read_json(dir / "plan" / "plan.json");
  doc["routing"]["x"][0] = 5.0;
  write_file(dir / "bad.json", doc.dump());
  ASSERT_EQ(run_cli({"gen-trace", "--n", "10", "--out", (dir / "t.jsonl").string()}).code, 0);
  EXPECT_EQ(run_cli({"simulate", "--plan", (dir / "bad.json").string(), "--trace",
                     (dir / "t.jsonl").string(), "--out", (dir / "sim").string()})
                .code,
            2);
}

TEST_F(Cli, PlanningTraceReSimulatesToRecordedScore) {
  for (const char* scenario : {"toy-two-type", "cloud-coding"}) {
    const auto dir = fresh_dir(std::string("resim-") + scenario, root_);
    ASSERT_EQ(plan(scenario, dir / "plan", {"--seed", "3"}).code, 0);
    const auto doc = read_json(dir / "plan" / "plan.json");
    const auto& prov = doc.at("provenance");
    const double rate = doc.at("workload").at("arrival_rate");
    const std::string seed = std::to_string(prov.at("sim_seed").get<std::uint64_t>());
    const std::string n = std::to_string(prov.at("sim_requests").get<std::size_t>());
    ASSERT_EQ(run_cli({"gen-trace", "--profile", fx(scenario, "profile.json").string(), "--rate",
                       nlohmann::json(rate).dump(), "--n", n, "--seed", seed, "--out",
                       (dir / "t.jsonl").string()})
                  .code,
              0);
    ASSERT_EQ(run_cli({"simulate", "--plan", (dir / "plan" / "plan.json").string(), "--trace",
                       (dir / "t.jsonl").string(), "--out", (dir / "sim").string()})
                  .code,
              0);
    const double att = read_json(dir / "sim" / "metrics.json").at("attainment_e2e");
    EXPECT_GE(att, prov.at("score").get<double>() - 0.02) << scenario;
  }
}

TEST_F(Cli, PlanFromTraceScoresOnThatTrace) {
  const auto dir = fresh_dir("plan-trace", root_);
  ASSERT_EQ(run_cli({"gen-trace", "--rate", "4", "--n", "120", "--input", "512", "--output", "64",
                     "--seed", "1", "--out", (dir / "t.jsonl").string()})
                .code,
            0);
  const auto r = run_cli({"plan", "--cluster", fx("toy-two-type", "cluster.json").string(),
                          "--model", fx("toy-two-type", "model.json").string(), "--trace",
                          (dir / "t.jsonl").string(), "--slo", fx("toy-two-type", "slo.json").string(),
                          "--out", (dir / "plan").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(dir / "plan" / "plan.json");
  EXPECT_EQ(doc.at("provenance").at("score_source"), "input_trace");
  ASSERT_EQ(run_cli({"simulate", "--plan", (dir / "plan" / "plan.json").string(), "--trace",
                     (dir / "t.jsonl").string(), "--out", (dir / "sim").string()})
                .code,
            0);
  EXPECT_EQ(read_json(dir / "sim" / "metrics.json").at("attainment_e2e").get<double>(),
            doc.at("provenance").at("score").get<double>());
}

TEST_F(Cli, RoundTripPlanValidates) {
  for (const char* scenario : {"toy-homogeneous", "toy-bandwidth-split", "synthetic-16"}) {
    const auto dir = fresh_dir(std::string("rt-") + scenario, root_);
    ASSERT_EQ(plan(scenario, dir / "a").code, 0);
    // Rescheduling re-reads and validates the plan; a no-op keeps it intact.
    write_file(dir / "noop.json",
               nlohmann::json{{"type", "gpus_offline"}, {"gpu_ids", nlohmann::json::array()}}.dump());
    const auto r = run_cli({"reschedule", "--plan", (dir / "a" / "plan.json").string(), "--event",
                            (dir / "noop.json").string(), "--out", (dir / "b").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(dir / "a" / "plan.json"), read_json(dir / "b" / "plan.json"));
  }
}

TEST_F(Cli, ByteIdenticalOutputsForSameSeed) {
  const auto dir = fresh_dir("bytes", root_);
  for (const char* run : {"1", "2"}) {
    ASSERT_EQ(plan("cloud-conversation", dir / run, {"--seed", "9"}).code, 0);
    ASSERT_EQ(run_cli({"gen-trace", "--rate", "5", "--n", "80", "--seed", "2", "--out",
                       (dir / run / "t.jsonl").string()})
                  .code,
              0);
    ASSERT_EQ(run_cli({"simulate", "--plan", (dir / run / "plan.json").string(), "--trace",
                       (dir / run / "t.jsonl").string(), "--out", (dir / run / "sim").string()})
                  .code,
              0);
  }
  for (const char* f : {"plan.json", "convergence.csv", "t.jsonl", "sim/metrics.json",
                        "sim/requests.csv", "sim/attainment_curve.csv"}) {
    EXPECT_EQ(slurp(dir / "1" / f), slurp(dir / "2" / f)) << f;
  }
}

TEST_F(Cli, CodingPlansMorePrefillThanDecode) {
  const auto dir = fresh_dir("ratio-coding", root_);
  ASSERT_EQ(plan("cloud-coding", dir).code, 0);
  const auto doc = read_json(dir / "plan.json");
  EXPECT_GT(count_phase(doc, "prefill"), count_phase(doc, "decode"));
}

TEST_F(Cli, ConversationPlansMoreDecodeThanPrefill) {
  const auto dir = fresh_dir("ratio-conversation", root_);
  ASSERT_EQ(plan("cloud-conversation", dir).code, 0);
  const auto doc = read_json(dir / "plan.json");
  EXPECT_GT(count_phase(doc, "decode"), count_phase(doc, "prefill"));
}

TEST_F(Cli, RescheduleAfterDecodeGroupsGoOffline) {
  const auto dir = fresh_dir("resched-case", root_);
  ASSERT_EQ(plan("cloud-coding", dir / "plan").code, 0);
  const auto doc = read_json(dir / "plan" / "plan.json");
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& r : doc.at("replicas")) {
    if (r.at("phase") != "decode") continue;
    for (const auto& id : r.at("gpu_ids")) ids.push_back(id);
  }
  write_file(dir / "event.json", nlohmann::json{{"type", "gpus_offline"}, {"gpu_ids", ids}}.dump());
  const auto r = run_cli({"reschedule", "--plan", (dir / "plan" / "plan.json").string(), "--event",
                          (dir / "event.json").string(), "--out", (dir / "next").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto diff = read_json(dir / "next" / "diff.json");
  EXPECT_FALSE(diff.at("noop").get<bool>());
  EXPECT_EQ(diff.at("membership_changes"), 0);
  EXPECT_EQ(diff.at("removed_groups").size(), static_cast<std::size_t>(count_phase(doc, "decode")));
  ASSERT_EQ(diff.at("flipped").size(), 1u);
  EXPECT_EQ(diff.at("flipped")[0].at("to"), "decode");
  EXPECT_TRUE(diff.at("routing_changed").get<bool>());
  EXPECT_LT(diff.at("evaluations").at("lightweight").get<int>(),
            diff.at("evaluations").at("original_search").get<int>());
  const auto next = read_json(dir / "next" / "plan.json");
  EXPECT_TRUE(next.at("provenance").at("rescheduled").get<bool>());
  EXPECT_GE(count_phase(next, "decode"), 1);
}

TEST_F(Cli, NoopEventGivesEmptyDiff) {
  const auto dir = fresh_dir("resched-noop", root_);
  ASSERT_EQ(plan("toy-two-type", dir / "plan").code, 0);
  const auto doc = read_json(dir / "plan" / "plan.json");
  write_file(dir / "event.json",
             nlohmann::json{{"type", "workload_shift"}, {"profile", doc.at("workload")}}.dump());
  ASSERT_EQ(run_cli({"reschedule", "--plan", (dir / "plan" / "plan.json").string(), "--event",
                     (dir / "event.json").string(), "--out", (dir / "next").string()})
                .code,
            0);
  const auto diff = read_json(dir / "next" / "diff.json");
  EXPECT_TRUE(diff.at("noop").get<bool>());
  EXPECT_TRUE(diff.at("removed_groups").empty());
  EXPECT_TRUE(diff.at("flipped").empty());
  EXPECT_EQ(diff.at("membership_changes"), 0);
  EXPECT_FALSE(diff.at("routing_changed").get<bool>());
  EXPECT_EQ(read_json(dir / "next" / "plan.json"), doc);
}

TEST_F(Cli, OfflineEveryPrefillCapableGpuExitsThree) {
  const auto dir = fresh_dir("resched-dead", root_);
  ASSERT_EQ(plan("toy-two-type", dir / "plan").code, 0);
  const auto doc = read_json(dir / "plan" / "plan.json");
  // Only one decode group is left, so nothing can serve prefill.
  nlohmann::json ids = nlohmann::json::array();
  bool kept = false;
  for (const auto& r : doc.at("replicas")) {
    if (!kept && r.at("phase") == "decode") {
      kept = true;
      continue;
    }
    for (const auto& id : r.at("gpu_ids")) ids.push_back(id);
  }
  write_file(dir / "event.json", nlohmann::json{{"type", "gpus_offline"}, {"gpu_ids", ids}}.dump());
  const auto r = run_cli({"reschedule", "--plan", (dir / "plan" / "plan.json").string(), "--event",
                          (dir / "event.json").string(), "--out", (dir / "next").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "NoSurvivingPhasePair");
}

TEST_F(Cli, InfeasibleClusterExitsThree) {
  const auto dir = fresh_dir("too-small", root_);
  const auto r = run_cli({"plan", "--cluster", fx("toy-two-type", "cluster.json").string(), "--model",
                          fx("cloud-coding", "model.json").string(), "--profile",
                          fx("toy-two-type", "profile.json").string(), "--slo",
                          fx("toy-two-type", "slo.json").string(), "--out", dir.string()});
  // 4 GPUs hold a 30B model only as a single group, which cannot cover both phases.
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(Cli, OverridesReachProvenance) {
  const auto dir = fresh_dir("overrides", root_);
  const auto r = plan("toy-two-type", dir, {"--seed", "5", "--mode", "simulated", "--kv-bits", "4",
                                            "--steps", "3", "--neighbors", "4", "--tabu-mem", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(dir / "plan.json");
  EXPECT_EQ(doc.at("provenance").at("seed"), 5);
  EXPECT_EQ(doc.at("provenance").at("mode"), "simulated");
  EXPECT_LE(doc.at("provenance").at("steps").get<int>(), 3);
  EXPECT_EQ(doc.at("kv_bits"), 4);
  EXPECT_EQ(plan("toy-two-type", dir, {"--kv-bits", "3"}).code, 2);
  EXPECT_EQ(plan("toy-two-type", dir, {"--mode", "fast"}).code, 2);
}

TEST_F(Cli, SweepWritesGrid) {
  const auto dir = fresh_dir("sweep", root_);
  const auto r = run_cli({"sweep", "--cluster", fx("toy-two-type", "cluster.json").string(),
                          "--model", fx("toy-two-type", "model.json").string(), "--profile",
                          fx("toy-two-type", "profile.json").string(), "--slo",
                          fx("toy-two-type", "slo.json").string(), "--rates", "1,4",
                          "--slo-scale-sweep", "1:3:1", "--requests", "60", "--steps", "5",
                          "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(dir / "sweep.csv");
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"rate", "slo_scale", "n_prefill", "n_decode", "ttft",
                                               "tpot", "e2e", "throughput_rps"}));
}
