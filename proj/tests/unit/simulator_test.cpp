#include <gtest/gtest.h>

#include <cmath>

#include "hetplan/error.hpp"
#include "hetplan/fixtures.hpp"
#include "hetplan/orchestrator.hpp"
#include "hetplan/parallel_planner.hpp"
#include "hetplan/simulator.hpp"
#include "test_util.hpp"

using namespace hetplan;

namespace {

Replica make_replica(const ClusterSpec& c, const ModelSpec& m, std::vector<int> ids, Phase ph) {
  const auto w = fixtures::constant_profile(1.0, 512, 64);
  ServingGroup g{ids, ph};
  return {g, best_config(g, m, c, w, CostParams{})};
}

// One A40 prefill replica; one 3090Ti decode replica per id in `decode_ids`,
// with traffic split evenly.
DeploymentPlan toy_plan(const ClusterSpec& c, const ModelSpec& m, std::vector<int> decode_ids) {
  std::vector<Replica> p = {make_replica(c, m, {0}, Phase::kPrefill)};
  std::vector<Replica> d;
  for (int id : decode_ids) d.push_back(make_replica(c, m, {id}, Phase::kDecode));
  Matrix z(1, std::vector<double>(d.size(), 1.0 / static_cast<double>(d.size())));
  return compose_plan(p, d, routing_from_joint(z), KvPrecision{});
}

RequestTrace constant_trace(double rate, int n, int in, int out) {
  RequestTrace t;
  for (int k = 0; k < n; ++k) t.push_back({k / rate, in, out});
  return t;
}

bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

}  // namespace

TEST(Simulate, SingleRequestMatchesClosedForm) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const CostParams p;
  const auto plan = toy_plan(c, m, {2});
  for (auto [in, out] : {std::pair{512, 16}, std::pair{100, 300}, std::pair{2000, 1}}) {
    const RequestTrace t = {{3.0, in, out}};
    const SloSpec slo;
    const auto r = simulate(plan, c, m, t, slo, p, 0);
    ASSERT_EQ(r.completed, 1u);
    const auto& prefill_cfg = plan.replicas[0].config;
    const auto& decode_cfg = plan.replicas[1].config;
    const double ttft = prefill_latency(c, m, prefill_cfg, in, p);
    const double kv = kv_comm_cost(c, prefill_cfg, decode_cfg, 1, in, m, KvPrecision{}, p);
    const double ctx = in + out / 2.0;
    const double e2e = ttft + kv + out * decode_step_latency(c, m, decode_cfg, 1, ctx, p);
    const auto& rec = r.records[0];
    EXPECT_NEAR(rec.ttft, ttft, 1e-9 * ttft);
    EXPECT_NEAR(rec.kv, kv, 1e-9 * kv);
    EXPECT_NEAR(rec.e2e, e2e, 1e-9 * e2e);
    EXPECT_NEAR(rec.tpot, (e2e - ttft - kv) / out, 1e-9 * e2e);
  }
}

TEST(Simulate, BitwiseDeterministic) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const auto plan = toy_plan(c, m, {2, 3});
  TraceSpec spec;
  spec.rate = 6.0;
  spec.n_requests = 300;
  spec.input = LengthDist::lognormal(512, 0.5, 16, 4096);
  spec.output = LengthDist::lognormal(128, 0.5, 1, 1024);
  const auto t = generate_trace(spec, 4);
  const SloSpec slo = fixtures::reference_slo(m, fixtures::constant_profile(6, 512, 128), {}, 3.0);
  const auto a = simulate(plan, c, m, t, slo, {}, 9);
  const auto b = simulate(plan, c, m, t, slo, {}, 9);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    const auto& x = a.records[k];
    const auto& y = b.records[k];
    EXPECT_EQ(x.prefill, y.prefill);
    EXPECT_EQ(x.decode, y.decode);
    EXPECT_TRUE(same_double(x.ttft, y.ttft));
    EXPECT_TRUE(same_double(x.kv, y.kv));
    EXPECT_TRUE(same_double(x.tpot, y.tpot));
    EXPECT_TRUE(same_double(x.e2e, y.e2e));
  }
  EXPECT_EQ(a.attainment_e2e, b.attainment_e2e);
  EXPECT_EQ(a.throughput_rps, b.throughput_rps);
  EXPECT_EQ(a.throughput_tps, b.throughput_tps);
}

TEST(Simulate, RoutingFollowsPlanShares) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  auto plan = toy_plan(c, m, {2, 3});
  plan.routing = routing_from_joint({{0.2, 0.8}});
  const auto t = constant_trace(1.0, 4000, 64, 2);
  const auto r = simulate(plan, c, m, t, SloSpec{}, {}, 1);
  int second = 0;
  for (const auto& rec : r.records) second += rec.decode == 1;
  EXPECT_NEAR(second / 4000.0, 0.8, 0.03);
}

TEST(Simulate, OverloadDrivesAttainmentToZero) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const auto plan = toy_plan(c, m, {2, 3});
  const auto w = fixtures::constant_profile(1.0, 512, 16);
  const auto caps = replica_capacities(c, m, {plan.replicas[0]}, {plan.replicas[1]}, w, {});
  const double rate = 20.0 * caps.prefill[0];
  const auto slo = fixtures::reference_slo(m, w, {}, 3.0);
  const auto r = simulate(plan, c, m, constant_trace(rate, 500, 512, 16), slo, {}, 0);
  EXPECT_LT(r.attainment_e2e, 0.1);
  EXPECT_LT(r.attainment_ttft, 0.1);
}

TEST(Simulate, CurveIsMonotoneWithLimits) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const auto plan = toy_plan(c, m, {2, 3});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TraceSpec spec;
    spec.rate = 2.0 + 3.0 * static_cast<double>(seed);
    spec.n_requests = 200;
    const auto t = generate_trace(spec, seed);
    const auto slo = fixtures::reference_slo(m, fixtures::constant_profile(1, 512, 128), {}, 1.0);
    std::vector<double> scales;
    for (double s = 0.25; s <= 64; s *= 1.25) scales.push_back(s);
    const auto curve = attainment_at_scale(plan, c, m, t, slo, {}, seed, scales);
    for (std::size_t k = 1; k < curve.size(); ++k) {
      EXPECT_GE(curve[k].attainment.ttft, curve[k - 1].attainment.ttft);
      EXPECT_GE(curve[k].attainment.tpot, curve[k - 1].attainment.tpot);
      EXPECT_GE(curve[k].attainment.e2e, curve[k - 1].attainment.e2e);
    }
    const auto far = attainment_at_scale(plan, c, m, t, slo, {}, seed, {1e9});
    EXPECT_EQ(far[0].attainment.ttft, 1.0);
    EXPECT_EQ(far[0].attainment.tpot, 1.0);
    EXPECT_EQ(far[0].attainment.e2e, 1.0);
  }
}

TEST(Simulate, ScaleBelowSingleRequestMinimumGivesZero) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const auto plan = toy_plan(c, m, {2});
  const auto t = constant_trace(0.01, 20, 512, 64);
  const SloSpec slo{1.0, 0.1, 1.0, 0.9};
  const auto alone = simulate(plan, c, m, {t[0]}, slo, {}, 0);
  // Deadline below the uncontended E2E of every request.
  const double scale = 0.5 * alone.records[0].e2e / (slo.ttft_ref + 64 * slo.tpot_ref);
  const auto curve = attainment_at_scale(plan, c, m, t, slo, {}, 0, {scale});
  EXPECT_EQ(curve[0].attainment.e2e, 0.0);
}

TEST(Simulate, ConservationWithAndWithoutHorizon) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const auto plan = toy_plan(c, m, {2, 3});
  TraceSpec spec;
  spec.rate = 10.0;
  spec.n_requests = 400;
  const auto t = generate_trace(spec, 2);
  const auto full = simulate(plan, c, m, t, SloSpec{}, {}, 0);
  EXPECT_EQ(full.completed, t.size());
  EXPECT_EQ(full.in_flight, 0u);
  for (double h : {0.0, 5.0, 20.0, 35.0}) {
    SimOptions o;
    o.horizon = h;
    const auto r = simulate(plan, c, m, t, SloSpec{}, {}, 0, o);
    EXPECT_EQ(r.completed + r.in_flight, t.size());
    std::size_t done = 0;
    for (const auto& rec : r.records) {
      if (rec.completed) {
        ++done;
        EXPECT_LE(rec.arrival + rec.e2e, h + 1e-9);
      }
    }
    EXPECT_EQ(done, r.completed);
    if (t.back().arrival > h) EXPECT_LT(r.completed, t.size());
  }
}

TEST(Simulate, InvariantsOnRandomTraces) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const auto plan = toy_plan(c, m, {2, 3});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TraceSpec spec;
    spec.rate = 1.0 + static_cast<double>(seed);
    spec.n_requests = 150;
    const auto t = generate_trace(spec, seed);
    const auto r = simulate(plan, c, m, t, SloSpec{}, {}, seed);
    for (const auto& rec : r.records) {
      ASSERT_TRUE(rec.completed);
      EXPECT_GE(rec.e2e, rec.ttft);
      EXPECT_GE(rec.tpot, 0.0);
    }
    for (double v : {r.attainment_ttft, r.attainment_tpot, r.attainment_e2e}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Simulate, RemovingDecodeReplicaNeverRaisesSaturatedThroughput) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  const auto two = toy_plan(c, m, {2, 3});
  for (int dropped : {2, 3}) {
    const auto one = toy_plan(c, m, {dropped == 2 ? 3 : 2});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      // Long answers at a rate far above decode capacity.
      TraceSpec spec;
      spec.rate = 200.0;
      spec.n_requests = 400;
      spec.input = LengthDist::uniform(64, 192);
      spec.output = LengthDist::uniform(256, 768);
      const auto t = generate_trace(spec, seed);
      const auto a = simulate(two, c, m, t, SloSpec{}, {}, seed);
      const auto b = simulate(one, c, m, t, SloSpec{}, {}, seed);
      EXPECT_LE(b.throughput_rps, a.throughput_rps * (1 + 1e-12));
      EXPECT_LE(b.throughput_tps, a.throughput_tps * (1 + 1e-12));
    }
  }
}

TEST(Simulate, Errors) {
  const auto c = fixtures::toy_two_type();
  const auto m = fixtures::llama_7b();
  auto plan = toy_plan(c, m, {2});
  EXPECT_THROW(simulate(plan, c, m, {}, SloSpec{}, {}, 0), Error);
  plan.routing.x = {0.5};
  try {
    simulate(plan, c, m, constant_trace(1, 3, 10, 10), SloSpec{}, {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidPlan);
  }
  EXPECT_THROW(attainment_curve(SimResult{}, SloSpec{}, {2.0, 1.0}), Error);
}

TEST(Simulate, KvShareUsesCompletedRequests) {
  SimResult r;
  RequestRecord a;
  a.completed = true;
  a.kv = 1.0;
  a.e2e = 4.0;
  RequestRecord b;
  r.records = {a, b};
  EXPECT_DOUBLE_EQ(kv_share_of_e2e(r), 0.25);
}
