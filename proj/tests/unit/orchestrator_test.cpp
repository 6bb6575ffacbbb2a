#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hetplan/error.hpp"
#include "hetplan/fixtures.hpp"
#include "hetplan/lp.hpp"
#include "hetplan/orchestrator.hpp"
#include "hetplan/parallel_planner.hpp"
#include "hetplan/rng.hpp"
#include "lp_oracle.hpp"
#include "test_util.hpp"

using namespace hetplan;
using hetplan::testing::vertex_enumeration_optimum;

namespace {

struct Instance {
  SloMatrix d;
  CapacityVector caps;
  double rate = 1.0;
};

// Random D in [0,1] and capacities whose totals cover the rate.
Instance random_instance(Rng& rng, std::size_t m, std::size_t n) {
  Instance in;
  in.rate = 1.0 + 9.0 * rng.uniform();
  in.d.d.assign(m, std::vector<double>(n, 0.0));
  for (auto& row : in.d.d) {
    for (auto& v : row) v = rng.uniform();
  }
  auto caps = [&](std::size_t k) {
    std::vector<double> c(k);
    for (auto& v : c) v = 0.05 + rng.uniform();
    const double s = std::accumulate(c.begin(), c.end(), 0.0);
    const double cover = 1.0 + 1.5 * rng.uniform();
    for (auto& v : c) v *= cover * in.rate / s;
    return c;
  };
  in.caps.prefill = caps(m);
  in.caps.decode = caps(n);
  return in;
}

void expect_routing_invariants(const RoutingPlan& r, std::size_t m, std::size_t n) {
  ASSERT_EQ(r.x.size(), m);
  ASSERT_EQ(r.y.size(), m);
  ASSERT_EQ(r.z.size(), m);
  double sx = 0.0;
  double sz = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    EXPECT_GE(r.x[i], 0.0);
    sx += r.x[i];
    ASSERT_EQ(r.y[i].size(), n);
    double sy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_GE(r.y[i][j], 0.0);
      EXPECT_GE(r.z[i][j], 0.0);
      sy += r.y[i][j];
      sz += r.z[i][j];
      EXPECT_NEAR(r.z[i][j], r.x[i] * r.y[i][j], 1e-12);
    }
    EXPECT_NEAR(sy, 1.0, 1e-9);
  }
  EXPECT_NEAR(sx, 1.0, 1e-9);
  EXPECT_NEAR(sz, 1.0, 1e-9);
}

double objective(const Matrix& d, const Matrix& z) {
  double v = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d[i].size(); ++j) v += d[i][j] * z[i][j];
  }
  return v;
}

bool within_caps(const Matrix& z, const CapacityVector& caps, double rate) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    double row = 0.0;
    for (double v : z[i]) row += v;
    if (rate * row > caps.prefill[i] * (1 + 1e-9)) return false;
  }
  for (std::size_t j = 0; j < z[0].size(); ++j) {
    double col = 0.0;
    for (const auto& row : z) col += row[j];
    if (rate * col > caps.decode[j] * (1 + 1e-9)) return false;
  }
  return true;
}

}  // namespace

TEST(Lp, SmallKnownOptimum) {
  // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3.
  lp::Problem p;
  p.objective = {3, 2};
  p.constraints = {{{1, 1}, lp::Sense::kLessEqual, 4},
                   {{1, 3}, lp::Sense::kLessEqual, 6},
                   {{1, 0}, lp::Sense::kLessEqual, 3}};
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, lp::Status::kOptimal);
  EXPECT_NEAR(s.objective, 11.0, 1e-12);
  EXPECT_NEAR(s.x[0], 3.0, 1e-12);
  EXPECT_NEAR(s.x[1], 1.0, 1e-12);
}

TEST(Lp, InfeasibleAndUnbounded) {
  lp::Problem inf;
  inf.objective = {1};
  inf.constraints = {{{1}, lp::Sense::kLessEqual, 1}, {{1}, lp::Sense::kGreaterEqual, 2}};
  EXPECT_EQ(lp::solve(inf).status, lp::Status::kInfeasible);
  lp::Problem unb;
  unb.objective = {1, 0};
  unb.constraints = {{{0, 1}, lp::Sense::kLessEqual, 1}};
  EXPECT_EQ(lp::solve(unb).status, lp::Status::kUnbounded);
}

TEST(SolveRouting, SinglePair) {
  const auto r = solve_routing({{{0.7}}}, {{10.0}, {10.0}}, 1.0);
  EXPECT_EQ(r.plan.x, std::vector<double>{1.0});
  EXPECT_EQ(r.plan.y, (Matrix{{1.0}}));
  EXPECT_FALSE(r.saturated);
}

TEST(SolveRouting, AmpleCapacityPicksBestPair) {
  const SloMatrix d{{{0.9, 0.5}, {0.4, 0.8}}};
  const auto r = solve_routing(d, {{100, 100}, {100, 100}}, 1.0);
  EXPECT_NEAR(r.objective, 0.9, 1e-12);
  EXPECT_NEAR(r.plan.z[0][0], 1.0, 1e-9);
  EXPECT_NEAR(vertex_enumeration_optimum(d.d, {100, 100}, {100, 100}, 1.0), 0.9, 1e-12);
}

TEST(SolveRouting, PrefillLimitSplitsTraffic) {
  const SloMatrix d{{{0.9, 0.5}, {0.4, 0.8}}};
  const double rate = 4.0;
  const CapacityVector caps{{0.5 * rate, 100}, {100, 100}};
  const auto r = solve_routing(d, caps, rate);
  EXPECT_NEAR(r.objective, 0.85, 1e-12);
  EXPECT_NEAR(r.plan.z[0][0], 0.5, 1e-9);
  EXPECT_NEAR(r.plan.z[1][1], 0.5, 1e-9);
  EXPECT_NEAR(vertex_enumeration_optimum(d.d, caps.prefill, caps.decode, rate), 0.85, 1e-12);
}

TEST(SolveRouting, NonPositiveCapacityIsInfeasible) {
  try {
    solve_routing({{{0.5}}}, {{0.0}, {1.0}}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
  }
}

TEST(SolveRouting, SaturationIsFlaggedAndStillRoutes) {
  const auto r = solve_routing({{{0.5, 0.6}}}, {{1.0}, {0.5, 0.5}}, 3.0);
  EXPECT_TRUE(r.saturated);
  expect_routing_invariants(r.plan, 1, 2);
}

TEST(SolveRouting, MatchesVertexEnumerationOnSmallInstances) {
  Rng rng(77);
  for (std::size_t k : {2u, 3u}) {
    for (int rep = 0; rep < 100; ++rep) {
      const Instance in = random_instance(rng, k, k);
      const auto r = solve_routing(in.d, in.caps, in.rate);
      const double oracle = vertex_enumeration_optimum(in.d.d, in.caps.prefill, in.caps.decode, in.rate);
      ASSERT_NEAR(r.objective, oracle, 1e-9) << k << "x" << k << " rep " << rep;
      EXPECT_TRUE(within_caps(r.plan.z, in.caps, in.rate));
      expect_routing_invariants(r.plan, k, k);
    }
  }
}

TEST(SolveRouting, DegenerateInstancesTerminateAtTheOptimum) {
  // Ties everywhere: D drawn from {0, 0.5, 1}, some limits exactly tight.
  Rng rng(31);
  for (std::size_t k : {2u, 3u}) {
    for (int rep = 0; rep < 300; ++rep) {
      Instance in = random_instance(rng, k, k);
      for (auto& row : in.d.d) {
        for (auto& v : row) v = std::floor(3.0 * rng.uniform()) / 2.0;
      }
      if (rep % 3 == 0) {
        const double s = std::accumulate(in.caps.decode.begin(), in.caps.decode.end(), 0.0);
        for (auto& c : in.caps.decode) c *= in.rate / s;
      }
      const auto r = solve_routing(in.d, in.caps, in.rate, 1.0);
      const double oracle = vertex_enumeration_optimum(in.d.d, in.caps.prefill, in.caps.decode, in.rate);
      ASSERT_NEAR(r.objective, oracle, 1e-9) << k << "x" << k << " rep " << rep;
      expect_routing_invariants(r.plan, k, k);
    }
  }
  for (int rep = 0; rep < 200; ++rep) {
    Instance in = random_instance(rng, 6, 6);
    for (auto& row : in.d.d) {
      for (auto& v : row) v = rng.uniform() < 0.7 ? 1.0 : rng.uniform();
    }
    const auto r = solve_routing(in.d, in.caps, in.rate);
    expect_routing_invariants(r.plan, 6, 6);
  }
}

TEST(SolveRouting, DominatesRandomFeasiblePlans) {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Instance in = random_instance(rng, 5, 5);
    const auto r = solve_routing(in.d, in.caps, in.rate);
    const double ps = std::accumulate(in.caps.prefill.begin(), in.caps.prefill.end(), 0.0);
    const double ds = std::accumulate(in.caps.decode.begin(), in.caps.decode.end(), 0.0);
    Matrix prop(5, std::vector<double>(5));
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) prop[i][j] = in.caps.prefill[i] / ps * in.caps.decode[j] / ds;
    }
    ASSERT_TRUE(within_caps(prop, in.caps, in.rate));
    int checked = 0;
    while (checked < 1000) {
      Matrix z(5, std::vector<double>(5));
      double s = 0.0;
      for (auto& row : z) {
        for (auto& v : row) s += (v = rng.uniform() < 0.3 ? 0.0 : rng.exponential(1.0));
      }
      if (s == 0.0) continue;
      // Shrink towards the proportional plan until feasible.
      double t = 1.0;
      Matrix mix = z;
      for (;;) {
        for (int i = 0; i < 5; ++i) {
          for (int j = 0; j < 5; ++j) mix[i][j] = t * z[i][j] / s + (1 - t) * prop[i][j];
        }
        if (within_caps(mix, in.caps, in.rate)) break;
        t *= 0.7;
      }
      EXPECT_GE(r.objective + 1e-12, objective(in.d.d, mix));
      ++checked;
    }
  }
}

TEST(SolveRouting, ScalingDKeepsRouting) {
  Rng rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    Instance in = random_instance(rng, 4, 3);
    const auto base = solve_routing(in.d, in.caps, in.rate);
    const double c = 0.1 + 5.0 * rng.uniform();
    for (auto& row : in.d.d) {
      for (auto& v : row) v *= c;
    }
    const auto scaled = solve_routing(in.d, in.caps, in.rate);
    EXPECT_NEAR(scaled.objective, c * base.objective, 1e-9 * std::max(1.0, c));
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(scaled.plan.z[i][j], base.plan.z[i][j], 1e-9);
    }
  }
}

TEST(SolveRouting, ZeroMassRowsGetUniformY) {
  const auto r = solve_routing({{{0.1, 0.1}, {0.9, 0.9}}}, {{10, 10}, {10, 10}}, 1.0);
  EXPECT_NEAR(r.plan.x[0], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.plan.y[0][0], 0.5);
  EXPECT_DOUBLE_EQ(r.plan.y[0][1], 0.5);
}

namespace {

struct PairFixture {
  ClusterSpec cluster = fixtures::toy_two_type();
  ModelSpec model = fixtures::llama_7b();
  std::vector<Replica> prefills;
  std::vector<Replica> decodes;

  PairFixture() {
    const WorkloadProfile w = fixtures::constant_profile(1.0, 512, 64);
    for (std::vector<int> ids : {std::vector<int>{0}, std::vector<int>{1}}) {
      ServingGroup g{ids, Phase::kPrefill};
      prefills.push_back({g, best_config(g, model, cluster, w, CostParams{})});
    }
    for (std::vector<int> ids : {std::vector<int>{2}, std::vector<int>{3}}) {
      ServingGroup g{ids, Phase::kDecode};
      decodes.push_back({g, best_config(g, model, cluster, w, CostParams{})});
    }
  }
};

}  // namespace

TEST(BuildSloMatrix, SlackSystemIsNearOne) {
  PairFixture f;
  const auto w = fixtures::constant_profile(0.01, 512, 64);
  const auto slo = fixtures::reference_slo(f.model, w, CostParams{}, 10.0);
  for (EvalMode mode : {EvalMode::kAnalytic, EvalMode::kSimulated}) {
    OrchestratorOptions o;
    o.mode = mode;
    const auto d = build_slo_matrix(f.cluster, f.model, {f.prefills[0]}, {f.decodes[0]}, w, slo,
                                    KvPrecision{}, CostParams{}, o);
    EXPECT_GT(d.d[0][0], 0.99) << eval_mode_name(mode);
  }
}

TEST(BuildSloMatrix, DeterministicMissIsZero) {
  PairFixture f;
  const auto w = fixtures::constant_profile(0.01, 512, 64);
  const auto slo = fixtures::reference_slo(f.model, w, CostParams{}, 0.5);
  for (EvalMode mode : {EvalMode::kAnalytic, EvalMode::kSimulated}) {
    OrchestratorOptions o;
    o.mode = mode;
    const auto d = build_slo_matrix(f.cluster, f.model, {f.prefills[0]}, {f.decodes[0]}, w, slo,
                                    KvPrecision{}, CostParams{}, o);
    EXPECT_EQ(d.d[0][0], 0.0) << eval_mode_name(mode);
  }
}

TEST(BuildSloMatrix, IdenticalPairsGetIdenticalEntries) {
  const auto c = fixtures::synthetic_cluster(8);
  const auto m = fixtures::llama_7b();
  const auto w = fixtures::constant_profile(4.0, 512, 64);
  const auto slo = fixtures::reference_slo(m, w, CostParams{}, 3.0);
  auto rep = [&](std::vector<int> ids, Phase ph) {
    ServingGroup g{ids, ph};
    return Replica{g, best_config(g, m, c, w, CostParams{})};
  };
  // Two prefill/decode pairs, each inside its own node.
  const std::vector<Replica> p = {rep({0, 1}, Phase::kPrefill), rep({4, 5}, Phase::kPrefill)};
  const std::vector<Replica> d = {rep({2, 3}, Phase::kDecode), rep({6, 7}, Phase::kDecode)};
  for (EvalMode mode : {EvalMode::kAnalytic, EvalMode::kSimulated}) {
    for (PairLoad load : {PairLoad::kFull, PairLoad::kShare}) {
      OrchestratorOptions o;
      o.mode = mode;
      o.load = load;
      const auto sm = build_slo_matrix(c, m, p, d, w, slo, KvPrecision{}, CostParams{}, o);
      EXPECT_DOUBLE_EQ(sm.d[0][0], sm.d[1][1]);
      EXPECT_DOUBLE_EQ(sm.d[0][1], sm.d[1][0]);
      for (const auto& row : sm.d) {
        for (double v : row) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
        }
      }
    }
  }
}

TEST(BuildSloMatrix, NeedsBothSides) {
  PairFixture f;
  const auto w = fixtures::constant_profile(1.0, 512, 64);
  EXPECT_THROW(build_slo_matrix(f.cluster, f.model, {}, f.decodes, w, SloSpec{}, KvPrecision{},
                                CostParams{}),
               Error);
}

TEST(Orchestrate, RoutingIsValidAndRespectsCapacity) {
  PairFixture f;
  const auto w = fixtures::constant_profile(4.0, 512, 64);
  const auto slo = fixtures::reference_slo(f.model, w, CostParams{}, 4.0);
  const auto o = orchestrate(f.cluster, f.model, f.prefills, f.decodes, w, slo, KvPrecision{},
                             CostParams{});
  expect_routing_invariants(o.plan.routing, 2, 2);
  EXPECT_FALSE(o.saturated);
  EXPECT_TRUE(within_caps(o.plan.routing.z, o.caps, w.arrival_rate));
  EXPECT_NO_THROW(validate_plan(o.plan, f.cluster, f.model));
}

TEST(Orchestrate, CapacitiesFollowDefinitions) {
  PairFixture f;
  const auto w = fixtures::constant_profile(4.0, 512, 64);
  const auto caps = replica_capacities(f.cluster, f.model, f.prefills, f.decodes, w, CostParams{});
  const CostParams p;
  const ReplicaCost pc(f.cluster, f.model, f.prefills[0].config, p);
  const int per_batch = p.batch_token_plateau / 512;
  EXPECT_NEAR(caps.prefill[0], per_batch / pc.prefill_latency(per_batch * 512.0), 1e-9);
  const ReplicaCost dc(f.cluster, f.model, f.decodes[0].config, p);
  const double ctx = w.mean_decode_context();
  const int b = dc.max_decode_batch(ctx);
  EXPECT_NEAR(caps.decode[0], b / (64.0 * dc.decode_step_latency(b, ctx)), 1e-9);
}

TEST(AnalyticModel, AttainmentFallsWithLoad) {
  PairFixture f;
  const auto w = fixtures::constant_profile(4.0, 512, 64);
  const auto slo = fixtures::reference_slo(f.model, w, CostParams{}, 4.0);
  const AnalyticModel a(f.cluster, f.model, f.prefills, f.decodes, w, slo, KvPrecision{}, CostParams{});
  double prev = 1.0;
  for (double rate = 0.1; rate < 20; rate *= 1.5) {
    const double v = a.pair_attainment(0, 0, rate, rate);
    EXPECT_LE(v, prev + 1e-12);
    prev = v;
  }
}
