#pragma once

#include <cstdint>
#include <vector>

#include "hetplan/cluster.hpp"
#include "hetplan/cost_model.hpp"
#include "hetplan/plan.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

struct SloMatrix {
  Matrix d;  // m prefill rows x n decode columns, entries in [0, 1]

  std::size_t m() const { return d.size(); }
  std::size_t n() const { return d.empty() ? 0 : d.front().size(); }
};

struct CapacityVector {
  std::vector<double> prefill;  // requests/s
  std::vector<double> decode;   // requests/s
};

enum class EvalMode { kAnalytic, kSimulated };
const char* eval_mode_name(EvalMode m);
EvalMode parse_eval_mode(const std::string& s);

// Arrival rate a pair sees while its D entry is estimated: the whole rate, or
// the replica's capacity-proportional share of it.
enum class PairLoad { kFull, kShare };
const char* pair_load_name(PairLoad l);
PairLoad parse_pair_load(const std::string& s);

struct OrchestratorOptions {
  EvalMode mode = EvalMode::kAnalytic;
  PairLoad load = PairLoad::kShare;
  // Fraction of nominal capacity the routing LP may fill.
  double headroom = 0.9;
  // Extra LP solves with limits stepped down towards the tightest feasible
  // one; the best routing under the analytic model wins. 0 disables.
  int headroom_steps = 4;
  std::size_t sim_requests = 200;
  std::uint64_t seed = 0;
};

// Closed-form queueing model for a fixed set of prefill and decode replicas.
// Each phase's wait is an atom at zero plus an exponential tail matched to
// the M/D/1 mean; length variability comes from up to kMaxSamples workload
// samples.
class AnalyticModel {
 public:
  static constexpr std::size_t kMaxSamples = 64;

  AnalyticModel(const ClusterSpec& cluster, const ModelSpec& model,
                const std::vector<Replica>& prefills, const std::vector<Replica>& decodes,
                const WorkloadProfile& workload, const SloSpec& slo, KvPrecision prec,
                const CostParams& params);

  std::size_t m() const { return prefill_.size(); }
  std::size_t n() const { return decode_.size(); }

  const CapacityVector& capacities() const { return caps_; }

  // P(E2E <= deadline) for pair (i, j) with the given per-phase arrival rates.
  double pair_attainment(std::size_t i, std::size_t j, double prefill_rate,
                         double decode_rate) const;

  SloMatrix slo_matrix(PairLoad load) const;

  // sum_ij z_ij * A_ij(rate * x_i, rate * sum_i z_ij).
  double plan_attainment(const RoutingPlan& routing) const;

  double e2e_deadline() const { return deadline_; }

 private:
  struct PrefillModel {
    std::vector<double> service;  // per sample, unbatched
    double batch_service = 0.0;   // latency of a plateau-sized batch
    double per_request = 0.0;     // batch_service / requests per batch
  };
  struct DecodeModel {
    ReplicaCost cost;
    int max_batch = 0;
  };
  struct DecodeLoad {
    bool saturated = false;
    double step = 0.0;
    double rho = 0.0;
    double slot_service = 0.0;
  };

  DecodeLoad decode_load(std::size_t j, double rate) const;

  std::vector<double> in_;
  std::vector<double> out_;
  double mean_out_ = 0.0;
  double ctx_ = 0.0;
  double deadline_ = 0.0;
  double rate_ = 0.0;
  std::vector<PrefillModel> prefill_;
  std::vector<DecodeModel> decode_;
  std::vector<std::vector<std::vector<double>>> kv_;  // [i][j][sample]
  CapacityVector caps_;
};

// prefill_cap: requests per second at plateau-sized batches of mean-length
// prompts; decode_cap: max_batch / (mean_output * step(max_batch)).
CapacityVector replica_capacities(const ClusterSpec& cluster, const ModelSpec& model,
                                  const std::vector<Replica>& prefills,
                                  const std::vector<Replica>& decodes,
                                  const WorkloadProfile& workload, const CostParams& params);

SloMatrix build_slo_matrix(const ClusterSpec& cluster, const ModelSpec& model,
                           const std::vector<Replica>& prefills, const std::vector<Replica>& decodes,
                           const WorkloadProfile& workload, const SloSpec& slo, KvPrecision prec,
                           const CostParams& params, const OrchestratorOptions& options = {});

struct RoutingResult {
  RoutingPlan plan;
  double objective = 0.0;
  bool saturated = false;
};

// Maximises sum z_ij d_ij over the joint routing z subject to per-replica
// capacity (scaled by headroom). Among optima, picks the one minimising the
// peak utilisation of each side. Throws Infeasible on non-positive caps.
RoutingResult solve_routing(const SloMatrix& d, const CapacityVector& caps, double rate,
                            double headroom = 1.0);

// Replicas ordered prefill-first; routing indices follow that order.
DeploymentPlan compose_plan(const std::vector<Replica>& prefills,
                            const std::vector<Replica>& decodes, const RoutingPlan& routing,
                            KvPrecision prec);

struct OrchestratedPlan {
  DeploymentPlan plan;
  SloMatrix d;
  CapacityVector caps;
  double routing_objective = 0.0;
  bool saturated = false;
};

// D matrix, capacities and routing for a fixed replica set.
OrchestratedPlan orchestrate(const ClusterSpec& cluster, const ModelSpec& model,
                             const std::vector<Replica>& prefills,
                             const std::vector<Replica>& decodes, const WorkloadProfile& workload,
                             const SloSpec& slo, KvPrecision prec, const CostParams& params,
                             const OrchestratorOptions& options = {});

}  // namespace hetplan
