#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hetplan/cluster.hpp"
#include "hetplan/cost_model.hpp"
#include "hetplan/orchestrator.hpp"
#include "hetplan/plan.hpp"
#include "hetplan/rng.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

struct Solution {
  std::vector<ServingGroup> groups;

  // Groups sorted by member ids; each group's ids sorted.
  void canonicalize();
  std::string key() const;
  bool operator==(const Solution&) const = default;
};

Solution canonical(Solution s);

struct TabuParams {
  int n_step = 100;
  int n_nghb = 10;
  int n_mem = 5;
  std::uint64_t rng_seed = 0;
  // Stop after this many steps without improving the best score; 0 disables.
  int patience = 0;
};

void validate_tabu_params(const TabuParams& p);

enum class MoveKind { kFlip, kSplit, kMerge, kMove };
const char* move_kind_name(MoveKind k);

// Hierarchical clustering on 1/beta (average linkage). Returns merge order as
// pairs of member lists; exposed for tests.
struct Dendrogram {
  struct Node {
    std::vector<int> members;  // sorted gpu ids
    int left = -1;
    int right = -1;
    double height = 0.0;
  };
  std::vector<Node> nodes;  // leaves first, root last
  int root() const { return static_cast<int>(nodes.size()) - 1; }
};

Dendrogram cluster_gpus(const ClusterSpec& cluster);

// Maximal-count partition into dendrogram subtrees, every part memory-feasible.
std::vector<std::vector<int>> feasible_cut(const Dendrogram& tree, const ClusterSpec& cluster,
                                           const ModelSpec& model);

Solution initial_solution(const ClusterSpec& cluster, const ModelSpec& model, Rng& rng);

// Deterministic move helpers; return nullopt when the move is not applicable.
std::optional<Solution> flip_move(const Solution& s, std::size_t group);
std::optional<Solution> split_move(const Solution& s, std::size_t group, double r,
                                   const ClusterSpec& cluster, Phase first, Phase second);
std::optional<Solution> merge_move(const Solution& s, std::size_t a, std::size_t b, Phase phase);
std::optional<Solution> move_gpus(const Solution& s, std::size_t from, std::size_t to,
                                  const std::string& type, int count, const ClusterSpec& cluster);

struct NeighborOptions {
  bool flip_only = false;
  std::set<std::string> exclude;  // canonical keys barred from the result
};

// Up to n distinct memory-feasible candidates, each one uniformly drawn move.
std::vector<Solution> neighbors(const Solution& s, int n, Rng& rng, const ClusterSpec& cluster,
                                const ModelSpec& model, const NeighborOptions& options = {});

struct EvaluatorOptions {
  OrchestratorOptions orchestrator;
  // Requests in the synthetic trace used for simulated scoring.
  std::size_t sim_requests = 200;
};

// Lower-level evaluation with memoisation on canonical keys. Thread-safe.
class Evaluator {
 public:
  Evaluator(const ClusterSpec& cluster, const ModelSpec& model, const WorkloadProfile& workload,
            const SloSpec& slo, KvPrecision prec, const CostParams& params,
            EvaluatorOptions options = {});

  // Pins the config used for a GPU set regardless of phase.
  void freeze(const std::vector<int>& gpu_ids, const ParallelConfig& cfg);

  double score(const Solution& s);
  std::vector<double> score_all(const std::vector<Solution>& candidates);

  // Configs + routing for a solution; nullopt when it cannot be served.
  std::optional<OrchestratedPlan> materialize(const Solution& s);

  // Memo misses so far (distinct solutions evaluated).
  std::size_t evaluations() const;

  // Attainment of a concrete plan under the evaluator's mode.
  double plan_score(const OrchestratedPlan& p) const;

  std::optional<ParallelConfig> config_for(const ServingGroup& g);

  const ClusterSpec& cluster() const { return cluster_; }
  const ModelSpec& model() const { return model_; }
  const WorkloadProfile& workload() const { return workload_; }

 private:
  double compute(const Solution& s);

  const ClusterSpec& cluster_;
  const ModelSpec& model_;
  WorkloadProfile workload_;
  SloSpec slo_;
  KvPrecision prec_;
  CostParams params_;
  EvaluatorOptions options_;
  std::vector<Request> sim_trace_;

  mutable std::mutex mu_;
  std::unordered_map<std::string, double> memo_;
  std::map<std::pair<std::vector<int>, Phase>, std::optional<ParallelConfig>> configs_;
  std::map<std::vector<int>, ParallelConfig> frozen_;
  std::size_t evaluations_ = 0;
};

struct TabuResult {
  Solution best;
  double best_score = 0.0;
  std::vector<double> trace;  // best score after step 0..k
  std::vector<Solution> path;  // current solution after step 0..k
  std::size_t max_tabu_len = 0;
  std::size_t evaluations = 0;
  int steps_run = 0;
};

// Tabu loop: neighbours minus tabu entries, move to the neighbourhood
// argmax (ties by canonical key), keep the best, bounded tabu memory.
TabuResult tabu_search(const Solution& start, Evaluator& evaluator, const TabuParams& params,
                       bool flip_only = false);

struct PlannerResult {
  OrchestratedPlan plan;
  Solution solution;
  std::vector<double> trace;
  double search_score = 0.0;
  double simulated_score = 0.0;
  std::size_t evaluations = 0;
};

struct PlannerOptions {
  TabuParams tabu;
  EvaluatorOptions eval;
  std::uint64_t sim_seed = 0;
};

// Initial clustering, tabu search, routing, then a simulator re-score of the
// final plan. Throws InsufficientMemory / Infeasible.
PlannerResult plan_deployment(const ClusterSpec& cluster, const ModelSpec& model,
                              const WorkloadProfile& workload, const SloSpec& slo,
                              KvPrecision prec, const CostParams& params,
                              const PlannerOptions& options);

// Simulated attainment of a plan on a synthetic trace drawn from the profile.
double simulated_score(const DeploymentPlan& plan, const ClusterSpec& cluster,
                       const ModelSpec& model, const WorkloadProfile& workload,
                       const SloSpec& slo, const CostParams& params, std::size_t n_requests,
                       std::uint64_t seed);

struct RescheduleEvent {
  enum class Kind { kWorkloadShift, kGpusOffline };
  Kind kind = Kind::kWorkloadShift;
  WorkloadProfile profile;  // kWorkloadShift
  std::vector<int> gpu_ids;  // kGpusOffline
};

struct RescheduleResult {
  PlannerResult result;
  std::vector<std::size_t> removed_groups;  // indices into the old plan's replicas
  bool noop = false;
};

// Flip-only search over surviving groups with frozen configs, then re-routing.
// Throws NoSurvivingPhasePair when fewer than two groups survive.
RescheduleResult lightweight_reschedule(const DeploymentPlan& plan, const ClusterSpec& cluster,
                                        const ModelSpec& model, const WorkloadProfile& workload,
                                        const RescheduleEvent& event, const SloSpec& slo,
                                        KvPrecision prec, const CostParams& params,
                                        const PlannerOptions& options);

// Every partition of the GPUs into memory-feasible groups times every phase
// assignment (including single-phase ones). Exponential; for tiny instances.
std::vector<Solution> enumerate_solutions(const ClusterSpec& cluster, const ModelSpec& model);

}  // namespace hetplan
