#pragma once

#include <limits>
#include <vector>

#include "hetplan/cluster.hpp"
#include "hetplan/cost_model.hpp"
#include "hetplan/plan.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

// Bitmask width bound for pipeline routing.
inline constexpr int kMaxPipelineStages = 16;

struct PipelineRoute {
  std::vector<int> order;  // indices into the input stage list
  double bottleneck = std::numeric_limits<double>::infinity();
};

// Stage ordering maximising the minimum bandwidth between consecutive
// stages. Exact (DP over (visited subset, last stage)); among optimal orders
// returns the lexicographically smallest.
PipelineRoute route_pipeline(const Matrix& stage_bandwidth);
PipelineRoute route_pipeline(const std::vector<std::vector<int>>& stage_sets,
                             const ClusterSpec& cluster);

// Stage-to-stage bandwidth: best single GPU pair between the two sets.
Matrix stage_bandwidth_matrix(const std::vector<std::vector<int>>& stage_sets,
                              const ClusterSpec& cluster);

struct StageCapacity {
  double mem_bytes = 0.0;  // total over the stage's GPUs
  double flops = 0.0;      // total over the stage's GPUs
};

// Layers proportional to the geometric mean of normalised memory and flops,
// rounded by largest remainder, each stage >= 1, then repaired so every
// stage's weights fit its memory. Throws InfeasiblePartition.
std::vector<int> partition_layers(const std::vector<StageCapacity>& stages,
                                  const ModelSpec& model, int tp);

// One config per admissible TP degree: GPUs packed by (type, node, id) into
// TP units, every GPU used, stages routed and layers partitioned. Throws
// NoFeasibleConfig when nothing survives.
std::vector<ParallelConfig> enumerate_configs(const ServingGroup& group, const ModelSpec& model,
                                              const ClusterSpec& cluster);

// Objective used to rank configs: prefill latency (lower is better) or
// decode throughput (higher is better).
double config_objective(const ParallelConfig& cfg, Phase phase, const ModelSpec& model,
                        const ClusterSpec& cluster, const WorkloadProfile& workload,
                        const CostParams& params);

// Latency-optimal for prefill, throughput-optimal for decode; ties go to
// smaller PP, then smaller TP, then lexicographic stage order.
ParallelConfig best_config(const ServingGroup& group, const ModelSpec& model,
                           const ClusterSpec& cluster, const WorkloadProfile& workload,
                           const CostParams& params);

}  // namespace hetplan
