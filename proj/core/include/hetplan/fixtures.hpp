#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetplan/cluster.hpp"
#include "hetplan/cost_model.hpp"
#include "hetplan/workload.hpp"

namespace hetplan::fixtures {

// Public spec-sheet numbers for the GPU types used by the bundled clusters.
std::vector<GpuType> gpu_catalog();
GpuType catalog_type(const std::string& name);

ModelSpec llama_7b();
ModelSpec llama_13b();
ModelSpec llama_30b();

// 32 GPUs across seven rented instances: 2x(4xA6000), 2x(4xA5000),
// 1x(8xA40), 2x(4x3090Ti), with slow and uneven inter-instance links.
ClusterSpec cloud_cluster();

// One 8xA100 NVLink node.
ClusterSpec inhouse_cluster();

// `n_gpus / 4` identical 4xA5000 nodes, uniform inter-node links.
ClusterSpec synthetic_cluster(int n_gpus);

ClusterSpec toy_homogeneous();      // 4xA5000, one node
ClusterSpec toy_two_type();         // 2xA40 + 2x3090Ti on two nodes
ClusterSpec toy_bandwidth_split();  // 2 nodes of 2xA5000, weak cross link

// Long prompts, very short answers.
WorkloadProfile coding_profile(double rate, std::uint64_t seed = 11);
// Medium prompts, longer answers.
WorkloadProfile conversation_profile(double rate, std::uint64_t seed = 12);
// Every request has the same lengths.
WorkloadProfile constant_profile(double rate, int input_len, int output_len);

// Deadlines relative to running the workload's mean request alone on one
// A100: prefill latency and a batch-1 decode step.
SloSpec reference_slo(const ModelSpec& model, const WorkloadProfile& workload,
                      const CostParams& params, double slo_scale);

struct Scenario {
  std::string name;
  ClusterSpec cluster;
  ModelSpec model;
  WorkloadProfile workload;
  SloSpec slo;
};

std::vector<Scenario> scenarios();
Scenario scenario(const std::string& name);

}  // namespace hetplan::fixtures
