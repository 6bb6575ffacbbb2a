#pragma once

#include <map>
#include <string>
#include <vector>

#include "hetplan/cluster.hpp"

namespace hetplan {

enum class Phase { kPrefill, kDecode };

inline Phase flip(Phase p) { return p == Phase::kPrefill ? Phase::kDecode : Phase::kPrefill; }
const char* phase_name(Phase p);
Phase parse_phase(const std::string& s);

struct ServingGroup {
  std::vector<int> gpu_ids;  // kept sorted
  Phase phase = Phase::kPrefill;

  bool operator==(const ServingGroup&) const = default;
};

// Per-type GPU counts g_{i,t}, keyed by type name.
std::map<std::string, int> type_counts(const ClusterSpec& cluster, const std::vector<int>& gpu_ids);

struct Stage {
  std::vector<int> gpu_ids;
  int layers = 0;

  bool operator==(const Stage&) const = default;
};

// Stages are listed in pipeline order.
struct ParallelConfig {
  int tp = 1;
  std::vector<Stage> stages;

  int pp() const { return static_cast<int>(stages.size()); }
  bool operator==(const ParallelConfig&) const = default;
};

// Element bitwidth used for KV-cache transfer between phases.
struct KvPrecision {
  int bits = 16;

  double bytes_per_element() const { return bits / 8.0; }
  bool operator==(const KvPrecision&) const = default;
};

KvPrecision make_kv_precision(int bits);  // throws InvalidInput outside {16, 8, 4, 2}

// x[i]: share of requests sent to prefill replica i; y[i][j]: share of those
// forwarded to decode replica j; z[i][j] = x[i] * y[i][j].
struct RoutingPlan {
  std::vector<double> x;
  Matrix y;
  Matrix z;

  bool operator==(const RoutingPlan&) const = default;
};

// Rebuilds x and y from z; rows with zero mass get a uniform y row.
RoutingPlan routing_from_joint(const Matrix& z);

struct Replica {
  ServingGroup group;
  ParallelConfig config;

  bool operator==(const Replica&) const = default;
};

// Routing indices refer to the prefill replicas (resp. decode replicas) in
// the order they appear in `replicas`.
struct DeploymentPlan {
  std::vector<Replica> replicas;
  RoutingPlan routing;
  KvPrecision kv;

  std::vector<std::size_t> prefill_indices() const;
  std::vector<std::size_t> decode_indices() const;
  bool operator==(const DeploymentPlan&) const = default;
};

// Checks group/config/routing invariants; throws InvalidPlan.
void validate_parallel_config(const ParallelConfig& cfg, const ServingGroup& group,
                              const ClusterSpec& cluster, const ModelSpec& model);
void validate_plan(const DeploymentPlan& plan, const ClusterSpec& cluster, const ModelSpec& model);

}  // namespace hetplan
