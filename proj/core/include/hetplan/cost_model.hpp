#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "hetplan/cluster.hpp"
#include "hetplan/plan.hpp"

namespace hetplan {

struct CostParams {
  double flops_efficiency = 0.6;
  double mem_efficiency = 0.8;
  // Seconds per collective per layer; two collectives per layer when tp > 1.
  double tp_allreduce_latency = 0.0;
  int batch_token_plateau = 1024;
  // KV volume spans every layer (true) or a single layer (false).
  bool kv_all_layers = true;
};

void validate_cost_params(const CostParams& p);

struct Link {
  double alpha = 0.0;
  double beta = std::numeric_limits<double>::infinity();
};

// Highest-bandwidth GPU pair between two sets (stage-to-stage transfers).
Link best_link(const ClusterSpec& cluster, const std::vector<int>& a, const std::vector<int>& b);

// Lowest-bandwidth GPU pair between two sets, with that pair's latency.
Link bottleneck_link(const ClusterSpec& cluster, const std::vector<int>& a,
                     const std::vector<int>& b);

// KV link between a prefill and a decode replica: bottleneck over the last
// prefill stage x first decode stage. Throws NoPath when every candidate
// pair has zero bandwidth.
Link replica_link(const ClusterSpec& cluster, const ParallelConfig& prefill,
                  const ParallelConfig& decode);

// Exact transfer volume in bits: 2 * b * s * h * bits (* n_layers).
std::uint64_t kv_transfer_bits(int batch, int seq_len, const ModelSpec& model, KvPrecision prec,
                               bool all_layers = true);

double kv_transfer_bytes(int batch, int seq_len, const ModelSpec& model, KvPrecision prec,
                         bool all_layers = true);

// alpha + volume / beta.
double kv_comm_cost(const Link& link, int batch, int seq_len, const ModelSpec& model,
                    KvPrecision prec, const CostParams& params);

double kv_comm_cost(const ClusterSpec& cluster, const ParallelConfig& prefill,
                    const ParallelConfig& decode, int batch, int seq_len, const ModelSpec& model,
                    KvPrecision prec, const CostParams& params);

// Roofline latency model of one replica, precomputed from its config so the
// hot paths (analytic evaluation, simulator) avoid re-reading the cluster.
class ReplicaCost {
 public:
  ReplicaCost(const ClusterSpec& cluster, const ModelSpec& model, const ParallelConfig& cfg,
              const CostParams& params);

  // Whether every stage's weight shard fits on its GPUs.
  bool weights_fit() const { return weights_fit_; }

  double prefill_latency(double batch_tokens) const;
  double decode_step_latency(double batch_size, double context_len) const;
  int max_decode_batch(double context_len) const;

 private:
  struct StageCost {
    int tp;
    int layers;
    double flops;      // tp * peak * efficiency
    double bandwidth;  // tp * mem_bandwidth * efficiency
    double memory;     // tp * capacity
    double weight_bytes;
    double params;
  };

  void require_fit() const;
  double tp_overhead(const StageCost& s) const;

  std::vector<StageCost> stages_;
  std::vector<Link> links_;  // between consecutive stages
  double hidden_ = 0.0;
  double kv_token_layer_ = 0.0;
  double tp_allreduce_latency_ = 0.0;
  bool weights_fit_ = true;
};

// Sum over stages of max(compute, weight read) plus TP and inter-stage
// transfer overheads. Throws InfeasibleConfig if any stage's weights overflow.
double prefill_latency(const ClusterSpec& cluster, const ModelSpec& model,
                       const ParallelConfig& cfg, int batch_tokens, const CostParams& params);

double decode_step_latency(const ClusterSpec& cluster, const ModelSpec& model,
                           const ParallelConfig& cfg, int batch_size, double context_len,
                           const CostParams& params);

// Largest batch whose KV cache fits beside the weights on every stage; 0 when
// nothing fits.
int max_decode_batch(const ClusterSpec& cluster, const ModelSpec& model, const ParallelConfig& cfg,
                     double context_len);

// Sum of member memory >= model weights (inclusive).
bool group_memory_feasible(const ClusterSpec& cluster, const std::vector<int>& gpu_ids,
                           const ModelSpec& model);

}  // namespace hetplan
