#include "hetplan/cost_model.hpp"

#include <algorithm>
#include <cmath>

#include "hetplan/error.hpp"

namespace hetplan {

namespace {

constexpr int kMaxBatch = 1 << 20;

}  // namespace

void validate_cost_params(const CostParams& p) {
  if (!(p.flops_efficiency > 0 && p.flops_efficiency <= 1) ||
      !(p.mem_efficiency > 0 && p.mem_efficiency <= 1)) {
    throw Error(ErrorCode::kInvalidInput, "efficiencies must lie in (0, 1]");
  }
  if (p.tp_allreduce_latency < 0 || p.batch_token_plateau < 1) {
    throw Error(ErrorCode::kInvalidInput, "invalid tp latency or batch plateau");
  }
}

Link best_link(const ClusterSpec& cluster, const std::vector<int>& a, const std::vector<int>& b) {
  Link best{0.0, -1.0};
  for (int u : a) {
    for (int v : b) {
      const double bw = cluster.bandwidth(u, v);
      const double lat = cluster.latency(u, v);
      if (bw > best.beta || (bw == best.beta && lat < best.alpha)) best = {lat, bw};
    }
  }
  return best;
}

Link bottleneck_link(const ClusterSpec& cluster, const std::vector<int>& a,
                     const std::vector<int>& b) {
  Link worst{0.0, std::numeric_limits<double>::infinity()};
  bool any = false;
  for (int u : a) {
    for (int v : b) {
      const double bw = cluster.bandwidth(u, v);
      const double lat = cluster.latency(u, v);
      if (!any || bw < worst.beta || (bw == worst.beta && lat > worst.alpha)) {
        worst = {lat, bw};
        any = true;
      }
    }
  }
  return worst;
}

Link replica_link(const ClusterSpec& cluster, const ParallelConfig& prefill,
                  const ParallelConfig& decode) {
  const auto& last = prefill.stages.back().gpu_ids;
  const auto& first = decode.stages.front().gpu_ids;
  bool any_path = false;
  for (int u : last) {
    for (int v : first) any_path = any_path || cluster.bandwidth(u, v) > 0;
  }
  if (!any_path) throw Error(ErrorCode::kNoPath, "no bandwidth between replicas");
  // Zero-bandwidth pairs are not usable links; the bottleneck is taken over
  // the pairs that can carry traffic.
  Link worst{0.0, std::numeric_limits<double>::infinity()};
  bool any = false;
  for (int u : last) {
    for (int v : first) {
      const double bw = cluster.bandwidth(u, v);
      if (bw <= 0) continue;
      const double lat = cluster.latency(u, v);
      if (!any || bw < worst.beta || (bw == worst.beta && lat > worst.alpha)) {
        worst = {lat, bw};
        any = true;
      }
    }
  }
  return worst;
}

std::uint64_t kv_transfer_bits(int batch, int seq_len, const ModelSpec& model, KvPrecision prec,
                               bool all_layers) {
  if (batch < 1 || seq_len < 1) throw Error(ErrorCode::kInvalidInput, "batch and seq_len >= 1");
  std::uint64_t v = 2ULL * static_cast<std::uint64_t>(batch) * static_cast<std::uint64_t>(seq_len) *
                    static_cast<std::uint64_t>(model.hidden_size) *
                    static_cast<std::uint64_t>(prec.bits);
  if (all_layers) v *= static_cast<std::uint64_t>(model.n_layers);
  return v;
}

double kv_transfer_bytes(int batch, int seq_len, const ModelSpec& model, KvPrecision prec,
                         bool all_layers) {
  return static_cast<double>(kv_transfer_bits(batch, seq_len, model, prec, all_layers)) / 8.0;
}

double kv_comm_cost(const Link& link, int batch, int seq_len, const ModelSpec& model,
                    KvPrecision prec, const CostParams& params) {
  if (!(link.beta > 0)) throw Error(ErrorCode::kNoPath, "zero bandwidth link");
  const double bytes = kv_transfer_bytes(batch, seq_len, model, prec, params.kv_all_layers);
  return link.alpha + bytes / link.beta;
}

double kv_comm_cost(const ClusterSpec& cluster, const ParallelConfig& prefill,
                    const ParallelConfig& decode, int batch, int seq_len, const ModelSpec& model,
                    KvPrecision prec, const CostParams& params) {
  return kv_comm_cost(replica_link(cluster, prefill, decode), batch, seq_len, model, prec, params);
}

ReplicaCost::ReplicaCost(const ClusterSpec& cluster, const ModelSpec& model,
                         const ParallelConfig& cfg, const CostParams& params)
    : hidden_(model.hidden_size),
      kv_token_layer_(model.kv_bytes_per_token_layer()),
      tp_allreduce_latency_(params.tp_allreduce_latency) {
  if (cfg.stages.empty()) throw Error(ErrorCode::kInvalidInput, "config without stages");
  for (const auto& st : cfg.stages) {
    const GpuType& ty = cluster.type_of(st.gpu_ids.front());
    StageCost s;
    s.tp = static_cast<int>(st.gpu_ids.size());
    s.layers = st.layers;
    s.params = st.layers * model.params_per_layer();
    s.weight_bytes = s.params * model.bytes_per_param;
    s.flops = s.tp * ty.peak_flops * params.flops_efficiency;
    s.bandwidth = s.tp * ty.mem_bandwidth * params.mem_efficiency;
    s.memory = s.tp * ty.mem_capacity;
    if (s.weight_bytes > s.memory) weights_fit_ = false;
    stages_.push_back(s);
  }
  for (std::size_t k = 1; k < cfg.stages.size(); ++k) {
    links_.push_back(best_link(cluster, cfg.stages[k - 1].gpu_ids, cfg.stages[k].gpu_ids));
  }
}

void ReplicaCost::require_fit() const {
  if (!weights_fit_) throw Error(ErrorCode::kInfeasibleConfig, "stage weights exceed memory");
}

double ReplicaCost::tp_overhead(const StageCost& s) const {
  return s.tp > 1 ? 2.0 * s.layers * tp_allreduce_latency_ : 0.0;
}

double ReplicaCost::prefill_latency(double batch_tokens) const {
  require_fit();
  double total = 0.0;
  for (const auto& s : stages_) {
    const double compute = 2.0 * s.params * batch_tokens / s.flops;
    const double memory = s.weight_bytes / s.bandwidth;
    total += std::max(compute, memory) + tp_overhead(s);
  }
  const double activation_bytes = batch_tokens * hidden_ * 2.0;
  for (const auto& l : links_) total += l.alpha + activation_bytes / l.beta;
  return total;
}

double ReplicaCost::decode_step_latency(double batch_size, double context_len) const {
  require_fit();
  double total = 0.0;
  for (const auto& s : stages_) {
    const double read = s.weight_bytes + batch_size * context_len * kv_token_layer_ * s.layers;
    const double memory = read / s.bandwidth;
    const double compute = 2.0 * s.params * batch_size / s.flops;
    total += std::max(compute, memory) + tp_overhead(s);
  }
  const double activation_bytes = batch_size * hidden_ * 2.0;
  for (const auto& l : links_) total += l.alpha + activation_bytes / l.beta;
  return total;
}

int ReplicaCost::max_decode_batch(double context_len) const {
  double best = kMaxBatch;
  for (const auto& s : stages_) {
    const double free = s.memory - s.weight_bytes;
    if (free < 0) return 0;
    const double per_request = context_len * kv_token_layer_ * s.layers;
    if (per_request <= 0) continue;
    best = std::min(best, std::floor(free / per_request * (1.0 + 1e-12)));
  }
  return static_cast<int>(std::max(0.0, best));
}

double prefill_latency(const ClusterSpec& cluster, const ModelSpec& model,
                       const ParallelConfig& cfg, int batch_tokens, const CostParams& params) {
  if (batch_tokens < 1) throw Error(ErrorCode::kInvalidInput, "batch_tokens must be >= 1");
  return ReplicaCost(cluster, model, cfg, params).prefill_latency(batch_tokens);
}

double decode_step_latency(const ClusterSpec& cluster, const ModelSpec& model,
                           const ParallelConfig& cfg, int batch_size, double context_len,
                           const CostParams& params) {
  if (batch_size < 1) throw Error(ErrorCode::kInvalidInput, "batch_size must be >= 1");
  return ReplicaCost(cluster, model, cfg, params).decode_step_latency(batch_size, context_len);
}

int max_decode_batch(const ClusterSpec& cluster, const ModelSpec& model, const ParallelConfig& cfg,
                     double context_len) {
  return ReplicaCost(cluster, model, cfg, CostParams{}).max_decode_batch(context_len);
}

bool group_memory_feasible(const ClusterSpec& cluster, const std::vector<int>& gpu_ids,
                           const ModelSpec& model) {
  double total = 0.0;
  for (int id : gpu_ids) total += cluster.type_of(id).mem_capacity;
  return total >= model.weight_bytes();
}

}  // namespace hetplan
