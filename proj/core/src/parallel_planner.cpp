#include "hetplan/parallel_planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "hetplan/error.hpp"

namespace hetplan {

PipelineRoute route_pipeline(const Matrix& bw) {
  const int n = static_cast<int>(bw.size());
  if (n == 0) throw Error(ErrorCode::kInvalidInput, "no stages to route");
  if (n > kMaxPipelineStages) {
    throw Error(ErrorCode::kTooManyStages, std::to_string(n) + " stages exceeds bitmask width");
  }
  if (n == 1) return {{0}, std::numeric_limits<double>::infinity()};

  const std::uint32_t full = (1u << n) - 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // best[mask * n + v]: best bottleneck over the remaining extension of a
  // path that has visited `mask` and currently ends at v.
  std::vector<double> best(static_cast<std::size_t>(full + 1) * n, -kInf);
  for (int v = 0; v < n; ++v) best[static_cast<std::size_t>(full) * n + v] = kInf;

  for (std::uint32_t mask = full; mask-- > 1;) {
    for (int v = 0; v < n; ++v) {
      if (!(mask & (1u << v))) continue;
      double value = -kInf;
      for (int u = 0; u < n; ++u) {
        if (mask & (1u << u)) continue;
        const double via = std::min(bw[v][u], best[static_cast<std::size_t>(mask | (1u << u)) * n + u]);
        value = std::max(value, via);
      }
      best[static_cast<std::size_t>(mask) * n + v] = value;
    }
  }

  double opt = -kInf;
  for (int v = 0; v < n; ++v) opt = std::max(opt, best[(1u << v) * static_cast<std::size_t>(n) + v]);

  PipelineRoute route;
  route.bottleneck = opt;
  int cur = 0;
  while (best[(1u << cur) * static_cast<std::size_t>(n) + cur] < opt) ++cur;
  std::uint32_t mask = 1u << cur;
  route.order.push_back(cur);
  while (mask != full) {
    for (int u = 0; u < n; ++u) {
      if (mask & (1u << u)) continue;
      const std::uint32_t next = mask | (1u << u);
      if (std::min(bw[cur][u], best[static_cast<std::size_t>(next) * n + u]) >= opt) {
        cur = u;
        mask = next;
        route.order.push_back(u);
        break;
      }
    }
  }
  return route;
}

Matrix stage_bandwidth_matrix(const std::vector<std::vector<int>>& stage_sets,
                              const ClusterSpec& cluster) {
  const std::size_t n = stage_sets.size();
  Matrix bw(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bw[i][j] = bw[j][i] = best_link(cluster, stage_sets[i], stage_sets[j]).beta;
    }
  }
  return bw;
}

PipelineRoute route_pipeline(const std::vector<std::vector<int>>& stage_sets,
                             const ClusterSpec& cluster) {
  if (static_cast<int>(stage_sets.size()) > kMaxPipelineStages) {
    throw Error(ErrorCode::kTooManyStages, "too many stages");
  }
  return route_pipeline(stage_bandwidth_matrix(stage_sets, cluster));
}

std::vector<int> partition_layers(const std::vector<StageCapacity>& stages, const ModelSpec& model,
                                  int tp) {
  const int k = static_cast<int>(stages.size());
  const int total = model.n_layers;
  if (k == 0 || tp < 1) throw Error(ErrorCode::kInvalidInput, "need stages and tp >= 1");
  if (k > total) throw Error(ErrorCode::kInfeasiblePartition, "more stages than layers");

  double mem_sum = 0.0;
  double flops_sum = 0.0;
  for (const auto& s : stages) {
    mem_sum += s.mem_bytes;
    flops_sum += s.flops;
  }
  std::vector<double> score(k);
  for (int i = 0; i < k; ++i) {
    score[i] = std::sqrt((stages[i].mem_bytes / mem_sum) * (stages[i].flops / flops_sum));
  }
  const double score_sum = std::accumulate(score.begin(), score.end(), 0.0);

  std::vector<int> layers(k);
  std::vector<double> frac(k);
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double quota = total * score[i] / score_sum;
    layers[i] = static_cast<int>(std::floor(quota));
    frac[i] = quota - layers[i];
    assigned += layers[i];
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int r = 0; assigned < total; ++r, ++assigned) ++layers[order[r % k]];

  for (int i = 0; i < k; ++i) {
    if (layers[i] > 0) continue;
    const int donor = static_cast<int>(std::max_element(layers.begin(), layers.end()) - layers.begin());
    --layers[donor];
    ++layers[i];
  }

  // Per-GPU check: layers * layer_bytes / tp <= mem / tp.
  std::vector<int> cap(k);
  long cap_sum = 0;
  for (int i = 0; i < k; ++i) {
    cap[i] = static_cast<int>(std::floor(stages[i].mem_bytes / model.layer_bytes() * (1.0 + 1e-12)));
    if (cap[i] < 1) throw Error(ErrorCode::kInfeasiblePartition, "stage cannot hold one layer");
    cap_sum += cap[i];
  }
  if (cap_sum < total) throw Error(ErrorCode::kInfeasiblePartition, "stages cannot hold the model");

  for (;;) {
    int over = -1;
    for (int i = 0; i < k; ++i) {
      if (layers[i] > cap[i] && (over < 0 || layers[i] - cap[i] > layers[over] - cap[over])) over = i;
    }
    if (over < 0) break;
    int target = -1;
    for (int i = 0; i < k; ++i) {
      if (target < 0 || cap[i] - layers[i] > cap[target] - layers[target]) target = i;
    }
    if (cap[target] - layers[target] <= 0) {
      throw Error(ErrorCode::kInfeasiblePartition, "memory repair failed");
    }
    --layers[over];
    ++layers[target];
  }
  return layers;
}

std::vector<ParallelConfig> enumerate_configs(const ServingGroup& group, const ModelSpec& model,
                                              const ClusterSpec& cluster) {
  if (group.gpu_ids.empty()) throw Error(ErrorCode::kInvalidInput, "empty group");
  if (!group_memory_feasible(cluster, group.gpu_ids, model)) {
    throw Error(ErrorCode::kNoFeasibleConfig, "group cannot hold the model weights");
  }

  std::vector<int> ids = group.gpu_ids;
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const Gpu& ga = cluster.gpu(a);
    const Gpu& gb = cluster.gpu(b);
    return std::tie(ga.type, ga.node, ga.id) < std::tie(gb.type, gb.node, gb.id);
  });

  // Consecutive same-type, same-node runs.
  std::vector<std::vector<int>> runs;
  for (int id : ids) {
    const Gpu& g = cluster.gpu(id);
    if (runs.empty() || cluster.gpu(runs.back().front()).type != g.type ||
        cluster.gpu(runs.back().front()).node != g.node) {
      runs.emplace_back();
    }
    runs.back().push_back(id);
  }

  int min_type_count = static_cast<int>(ids.size());
  for (const auto& [type, count] : type_counts(cluster, ids)) {
    min_type_count = std::min(min_type_count, count);
  }

  const int n = static_cast<int>(ids.size());
  std::vector<ParallelConfig> out;
  for (int tp = 1; tp <= min_type_count; ++tp) {
    bool divides = true;
    for (const auto& r : runs) divides = divides && (static_cast<int>(r.size()) % tp == 0);
    if (!divides) continue;
    const int pp = n / tp;
    if (pp > kMaxPipelineStages || pp > model.n_layers) continue;

    std::vector<std::vector<int>> units;
    for (const auto& r : runs) {
      for (std::size_t s = 0; s < r.size(); s += tp) {
        units.emplace_back(r.begin() + static_cast<long>(s), r.begin() + static_cast<long>(s) + tp);
      }
    }
    const PipelineRoute route = route_pipeline(units, cluster);

    std::vector<StageCapacity> caps;
    for (int u : route.order) {
      const GpuType& ty = cluster.type_of(units[u].front());
      caps.push_back({tp * ty.mem_capacity, tp * ty.peak_flops});
    }
    std::vector<int> layers;
    try {
      layers = partition_layers(caps, model, tp);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInfeasiblePartition) throw;
      continue;
    }

    ParallelConfig cfg;
    cfg.tp = tp;
    for (std::size_t s = 0; s < route.order.size(); ++s) {
      cfg.stages.push_back({units[route.order[s]], layers[s]});
    }
    out.push_back(std::move(cfg));
  }
  if (out.empty()) throw Error(ErrorCode::kNoFeasibleConfig, "no admissible (tp, pp) for group");
  return out;
}

double config_objective(const ParallelConfig& cfg, Phase phase, const ModelSpec& model,
                        const ClusterSpec& cluster, const WorkloadProfile& workload,
                        const CostParams& params) {
  const ReplicaCost cost(cluster, model, cfg, params);
  if (phase == Phase::kPrefill) {
    if (!cost.weights_fit()) return std::numeric_limits<double>::infinity();
    return cost.prefill_latency(std::max(1.0, workload.mean_input_len));
  }
  if (!cost.weights_fit()) return 0.0;
  const double ctx = workload.mean_decode_context();
  const int batch = cost.max_decode_batch(ctx);
  if (batch == 0) return 0.0;
  return batch / cost.decode_step_latency(batch, ctx);
}

namespace {

bool lex_stages_less(const ParallelConfig& a, const ParallelConfig& b) {
  return std::lexicographical_compare(
      a.stages.begin(), a.stages.end(), b.stages.begin(), b.stages.end(),
      [](const Stage& x, const Stage& y) { return x.gpu_ids < y.gpu_ids; });
}

}  // namespace

ParallelConfig best_config(const ServingGroup& group, const ModelSpec& model,
                           const ClusterSpec& cluster, const WorkloadProfile& workload,
                           const CostParams& params) {
  auto candidates = enumerate_configs(group, model, cluster);
  const bool minimize = group.phase == Phase::kPrefill;

  std::size_t best = 0;
  double best_value = config_objective(candidates[0], group.phase, model, cluster, workload, params);
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double v = config_objective(candidates[c], group.phase, model, cluster, workload, params);
    const double tol = 1e-12 * std::max(std::fabs(v), std::fabs(best_value));
    const bool better = minimize ? v < best_value - tol : v > best_value + tol;
    const bool tie = std::fabs(v - best_value) <= tol;
    bool take = better;
    if (!better && tie) {
      const auto& a = candidates[c];
      const auto& b = candidates[best];
      if (a.pp() != b.pp()) {
        take = a.pp() < b.pp();
      } else if (a.tp != b.tp) {
        take = a.tp < b.tp;
      } else {
        take = lex_stages_less(a, b);
      }
    }
    if (take) {
      best = c;
      best_value = v;
    }
  }
  return candidates[best];
}

}  // namespace hetplan
