#include "hetplan/plan.hpp"

#include <cmath>
#include <set>

#include "hetplan/error.hpp"

namespace hetplan {

const char* phase_name(Phase p) { return p == Phase::kPrefill ? "prefill" : "decode"; }

Phase parse_phase(const std::string& s) {
  if (s == "prefill") return Phase::kPrefill;
  if (s == "decode") return Phase::kDecode;
  throw Error(ErrorCode::kParseError, "unknown phase '" + s + "'");
}

std::map<std::string, int> type_counts(const ClusterSpec& cluster, const std::vector<int>& gpu_ids) {
  std::map<std::string, int> counts;
  for (int id : gpu_ids) ++counts[cluster.gpu(id).type];
  return counts;
}

KvPrecision make_kv_precision(int bits) {
  if (bits != 16 && bits != 8 && bits != 4 && bits != 2) {
    throw Error(ErrorCode::kInvalidInput, "kv bits must be one of 16, 8, 4, 2");
  }
  return KvPrecision{bits};
}

RoutingPlan routing_from_joint(const Matrix& z) {
  RoutingPlan r;
  r.z = z;
  const std::size_t m = z.size();
  r.x.assign(m, 0.0);
  r.y.assign(m, {});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t n = z[i].size();
    double row = 0.0;
    for (double v : z[i]) row += v;
    r.x[i] = row;
    r.y[i].assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      r.y[i][j] = row > 0 ? z[i][j] / row : 1.0 / static_cast<double>(n);
    }
  }
  return r;
}

std::vector<std::size_t> DeploymentPlan::prefill_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < replicas.size(); ++i) {
    if (replicas[i].group.phase == Phase::kPrefill) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> DeploymentPlan::decode_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < replicas.size(); ++i) {
    if (replicas[i].group.phase == Phase::kDecode) out.push_back(i);
  }
  return out;
}

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidPlan, msg); }

}  // namespace

void validate_parallel_config(const ParallelConfig& cfg, const ServingGroup& group,
                              const ClusterSpec& cluster, const ModelSpec& model) {
  if (cfg.tp < 1 || cfg.stages.empty()) invalid("config needs tp >= 1 and at least one stage");
  const std::set<int> members(group.gpu_ids.begin(), group.gpu_ids.end());
  std::set<int> used;
  int layers = 0;
  for (const auto& st : cfg.stages) {
    if (static_cast<int>(st.gpu_ids.size()) != cfg.tp) invalid("stage size differs from tp");
    if (st.layers < 1) invalid("stage with no layers");
    layers += st.layers;
    const Gpu& first = cluster.gpu(st.gpu_ids.front());
    for (int id : st.gpu_ids) {
      if (!members.count(id)) invalid("stage gpu " + std::to_string(id) + " not in group");
      if (!used.insert(id).second) invalid("gpu " + std::to_string(id) + " in two stages");
      const Gpu& g = cluster.gpu(id);
      if (g.type != first.type || g.node != first.node) {
        invalid("tensor-parallel stage spans types or nodes");
      }
    }
    const double per_gpu = st.layers * model.layer_bytes() / cfg.tp;
    if (per_gpu > cluster.type_of(first.id).mem_capacity) invalid("stage exceeds gpu memory");
  }
  if (layers != model.n_layers) invalid("stage layers do not sum to model layers");
}

void validate_plan(const DeploymentPlan& plan, const ClusterSpec& cluster, const ModelSpec& model) {
  std::set<int> seen;
  for (const auto& r : plan.replicas) {
    if (r.group.gpu_ids.empty()) invalid("empty serving group");
    for (int id : r.group.gpu_ids) {
      if (!cluster.contains(id)) invalid("unknown gpu " + std::to_string(id));
      if (!seen.insert(id).second) invalid("gpu " + std::to_string(id) + " in two groups");
    }
    validate_parallel_config(r.config, r.group, cluster, model);
  }
  const std::size_t m = plan.prefill_indices().size();
  const std::size_t n = plan.decode_indices().size();
  if (m == 0 || n == 0) invalid("plan needs at least one prefill and one decode replica");

  const auto& rt = plan.routing;
  if (rt.x.size() != m || rt.y.size() != m || rt.z.size() != m) invalid("routing rows mismatch");
  constexpr double kTol = 1e-6;
  double sx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (rt.y[i].size() != n || rt.z[i].size() != n) invalid("routing columns mismatch");
    if (rt.x[i] < -kTol) invalid("negative routing share");
    sx += rt.x[i];
    double sy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (rt.y[i][j] < -kTol || rt.z[i][j] < -kTol) invalid("negative routing share");
      sy += rt.y[i][j];
    }
    if (std::fabs(sy - 1.0) > kTol) invalid("routing row does not sum to 1");
  }
  if (std::fabs(sx - 1.0) > kTol) invalid("prefill shares do not sum to 1");
}

}  // namespace hetplan
