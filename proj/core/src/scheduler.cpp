#include "hetplan/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <tuple>

#include "hetplan/error.hpp"
#include "hetplan/parallel_planner.hpp"
#include "hetplan/simulator.hpp"
#include "hetplan/thread_pool.hpp"

namespace hetplan {

namespace {

constexpr int kLightweightPatience = 2;

bool all_feasible(const Solution& s, const ClusterSpec& cluster, const ModelSpec& model) {
  for (const auto& g : s.groups) {
    if (g.gpu_ids.empty() || !group_memory_feasible(cluster, g.gpu_ids, model)) return false;
  }
  return true;
}

bool has_both_phases(const Solution& s) {
  bool p = false;
  bool d = false;
  for (const auto& g : s.groups) (g.phase == Phase::kPrefill ? p : d) = true;
  return p && d;
}

Phase random_phase(Rng& rng) { return rng.coin() ? Phase::kPrefill : Phase::kDecode; }

}  // namespace

void Solution::canonicalize() {
  for (auto& g : groups) std::sort(g.gpu_ids.begin(), g.gpu_ids.end());
  std::sort(groups.begin(), groups.end(),
            [](const ServingGroup& a, const ServingGroup& b) { return a.gpu_ids < b.gpu_ids; });
}

std::string Solution::key() const {
  std::ostringstream os;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) os << '|';
    os << (groups[g].phase == Phase::kPrefill ? 'p' : 'd');
    for (std::size_t k = 0; k < groups[g].gpu_ids.size(); ++k) {
      os << (k ? ',' : ':') << groups[g].gpu_ids[k];
    }
  }
  return os.str();
}

Solution canonical(Solution s) {
  s.canonicalize();
  return s;
}

void validate_tabu_params(const TabuParams& p) {
  if (p.n_step < 0 || p.n_nghb < 1 || p.n_mem < 1 || p.patience < 0) {
    throw Error(ErrorCode::kInvalidInput, "tabu params: n_step >= 0, n_nghb >= 1, n_mem >= 1");
  }
}

const char* move_kind_name(MoveKind k) {
  switch (k) {
    case MoveKind::kFlip:
      return "flip";
    case MoveKind::kSplit:
      return "split";
    case MoveKind::kMerge:
      return "merge";
    case MoveKind::kMove:
      return "move";
  }
  return "?";
}

Dendrogram cluster_gpus(const ClusterSpec& cluster) {
  const std::vector<int> ids = cluster.gpu_ids();
  const std::size_t n = ids.size();
  Dendrogram tree;
  if (n == 0) return tree;
  const std::size_t total = 2 * n - 1;
  tree.nodes.reserve(total);
  for (int id : ids) tree.nodes.push_back({{id}, -1, -1, 0.0});

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dist(total, std::vector<double>(total, kInf));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double beta = cluster.bandwidth(ids[a], ids[b]);
      dist[a][b] = beta > 0 ? 1.0 / beta : kInf;
    }
  }
  // Bandwidth may be asymmetric within tolerance; use the symmetric mean.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = 0.5 * (dist[a][b] + dist[b][a]);
      dist[a][b] = dist[b][a] = v;
    }
  }

  std::vector<int> active(n);
  for (std::size_t a = 0; a < n; ++a) active[a] = static_cast<int>(a);
  while (active.size() > 1) {
    std::size_t ba = 0;
    std::size_t bb = 1;
    auto rank = [&](std::size_t x, std::size_t y) {
      const auto& nx = tree.nodes[active[x]];
      const auto& ny = tree.nodes[active[y]];
      return std::make_tuple(dist[active[x]][active[y]], nx.members.size() + ny.members.size(),
                             std::cref(nx.members), std::cref(ny.members));
    };
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        if (rank(x, y) < rank(ba, bb)) {
          ba = x;
          bb = y;
        }
      }
    }
    const int ia = active[ba];
    const int ib = active[bb];
    Dendrogram::Node node;
    node.left = ia;
    node.right = ib;
    node.height = dist[ia][ib];
    node.members = tree.nodes[ia].members;
    node.members.insert(node.members.end(), tree.nodes[ib].members.begin(),
                        tree.nodes[ib].members.end());
    std::sort(node.members.begin(), node.members.end());
    const int idx = static_cast<int>(tree.nodes.size());
    const double sa = static_cast<double>(tree.nodes[ia].members.size());
    const double sb = static_cast<double>(tree.nodes[ib].members.size());
    tree.nodes.push_back(std::move(node));
    active.erase(active.begin() + static_cast<long>(bb));
    active.erase(active.begin() + static_cast<long>(ba));
    for (int k : active) {
      const double v = (sa * dist[k][ia] + sb * dist[k][ib]) / (sa + sb);
      dist[k][idx] = dist[idx][k] = v;
    }
    active.push_back(idx);
  }
  return tree;
}

std::vector<std::vector<int>> feasible_cut(const Dendrogram& tree, const ClusterSpec& cluster,
                                           const ModelSpec& model) {
  if (tree.nodes.empty()) throw Error(ErrorCode::kInsufficientMemory, "empty cluster");
  const std::size_t total = tree.nodes.size();
  std::vector<int> count(total, -1);
  // Children precede parents, so one forward pass suffices.
  for (std::size_t k = 0; k < total; ++k) {
    const auto& node = tree.nodes[k];
    const bool ok = group_memory_feasible(cluster, node.members, model);
    int best = ok ? 1 : -1;
    if (node.left >= 0 && count[node.left] > 0 && count[node.right] > 0) {
      best = std::max(best, count[node.left] + count[node.right]);
    }
    count[k] = best;
  }
  if (count[tree.root()] < 0) {
    throw Error(ErrorCode::kInsufficientMemory, "the whole cluster cannot hold the model");
  }
  std::vector<std::vector<int>> parts;
  std::vector<int> stack{tree.root()};
  while (!stack.empty()) {
    const int k = stack.back();
    stack.pop_back();
    const auto& node = tree.nodes[k];
    if (node.left >= 0 && count[node.left] > 0 && count[node.right] > 0 &&
        count[node.left] + count[node.right] == count[k]) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      parts.push_back(node.members);
    }
  }
  std::sort(parts.begin(), parts.end());
  return parts;
}

Solution initial_solution(const ClusterSpec& cluster, const ModelSpec& model, Rng& rng) {
  const auto parts = feasible_cut(cluster_gpus(cluster), cluster, model);
  Solution s;
  for (const auto& p : parts) s.groups.push_back({p, random_phase(rng)});
  if (s.groups.size() >= 2 && !has_both_phases(s)) {
    auto& g = s.groups[rng.index(s.groups.size())];
    g.phase = flip(g.phase);
  }
  s.canonicalize();
  return s;
}

std::optional<Solution> flip_move(const Solution& s, std::size_t group) {
  if (group >= s.groups.size()) return std::nullopt;
  Solution out = s;
  out.groups[group].phase = flip(out.groups[group].phase);
  out.canonicalize();
  return out;
}

std::optional<Solution> split_move(const Solution& s, std::size_t group, double r,
                                   const ClusterSpec& cluster, Phase first, Phase second) {
  if (group >= s.groups.size() || !(r > 0 && r < 1)) return std::nullopt;
  const auto& members = s.groups[group].gpu_ids;
  std::map<std::string, std::vector<int>> by_type;
  for (int id : members) by_type[cluster.gpu(id).type].push_back(id);
  ServingGroup a{{}, first};
  ServingGroup b{{}, second};
  for (auto& [type, ids] : by_type) {
    std::sort(ids.begin(), ids.end(), [&](int x, int y) {
      return std::make_pair(cluster.gpu(x).node, x) < std::make_pair(cluster.gpu(y).node, y);
    });
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(ids.size()) * r));
    a.gpu_ids.insert(a.gpu_ids.end(), ids.begin(), ids.begin() + static_cast<long>(k));
    b.gpu_ids.insert(b.gpu_ids.end(), ids.begin() + static_cast<long>(k), ids.end());
  }
  if (a.gpu_ids.empty() || b.gpu_ids.empty()) return std::nullopt;
  Solution out = s;
  out.groups.erase(out.groups.begin() + static_cast<long>(group));
  out.groups.push_back(std::move(a));
  out.groups.push_back(std::move(b));
  out.canonicalize();
  return out;
}

std::optional<Solution> merge_move(const Solution& s, std::size_t a, std::size_t b, Phase phase) {
  if (a == b || a >= s.groups.size() || b >= s.groups.size()) return std::nullopt;
  ServingGroup merged{s.groups[a].gpu_ids, phase};
  merged.gpu_ids.insert(merged.gpu_ids.end(), s.groups[b].gpu_ids.begin(),
                        s.groups[b].gpu_ids.end());
  Solution out;
  for (std::size_t g = 0; g < s.groups.size(); ++g) {
    if (g != a && g != b) out.groups.push_back(s.groups[g]);
  }
  out.groups.push_back(std::move(merged));
  out.canonicalize();
  return out;
}

std::optional<Solution> move_gpus(const Solution& s, std::size_t from, std::size_t to,
                                  const std::string& type, int count, const ClusterSpec& cluster) {
  if (from == to || from >= s.groups.size() || to >= s.groups.size() || count < 1) {
    return std::nullopt;
  }
  const auto& src = s.groups[from].gpu_ids;
  std::set<int> target_nodes;
  for (int id : s.groups[to].gpu_ids) target_nodes.insert(cluster.gpu(id).node);
  std::vector<int> pool;
  for (int id : src) {
    if (cluster.gpu(id).type == type) pool.push_back(id);
  }
  if (static_cast<int>(pool.size()) < count || static_cast<int>(src.size()) <= count) {
    return std::nullopt;
  }
  // GPUs on nodes the target already spans go first.
  std::sort(pool.begin(), pool.end(), [&](int x, int y) {
    const Gpu& gx = cluster.gpu(x);
    const Gpu& gy = cluster.gpu(y);
    return std::make_tuple(target_nodes.count(gx.node) ? 0 : 1, gx.node, x) <
           std::make_tuple(target_nodes.count(gy.node) ? 0 : 1, gy.node, y);
  });
  const std::set<int> moving(pool.begin(), pool.begin() + count);
  Solution out = s;
  auto& sg = out.groups[from].gpu_ids;
  sg.erase(std::remove_if(sg.begin(), sg.end(), [&](int id) { return moving.count(id) != 0; }),
           sg.end());
  out.groups[to].gpu_ids.insert(out.groups[to].gpu_ids.end(), moving.begin(), moving.end());
  out.canonicalize();
  return out;
}

std::vector<Solution> neighbors(const Solution& s, int n, Rng& rng, const ClusterSpec& cluster,
                                const ModelSpec& model, const NeighborOptions& options) {
  std::vector<Solution> out;
  if (s.groups.empty() || n < 1) return out;
  std::set<std::string> seen = options.exclude;
  seen.insert(canonical(s).key());
  const std::size_t g = s.groups.size();
  const int max_attempts = 10 * n;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < n; ++attempt) {
    const auto kind =
        options.flip_only ? MoveKind::kFlip : static_cast<MoveKind>(rng.index(4));
    std::optional<Solution> cand;
    switch (kind) {
      case MoveKind::kFlip:
        cand = flip_move(s, rng.index(g));
        break;
      case MoveKind::kSplit: {
        const std::size_t gi = rng.index(g);
        const double r = rng.uniform_open();
        const Phase a = random_phase(rng);
        const Phase b = random_phase(rng);
        cand = split_move(s, gi, r, cluster, a, b);
        break;
      }
      case MoveKind::kMerge: {
        if (g < 2) break;
        const std::size_t a = rng.index(g);
        std::size_t b = rng.index(g - 1);
        if (b >= a) ++b;
        cand = merge_move(s, a, b, random_phase(rng));
        break;
      }
      case MoveKind::kMove: {
        if (g < 2) break;
        const std::size_t from = rng.index(g);
        std::size_t to = rng.index(g - 1);
        if (to >= from) ++to;
        const auto counts = type_counts(cluster, s.groups[from].gpu_ids);
        auto it = counts.begin();
        std::advance(it, static_cast<long>(rng.index(counts.size())));
        const int limit =
            std::min(it->second, static_cast<int>(s.groups[from].gpu_ids.size()) - 1);
        if (limit < 1) break;
        cand = move_gpus(s, from, to, it->first, rng.uniform_int(1, limit), cluster);
        break;
      }
    }
    if (!cand || !all_feasible(*cand, cluster, model)) continue;
    if (!seen.insert(cand->key()).second) continue;
    out.push_back(std::move(*cand));
  }
  return out;
}

Evaluator::Evaluator(const ClusterSpec& cluster, const ModelSpec& model,
                     const WorkloadProfile& workload, const SloSpec& slo, KvPrecision prec,
                     const CostParams& params, EvaluatorOptions options)
    : cluster_(cluster),
      model_(model),
      workload_(workload),
      slo_(slo),
      prec_(prec),
      params_(params),
      options_(options) {
  if (options_.orchestrator.mode == EvalMode::kSimulated) {
    sim_trace_ = trace_from_profile(workload_, workload_.arrival_rate, options_.sim_requests,
                                    options_.orchestrator.seed);
  }
}

void Evaluator::freeze(const std::vector<int>& gpu_ids, const ParallelConfig& cfg) {
  std::vector<int> ids = gpu_ids;
  std::sort(ids.begin(), ids.end());
  std::lock_guard<std::mutex> lock(mu_);
  frozen_[ids] = cfg;
}

std::optional<ParallelConfig> Evaluator::config_for(const ServingGroup& g) {
  std::vector<int> ids = g.gpu_ids;
  std::sort(ids.begin(), ids.end());
  const auto key = std::make_pair(ids, g.phase);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = frozen_.find(ids); it != frozen_.end()) return it->second;
    if (auto it = configs_.find(key); it != configs_.end()) return it->second;
  }
  std::optional<ParallelConfig> cfg;
  try {
    cfg = best_config({ids, g.phase}, model_, cluster_, workload_, params_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoFeasibleConfig && e.code() != ErrorCode::kInfeasiblePartition &&
        e.code() != ErrorCode::kTooManyStages) {
      throw;
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  configs_.emplace(key, cfg);
  return cfg;
}

std::optional<OrchestratedPlan> Evaluator::materialize(const Solution& s) {
  const Solution c = canonical(s);
  if (!has_both_phases(c)) return std::nullopt;
  std::vector<Replica> prefills;
  std::vector<Replica> decodes;
  for (const auto& g : c.groups) {
    auto cfg = config_for(g);
    if (!cfg) return std::nullopt;
    (g.phase == Phase::kPrefill ? prefills : decodes).push_back({g, *cfg});
  }
  try {
    return orchestrate(cluster_, model_, prefills, decodes, workload_, slo_, prec_, params_,
                       options_.orchestrator);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInfeasible || e.code() == ErrorCode::kNoPath ||
        e.code() == ErrorCode::kInvalidPlan) {
      return std::nullopt;
    }
    throw;
  }
}

double Evaluator::plan_score(const OrchestratedPlan& p) const {
  if (options_.orchestrator.mode == EvalMode::kSimulated) {
    return simulate(p.plan, cluster_, model_, sim_trace_, slo_, params_,
                    options_.orchestrator.seed)
        .attainment_e2e;
  }
  std::vector<Replica> prefills;
  std::vector<Replica> decodes;
  for (const auto& r : p.plan.replicas) {
    (r.group.phase == Phase::kPrefill ? prefills : decodes).push_back(r);
  }
  const AnalyticModel model(cluster_, model_, prefills, decodes, workload_, slo_, prec_, params_);
  return model.plan_attainment(p.plan.routing);
}

double Evaluator::compute(const Solution& s) {
  const auto p = materialize(s);
  if (!p) return 0.0;
  try {
    return std::clamp(plan_score(*p), 0.0, 1.0);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidPlan) return 0.0;
    throw;
  }
}

double Evaluator::score(const Solution& s) { return score_all({s}).front(); }

std::vector<double> Evaluator::score_all(const std::vector<Solution>& candidates) {
  std::vector<std::string> keys;
  keys.reserve(candidates.size());
  for (const auto& c : candidates) keys.push_back(canonical(c).key());

  std::vector<std::size_t> todo;
  {
    std::lock_guard<std::mutex> lock(mu_);
    std::set<std::string> pending;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (!memo_.count(keys[k]) && pending.insert(keys[k]).second) todo.push_back(k);
    }
  }
  std::vector<double> fresh(todo.size(), 0.0);
  parallel_for(todo.size(), [&](std::size_t t) { fresh[t] = compute(candidates[todo[t]]); });
  std::vector<double> out;
  out.reserve(candidates.size());
  std::lock_guard<std::mutex> lock(mu_);
  for (std::size_t t = 0; t < todo.size(); ++t) {
    if (memo_.emplace(keys[todo[t]], fresh[t]).second) ++evaluations_;
  }
  for (const auto& k : keys) out.push_back(memo_.at(k));
  return out;
}

std::size_t Evaluator::evaluations() const {
  std::lock_guard<std::mutex> lock(mu_);
  return evaluations_;
}

TabuResult tabu_search(const Solution& start, Evaluator& evaluator, const TabuParams& params,
                       bool flip_only) {
  validate_tabu_params(params);
  Rng rng = Rng(params.rng_seed).fork(2);
  TabuResult result;
  Solution x = canonical(start);
  result.best = x;
  result.best_score = evaluator.score(x);
  result.trace.push_back(result.best_score);
  result.path.push_back(x);
  std::deque<std::string> tabu;
  int stall = 0;

  for (int step = 0; step < params.n_step; ++step) {
    NeighborOptions opts;
    opts.flip_only = flip_only;
    opts.exclude.insert(tabu.begin(), tabu.end());
    const auto cands =
        neighbors(x, params.n_nghb, rng, evaluator.cluster(), evaluator.model(), opts);
    if (cands.empty()) break;
    const auto scores = evaluator.score_all(cands);
    std::size_t pick = 0;
    std::string pick_key = cands[0].key();
    for (std::size_t k = 1; k < cands.size(); ++k) {
      const std::string key = cands[k].key();
      if (scores[k] > scores[pick] || (scores[k] == scores[pick] && key < pick_key)) {
        pick = k;
        pick_key = key;
      }
    }
    x = cands[pick];
    if (scores[pick] > result.best_score) {
      result.best = x;
      result.best_score = scores[pick];
      stall = 0;
    } else {
      ++stall;
    }
    tabu.push_back(pick_key);
    while (static_cast<int>(tabu.size()) > params.n_mem) tabu.pop_front();
    result.max_tabu_len = std::max(result.max_tabu_len, tabu.size());
    result.trace.push_back(result.best_score);
    result.path.push_back(x);
    ++result.steps_run;
    if (params.patience > 0 && stall >= params.patience) break;
  }
  result.evaluations = evaluator.evaluations();
  return result;
}

double simulated_score(const DeploymentPlan& plan, const ClusterSpec& cluster,
                       const ModelSpec& model, const WorkloadProfile& workload,
                       const SloSpec& slo, const CostParams& params, std::size_t n_requests,
                       std::uint64_t seed) {
  const RequestTrace trace = trace_from_profile(workload, workload.arrival_rate, n_requests, seed);
  return simulate(plan, cluster, model, trace, slo, params, seed).attainment_e2e;
}

PlannerResult plan_deployment(const ClusterSpec& cluster, const ModelSpec& model,
                              const WorkloadProfile& workload, const SloSpec& slo,
                              KvPrecision prec, const CostParams& params,
                              const PlannerOptions& options) {
  validate_tabu_params(options.tabu);
  Rng init = Rng(options.tabu.rng_seed).fork(1);
  const Solution start = initial_solution(cluster, model, init);
  Evaluator evaluator(cluster, model, workload, slo, prec, params, options.eval);
  const TabuResult search = tabu_search(start, evaluator, options.tabu);
  auto materialized = evaluator.materialize(search.best);
  if (!materialized) throw Error(ErrorCode::kInfeasible, "no servable deployment found");

  PlannerResult out;
  out.plan = std::move(*materialized);
  out.solution = search.best;
  out.trace = search.trace;
  out.search_score = search.best_score;
  out.evaluations = search.evaluations;
  out.simulated_score = simulated_score(out.plan.plan, cluster, model, workload, slo, params,
                                        options.eval.sim_requests, options.sim_seed);
  return out;
}

RescheduleResult lightweight_reschedule(const DeploymentPlan& plan, const ClusterSpec& cluster,
                                        const ModelSpec& model, const WorkloadProfile& workload,
                                        const RescheduleEvent& event, const SloSpec& slo,
                                        KvPrecision prec, const CostParams& params,
                                        const PlannerOptions& options) {
  const std::set<int> offline(event.gpu_ids.begin(), event.gpu_ids.end());
  const WorkloadProfile& target =
      event.kind == RescheduleEvent::Kind::kWorkloadShift ? event.profile : workload;

  RescheduleResult out;
  Solution start;
  std::vector<const Replica*> survivors;
  for (std::size_t r = 0; r < plan.replicas.size(); ++r) {
    const auto& rep = plan.replicas[r];
    const bool hit = event.kind == RescheduleEvent::Kind::kGpusOffline &&
                     std::any_of(rep.group.gpu_ids.begin(), rep.group.gpu_ids.end(),
                                 [&](int id) { return offline.count(id) != 0; });
    if (hit) {
      out.removed_groups.push_back(r);
    } else {
      start.groups.push_back(rep.group);
      survivors.push_back(&rep);
    }
  }

  const bool shifted = event.kind == RescheduleEvent::Kind::kWorkloadShift &&
                       detect_shift(workload, event.profile);
  if (out.removed_groups.empty() && !shifted) {
    out.noop = true;
    out.result.plan.plan = plan;
    for (const auto& r : plan.replicas) out.result.solution.groups.push_back(r.group);
    return out;
  }
  if (survivors.size() < 2) {
    throw Error(ErrorCode::kNoSurvivingPhasePair, "fewer than two serving groups survive");
  }

  Evaluator evaluator(cluster, model, target, slo, prec, params, options.eval);
  for (const Replica* r : survivors) evaluator.freeze(r->group.gpu_ids, r->config);
  TabuParams tp = options.tabu;
  if (tp.patience == 0) tp.patience = kLightweightPatience;
  const TabuResult search = tabu_search(start, evaluator, tp, /*flip_only=*/true);
  auto materialized = evaluator.materialize(search.best);
  if (!materialized) {
    throw Error(ErrorCode::kNoSurvivingPhasePair, "surviving groups cannot form a servable plan");
  }
  out.result.plan = std::move(*materialized);
  out.result.solution = search.best;
  out.result.trace = search.trace;
  out.result.search_score = search.best_score;
  out.result.evaluations = search.evaluations;
  out.result.simulated_score =
      simulated_score(out.result.plan.plan, cluster, model, target, slo, params,
                      options.eval.sim_requests, options.sim_seed);
  return out;
}

std::vector<Solution> enumerate_solutions(const ClusterSpec& cluster, const ModelSpec& model) {
  const std::vector<int> ids = cluster.gpu_ids();
  const std::size_t n = ids.size();
  if (n == 0 || n > 10) throw Error(ErrorCode::kInvalidInput, "enumeration needs 1..10 GPUs");
  std::vector<Solution> out;
  // Restricted growth strings enumerate set partitions.
  std::vector<int> block(n, 0);
  for (;;) {
    const int nb = *std::max_element(block.begin(), block.end()) + 1;
    std::vector<std::vector<int>> parts(nb);
    for (std::size_t k = 0; k < n; ++k) parts[block[k]].push_back(ids[k]);
    bool ok = true;
    for (const auto& p : parts) ok = ok && group_memory_feasible(cluster, p, model);
    if (ok) {
      for (std::uint32_t mask = 0; mask < (1u << nb); ++mask) {
        Solution s;
        for (int b = 0; b < nb; ++b) {
          s.groups.push_back({parts[b], (mask >> b) & 1u ? Phase::kDecode : Phase::kPrefill});
        }
        out.push_back(canonical(std::move(s)));
      }
    }
    // Next restricted growth string.
    std::size_t k = n;
    while (k-- > 1) {
      const int prefix_max = *std::max_element(block.begin(), block.begin() + static_cast<long>(k));
      if (block[k] <= prefix_max) {
        ++block[k];
        std::fill(block.begin() + static_cast<long>(k) + 1, block.end(), 0);
        break;
      }
    }
    if (k == 0) break;
  }
  return out;
}

}  // namespace hetplan
