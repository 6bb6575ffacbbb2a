#include "hetplan/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hetplan/error.hpp"
#include "hetplan/lp.hpp"
#include "hetplan/simulator.hpp"
#include "hetplan/thread_pool.hpp"

namespace hetplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exponential tail rate of an M/D/1-style wait: conditional mean S/(2(1-rho)).
double tail_rate(double rho, double service) {
  if (rho <= 0 || service <= 0) return kInf;
  return 2.0 * (1.0 - rho) / service;
}

double exp_cdf(double t, double mu) { return std::isinf(mu) ? 1.0 : -std::expm1(-mu * t); }

double hypoexp_cdf(double t, double a, double b) {
  if (std::isinf(a)) return exp_cdf(t, b);
  if (std::isinf(b)) return exp_cdf(t, a);
  if (std::fabs(a - b) <= 1e-9 * std::max(a, b)) return 1.0 - std::exp(-a * t) * (1.0 + a * t);
  return 1.0 - (b * std::exp(-a * t) - a * std::exp(-b * t)) / (b - a);
}

// P(Wp + Wd <= t), each wait = 0 w.p. 1-rho, else Exp(mu).
double wait_cdf(double t, double rho_p, double mu_p, double rho_d, double mu_d) {
  if (t < 0) return 0.0;
  const double p0 = 1.0 - rho_p;
  const double d0 = 1.0 - rho_d;
  const double v = p0 * d0 + p0 * rho_d * exp_cdf(t, mu_d) + rho_p * d0 * exp_cdf(t, mu_p) +
                   rho_p * rho_d * hypoexp_cdf(t, mu_p, mu_d);
  return std::clamp(v, 0.0, 1.0);
}

std::vector<int> spread(const std::vector<int>& v, std::size_t k) {
  std::vector<int> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(v[i * v.size() / k]);
  return out;
}

}  // namespace

const char* eval_mode_name(EvalMode m) { return m == EvalMode::kAnalytic ? "analytic" : "simulated"; }

EvalMode parse_eval_mode(const std::string& s) {
  if (s == "analytic") return EvalMode::kAnalytic;
  if (s == "simulated") return EvalMode::kSimulated;
  throw Error(ErrorCode::kInvalidInput, "unknown mode '" + s + "'");
}

const char* pair_load_name(PairLoad l) { return l == PairLoad::kFull ? "full" : "share"; }

PairLoad parse_pair_load(const std::string& s) {
  if (s == "full") return PairLoad::kFull;
  if (s == "share") return PairLoad::kShare;
  throw Error(ErrorCode::kInvalidInput, "unknown pair load '" + s + "'");
}

AnalyticModel::AnalyticModel(const ClusterSpec& cluster, const ModelSpec& model,
                             const std::vector<Replica>& prefills,
                             const std::vector<Replica>& decodes, const WorkloadProfile& workload,
                             const SloSpec& slo, KvPrecision prec, const CostParams& params)
    : mean_out_(workload.mean_output_len),
      ctx_(workload.mean_decode_context()),
      deadline_(slo.e2e_deadline(workload.mean_output_len)),
      rate_(workload.arrival_rate) {
  const auto& ins = workload.input_len_samples;
  const auto& outs = workload.output_len_samples;
  std::vector<int> in_s;
  std::vector<int> out_s;
  if (ins.empty() || outs.empty()) {
    in_s = {std::max(1, static_cast<int>(std::lround(workload.mean_input_len)))};
    out_s = {std::max(1, static_cast<int>(std::lround(workload.mean_output_len)))};
  } else if (ins.size() == outs.size()) {
    const std::size_t k = std::min(kMaxSamples, ins.size());
    in_s = spread(ins, k);
    out_s = spread(outs, k);
  } else {
    const std::size_t k = std::min({kMaxSamples, ins.size(), outs.size()});
    in_s = spread(ins, k);
    out_s = spread(outs, k);
  }
  in_.assign(in_s.begin(), in_s.end());
  out_.assign(out_s.begin(), out_s.end());

  const double mean_in = std::max(1.0, workload.mean_input_len);
  const double per_batch =
      std::max(1.0, std::floor(static_cast<double>(params.batch_token_plateau) / mean_in));
  for (const auto& r : prefills) {
    const ReplicaCost cost(cluster, model, r.config, params);
    PrefillModel pm;
    if (cost.weights_fit()) {
      for (double len : in_) pm.service.push_back(cost.prefill_latency(len));
      pm.batch_service = cost.prefill_latency(per_batch * mean_in);
      pm.per_request = pm.batch_service / per_batch;
      caps_.prefill.push_back(1.0 / pm.per_request);
    } else {
      pm.service.assign(in_.size(), kInf);
      pm.batch_service = pm.per_request = kInf;
      caps_.prefill.push_back(0.0);
    }
    prefill_.push_back(std::move(pm));
  }
  for (const auto& r : decodes) {
    DecodeModel dm{ReplicaCost(cluster, model, r.config, params), 0};
    dm.max_batch = dm.cost.weights_fit() ? dm.cost.max_decode_batch(ctx_) : 0;
    if (dm.max_batch > 0) {
      caps_.decode.push_back(dm.max_batch /
                             (mean_out_ * dm.cost.decode_step_latency(dm.max_batch, ctx_)));
    } else {
      caps_.decode.push_back(0.0);
    }
    decode_.push_back(std::move(dm));
  }

  kv_.resize(prefills.size());
  for (std::size_t i = 0; i < prefills.size(); ++i) {
    kv_[i].resize(decodes.size());
    for (std::size_t j = 0; j < decodes.size(); ++j) {
      const Link link = replica_link(cluster, prefills[i].config, decodes[j].config);
      for (double len : in_) {
        kv_[i][j].push_back(kv_comm_cost(link, 1, static_cast<int>(len), model, prec, params));
      }
    }
  }
}

AnalyticModel::DecodeLoad AnalyticModel::decode_load(std::size_t j, double rate) const {
  const DecodeModel& dm = decode_[j];
  DecodeLoad out;
  if (dm.max_batch < 1) {
    out.saturated = true;
    return out;
  }
  const double bmax = dm.max_batch;
  auto step = [&](double n) { return dm.cost.decode_step_latency(std::max(1.0, n), ctx_); };
  if (rate <= 0) {
    out.step = step(1.0);
    return out;
  }
  // Occupancy N solves N = rate * mean_out * step(N) (Little's law).
  auto excess = [&](double n) { return rate * mean_out_ * step(n) - n; };
  if (excess(bmax) > 0) {
    out.saturated = true;
    return out;
  }
  double lo = 0.0;
  double hi = bmax;
  for (int it = 0; it < 100 && hi - lo > 1e-12 * bmax; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0 ? lo : hi) = mid;
  }
  out.step = step(hi);
  out.rho = hi / bmax;
  out.slot_service = mean_out_ * out.step / bmax;
  return out;
}

double AnalyticModel::pair_attainment(std::size_t i, std::size_t j, double prefill_rate,
                                      double decode_rate) const {
  const PrefillModel& pm = prefill_[i];
  if (std::isinf(pm.per_request)) return 0.0;
  const double rho_p = prefill_rate * pm.per_request;
  if (rho_p >= 1.0) return 0.0;
  const DecodeLoad dl = decode_load(j, decode_rate);
  if (dl.saturated) return 0.0;
  const double mu_p = tail_rate(rho_p, pm.batch_service);
  const double mu_d = tail_rate(dl.rho, dl.slot_service);
  double sum = 0.0;
  for (std::size_t k = 0; k < in_.size(); ++k) {
    const double slack = deadline_ - (pm.service[k] + kv_[i][j][k] + out_[k] * dl.step);
    sum += wait_cdf(slack, rho_p, mu_p, dl.rho, mu_d);
  }
  return sum / static_cast<double>(in_.size());
}

SloMatrix AnalyticModel::slo_matrix(PairLoad load) const {
  double psum = 0.0;
  double dsum = 0.0;
  for (double c : caps_.prefill) psum += c;
  for (double c : caps_.decode) dsum += c;
  SloMatrix d;
  d.d.assign(m(), std::vector<double>(n(), 0.0));
  for (std::size_t i = 0; i < m(); ++i) {
    const double lp = (load == PairLoad::kShare && psum > 0) ? rate_ * caps_.prefill[i] / psum : rate_;
    for (std::size_t j = 0; j < n(); ++j) {
      const double ld =
          (load == PairLoad::kShare && dsum > 0) ? rate_ * caps_.decode[j] / dsum : rate_;
      d.d[i][j] = pair_attainment(i, j, lp, ld);
    }
  }
  return d;
}

double AnalyticModel::plan_attainment(const RoutingPlan& routing) const {
  std::vector<double> col(n(), 0.0);
  for (std::size_t i = 0; i < m(); ++i) {
    for (std::size_t j = 0; j < n(); ++j) col[j] += routing.z[i][j];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < m(); ++i) {
    for (std::size_t j = 0; j < n(); ++j) {
      if (routing.z[i][j] <= 0) continue;
      total += routing.z[i][j] * pair_attainment(i, j, rate_ * routing.x[i], rate_ * col[j]);
    }
  }
  return std::clamp(total, 0.0, 1.0);
}

CapacityVector replica_capacities(const ClusterSpec& cluster, const ModelSpec& model,
                                  const std::vector<Replica>& prefills,
                                  const std::vector<Replica>& decodes,
                                  const WorkloadProfile& workload, const CostParams& params) {
  return AnalyticModel(cluster, model, prefills, decodes, workload, SloSpec{}, KvPrecision{},
                       params)
      .capacities();
}

SloMatrix build_slo_matrix(const ClusterSpec& cluster, const ModelSpec& model,
                           const std::vector<Replica>& prefills, const std::vector<Replica>& decodes,
                           const WorkloadProfile& workload, const SloSpec& slo, KvPrecision prec,
                           const CostParams& params, const OrchestratorOptions& options) {
  if (prefills.empty() || decodes.empty()) {
    throw Error(ErrorCode::kInvalidInput, "need at least one prefill and one decode replica");
  }
  const AnalyticModel analytic(cluster, model, prefills, decodes, workload, slo, prec, params);
  if (options.mode == EvalMode::kAnalytic) return analytic.slo_matrix(options.load);

  const auto& caps = analytic.capacities();
  double psum = 0.0;
  double dsum = 0.0;
  for (double c : caps.prefill) psum += c;
  for (double c : caps.decode) dsum += c;
  const std::size_t m = prefills.size();
  const std::size_t n = decodes.size();
  SloMatrix d;
  d.d.assign(m, std::vector<double>(n, 0.0));
  parallel_for(m * n, [&](std::size_t k) {
    const std::size_t i = k / n;
    const std::size_t j = k % n;
    double rate = workload.arrival_rate;
    if (options.load == PairLoad::kShare && psum > 0 && dsum > 0) {
      rate *= std::min(caps.prefill[i] / psum, caps.decode[j] / dsum);
    }
    if (!(rate > 0) || caps.prefill[i] <= 0 || caps.decode[j] <= 0) return;
    const DeploymentPlan pair =
        compose_plan({prefills[i]}, {decodes[j]}, routing_from_joint({{1.0}}), prec);
    const RequestTrace trace =
        trace_from_profile(workload, rate, options.sim_requests, options.seed);
    d.d[i][j] =
        simulate(pair, cluster, model, trace, slo, params, options.seed).attainment_e2e;
  });
  return d;
}

RoutingResult solve_routing(const SloMatrix& d, const CapacityVector& caps, double rate,
                            double headroom) {
  const std::size_t m = d.m();
  const std::size_t n = d.n();
  if (m == 0 || n == 0 || caps.prefill.size() != m || caps.decode.size() != n) {
    throw Error(ErrorCode::kInvalidInput, "routing dimensions mismatch");
  }
  if (!(rate >= 0) || !(headroom > 0)) {
    throw Error(ErrorCode::kInvalidInput, "rate must be >= 0 and headroom > 0");
  }
  double psum = 0.0;
  double dsum = 0.0;
  for (double c : caps.prefill) {
    if (!(c > 0)) throw Error(ErrorCode::kInfeasible, "non-positive prefill capacity");
    psum += c;
  }
  for (double c : caps.decode) {
    if (!(c > 0)) throw Error(ErrorCode::kInfeasible, "non-positive decode capacity");
    dsum += c;
  }

  RoutingResult result;
  result.saturated = rate > psum || rate > dsum;
  // Scale limits up just enough to admit the whole rate when saturated.
  const double scale = std::max({headroom, rate / psum, rate / dsum});
  const std::size_t nv = m * n;
  auto var = [n](std::size_t i, std::size_t j) { return i * n + j; };

  auto base_constraints = [&](std::size_t width) {
    std::vector<lp::Constraint> cons;
    lp::Constraint sum{std::vector<double>(width, 0.0), lp::Sense::kEqual, 1.0};
    for (std::size_t k = 0; k < nv; ++k) sum.coef[k] = 1.0;
    cons.push_back(sum);
    if (rate > 0) {
      for (std::size_t i = 0; i < m; ++i) {
        lp::Constraint c{std::vector<double>(width, 0.0), lp::Sense::kLessEqual,
                         scale * caps.prefill[i] / rate};
        for (std::size_t j = 0; j < n; ++j) c.coef[var(i, j)] = 1.0;
        cons.push_back(c);
      }
      for (std::size_t j = 0; j < n; ++j) {
        lp::Constraint c{std::vector<double>(width, 0.0), lp::Sense::kLessEqual,
                         scale * caps.decode[j] / rate};
        for (std::size_t i = 0; i < m; ++i) c.coef[var(i, j)] = 1.0;
        cons.push_back(c);
      }
    }
    return cons;
  };

  lp::Problem primary;
  primary.objective.assign(nv, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) primary.objective[var(i, j)] = d.d[i][j];
  }
  primary.constraints = base_constraints(nv);
  const lp::Solution first = lp::solve(primary);
  if (first.status != lp::Status::kOptimal) {
    throw Error(ErrorCode::kInfeasible, "routing LP has no optimum");
  }

  // Among optima, minimise peak prefill plus peak decode utilisation.
  std::vector<double> z = first.x;
  if (rate > 0) {
    const std::size_t width = nv + 2;
    lp::Problem balance;
    balance.objective.assign(width, 0.0);
    balance.objective[nv] = -1.0;
    balance.objective[nv + 1] = -1.0;
    balance.constraints = base_constraints(width);
    lp::Constraint keep{std::vector<double>(width, 0.0), lp::Sense::kGreaterEqual,
                        first.objective - 1e-12 * std::max(1.0, std::fabs(first.objective))};
    for (std::size_t k = 0; k < nv; ++k) keep.coef[k] = primary.objective[k];
    balance.constraints.push_back(keep);
    for (std::size_t i = 0; i < m; ++i) {
      lp::Constraint c{std::vector<double>(width, 0.0), lp::Sense::kLessEqual, 0.0};
      for (std::size_t j = 0; j < n; ++j) c.coef[var(i, j)] = rate / caps.prefill[i];
      c.coef[nv] = -1.0;
      balance.constraints.push_back(c);
    }
    for (std::size_t j = 0; j < n; ++j) {
      lp::Constraint c{std::vector<double>(width, 0.0), lp::Sense::kLessEqual, 0.0};
      for (std::size_t i = 0; i < m; ++i) c.coef[var(i, j)] = rate / caps.decode[j];
      c.coef[nv + 1] = -1.0;
      balance.constraints.push_back(c);
    }
    const lp::Solution second = lp::solve(balance);
    if (second.status == lp::Status::kOptimal) {
      double v = 0.0;
      for (std::size_t k = 0; k < nv; ++k) v += primary.objective[k] * second.x[k];
      if (v >= first.objective - 1e-10 * std::max(1.0, std::fabs(first.objective))) {
        z.assign(second.x.begin(), second.x.begin() + static_cast<long>(nv));
      }
    }
  }

  // Drop solver dust so unused rows fall back to uniform y.
  double total = 0.0;
  for (double& v : z) {
    if (v < 1e-9) v = 0.0;
    total += v;
  }
  Matrix zm(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) zm[i][j] = z[var(i, j)] / total;
  }
  result.plan = routing_from_joint(zm);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) result.objective += zm[i][j] * d.d[i][j];
  }
  return result;
}

DeploymentPlan compose_plan(const std::vector<Replica>& prefills,
                            const std::vector<Replica>& decodes, const RoutingPlan& routing,
                            KvPrecision prec) {
  DeploymentPlan plan;
  plan.replicas = prefills;
  plan.replicas.insert(plan.replicas.end(), decodes.begin(), decodes.end());
  plan.routing = routing;
  plan.kv = prec;
  return plan;
}

OrchestratedPlan orchestrate(const ClusterSpec& cluster, const ModelSpec& model,
                             const std::vector<Replica>& prefills,
                             const std::vector<Replica>& decodes, const WorkloadProfile& workload,
                             const SloSpec& slo, KvPrecision prec, const CostParams& params,
                             const OrchestratorOptions& options) {
  OrchestratedPlan out;
  const AnalyticModel analytic(cluster, model, prefills, decodes, workload, slo, prec, params);
  out.caps = analytic.capacities();
  out.d = options.mode == EvalMode::kAnalytic
              ? analytic.slo_matrix(options.load)
              : build_slo_matrix(cluster, model, prefills, decodes, workload, slo, prec, params,
                                 options);
  // The LP sees D as load-independent and fills the best pairs up to their
  // limit, so re-solve with progressively tighter limits and keep the
  // routing the queueing model scores highest.
  const double rate = workload.arrival_rate;
  double psum = 0.0;
  double dsum = 0.0;
  for (double c : out.caps.prefill) psum += c;
  for (double c : out.caps.decode) dsum += c;
  const double tightest = (psum > 0 && dsum > 0) ? std::max(rate / psum, rate / dsum) : kInf;
  std::vector<double> levels = {options.headroom};
  const int steps = std::max(0, options.headroom_steps);
  if (tightest < options.headroom) {
    for (int k = 1; k <= steps; ++k) {
      const double t = static_cast<double>(k) / steps;
      levels.push_back(options.headroom + t * (tightest - options.headroom));
    }
  }
  double best = -1.0;
  for (double h : levels) {
    const RoutingResult routing = solve_routing(out.d, out.caps, rate, h);
    const double score = levels.size() == 1 ? 0.0 : analytic.plan_attainment(routing.plan);
    if (score > best + 1e-12) {
      best = score;
      out.plan = compose_plan(prefills, decodes, routing.plan, prec);
      out.routing_objective = routing.objective;
      out.saturated = routing.saturated;
    }
  }
  return out;
}

}  // namespace hetplan
