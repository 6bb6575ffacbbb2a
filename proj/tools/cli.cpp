#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hetplan/error.hpp"
#include "hetplan/fixtures.hpp"
#include "hetplan/json_io.hpp"
#include "hetplan/scheduler.hpp"
#include "hetplan/simulator.hpp"

namespace hetplan::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInfeasible:
    case ErrorCode::kInsufficientMemory:
    case ErrorCode::kNoSurvivingPhasePair:
    case ErrorCode::kNoFeasibleConfig:
    case ErrorCode::kInfeasibleConfig:
    case ErrorCode::kInfeasiblePartition:
    case ErrorCode::kNoPath:
      return kExitInfeasible;
    default:
      return kExitInput;
  }
}

// Overrides given on the command line win over config.json.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> kv_bits;
  std::optional<int> steps;
  std::optional<int> neighbors;
  std::optional<int> tabu_mem;

  void apply(PlannerConfig& c) const {
    if (seed) {
      c.planner.tabu.rng_seed = *seed;
      c.planner.eval.orchestrator.seed = *seed;
      c.planner.sim_seed = *seed;
    }
    if (mode) c.planner.eval.orchestrator.mode = parse_eval_mode(*mode);
    if (kv_bits) c.kv = make_kv_precision(*kv_bits);
    if (steps) c.planner.tabu.n_step = *steps;
    if (neighbors) c.planner.tabu.n_nghb = *neighbors;
    if (tabu_mem) c.planner.tabu.n_mem = *tabu_mem;
  }

  void add_to(CLI::App* app) {
    app->add_option("--seed", seed, "RNG seed for search, evaluation and re-simulation");
    app->add_option("--mode", mode, "Evaluation mode inside the search")
        ->check(CLI::IsMember({"analytic", "simulated"}));
    app->add_option("--kv-bits", kv_bits, "KV transfer precision")
        ->check(CLI::IsMember({16, 8, 4, 2}));
    app->add_option("--steps", steps, "Tabu steps");
    app->add_option("--neighbors", neighbors, "Neighbours per step");
    app->add_option("--tabu-mem", tabu_mem, "Tabu list length");
  }
};

std::vector<double> parse_sweep(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidInput, "bad sweep '" + spec + "', expected a:b:step");
    }
  }
  if (parts.size() != 3 || !(parts[0] > 0) || !(parts[2] > 0) || parts[1] < parts[0]) {
    throw Error(ErrorCode::kInvalidInput, "bad sweep '" + spec + "', expected a:b:step");
  }
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(parts[0] + static_cast<double>(k) * parts[2]);
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::kInvalidInput, "cannot create '" + dir + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kInvalidInput, "cannot write '" + path.string() + "'");
  f << text;
}

ClusterSpec load_cluster(const std::string& path, std::ostream& err, bool& ok) {
  ClusterSpec c = cluster_from_json(read_json_file(path));
  const auto violations = validate_cluster(c);
  ok = violations.empty();
  if (!ok) {
    Json v = Json::array();
    for (const auto& x : violations) v.push_back(to_json(x));
    err << Json{{"violations", v}}.dump(2) << '\n';
  }
  return c;
}

PlannerConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return planner_config_from_json(read_json_file(path));
}

Json provenance_for(const PlannerResult& r, const PlannerConfig& cfg, bool saturated,
                    const std::string& score_source) {
  return {{"seed", cfg.planner.tabu.rng_seed},
          {"mode", eval_mode_name(cfg.planner.eval.orchestrator.mode)},
          {"search_score", r.search_score},
          {"score", r.simulated_score},
          {"score_source", score_source},
          {"sim_seed", cfg.planner.sim_seed},
          {"sim_requests", cfg.planner.eval.sim_requests},
          {"evaluations", r.evaluations},
          {"steps", r.trace.empty() ? 0 : r.trace.size() - 1},
          {"routing_saturated", saturated}};
}

struct PlanArgs {
  std::string cluster, model, profile, trace, slo, config, out;
  Overrides ov;
};

int cmd_plan(const PlanArgs& a, std::ostream& out, std::ostream& err) {
  bool ok = true;
  ClusterSpec cluster = load_cluster(a.cluster, err, ok);
  if (!ok) return kExitInput;
  const ModelSpec model = model_from_json(read_json_file(a.model));
  validate_model(model);
  RequestTrace trace;
  WorkloadProfile workload;
  if (!a.trace.empty()) {
    trace = read_trace_file(a.trace);
    if (trace.empty()) throw Error(ErrorCode::kInvalidInput, "empty trace");
    validate_trace(trace);
    workload = profile_from_trace(trace);
  } else {
    workload = profile_from_json(read_json_file(a.profile));
  }
  validate_profile(workload);
  const SloSpec slo = slo_from_json(read_json_file(a.slo));
  validate_slo(slo);
  PlannerConfig cfg = load_config(a.config);
  a.ov.apply(cfg);
  validate_cost_params(cfg.cost);

  PlannerResult r = plan_deployment(cluster, model, workload, slo, cfg.kv, cfg.cost, cfg.planner);
  std::string source = "synthetic";
  if (!trace.empty()) {
    r.simulated_score =
        simulate(r.plan.plan, cluster, model, trace, slo, cfg.cost, cfg.planner.sim_seed)
            .attainment_e2e;
    source = "input_trace";
  }

  PlanDocument doc{cluster, model, workload, slo, cfg, r.plan.plan,
                   provenance_for(r, cfg, r.plan.saturated, source)};
  ensure_dir(a.out);
  write_json_file((fs::path(a.out) / "plan.json").string(), to_json(doc));
  std::ostringstream conv;
  write_convergence_csv(conv, r.trace);
  write_text(fs::path(a.out) / "convergence.csv", conv.str());

  int np = 0;
  for (const auto& rep : r.plan.plan.replicas) np += rep.group.phase == Phase::kPrefill;
  out << "plan: " << np << " prefill, " << (r.plan.plan.replicas.size() - np)
      << " decode replicas; search score " << format_double(r.search_score)
      << ", simulated score " << format_double(r.simulated_score) << '\n';
  return kExitOk;
}

struct SimArgs {
  std::string plan, trace, slo, out, sweep = "1:10:1";
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimArgs& a, std::ostream& out, std::ostream&) {
  PlanDocument doc = plan_document_from_json(read_json_file(a.plan));
  const RequestTrace trace = read_trace_file(a.trace);
  if (trace.empty()) throw Error(ErrorCode::kInvalidInput, "empty trace");
  SloSpec slo = a.slo.empty() ? doc.slo : slo_from_json(read_json_file(a.slo));
  validate_slo(slo);
  const auto scales = parse_sweep(a.sweep);
  const std::uint64_t seed = a.seed.value_or(doc.config.planner.sim_seed);
  const SimResult res = simulate(doc.plan, doc.cluster, doc.model, trace, slo, doc.config.cost, seed);

  const Json metrics = {{"requests", res.records.size()},
                        {"completed", res.completed},
                        {"in_flight", res.in_flight},
                        {"slo_scale", slo.slo_scale},
                        {"attainment_ttft", res.attainment_ttft},
                        {"attainment_tpot", res.attainment_tpot},
                        {"attainment_e2e", res.attainment_e2e},
                        {"throughput_rps", res.throughput_rps},
                        {"throughput_tps", res.throughput_tps},
                        {"kv_share_of_e2e", kv_share_of_e2e(res)},
                        {"seed", seed}};
  ensure_dir(a.out);
  write_json_file((fs::path(a.out) / "metrics.json").string(), metrics);
  std::ostringstream req;
  write_requests_csv(req, res);
  write_text(fs::path(a.out) / "requests.csv", req.str());
  std::ostringstream curve;
  write_curve_csv(curve, attainment_curve(res, slo, scales));
  write_text(fs::path(a.out) / "attainment_curve.csv", curve.str());
  out << "simulate: e2e attainment " << format_double(res.attainment_e2e) << " over "
      << res.records.size() << " requests\n";
  return kExitOk;
}

struct RescheduleArgs {
  std::string plan, event, out;
  Overrides ov;
};

RescheduleEvent event_from_json(const Json& j) {
  RescheduleEvent ev;
  const std::string type = j.value("type", "");
  if (type == "workload_shift") {
    ev.kind = RescheduleEvent::Kind::kWorkloadShift;
    if (!j.contains("profile")) throw Error(ErrorCode::kParseError, "workload_shift needs 'profile'");
    ev.profile = profile_from_json(j.at("profile"));
    validate_profile(ev.profile);
  } else if (type == "gpus_offline") {
    ev.kind = RescheduleEvent::Kind::kGpusOffline;
    if (!j.contains("gpu_ids")) throw Error(ErrorCode::kParseError, "gpus_offline needs 'gpu_ids'");
    ev.gpu_ids = j.at("gpu_ids").get<std::vector<int>>();
  } else {
    throw Error(ErrorCode::kParseError, "event type must be workload_shift or gpus_offline");
  }
  return ev;
}

int cmd_reschedule(const RescheduleArgs& a, std::ostream& out, std::ostream&) {
  PlanDocument doc = plan_document_from_json(read_json_file(a.plan));
  validate_plan(doc.plan, doc.cluster, doc.model);
  const RescheduleEvent ev = event_from_json(read_json_file(a.event));
  a.ov.apply(doc.config);
  const RescheduleResult rr =
      lightweight_reschedule(doc.plan, doc.cluster, doc.model, doc.workload, ev, doc.slo,
                             doc.config.kv, doc.config.cost, doc.config.planner);

  Json removed = Json::array();
  std::vector<bool> gone(doc.plan.replicas.size(), false);
  for (auto r : rr.removed_groups) {
    gone[r] = true;
    removed.push_back({{"phase", phase_name(doc.plan.replicas[r].group.phase)},
                       {"gpu_ids", doc.plan.replicas[r].group.gpu_ids}});
  }
  Json flipped = Json::array();
  int membership_changes = 0;
  const auto& next = rr.result.plan.plan;
  for (std::size_t r = 0; r < doc.plan.replicas.size(); ++r) {
    if (gone[r]) continue;
    const auto& old = doc.plan.replicas[r];
    const auto it = std::find_if(next.replicas.begin(), next.replicas.end(), [&](const Replica& n) {
      return n.group.gpu_ids == old.group.gpu_ids;
    });
    if (it == next.replicas.end() || !(it->config == old.config)) {
      ++membership_changes;
      continue;
    }
    if (it->group.phase != old.group.phase) {
      flipped.push_back({{"gpu_ids", old.group.gpu_ids},
                         {"from", phase_name(old.group.phase)},
                         {"to", phase_name(it->group.phase)}});
    }
  }
  const bool routing_changed = !(next.routing == doc.plan.routing);
  Json diff = {{"event", ev.kind == RescheduleEvent::Kind::kGpusOffline ? "gpus_offline" : "workload_shift"},
               {"noop", rr.noop},
               {"removed_groups", removed},
               {"flipped", flipped},
               {"membership_changes", membership_changes},
               {"routing_changed", routing_changed},
               {"routing", {{"x_before", doc.plan.routing.x}, {"x_after", next.routing.x}}},
               {"evaluations", {{"lightweight", rr.result.evaluations},
                                {"original_search", doc.provenance.value("evaluations", 0)}}}};

  PlanDocument updated = doc;
  if (ev.kind == RescheduleEvent::Kind::kWorkloadShift) updated.workload = ev.profile;
  updated.plan = next;
  if (!rr.noop) {
    Json prov = updated.provenance;
    prov["rescheduled"] = true;
    prov["search_score"] = rr.result.search_score;
    prov["score"] = rr.result.simulated_score;
    prov["score_source"] = "synthetic";
    prov["evaluations"] = rr.result.evaluations;
    prov["routing_saturated"] = rr.result.plan.saturated;
    updated.provenance = prov;
  }
  ensure_dir(a.out);
  write_json_file((fs::path(a.out) / "plan.json").string(), to_json(updated));
  write_json_file((fs::path(a.out) / "diff.json").string(), diff);
  out << "reschedule: " << removed.size() << " groups removed, " << flipped.size()
      << " flipped, " << rr.result.evaluations << " evaluations\n";
  return kExitOk;
}

struct SweepArgs {
  std::string cluster, model, profile, slo, config, out, rates, sweep = "1:10:1";
  std::size_t requests = 400;
  Overrides ov;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  bool ok = true;
  ClusterSpec cluster = load_cluster(a.cluster, err, ok);
  if (!ok) return kExitInput;
  const ModelSpec model = model_from_json(read_json_file(a.model));
  validate_model(model);
  const WorkloadProfile base = profile_from_json(read_json_file(a.profile));
  validate_profile(base);
  const SloSpec slo = slo_from_json(read_json_file(a.slo));
  validate_slo(slo);
  PlannerConfig cfg = load_config(a.config);
  a.ov.apply(cfg);
  const auto scales = parse_sweep(a.sweep);
  std::vector<double> rates;
  {
    std::stringstream ss(a.rates);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        rates.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidInput, "bad rate '" + tok + "'");
      }
    }
  }
  if (rates.empty()) throw Error(ErrorCode::kInvalidInput, "no rates given");

  std::ostringstream csv;
  csv << "rate,slo_scale,n_prefill,n_decode,ttft,tpot,e2e,throughput_rps\n";
  for (double rate : rates) {
    WorkloadProfile w = base;
    w.arrival_rate = rate;
    validate_profile(w);
    const PlannerResult r = plan_deployment(cluster, model, w, slo, cfg.kv, cfg.cost, cfg.planner);
    const RequestTrace trace = trace_from_profile(w, rate, a.requests, cfg.planner.sim_seed);
    const SimResult res = simulate(r.plan.plan, cluster, model, trace, slo, cfg.cost, cfg.planner.sim_seed);
    int np = 0;
    for (const auto& rep : r.plan.plan.replicas) np += rep.group.phase == Phase::kPrefill;
    const int nd = static_cast<int>(r.plan.plan.replicas.size()) - np;
    for (const auto& p : attainment_curve(res, slo, scales)) {
      csv << format_double(rate) << ',' << format_double(p.scale) << ',' << np << ',' << nd << ','
          << format_double(p.attainment.ttft) << ',' << format_double(p.attainment.tpot) << ','
          << format_double(p.attainment.e2e) << ',' << format_double(res.throughput_rps) << '\n';
    }
  }
  ensure_dir(a.out);
  write_text(fs::path(a.out) / "sweep.csv", csv.str());
  out << "sweep: " << rates.size() << " rates x " << scales.size() << " scales\n";
  return kExitOk;
}

struct GenTraceArgs {
  std::string profile, out;
  double rate = 1.0;
  std::size_t n = 100;
  int input = 512;
  int output = 16;
  double input_sigma = 0.0;
  double output_sigma = 0.0;
  std::uint64_t seed = 0;
};

int cmd_gen_trace(const GenTraceArgs& a, std::ostream& out, std::ostream&) {
  RequestTrace trace;
  if (!a.profile.empty()) {
    const WorkloadProfile p = profile_from_json(read_json_file(a.profile));
    validate_profile(p);
    trace = trace_from_profile(p, a.rate, a.n, a.seed);
  } else {
    TraceSpec spec;
    spec.rate = a.rate;
    spec.n_requests = a.n;
    if (a.input < 1 || a.output < 1) throw Error(ErrorCode::kInvalidInput, "lengths must be >= 1");
    spec.input = a.input_sigma > 0 ? LengthDist::lognormal(a.input, a.input_sigma, 1, 1 << 16)
                                   : LengthDist::constant(a.input);
    spec.output = a.output_sigma > 0 ? LengthDist::lognormal(a.output, a.output_sigma, 1, 1 << 16)
                                     : LengthDist::constant(a.output);
    trace = generate_trace(spec, a.seed);
  }
  std::ostringstream text;
  write_trace(text, trace);
  if (a.out.empty() || a.out == "-") {
    out << text.str();
  } else {
    write_text(a.out, text.str());
  }
  return kExitOk;
}

int cmd_fixtures(const std::string& dir, std::ostream& out) {
  ensure_dir(dir);
  for (const auto& s : fixtures::scenarios()) {
    const fs::path d = fs::path(dir) / s.name;
    ensure_dir(d.string());
    write_json_file((d / "cluster.json").string(), to_json(s.cluster));
    write_json_file((d / "model.json").string(), to_json(s.model));
    write_json_file((d / "profile.json").string(), to_json(s.workload));
    write_json_file((d / "slo.json").string(), to_json(s.slo));
  }
  write_json_file((fs::path(dir) / "config.json").string(), to_json(PlannerConfig{}));
  out << "fixtures: wrote " << fixtures::scenarios().size() << " scenarios to " << dir << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deployment planner and SLO simulator for phase-split LLM serving"};
  app.name("hetplan");
  app.require_subcommand(1);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Search a deployment plan");
  p->add_option("--cluster", plan.cluster, "cluster.json")->required()->check(CLI::ExistingFile);
  p->add_option("--model", plan.model, "model.json")->required()->check(CLI::ExistingFile);
  auto* prof = p->add_option("--profile", plan.profile, "profile.json")->check(CLI::ExistingFile);
  auto* tr = p->add_option("--trace", plan.trace, "trace.jsonl")->check(CLI::ExistingFile);
  prof->excludes(tr);
  p->add_option("--slo", plan.slo, "slo.json")->required()->check(CLI::ExistingFile);
  p->add_option("--config", plan.config, "config.json")->check(CLI::ExistingFile);
  p->add_option("--out", plan.out, "Output directory")->required();
  plan.ov.add_to(p);

  SimArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate a plan on a trace");
  s->add_option("--plan", sim.plan, "plan.json")->required()->check(CLI::ExistingFile);
  s->add_option("--trace", sim.trace, "trace.jsonl")->required()->check(CLI::ExistingFile);
  s->add_option("--slo", sim.slo, "slo.json (defaults to the plan's)")->check(CLI::ExistingFile);
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--seed", sim.seed, "Routing seed (defaults to the plan's)");
  s->add_option("--slo-scale-sweep", sim.sweep, "a:b:step")->capture_default_str();

  RescheduleArgs resched;
  auto* r = app.add_subcommand("reschedule", "Flip-only re-plan after an event");
  r->add_option("--plan", resched.plan, "plan.json")->required()->check(CLI::ExistingFile);
  r->add_option("--event", resched.event, "event.json")->required()->check(CLI::ExistingFile);
  r->add_option("--out", resched.out, "Output directory")->required();
  resched.ov.add_to(r);

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Plan and simulate across rates and SLO scales");
  w->add_option("--cluster", sweep.cluster, "cluster.json")->required()->check(CLI::ExistingFile);
  w->add_option("--model", sweep.model, "model.json")->required()->check(CLI::ExistingFile);
  w->add_option("--profile", sweep.profile, "profile.json")->required()->check(CLI::ExistingFile);
  w->add_option("--slo", sweep.slo, "slo.json")->required()->check(CLI::ExistingFile);
  w->add_option("--config", sweep.config, "config.json")->check(CLI::ExistingFile);
  w->add_option("--rates", sweep.rates, "Comma-separated request rates")->required();
  w->add_option("--slo-scale-sweep", sweep.sweep, "a:b:step")->capture_default_str();
  w->add_option("--requests", sweep.requests, "Requests per simulated trace")->capture_default_str();
  w->add_option("--out", sweep.out, "Output directory")->required();
  sweep.ov.add_to(w);

  GenTraceArgs gen;
  auto* g = app.add_subcommand("gen-trace", "Write a synthetic Poisson trace (JSON lines)");
  g->add_option("--profile", gen.profile, "Resample lengths from profile.json")->check(CLI::ExistingFile);
  g->add_option("--rate", gen.rate, "Requests per second")->capture_default_str();
  g->add_option("--n", gen.n, "Number of requests")->capture_default_str();
  g->add_option("--input", gen.input, "Input length (median when sigma > 0)")->capture_default_str();
  g->add_option("--output", gen.output, "Output length (median when sigma > 0)")->capture_default_str();
  g->add_option("--input-sigma", gen.input_sigma, "Lognormal sigma of input length");
  g->add_option("--output-sigma", gen.output_sigma, "Lognormal sigma of output length");
  g->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output file ('-' for stdout)");

  std::string fixture_dir;
  auto* f = app.add_subcommand("fixtures", "Write the bundled scenario inputs");
  f->add_option("--out", fixture_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*p) {
      if (plan.profile.empty() && plan.trace.empty()) {
        throw Error(ErrorCode::kInvalidInput, "plan needs --profile or --trace");
      }
      return cmd_plan(plan, out, err);
    }
    if (*s) return cmd_simulate(sim, out, err);
    if (*r) return cmd_reschedule(resched, out, err);
    if (*w) return cmd_sweep(sweep, out, err);
    if (*g) return cmd_gen_trace(gen, out, err);
    if (*f) return cmd_fixtures(fixture_dir, out);
  } catch (const Error& e) {
    err << Json{{"error", std::string(error_code_name(e.code()))}, {"message", e.what()}}.dump()
        << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << Json{{"error", "ParseError"}, {"message", e.what()}}.dump() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace hetplan::cli
