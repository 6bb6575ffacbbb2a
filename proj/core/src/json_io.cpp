#include "hetplan/json_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hetplan/error.hpp"

namespace hetplan {

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::kParseError, what); }

const Json& field(const Json& j, const char* name) {
  if (!j.is_object()) parse_fail(std::string("expected object holding '") + name + "'");
  auto it = j.find(name);
  if (it == j.end()) parse_fail(std::string("missing field '") + name + "'");
  return *it;
}

template <typename T>
T get(const Json& j, const char* name) {
  try {
    return field(j, name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    parse_fail(std::string("field '") + name + "': " + e.what());
  }
}

template <typename T>
T get_or(const Json& j, const char* name, T fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return get<T>(j, name);
}

Matrix matrix_from(const Json& j, const char* name) {
  const Json& m = field(j, name);
  if (!m.is_array()) parse_fail(std::string("'") + name + "' must be an array of arrays");
  Matrix out;
  for (const auto& row : m) {
    if (!row.is_array()) parse_fail(std::string("'") + name + "' row is not an array");
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number()) parse_fail(std::string("'") + name + "' holds a non-number");
      r.push_back(v.get<double>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

Json matrix_to(const Matrix& m) {
  Json out = Json::array();
  for (const auto& row : m) out.push_back(row);
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json to_json(const GpuType& t) {
  return {{"name", t.name},
          {"mem_bandwidth", t.mem_bandwidth},
          {"peak_flops", t.peak_flops},
          {"mem_capacity", t.mem_capacity},
          {"price", t.price}};
}

Json to_json(const ClusterSpec& c) {
  Json types = Json::array();
  for (const auto& t : c.gpu_types()) types.push_back(to_json(t));
  Json gpus = Json::array();
  for (const auto& g : c.gpus()) gpus.push_back({{"id", g.id}, {"type", g.type}, {"node", g.node}});
  return {{"gpu_types", types}, {"gpus", gpus}, {"alpha", matrix_to(c.alpha())},
          {"beta", matrix_to(c.beta())}};
}

ClusterSpec cluster_from_json(const Json& j) {
  std::vector<GpuType> types;
  const Json& jt = field(j, "gpu_types");
  if (!jt.is_array()) parse_fail("'gpu_types' must be an array");
  for (const auto& t : jt) {
    types.push_back({get<std::string>(t, "name"), get<double>(t, "mem_bandwidth"),
                     get<double>(t, "peak_flops"), get<double>(t, "mem_capacity"),
                     get<double>(t, "price")});
  }
  std::vector<Gpu> gpus;
  const Json& jg = field(j, "gpus");
  if (!jg.is_array()) parse_fail("'gpus' must be an array");
  for (const auto& g : jg) {
    gpus.push_back({get<int>(g, "id"), get<std::string>(g, "type"), get<int>(g, "node")});
  }
  return ClusterSpec(std::move(types), std::move(gpus), matrix_from(j, "alpha"),
                     matrix_from(j, "beta"));
}

Json to_json(const ModelSpec& m) {
  return {{"name", m.name},
          {"n_layers", m.n_layers},
          {"hidden_size", m.hidden_size},
          {"n_params", m.n_params},
          {"bytes_per_param", m.bytes_per_param}};
}

ModelSpec model_from_json(const Json& j) {
  ModelSpec m;
  m.name = get_or<std::string>(j, "name", "");
  m.n_layers = get<int>(j, "n_layers");
  m.hidden_size = get<int>(j, "hidden_size");
  m.n_params = get<double>(j, "n_params");
  m.bytes_per_param = get_or<double>(j, "bytes_per_param", 2.0);
  return m;
}

Json to_json(const WorkloadProfile& p) {
  return {{"arrival_rate", p.arrival_rate},
          {"mean_input_len", p.mean_input_len},
          {"mean_output_len", p.mean_output_len},
          {"input_len_samples", p.input_len_samples},
          {"output_len_samples", p.output_len_samples}};
}

WorkloadProfile profile_from_json(const Json& j) {
  auto p = WorkloadProfile::from_samples(get<double>(j, "arrival_rate"),
                                         get<std::vector<int>>(j, "input_len_samples"),
                                         get<std::vector<int>>(j, "output_len_samples"));
  // Explicit means are kept so validation can flag disagreement.
  p.mean_input_len = get_or<double>(j, "mean_input_len", p.mean_input_len);
  p.mean_output_len = get_or<double>(j, "mean_output_len", p.mean_output_len);
  return p;
}

Json to_json(const SloSpec& s) {
  return {{"ttft_ref", s.ttft_ref},
          {"tpot_ref", s.tpot_ref},
          {"slo_scale", s.slo_scale},
          {"target_attainment", s.target_attainment}};
}

SloSpec slo_from_json(const Json& j) {
  SloSpec s;
  s.ttft_ref = get<double>(j, "ttft_ref");
  s.tpot_ref = get<double>(j, "tpot_ref");
  s.slo_scale = get_or<double>(j, "slo_scale", 1.0);
  s.target_attainment = get_or<double>(j, "target_attainment", 0.9);
  return s;
}

Json to_json(const CostParams& p) {
  return {{"flops_efficiency", p.flops_efficiency},
          {"mem_efficiency", p.mem_efficiency},
          {"tp_allreduce_latency", p.tp_allreduce_latency},
          {"batch_token_plateau", p.batch_token_plateau},
          {"kv_all_layers", p.kv_all_layers}};
}

CostParams cost_params_from_json(const Json& j) {
  CostParams p;
  p.flops_efficiency = get_or(j, "flops_efficiency", p.flops_efficiency);
  p.mem_efficiency = get_or(j, "mem_efficiency", p.mem_efficiency);
  p.tp_allreduce_latency = get_or(j, "tp_allreduce_latency", p.tp_allreduce_latency);
  p.batch_token_plateau = get_or(j, "batch_token_plateau", p.batch_token_plateau);
  p.kv_all_layers = get_or(j, "kv_all_layers", p.kv_all_layers);
  return p;
}

Json to_json(const TabuParams& p) {
  return {{"n_step", p.n_step},
          {"n_nghb", p.n_nghb},
          {"n_mem", p.n_mem},
          {"seed", p.rng_seed},
          {"patience", p.patience}};
}

TabuParams tabu_params_from_json(const Json& j) {
  TabuParams p;
  p.n_step = get_or(j, "n_step", p.n_step);
  p.n_nghb = get_or(j, "n_nghb", p.n_nghb);
  p.n_mem = get_or(j, "n_mem", p.n_mem);
  p.rng_seed = get_or<std::uint64_t>(j, "seed", p.rng_seed);
  p.patience = get_or(j, "patience", p.patience);
  return p;
}

Json to_json(const PlannerConfig& c) {
  const auto& o = c.planner.eval.orchestrator;
  return {{"tabu", to_json(c.planner.tabu)},
          {"cost", to_json(c.cost)},
          {"kv_bits", c.kv.bits},
          {"mode", eval_mode_name(o.mode)},
          {"pair_load", pair_load_name(o.load)},
          {"headroom", o.headroom},
          {"headroom_steps", o.headroom_steps},
          {"eval_seed", o.seed},
          {"sim_requests", c.planner.eval.sim_requests},
          {"sim_seed", c.planner.sim_seed}};
}

PlannerConfig planner_config_from_json(const Json& j) {
  PlannerConfig c;
  if (!j.is_object()) parse_fail("config must be an object");
  if (j.contains("tabu")) c.planner.tabu = tabu_params_from_json(j.at("tabu"));
  if (j.contains("cost")) c.cost = cost_params_from_json(j.at("cost"));
  c.kv = make_kv_precision(get_or(j, "kv_bits", 16));
  auto& o = c.planner.eval.orchestrator;
  o.mode = parse_eval_mode(get_or<std::string>(j, "mode", eval_mode_name(o.mode)));
  o.load = parse_pair_load(get_or<std::string>(j, "pair_load", pair_load_name(o.load)));
  o.headroom = get_or(j, "headroom", o.headroom);
  o.headroom_steps = get_or(j, "headroom_steps", o.headroom_steps);
  o.seed = get_or<std::uint64_t>(j, "eval_seed", o.seed);
  c.planner.eval.sim_requests = get_or<std::size_t>(j, "sim_requests", c.planner.eval.sim_requests);
  o.sim_requests = c.planner.eval.sim_requests;
  c.planner.sim_seed = get_or<std::uint64_t>(j, "sim_seed", c.planner.sim_seed);
  return c;
}

Json to_json(const ParallelConfig& c) {
  Json stages = Json::array();
  for (const auto& s : c.stages) stages.push_back({{"gpu_ids", s.gpu_ids}, {"layers", s.layers}});
  return {{"tp", c.tp}, {"pp", c.pp()}, {"stages", stages}};
}

ParallelConfig parallel_config_from_json(const Json& j) {
  ParallelConfig c;
  c.tp = get<int>(j, "tp");
  const Json& st = field(j, "stages");
  if (!st.is_array()) parse_fail("'stages' must be an array");
  for (const auto& s : st) c.stages.push_back({get<std::vector<int>>(s, "gpu_ids"), get<int>(s, "layers")});
  if (j.contains("pp") && get<int>(j, "pp") != c.pp()) parse_fail("'pp' disagrees with stage count");
  return c;
}

Json to_json(const RoutingPlan& r) {
  return {{"x", r.x}, {"y", matrix_to(r.y)}, {"z", matrix_to(r.z)}};
}

RoutingPlan routing_from_json(const Json& j) {
  RoutingPlan r;
  r.x = get<std::vector<double>>(j, "x");
  r.y = matrix_from(j, "y");
  if (j.contains("z")) {
    r.z = matrix_from(j, "z");
  } else {
    r.z = r.y;
    for (std::size_t i = 0; i < r.z.size() && i < r.x.size(); ++i) {
      for (auto& v : r.z[i]) v *= r.x[i];
    }
  }
  return r;
}

Json to_json(const Violation& v) {
  Json j = {{"code", violation_code_name(v.code)}};
  if (v.a >= 0) j["a"] = v.a;
  if (v.b >= 0) j["b"] = v.b;
  if (!v.detail.empty()) j["detail"] = v.detail;
  return j;
}

Json to_json(const Request& r) { return {{"t", r.arrival}, {"in", r.input_len}, {"out", r.output_len}}; }

Json to_json(const PlanDocument& doc) {
  Json replicas = Json::array();
  double price = 0.0;
  for (const auto& r : doc.plan.replicas) {
    double group_price = 0.0;
    for (int id : r.group.gpu_ids) group_price += doc.cluster.type_of(id).price;
    price += group_price;
    Json counts = Json::object();
    for (const auto& [type, n] : type_counts(doc.cluster, r.group.gpu_ids)) counts[type] = n;
    replicas.push_back({{"phase", phase_name(r.group.phase)},
                        {"gpu_ids", r.group.gpu_ids},
                        {"gpu_counts", counts},
                        {"price_per_hour", group_price},
                        {"config", to_json(r.config)}});
  }
  Json prov = doc.provenance;
  prov["price_per_hour"] = price;
  return {{"cluster", to_json(doc.cluster)},
          {"model", to_json(doc.model)},
          {"workload", to_json(doc.workload)},
          {"slo", to_json(doc.slo)},
          {"config", to_json(doc.config)},
          {"kv_bits", doc.plan.kv.bits},
          {"replicas", replicas},
          {"routing", to_json(doc.plan.routing)},
          {"provenance", prov}};
}

PlanDocument plan_document_from_json(const Json& j) {
  PlanDocument doc;
  doc.cluster = cluster_from_json(field(j, "cluster"));
  doc.model = model_from_json(field(j, "model"));
  doc.workload = profile_from_json(field(j, "workload"));
  doc.slo = slo_from_json(field(j, "slo"));
  doc.config = j.contains("config") ? planner_config_from_json(j.at("config")) : PlannerConfig{};
  doc.plan.kv = make_kv_precision(get_or(j, "kv_bits", doc.config.kv.bits));
  doc.config.kv = doc.plan.kv;
  const Json& reps = field(j, "replicas");
  if (!reps.is_array()) parse_fail("'replicas' must be an array");
  for (const auto& r : reps) {
    Replica rep;
    try {
      rep.group.phase = parse_phase(get<std::string>(r, "phase"));
    } catch (const Error& e) {
      parse_fail(e.what());
    }
    rep.group.gpu_ids = get<std::vector<int>>(r, "gpu_ids");
    rep.config = parallel_config_from_json(field(r, "config"));
    doc.plan.replicas.push_back(std::move(rep));
  }
  doc.plan.routing = routing_from_json(field(j, "routing"));
  if (j.contains("provenance")) doc.provenance = j.at("provenance");
  return doc;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    parse_fail(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

RequestTrace read_trace(std::istream& in) {
  RequestTrace trace;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      trace.push_back({get<double>(j, "t"), get<int>(j, "in"), get<int>(j, "out")});
    } catch (const nlohmann::json::exception& e) {
      parse_fail("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trace;
}

RequestTrace read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open '" + path + "'");
  return read_trace(in);
}

void write_trace(std::ostream& out, const RequestTrace& trace) {
  for (const auto& r : trace) out << to_json(r).dump() << '\n';
}

void write_requests_csv(std::ostream& out, const SimResult& result) {
  out << "id,arrival,input_len,output_len,prefill,decode,completed,ttft,kv,tpot,e2e\n";
  for (std::size_t k = 0; k < result.records.size(); ++k) {
    const auto& r = result.records[k];
    out << k << ',' << format_double(r.arrival) << ',' << r.input_len << ',' << r.output_len << ','
        << r.prefill << ',' << r.decode << ',' << (r.completed ? 1 : 0) << ','
        << format_double(r.ttft) << ',' << format_double(r.kv) << ',' << format_double(r.tpot)
        << ',' << format_double(r.e2e) << '\n';
  }
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "slo_scale,ttft,tpot,e2e\n";
  for (const auto& p : curve) {
    out << format_double(p.scale) << ',' << format_double(p.attainment.ttft) << ','
        << format_double(p.attainment.tpot) << ',' << format_double(p.attainment.e2e) << '\n';
  }
}

void write_convergence_csv(std::ostream& out, const std::vector<double>& trace) {
  out << "step,best_score\n";
  for (std::size_t k = 0; k < trace.size(); ++k) out << k << ',' << format_double(trace[k]) << '\n';
}

}  // namespace hetplan
