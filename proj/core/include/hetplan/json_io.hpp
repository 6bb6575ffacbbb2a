#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetplan/cluster.hpp"
#include "hetplan/cost_model.hpp"
#include "hetplan/orchestrator.hpp"
#include "hetplan/plan.hpp"
#include "hetplan/scheduler.hpp"
#include "hetplan/simulator.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

using Json = nlohmann::ordered_json;

// Everything that shapes a planning run besides the inputs themselves.
struct PlannerConfig {
  PlannerOptions planner;
  CostParams cost;
  KvPrecision kv;
};

Json to_json(const GpuType& t);
Json to_json(const ClusterSpec& c);
Json to_json(const ModelSpec& m);
Json to_json(const WorkloadProfile& p);
Json to_json(const SloSpec& s);
Json to_json(const CostParams& p);
Json to_json(const TabuParams& p);
Json to_json(const PlannerConfig& c);
Json to_json(const ParallelConfig& c);
Json to_json(const RoutingPlan& r);
Json to_json(const Violation& v);
Json to_json(const Request& r);

// Parsers throw Error(ParseError) on malformed or missing fields.
ClusterSpec cluster_from_json(const Json& j);
ModelSpec model_from_json(const Json& j);
WorkloadProfile profile_from_json(const Json& j);
SloSpec slo_from_json(const Json& j);
CostParams cost_params_from_json(const Json& j);
TabuParams tabu_params_from_json(const Json& j);
PlannerConfig planner_config_from_json(const Json& j);
ParallelConfig parallel_config_from_json(const Json& j);
RoutingPlan routing_from_json(const Json& j);

// Self-contained plan document: inputs, config, replicas, routing, provenance.
struct PlanDocument {
  ClusterSpec cluster;
  ModelSpec model;
  WorkloadProfile workload;
  SloSpec slo;
  PlannerConfig config;
  DeploymentPlan plan;
  Json provenance = Json::object();
};

Json to_json(const PlanDocument& doc);
PlanDocument plan_document_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

RequestTrace read_trace(std::istream& in);
RequestTrace read_trace_file(const std::string& path);
void write_trace(std::ostream& out, const RequestTrace& trace);

// Stable headers: see README.
void write_requests_csv(std::ostream& out, const SimResult& result);
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);
void write_convergence_csv(std::ostream& out, const std::vector<double>& trace);

// Compact decimal rendering shared by CSV writers (shortest round-trip form).
std::string format_double(double v);

}  // namespace hetplan
