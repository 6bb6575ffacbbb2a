#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "hetplan/cluster.hpp"
#include "hetplan/cost_model.hpp"
#include "hetplan/plan.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

struct RequestRecord {
  double arrival = 0.0;
  int input_len = 0;
  int output_len = 0;
  int prefill = -1;  // index into plan.prefill_indices()
  int decode = -1;   // index into plan.decode_indices()
  bool prefilled = false;
  bool completed = false;
  double ttft = std::numeric_limits<double>::quiet_NaN();
  double kv = std::numeric_limits<double>::quiet_NaN();
  double tpot = std::numeric_limits<double>::quiet_NaN();
  double e2e = std::numeric_limits<double>::quiet_NaN();
};

struct SimResult {
  std::vector<RequestRecord> records;
  double attainment_ttft = 0.0;
  double attainment_tpot = 0.0;
  double attainment_e2e = 0.0;
  double throughput_rps = 0.0;
  double throughput_tps = 0.0;
  std::size_t completed = 0;
  std::size_t in_flight = 0;
  double mean_output_len = 0.0;  // over the trace; fixes the E2E deadline
};

struct SimOptions {
  // Events after the horizon are dropped; unfinished requests count as misses.
  double horizon = std::numeric_limits<double>::infinity();
};

// Stream id used to fork the routing generator from the simulation seed.
inline constexpr std::uint64_t kRoutingStream = 7;

SimResult simulate(const DeploymentPlan& plan, const ClusterSpec& cluster, const ModelSpec& model,
                   const RequestTrace& trace, const SloSpec& slo, const CostParams& params,
                   std::uint64_t seed, const SimOptions& options = {});

struct Attainment {
  double ttft = 0.0;
  double tpot = 0.0;
  double e2e = 0.0;
};

// Re-applies deadlines for a different slo_scale without re-simulating.
Attainment attainment_for(const SimResult& result, const SloSpec& slo);

struct CurvePoint {
  double scale = 0.0;
  Attainment attainment;
};

// Scales must be positive and sorted ascending.
std::vector<CurvePoint> attainment_curve(const SimResult& result, const SloSpec& slo,
                                         const std::vector<double>& scales);

std::vector<CurvePoint> attainment_at_scale(const DeploymentPlan& plan, const ClusterSpec& cluster,
                                            const ModelSpec& model, const RequestTrace& trace,
                                            const SloSpec& slo, const CostParams& params,
                                            std::uint64_t seed, const std::vector<double>& scales);

// Share of E2E spent in KV transfer, averaged over completed requests.
double kv_share_of_e2e(const SimResult& result);

}  // namespace hetplan
