#include "hetplan/fixtures.hpp"

#include <algorithm>
#include <map>

#include "hetplan/error.hpp"
#include "hetplan/plan.hpp"
#include "hetplan/rng.hpp"

namespace hetplan::fixtures {

namespace {

constexpr double kGB = 1e9;
constexpr double kTF = 1e12;

struct NodeSpec {
  std::string type;
  int count;
  double intra_beta;  // bytes/s between GPUs of this node
};

ClusterSpec build(const std::vector<NodeSpec>& nodes, const Matrix& inter_beta,
                  double alpha_intra, double alpha_inter) {
  std::vector<GpuType> types;
  std::vector<Gpu> gpus;
  for (const auto& n : nodes) {
    if (std::none_of(types.begin(), types.end(), [&](const GpuType& t) { return t.name == n.type; })) {
      types.push_back(catalog_type(n.type));
    }
  }
  std::sort(types.begin(), types.end(),
            [](const GpuType& a, const GpuType& b) { return a.name < b.name; });
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (int c = 0; c < nodes[k].count; ++c) {
      gpus.push_back({static_cast<int>(gpus.size()), nodes[k].type, static_cast<int>(k)});
    }
  }
  const std::size_t g = gpus.size();
  Matrix alpha(g, std::vector<double>(g, 0.0));
  Matrix beta(g, std::vector<double>(g, 0.0));
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b) {
      const auto na = static_cast<std::size_t>(gpus[a].node);
      const auto nb = static_cast<std::size_t>(gpus[b].node);
      if (a == b) {
        beta[a][b] = catalog_type(gpus[a].type).mem_bandwidth;
      } else if (na == nb) {
        alpha[a][b] = alpha_intra;
        beta[a][b] = nodes[na].intra_beta;
      } else {
        alpha[a][b] = alpha_inter;
        beta[a][b] = inter_beta[std::min(na, nb)][std::max(na, nb)];
      }
    }
  }
  return ClusterSpec(std::move(types), std::move(gpus), std::move(alpha), std::move(beta));
}

Matrix symmetric(std::size_t n, double v) {
  Matrix m(n, std::vector<double>(n, v));
  for (std::size_t k = 0; k < n; ++k) m[k][k] = 0.0;
  return m;
}

std::vector<int> lognormal_samples(Rng& rng, std::size_t n, double median, double sigma, int lo,
                                   int hi) {
  const LengthDist dist = LengthDist::lognormal(median, sigma, lo, hi);
  std::vector<int> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(dist.draw(rng));
  return out;
}

}  // namespace

std::vector<GpuType> gpu_catalog() {
  return {
      {"3090Ti", 1008 * kGB, 71 * kTF, 24 * kGB, 0.307},
      {"A100", 2000 * kGB, 312 * kTF, 80 * kGB, 1.753},
      {"A40", 696 * kGB, 149.7 * kTF, 48 * kGB, 0.403},
      {"A5000", 626.8 * kGB, 27.8 * kTF, 24 * kGB, 0.223},
      {"A6000", 768 * kGB, 38.7 * kTF, 48 * kGB, 0.483},
  };
}

GpuType catalog_type(const std::string& name) {
  for (const auto& t : gpu_catalog()) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::kInvalidInput, "unknown catalog GPU '" + name + "'");
}

ModelSpec llama_7b() { return {"llama-7b", 32, 4096, 6.74e9, 2.0}; }
ModelSpec llama_13b() { return {"llama-13b", 40, 5120, 13.0e9, 2.0}; }
ModelSpec llama_30b() { return {"llama-30b", 60, 6656, 32.5e9, 2.0}; }

ClusterSpec cloud_cluster() {
  const std::vector<NodeSpec> nodes = {
      {"A6000", 4, 20 * kGB}, {"A6000", 4, 20 * kGB}, {"A5000", 4, 16 * kGB},
      {"A5000", 4, 16 * kGB}, {"A40", 8, 24 * kGB},   {"3090Ti", 4, 12 * kGB},
      {"3090Ti", 4, 12 * kGB},
  };
  // Upper triangle, GB/s between instances.
  const Matrix gbps = {
      {0, 5.0, 2.0, 2.0, 3.0, 1.0, 1.0},
      {0, 0, 2.0, 2.0, 3.0, 1.0, 1.0},
      {0, 0, 0, 4.0, 1.5, 5.0, 3.0},
      {0, 0, 0, 0, 1.5, 3.0, 5.0},
      {0, 0, 0, 0, 0, 1.0, 1.0},
      {0, 0, 0, 0, 0, 0, 4.0},
      {0, 0, 0, 0, 0, 0, 0},
  };
  Matrix inter = gbps;
  for (auto& row : inter) {
    for (auto& v : row) v *= kGB;
  }
  return build(nodes, inter, 20e-6, 100e-6);
}

ClusterSpec inhouse_cluster() { return build({{"A100", 8, 300 * kGB}}, symmetric(1, 0.0), 5e-6, 0.0); }

ClusterSpec synthetic_cluster(int n_gpus) {
  if (n_gpus < 4 || n_gpus % 4 != 0) {
    throw Error(ErrorCode::kInvalidInput, "synthetic cluster needs a multiple of 4 GPUs");
  }
  const auto n_nodes = static_cast<std::size_t>(n_gpus / 4);
  std::vector<NodeSpec> nodes(n_nodes, {"A5000", 4, 16 * kGB});
  return build(nodes, symmetric(n_nodes, 5 * kGB), 20e-6, 100e-6);
}

ClusterSpec toy_homogeneous() { return build({{"A5000", 4, 16 * kGB}}, symmetric(1, 0.0), 20e-6, 0.0); }

ClusterSpec toy_two_type() {
  return build({{"A40", 2, 24 * kGB}, {"3090Ti", 2, 12 * kGB}}, symmetric(2, 5 * kGB), 20e-6,
               100e-6);
}

ClusterSpec toy_bandwidth_split() {
  return build({{"A5000", 2, 16 * kGB}, {"A5000", 2, 16 * kGB}}, symmetric(2, 0.5 * kGB), 20e-6,
               500e-6);
}

WorkloadProfile coding_profile(double rate, std::uint64_t seed) {
  Rng rng(seed);
  auto in = lognormal_samples(rng, 512, 1500.0, 0.5, 64, 4096);
  auto out = lognormal_samples(rng, 512, 13.0, 0.8, 1, 512);
  return WorkloadProfile::from_samples(rate, std::move(in), std::move(out));
}

WorkloadProfile conversation_profile(double rate, std::uint64_t seed) {
  Rng rng(seed);
  auto in = lognormal_samples(rng, 512, 1020.0, 0.5, 64, 4096);
  auto out = lognormal_samples(rng, 512, 129.0, 0.6, 1, 1024);
  return WorkloadProfile::from_samples(rate, std::move(in), std::move(out));
}

WorkloadProfile constant_profile(double rate, int input_len, int output_len) {
  return WorkloadProfile::from_samples(rate, {input_len}, {output_len});
}

SloSpec reference_slo(const ModelSpec& model, const WorkloadProfile& workload,
                      const CostParams& params, double slo_scale) {
  const std::vector<GpuType> types = {catalog_type("A100")};
  const ClusterSpec one(types, {{0, "A100", 0}}, {{0.0}}, {{types[0].mem_bandwidth}});
  ParallelConfig cfg;
  cfg.tp = 1;
  cfg.stages = {{{0}, model.n_layers}};
  const ReplicaCost cost(one, model, cfg, params);
  SloSpec slo;
  slo.ttft_ref = cost.prefill_latency(workload.mean_input_len);
  slo.tpot_ref = cost.decode_step_latency(1.0, workload.mean_decode_context());
  slo.slo_scale = slo_scale;
  return slo;
}

std::vector<Scenario> scenarios() {
  const CostParams params;
  auto make = [&](std::string name, ClusterSpec c, ModelSpec m, WorkloadProfile w, double scale) {
    SloSpec slo = reference_slo(m, w, params, scale);
    return Scenario{std::move(name), std::move(c), std::move(m), std::move(w), slo};
  };
  std::vector<Scenario> out;
  out.push_back(make("cloud-coding", cloud_cluster(), llama_30b(), coding_profile(8.0), 3.0));
  out.push_back(
      make("cloud-conversation", cloud_cluster(), llama_30b(), conversation_profile(10.0), 3.0));
  out.push_back(make("inhouse-coding", inhouse_cluster(), llama_30b(), coding_profile(10.0), 3.0));
  for (int n : {16, 24, 32}) {
    out.push_back(make("synthetic-" + std::to_string(n), synthetic_cluster(n), llama_13b(),
                       conversation_profile(0.25 * n), 5.0));
  }
  out.push_back(make("ratio-long-input", synthetic_cluster(16), llama_13b(),
                     constant_profile(4.0, 1024, 16), 5.0));
  out.push_back(make("ratio-long-output", synthetic_cluster(16), llama_13b(),
                     constant_profile(12.0, 128, 256), 2.0));
  out.push_back(make("toy-homogeneous", toy_homogeneous(), llama_7b(), constant_profile(4.0, 512, 64), 4.0));
  out.push_back(make("toy-two-type", toy_two_type(), llama_7b(), constant_profile(4.0, 512, 64), 4.0));
  out.push_back(make("toy-bandwidth-split", toy_bandwidth_split(), llama_7b(),
                     constant_profile(4.0, 512, 64), 4.0));
  return out;
}

Scenario scenario(const std::string& name) {
  for (auto& s : scenarios()) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kInvalidInput, "unknown scenario '" + name + "'");
}

}  // namespace hetplan::fixtures
