#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace hetplan {

using Matrix = std::vector<std::vector<double>>;

struct GpuType {
  std::string name;
  double mem_bandwidth = 0.0;  // bytes/s
  double peak_flops = 0.0;     // fp16 FLOP/s
  double mem_capacity = 0.0;   // bytes
  double price = 0.0;          // currency/hour
};

struct Gpu {
  int id = 0;
  std::string type;
  int node = 0;
};

// GPUs plus pairwise latency (alpha, seconds) and bandwidth (beta, bytes/s).
// Matrices are indexed by position in `gpus()`, not by gpu id; use
// `index_of` to translate. Construction never throws on bad data: run
// `validate_cluster` to get the list of problems.
class ClusterSpec {
 public:
  ClusterSpec() = default;
  ClusterSpec(std::vector<GpuType> gpu_types, std::vector<Gpu> gpus, Matrix alpha,
              Matrix beta);

  const std::vector<GpuType>& gpu_types() const { return gpu_types_; }
  const std::vector<Gpu>& gpus() const { return gpus_; }
  const Matrix& alpha() const { return alpha_; }
  const Matrix& beta() const { return beta_; }
  std::size_t size() const { return gpus_.size(); }

  bool contains(int gpu_id) const { return index_.count(gpu_id) != 0; }
  std::size_t index_of(int gpu_id) const;
  const Gpu& gpu(int gpu_id) const { return gpus_[index_of(gpu_id)]; }
  const GpuType& type_of(int gpu_id) const;
  const GpuType* find_type(const std::string& name) const;

  double latency(int a, int b) const { return alpha_[index_of(a)][index_of(b)]; }
  double bandwidth(int a, int b) const { return beta_[index_of(a)][index_of(b)]; }

  std::vector<int> gpu_ids() const;

 private:
  std::vector<GpuType> gpu_types_;
  std::vector<Gpu> gpus_;
  Matrix alpha_;
  Matrix beta_;
  std::unordered_map<int, std::size_t> index_;
  std::unordered_map<std::string, std::size_t> type_index_;
};

enum class ViolationCode {
  kNonPositiveTypeField,
  kDuplicateTypeName,
  kUnknownGpuType,
  kDuplicateGpuId,
  kMatrixShape,
  kNegativeLatency,
  kNegativeBandwidth,
  kAsymmetricBandwidth,
  kAsymmetricLatency,
  kDiagonalNotMaximal,
  kEmpty,
};

struct Violation {
  ViolationCode code;
  int a = -1;  // gpu id / row, depending on code
  int b = -1;
  std::string detail;

  bool operator==(const Violation& o) const { return code == o.code && a == o.a && b == o.b; }
};

const char* violation_code_name(ViolationCode code);

// Relative tolerance used for the alpha/beta symmetry checks.
inline constexpr double kSymmetryTolerance = 1e-9;

std::vector<Violation> validate_cluster(const ClusterSpec& spec);

struct ModelSpec {
  std::string name;
  int n_layers = 1;
  int hidden_size = 1;
  double n_params = 0.0;
  double bytes_per_param = 2.0;

  double weight_bytes() const { return n_params * bytes_per_param; }
  double params_per_layer() const { return n_params / n_layers; }
  double layer_bytes() const { return params_per_layer() * bytes_per_param; }
  // K and V, 2 bytes/element.
  double kv_bytes_per_token_layer() const { return 4.0 * hidden_size; }
};

void validate_model(const ModelSpec& model);

}  // namespace hetplan
