#include "hetplan/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "hetplan/error.hpp"

namespace hetplan {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kEmptyWindow: return "EmptyWindow";
    case ErrorCode::kNoPath: return "NoPath";
    case ErrorCode::kInfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::kNoFeasibleConfig: return "NoFeasibleConfig";
    case ErrorCode::kTooManyStages: return "TooManyStages";
    case ErrorCode::kInfeasiblePartition: return "InfeasiblePartition";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kInvalidPlan: return "InvalidPlan";
    case ErrorCode::kInsufficientMemory: return "InsufficientMemory";
    case ErrorCode::kNoSurvivingPhasePair: return "NoSurvivingPhasePair";
  }
  return "Unknown";
}

ClusterSpec::ClusterSpec(std::vector<GpuType> gpu_types, std::vector<Gpu> gpus, Matrix alpha,
                         Matrix beta)
    : gpu_types_(std::move(gpu_types)),
      gpus_(std::move(gpus)),
      alpha_(std::move(alpha)),
      beta_(std::move(beta)) {
  for (std::size_t i = 0; i < gpus_.size(); ++i) index_.emplace(gpus_[i].id, i);
  for (std::size_t i = 0; i < gpu_types_.size(); ++i) type_index_.emplace(gpu_types_[i].name, i);
}

std::size_t ClusterSpec::index_of(int gpu_id) const {
  auto it = index_.find(gpu_id);
  if (it == index_.end()) {
    throw Error(ErrorCode::kInvalidInput, "unknown gpu id " + std::to_string(gpu_id));
  }
  return it->second;
}

const GpuType* ClusterSpec::find_type(const std::string& name) const {
  auto it = type_index_.find(name);
  return it == type_index_.end() ? nullptr : &gpu_types_[it->second];
}

const GpuType& ClusterSpec::type_of(int gpu_id) const {
  const GpuType* t = find_type(gpu(gpu_id).type);
  if (t == nullptr) {
    throw Error(ErrorCode::kInvalidInput, "gpu " + std::to_string(gpu_id) + " has unknown type");
  }
  return *t;
}

std::vector<int> ClusterSpec::gpu_ids() const {
  std::vector<int> ids;
  ids.reserve(gpus_.size());
  for (const auto& g : gpus_) ids.push_back(g.id);
  return ids;
}

const char* violation_code_name(ViolationCode code) {
  switch (code) {
    case ViolationCode::kNonPositiveTypeField: return "NonPositiveTypeField";
    case ViolationCode::kDuplicateTypeName: return "DuplicateTypeName";
    case ViolationCode::kUnknownGpuType: return "UnknownGpuType";
    case ViolationCode::kDuplicateGpuId: return "DuplicateGpuId";
    case ViolationCode::kMatrixShape: return "MatrixShape";
    case ViolationCode::kNegativeLatency: return "NegativeLatency";
    case ViolationCode::kNegativeBandwidth: return "NegativeBandwidth";
    case ViolationCode::kAsymmetricBandwidth: return "AsymmetricBandwidth";
    case ViolationCode::kAsymmetricLatency: return "AsymmetricLatency";
    case ViolationCode::kDiagonalNotMaximal: return "DiagonalNotMaximal";
    case ViolationCode::kEmpty: return "Empty";
  }
  return "Unknown";
}

namespace {

bool nearly_equal(double a, double b) {
  if (a == b) return true;
  return std::fabs(a - b) <= kSymmetryTolerance * std::max(std::fabs(a), std::fabs(b));
}

bool square(const Matrix& m, std::size_t n) {
  if (m.size() != n) return false;
  for (const auto& row : m) {
    if (row.size() != n) return false;
  }
  return true;
}

}  // namespace

std::vector<Violation> validate_cluster(const ClusterSpec& spec) {
  std::vector<Violation> out;
  const auto& types = spec.gpu_types();
  const auto& gpus = spec.gpus();

  std::set<std::string> names;
  for (std::size_t t = 0; t < types.size(); ++t) {
    const auto& ty = types[t];
    if (!(ty.mem_bandwidth > 0) || !(ty.peak_flops > 0) || !(ty.mem_capacity > 0) ||
        !(ty.price > 0)) {
      out.push_back({ViolationCode::kNonPositiveTypeField, static_cast<int>(t), -1, ty.name});
    }
    if (!names.insert(ty.name).second) {
      out.push_back({ViolationCode::kDuplicateTypeName, static_cast<int>(t), -1, ty.name});
    }
  }

  if (gpus.empty()) {
    out.push_back({ViolationCode::kEmpty, -1, -1, "cluster has no gpus"});
    return out;
  }

  std::set<int> ids;
  for (const auto& g : gpus) {
    if (!names.count(g.type)) {
      out.push_back({ViolationCode::kUnknownGpuType, g.id, -1, g.type});
    }
    if (!ids.insert(g.id).second) {
      out.push_back({ViolationCode::kDuplicateGpuId, g.id, -1, ""});
    }
  }

  const std::size_t n = gpus.size();
  const bool alpha_ok = square(spec.alpha(), n);
  const bool beta_ok = square(spec.beta(), n);
  if (!alpha_ok) out.push_back({ViolationCode::kMatrixShape, -1, -1, "alpha"});
  if (!beta_ok) out.push_back({ViolationCode::kMatrixShape, -1, -1, "beta"});

  if (alpha_ok) {
    const auto& a = spec.alpha();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (a[i][j] < 0 || std::isnan(a[i][j])) {
          out.push_back({ViolationCode::kNegativeLatency, gpus[i].id, gpus[j].id, ""});
        }
        if (j > i && !nearly_equal(a[i][j], a[j][i])) {
          out.push_back({ViolationCode::kAsymmetricLatency, gpus[i].id, gpus[j].id, ""});
        }
      }
    }
  }
  if (beta_ok) {
    const auto& b = spec.beta();
    for (std::size_t i = 0; i < n; ++i) {
      bool diag_max = true;
      for (std::size_t j = 0; j < n; ++j) {
        if (b[i][j] < 0 || std::isnan(b[i][j])) {
          out.push_back({ViolationCode::kNegativeBandwidth, gpus[i].id, gpus[j].id, ""});
        }
        if (j > i && !nearly_equal(b[i][j], b[j][i])) {
          out.push_back({ViolationCode::kAsymmetricBandwidth, gpus[i].id, gpus[j].id, ""});
        }
        if (j != i && b[i][j] > b[i][i]) diag_max = false;
      }
      if (!diag_max) out.push_back({ViolationCode::kDiagonalNotMaximal, gpus[i].id, -1, ""});
    }
  }
  return out;
}

void validate_model(const ModelSpec& model) {
  if (model.n_layers < 1 || model.hidden_size < 1 || !(model.n_params > 0) ||
      !(model.bytes_per_param > 0)) {
    throw Error(ErrorCode::kInvalidInput, "model '" + model.name + "' has non-positive fields");
  }
}

}  // namespace hetplan
