#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hetplan {

class Rng;

struct WorkloadProfile {
  double arrival_rate = 0.0;  // requests/s
  double mean_input_len = 0.0;
  double mean_output_len = 0.0;
  std::vector<int> input_len_samples;
  std::vector<int> output_len_samples;

  // Builds a profile whose means are derived from the samples.
  static WorkloadProfile from_samples(double rate, std::vector<int> input_lens,
                                      std::vector<int> output_lens);

  // Mean lifetime context of a decoding request: prompt plus half the output.
  double mean_decode_context() const { return mean_input_len + mean_output_len / 2.0; }
};

// Throws InvalidInput when the invariants do not hold.
void validate_profile(const WorkloadProfile& profile);

struct SloSpec {
  double ttft_ref = 1.0;
  double tpot_ref = 0.1;
  double slo_scale = 1.0;
  double target_attainment = 0.9;

  double ttft_deadline() const { return slo_scale * ttft_ref; }
  double tpot_deadline() const { return slo_scale * tpot_ref; }
  double e2e_deadline(double mean_output_len) const {
    return slo_scale * (ttft_ref + mean_output_len * tpot_ref);
  }
  SloSpec at_scale(double scale) const {
    SloSpec s = *this;
    s.slo_scale = scale;
    return s;
  }
};

void validate_slo(const SloSpec& slo);

struct Request {
  double arrival = 0.0;
  int input_len = 1;
  int output_len = 1;

  bool operator==(const Request&) const = default;
};

using RequestTrace = std::vector<Request>;

void validate_trace(const RequestTrace& trace);

double mean_output_len(const RequestTrace& trace);
double mean_decode_context(const RequestTrace& trace);

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;  // exclusive
};

// Throws EmptyWindow when no arrival falls in [start, end).
WorkloadProfile profile_from_trace(const RequestTrace& trace, TimeWindow window);

// Whole-trace profile over [first arrival, last arrival]; the rate uses the
// span between first and last arrival (n-1 gaps) when it is positive.
WorkloadProfile profile_from_trace(const RequestTrace& trace);

inline constexpr double kDefaultShiftThreshold = 0.2;
inline constexpr double kDefaultShiftWindow = 60.0;

bool detect_shift(const WorkloadProfile& old_profile, const WorkloadProfile& new_profile,
                  double rel_threshold = kDefaultShiftThreshold);

// Length distribution for synthetic traces.
struct LengthDist {
  enum class Kind { kConstant, kUniform, kLogNormal, kEmpirical };
  Kind kind = Kind::kConstant;
  double a = 1.0;  // constant value / uniform lo / lognormal median
  double b = 1.0;  // uniform hi / lognormal sigma
  int min_len = 1;
  int max_len = 1 << 20;
  std::vector<int> samples;  // kEmpirical

  static LengthDist constant(int v) { return {Kind::kConstant, double(v), double(v), 1, 1 << 20, {}}; }
  static LengthDist uniform(int lo, int hi) { return {Kind::kUniform, double(lo), double(hi), lo, hi, {}}; }
  static LengthDist lognormal(double median, double sigma, int lo, int hi) {
    return {Kind::kLogNormal, median, sigma, lo, hi, {}};
  }
  static LengthDist empirical(std::vector<int> s) {
    return {Kind::kEmpirical, 0, 0, 1, 1 << 20, std::move(s)};
  }

  int draw(Rng& rng) const;
};

struct TraceSpec {
  double rate = 1.0;
  std::size_t n_requests = 100;
  LengthDist input = LengthDist::constant(512);
  LengthDist output = LengthDist::constant(16);
  double start_time = 0.0;
};

// Poisson arrivals (exponential gaps) with independent length draws.
RequestTrace generate_trace(const TraceSpec& spec, std::uint64_t seed);

// Poisson trace at `rate` whose lengths are resampled from the profile's
// sample lists (pairs kept together when the lists have equal length).
RequestTrace trace_from_profile(const WorkloadProfile& profile, double rate,
                                std::size_t n_requests, std::uint64_t seed);

}  // namespace hetplan
