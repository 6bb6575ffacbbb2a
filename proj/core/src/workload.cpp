#include "hetplan/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hetplan/error.hpp"
#include "hetplan/rng.hpp"

namespace hetplan {

namespace {

double mean_of(const std::vector<int>& v) {
  double s = 0.0;
  for (int x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({std::fabs(a), std::fabs(b), 1e-300});
}

}  // namespace

WorkloadProfile WorkloadProfile::from_samples(double rate, std::vector<int> input_lens,
                                              std::vector<int> output_lens) {
  WorkloadProfile p;
  p.arrival_rate = rate;
  p.mean_input_len = mean_of(input_lens);
  p.mean_output_len = mean_of(output_lens);
  p.input_len_samples = std::move(input_lens);
  p.output_len_samples = std::move(output_lens);
  return p;
}

void validate_profile(const WorkloadProfile& p) {
  if (!(p.arrival_rate > 0)) throw Error(ErrorCode::kInvalidInput, "arrival_rate must be > 0");
  if (p.input_len_samples.empty() || p.output_len_samples.empty()) {
    throw Error(ErrorCode::kInvalidInput, "profile sample lists must be non-empty");
  }
  for (int v : p.input_len_samples) {
    if (v < 1) throw Error(ErrorCode::kInvalidInput, "input length sample < 1");
  }
  for (int v : p.output_len_samples) {
    if (v < 1) throw Error(ErrorCode::kInvalidInput, "output length sample < 1");
  }
  if (!rel_close(p.mean_input_len, mean_of(p.input_len_samples), 1e-9) ||
      !rel_close(p.mean_output_len, mean_of(p.output_len_samples), 1e-9)) {
    throw Error(ErrorCode::kInvalidInput, "profile means disagree with sample means");
  }
}

void validate_slo(const SloSpec& s) {
  if (!(s.ttft_ref > 0) || !(s.tpot_ref > 0) || !(s.slo_scale > 0) ||
      !(s.target_attainment > 0) || s.target_attainment > 1) {
    throw Error(ErrorCode::kInvalidInput, "slo fields must be positive, target in (0,1]");
  }
}

void validate_trace(const RequestTrace& trace) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    if (r.input_len < 1 || r.output_len < 1) {
      throw Error(ErrorCode::kInvalidInput, "request " + std::to_string(i) + " has length < 1");
    }
    if (i > 0 && r.arrival < trace[i - 1].arrival) {
      throw Error(ErrorCode::kInvalidInput, "arrival times must be non-decreasing");
    }
  }
}

double mean_output_len(const RequestTrace& trace) {
  if (trace.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : trace) s += r.output_len;
  return s / static_cast<double>(trace.size());
}

double mean_decode_context(const RequestTrace& trace) {
  if (trace.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : trace) s += r.input_len + r.output_len / 2.0;
  return s / static_cast<double>(trace.size());
}

WorkloadProfile profile_from_trace(const RequestTrace& trace, TimeWindow window) {
  if (!(window.end > window.start)) {
    throw Error(ErrorCode::kInvalidInput, "window end must exceed start");
  }
  std::vector<int> in;
  std::vector<int> out;
  for (const auto& r : trace) {
    if (r.arrival >= window.start && r.arrival < window.end) {
      in.push_back(r.input_len);
      out.push_back(r.output_len);
    }
  }
  if (in.empty()) throw Error(ErrorCode::kEmptyWindow, "no requests in window");
  const double rate = static_cast<double>(in.size()) / (window.end - window.start);
  return WorkloadProfile::from_samples(rate, std::move(in), std::move(out));
}

WorkloadProfile profile_from_trace(const RequestTrace& trace) {
  if (trace.empty()) throw Error(ErrorCode::kEmptyWindow, "empty trace");
  const double first = trace.front().arrival;
  const double last = trace.back().arrival;
  std::vector<int> in;
  std::vector<int> out;
  for (const auto& r : trace) {
    in.push_back(r.input_len);
    out.push_back(r.output_len);
  }
  const double span = last - first;
  const double rate = (trace.size() > 1 && span > 0)
                          ? static_cast<double>(trace.size() - 1) / span
                          : 1.0;
  return WorkloadProfile::from_samples(rate, std::move(in), std::move(out));
}

bool detect_shift(const WorkloadProfile& a, const WorkloadProfile& b, double rel_threshold) {
  if (!(rel_threshold > 0)) throw Error(ErrorCode::kInvalidInput, "threshold must be > 0");
  auto changed = [&](double old_v, double new_v) {
    return std::fabs(new_v - old_v) / old_v > rel_threshold;
  };
  return changed(a.mean_input_len, b.mean_input_len) ||
         changed(a.mean_output_len, b.mean_output_len) ||
         changed(a.arrival_rate, b.arrival_rate);
}

int LengthDist::draw(Rng& rng) const {
  double v = a;
  switch (kind) {
    case Kind::kConstant:
      return std::max(1, static_cast<int>(a));
    case Kind::kUniform:
      return rng.uniform_int(static_cast<int>(a), static_cast<int>(b));
    case Kind::kLogNormal:
      v = a * std::exp(b * rng.normal());
      break;
    case Kind::kEmpirical:
      if (samples.empty()) throw Error(ErrorCode::kInvalidInput, "empty empirical distribution");
      return samples[rng.index(samples.size())];
  }
  const long r = std::lround(v);
  return static_cast<int>(std::clamp<long>(r, min_len, max_len));
}

RequestTrace generate_trace(const TraceSpec& spec, std::uint64_t seed) {
  if (!(spec.rate > 0)) throw Error(ErrorCode::kInvalidInput, "trace rate must be > 0");
  Rng root(seed);
  Rng arrivals = root.fork(1);
  Rng lengths = root.fork(2);
  RequestTrace trace;
  trace.reserve(spec.n_requests);
  double t = spec.start_time;
  for (std::size_t i = 0; i < spec.n_requests; ++i) {
    t += arrivals.exponential(spec.rate);
    Request r;
    r.arrival = t;
    r.input_len = spec.input.draw(lengths);
    r.output_len = spec.output.draw(lengths);
    trace.push_back(r);
  }
  return trace;
}

RequestTrace trace_from_profile(const WorkloadProfile& profile, double rate,
                                std::size_t n_requests, std::uint64_t seed) {
  validate_profile(profile);
  if (!(rate > 0)) throw Error(ErrorCode::kInvalidInput, "trace rate must be > 0");
  Rng root(seed);
  Rng arrivals = root.fork(1);
  Rng lengths = root.fork(2);
  const auto& ins = profile.input_len_samples;
  const auto& outs = profile.output_len_samples;
  const bool paired = ins.size() == outs.size();
  RequestTrace trace;
  trace.reserve(n_requests);
  double t = 0.0;
  for (std::size_t i = 0; i < n_requests; ++i) {
    t += arrivals.exponential(rate);
    Request r;
    r.arrival = t;
    const auto k = lengths.index(ins.size());
    r.input_len = ins[k];
    r.output_len = paired ? outs[k] : outs[lengths.index(outs.size())];
    trace.push_back(r);
  }
  return trace;
}

}  // namespace hetplan
