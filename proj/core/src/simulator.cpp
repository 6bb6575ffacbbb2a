#include "hetplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include "hetplan/error.hpp"
#include "hetplan/rng.hpp"

namespace hetplan {

namespace {

enum class EventKind { kArrival, kPrefillDone, kDecodeArrive, kDecodeStep };

struct Event {
  double time;
  std::uint64_t seq;
  EventKind kind;
  int replica;
  int request;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct PrefillState {
  std::deque<int> queue;
  std::vector<int> batch;
  bool busy = false;
};

struct DecodeState {
  std::deque<int> waiting;
  std::vector<int> active;
  bool busy = false;
};

std::size_t pick(const std::vector<double>& weights, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  double acc = 0.0;
  const double target = u * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0) continue;
    last_positive = i;
    acc += weights[i];
    if (target < acc) return i;
  }
  return last_positive;
}

class Simulation {
 public:
  Simulation(const DeploymentPlan& plan, const ClusterSpec& cluster, const ModelSpec& model,
             const RequestTrace& trace, const CostParams& params, std::uint64_t seed,
             const SimOptions& options)
      : plan_(plan), trace_(trace), params_(params), options_(options) {
    const auto pidx = plan.prefill_indices();
    const auto didx = plan.decode_indices();
    for (auto i : pidx) prefill_cost_.emplace_back(cluster, model, plan.replicas[i].config, params);
    for (auto j : didx) decode_cost_.emplace_back(cluster, model, plan.replicas[j].config, params);
    for (const auto& c : prefill_cost_) {
      if (!c.weights_fit()) throw Error(ErrorCode::kInvalidPlan, "prefill replica weights overflow");
    }
    const double ctx = mean_decode_context(trace);
    for (const auto& c : decode_cost_) {
      const int b = c.max_decode_batch(ctx);
      if (b < 1) throw Error(ErrorCode::kInvalidPlan, "decode replica cannot hold one request");
      max_batch_.push_back(b);
    }
    links_.resize(pidx.size());
    for (std::size_t i = 0; i < pidx.size(); ++i) {
      for (std::size_t j = 0; j < didx.size(); ++j) {
        links_[i].push_back(
            replica_link(cluster, plan.replicas[pidx[i]].config, plan.replicas[didx[j]].config));
      }
    }
    prefill_.resize(pidx.size());
    decode_.resize(didx.size());
    records_.resize(trace.size());
    generated_.assign(trace.size(), 0);
    model_ = &model;

    Rng routing = Rng(seed).fork(kRoutingStream);
    for (std::size_t r = 0; r < trace.size(); ++r) {
      auto& rec = records_[r];
      rec.arrival = trace[r].arrival;
      rec.input_len = trace[r].input_len;
      rec.output_len = trace[r].output_len;
      const double u1 = routing.uniform();
      const double u2 = routing.uniform();
      rec.prefill = static_cast<int>(pick(plan.routing.x, u1));
      rec.decode = static_cast<int>(pick(plan.routing.y[rec.prefill], u2));
    }
  }

  std::vector<RequestRecord> run() {
    for (std::size_t r = 0; r < trace_.size(); ++r) {
      push(trace_[r].arrival, EventKind::kArrival, records_[r].prefill, static_cast<int>(r));
    }
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      if (ev.time > options_.horizon) break;
      now_ = ev.time;
      switch (ev.kind) {
        case EventKind::kArrival:
          prefill_[ev.replica].queue.push_back(ev.request);
          if (!prefill_[ev.replica].busy) start_prefill(ev.replica);
          break;
        case EventKind::kPrefillDone:
          finish_prefill(ev.replica);
          break;
        case EventKind::kDecodeArrive:
          decode_[ev.replica].waiting.push_back(ev.request);
          if (!decode_[ev.replica].busy) start_step(ev.replica);
          break;
        case EventKind::kDecodeStep:
          finish_step(ev.replica);
          break;
      }
    }
    return std::move(records_);
  }

 private:
  void push(double t, EventKind kind, int replica, int request) {
    events_.push({t, seq_++, kind, replica, request});
  }

  void start_prefill(int i) {
    auto& st = prefill_[i];
    st.batch.clear();
    long tokens = 0;
    while (!st.queue.empty()) {
      const int r = st.queue.front();
      const long len = records_[r].input_len;
      if (!st.batch.empty() && tokens + len > params_.batch_token_plateau) break;
      tokens += len;
      st.batch.push_back(r);
      st.queue.pop_front();
    }
    if (st.batch.empty()) {
      st.busy = false;
      return;
    }
    st.busy = true;
    push(now_ + prefill_cost_[i].prefill_latency(static_cast<double>(tokens)),
         EventKind::kPrefillDone, i, -1);
  }

  void finish_prefill(int i) {
    for (int r : prefill_[i].batch) {
      auto& rec = records_[r];
      rec.prefilled = true;
      rec.ttft = now_ - rec.arrival;
      rec.kv = kv_comm_cost(links_[i][rec.decode], 1, rec.input_len, *model_, plan_.kv, params_);
      push(now_ + rec.kv, EventKind::kDecodeArrive, rec.decode, r);
    }
    prefill_[i].busy = false;
    start_prefill(i);
  }

  void start_step(int j) {
    auto& st = decode_[j];
    while (!st.waiting.empty() && static_cast<int>(st.active.size()) < max_batch_[j]) {
      st.active.push_back(st.waiting.front());
      st.waiting.pop_front();
    }
    if (st.active.empty()) {
      st.busy = false;
      return;
    }
    double ctx = 0.0;
    for (int r : st.active) ctx += records_[r].input_len + records_[r].output_len / 2.0;
    ctx /= static_cast<double>(st.active.size());
    st.busy = true;
    push(now_ + decode_cost_[j].decode_step_latency(static_cast<double>(st.active.size()), ctx),
         EventKind::kDecodeStep, j, -1);
  }

  void finish_step(int j) {
    auto& st = decode_[j];
    std::vector<int> still;
    still.reserve(st.active.size());
    for (int r : st.active) {
      auto& rec = records_[r];
      if (++generated_[r] < rec.output_len) {
        still.push_back(r);
        continue;
      }
      rec.completed = true;
      rec.e2e = now_ - rec.arrival;
      rec.tpot = (rec.e2e - rec.ttft - rec.kv) / rec.output_len;
    }
    st.active = std::move(still);
    start_step(j);
  }

  const DeploymentPlan& plan_;
  const RequestTrace& trace_;
  const ModelSpec* model_ = nullptr;
  CostParams params_;
  SimOptions options_;
  std::vector<ReplicaCost> prefill_cost_;
  std::vector<ReplicaCost> decode_cost_;
  std::vector<int> max_batch_;
  std::vector<std::vector<Link>> links_;
  std::vector<PrefillState> prefill_;
  std::vector<DecodeState> decode_;
  std::vector<RequestRecord> records_;
  std::vector<int> generated_;  // decode steps done per request
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
};

}  // namespace

SimResult simulate(const DeploymentPlan& plan, const ClusterSpec& cluster, const ModelSpec& model,
                   const RequestTrace& trace, const SloSpec& slo, const CostParams& params,
                   std::uint64_t seed, const SimOptions& options) {
  if (trace.empty()) throw Error(ErrorCode::kInvalidInput, "empty trace");
  validate_trace(trace);
  validate_plan(plan, cluster, model);

  SimResult result;
  result.records = Simulation(plan, cluster, model, trace, params, seed, options).run();
  result.mean_output_len = mean_output_len(trace);

  double first = trace.front().arrival;
  double last = first;
  double tokens = 0.0;
  for (const auto& rec : result.records) {
    first = std::min(first, rec.arrival);
    if (!rec.completed) continue;
    ++result.completed;
    tokens += rec.output_len;
    last = std::max(last, rec.arrival + rec.e2e);
  }
  result.in_flight = result.records.size() - result.completed;
  const double span = last - first;
  if (span > 0) {
    result.throughput_rps = static_cast<double>(result.completed) / span;
    result.throughput_tps = tokens / span;
  }
  const Attainment a = attainment_for(result, slo);
  result.attainment_ttft = a.ttft;
  result.attainment_tpot = a.tpot;
  result.attainment_e2e = a.e2e;
  return result;
}

Attainment attainment_for(const SimResult& result, const SloSpec& slo) {
  Attainment a;
  if (result.records.empty()) return a;
  const double ttft_d = slo.ttft_deadline();
  const double tpot_d = slo.tpot_deadline();
  const double e2e_d = slo.e2e_deadline(result.mean_output_len);
  std::size_t t = 0, p = 0, e = 0;
  for (const auto& rec : result.records) {
    if (rec.prefilled && rec.ttft <= ttft_d) ++t;
    if (rec.completed && rec.tpot <= tpot_d) ++p;
    if (rec.completed && rec.e2e <= e2e_d) ++e;
  }
  const double n = static_cast<double>(result.records.size());
  a.ttft = static_cast<double>(t) / n;
  a.tpot = static_cast<double>(p) / n;
  a.e2e = static_cast<double>(e) / n;
  return a;
}

std::vector<CurvePoint> attainment_curve(const SimResult& result, const SloSpec& slo,
                                         const std::vector<double>& scales) {
  for (std::size_t k = 0; k < scales.size(); ++k) {
    if (!(scales[k] > 0) || (k > 0 && scales[k] < scales[k - 1])) {
      throw Error(ErrorCode::kInvalidInput, "scales must be positive and sorted");
    }
  }
  std::vector<CurvePoint> out;
  out.reserve(scales.size());
  for (double s : scales) out.push_back({s, attainment_for(result, slo.at_scale(s))});
  return out;
}

std::vector<CurvePoint> attainment_at_scale(const DeploymentPlan& plan, const ClusterSpec& cluster,
                                            const ModelSpec& model, const RequestTrace& trace,
                                            const SloSpec& slo, const CostParams& params,
                                            std::uint64_t seed, const std::vector<double>& scales) {
  return attainment_curve(simulate(plan, cluster, model, trace, slo, params, seed), slo, scales);
}

double kv_share_of_e2e(const SimResult& result) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& rec : result.records) {
    if (!rec.completed || !(rec.e2e > 0)) continue;
    sum += rec.kv / rec.e2e;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace hetplan
