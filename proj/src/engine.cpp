#include "ppn/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#ifdef __linux__
#include <sched.h>
#endif

#include "ppn/adam.hpp"
#include "ppn/rng.hpp"

namespace ppn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Scalar>
BenchReport summarize(const std::string& mode, const std::vector<CycleResult<Scalar>>& cycles) {
  BenchReport r;
  r.mode = mode;
  r.runs = static_cast<Index>(cycles.size());
  r.min_s = std::numeric_limits<double>::infinity();
  r.max_s = 0;
  double total = 0;
  for (const auto& c : cycles) {
    r.min_s = std::min(r.min_s, c.cycle_latency);
    r.max_s = std::max(r.max_s, c.cycle_latency);
    total += c.cycle_latency;
  }
  r.mean_s = total / static_cast<double>(cycles.size());
  // Keep min <= mean <= max exact under rounding of the running sum.
  r.mean_s = std::clamp(r.mean_s, r.min_s, r.max_s);
  r.threads = worker_thread_budget();
  return r;
}

template <typename Scalar>
void check_workers(const Worker<Scalar>& seg, const Worker<Scalar>& recon, Index runs) {
  if (runs < 1) throw ConfigError("benchmark: runs must be >= 1");
  if (seg.id == recon.id) throw ConfigError("benchmark: workers need distinct ids");
  if (seg.id < 0 || seg.id > 1 || recon.id < 0 || recon.id > 1) throw ConfigError("benchmark: worker ids are 0 and 1");
}

// Two long-lived threads, one per worker. cycle() hands both the same
// immutable input and returns once both have finished (the barrier).
template <typename Scalar>
class ParallelRig {
 public:
  ParallelRig(const Worker<Scalar>& seg, const Worker<Scalar>& recon, bool concurrent)
      : workers_{&seg, &recon}, concurrent_(concurrent) {
    for (std::size_t i = 0; i < 2; ++i) threads_[i] = std::thread([this, i] { loop(i); });
  }

  ~ParallelRig() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    start_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  ParallelRig(const ParallelRig&) = delete;
  ParallelRig& operator=(const ParallelRig&) = delete;

  CycleResult<Scalar> cycle(const BevSequence& input) {
    input_ = &input;
    const auto start = Clock::now();
    if (concurrent_) {
      dispatch({true, true});
    } else {
      dispatch({true, false});
      dispatch({false, true});
    }
    CycleResult<Scalar> result;
    result.cycle_latency = seconds_since(start);
    for (std::size_t i = 0; i < 2; ++i) {
      if (slots_[i].error) {
        try {
          std::rethrow_exception(slots_[i].error);
        } catch (const std::exception& e) {
          throw CycleError(workers_[i]->id, e.what());
        }
      }
    }
    result.seg_output = std::move(slots_[0].output);
    result.recon_output = std::move(slots_[1].output);
    result.per_worker_latency[static_cast<std::size_t>(workers_[0]->id)] = slots_[0].latency;
    result.per_worker_latency[static_cast<std::size_t>(workers_[1]->id)] = slots_[1].latency;
    return result;
  }

 private:
  struct Slot {
    bool armed = false;
    Tensor<Scalar> output;
    double latency = 0;
    std::exception_ptr error;
  };

  void dispatch(std::array<bool, 2> which) {
    std::unique_lock lock(mu_);
    for (std::size_t i = 0; i < 2; ++i) {
      if (!which[i]) continue;
      slots_[i].armed = true;
      slots_[i].error = nullptr;
      ++pending_;
    }
    start_cv_.notify_all();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
  }

  void loop(std::size_t i) {
    for (;;) {
      {
        std::unique_lock lock(mu_);
        start_cv_.wait(lock, [&] { return stop_ || slots_[i].armed; });
        if (stop_) return;
        slots_[i].armed = false;
      }
      const auto start = Clock::now();
      try {
        // Each worker converts its own copy of the input.
        const Tensor<Scalar> x = sequence_tensor<Scalar>(*input_);
        slots_[i].output = workers_[i]->network.forward(x);
      } catch (...) {
        slots_[i].error = std::current_exception();
      }
      slots_[i].latency = seconds_since(start);
      {
        std::lock_guard lock(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  std::array<const Worker<Scalar>*, 2> workers_;
  bool concurrent_;
  std::array<Slot, 2> slots_;
  std::array<std::thread, 2> threads_;
  const BevSequence* input_ = nullptr;
  std::mutex mu_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  int pending_ = 0;
  bool stop_ = false;
};

template <typename Scalar>
BenchRun<Scalar> finish(const std::string& mode, std::vector<CycleResult<Scalar>> cycles) {
  // Outputs only matter for the last cycle; drop the rest.
  for (std::size_t i = 0; i + 1 < cycles.size(); ++i) {
    cycles[i].seg_output = {};
    cycles[i].recon_output = {};
  }
  BenchRun<Scalar> run;
  run.report = summarize(mode, cycles);
  run.cycles = std::move(cycles);
  return run;
}

}  // namespace

const char* role_name(Role role) { return role == Role::kSegmentation ? "segmentation" : "reconstruction"; }

std::string BenchReport::to_text() const {
  std::ostringstream os;
  os.precision(9);
  os << "mode=" << mode << '\n'
     << "runs=" << runs << '\n'
     << "min_s=" << min_s << '\n'
     << "max_s=" << max_s << '\n'
     << "mean_s=" << mean_s << '\n';
  if (speedup_vs) os << "speedup_vs=" << *speedup_vs << '\n';
  os << "threads=" << threads << '\n';
  return os.str();
}

BenchReport BenchReport::from_text(const std::string& text) {
  BenchReport r;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "mode") r.mode = value;
    else if (key == "runs") r.runs = std::stoll(value);
    else if (key == "min_s") r.min_s = std::stod(value);
    else if (key == "max_s") r.max_s = std::stod(value);
    else if (key == "mean_s") r.mean_s = std::stod(value);
    else if (key == "speedup_vs") r.speedup_vs = std::stod(value);
    else if (key == "threads") r.threads = std::stoi(value);
  }
  return r;
}

int worker_thread_budget() {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
#ifdef __linux__
  // The affinity mask can be narrower than the online CPU count (containers, taskset).
  cpu_set_t mask;
  if (sched_getaffinity(0, sizeof(mask), &mask) == 0) threads = std::max(1, std::min(threads, CPU_COUNT(&mask)));
#endif
  if (const char* cap = std::getenv("PPN_THREADS")) {
    const int requested = std::atoi(cap);
    if (requested >= 1) threads = std::min(threads, requested);
  }
  return threads;
}

template <typename Scalar>
BenchRun<Scalar> run_sequential(const Worker<Scalar>& seg, const Worker<Scalar>& recon, const BevSequence& input,
                                Index runs) {
  check_workers(seg, recon, runs);
  std::vector<CycleResult<Scalar>> cycles;
  for (Index i = 0; i < kWarmupRuns + runs; ++i) {
    CycleResult<Scalar> c;
    const auto start = Clock::now();
    const Tensor<Scalar> x = sequence_tensor<Scalar>(input);
    auto t0 = Clock::now();
    c.seg_output = seg.network.forward(x);
    c.per_worker_latency[static_cast<std::size_t>(seg.id)] = seconds_since(t0);
    t0 = Clock::now();
    c.recon_output = recon.network.forward(x);
    c.per_worker_latency[static_cast<std::size_t>(recon.id)] = seconds_since(t0);
    c.cycle_latency = seconds_since(start);
    if (i >= kWarmupRuns) cycles.push_back(std::move(c));
  }
  return finish("sequential", std::move(cycles));
}

template <typename Scalar>
BenchRun<Scalar> run_parallel(const Worker<Scalar>& seg, const Worker<Scalar>& recon, const BevSequence& input,
                              Index runs) {
  check_workers(seg, recon, runs);
  ParallelRig<Scalar> rig(seg, recon, worker_thread_budget() >= 2);
  std::vector<CycleResult<Scalar>> cycles;
  for (Index i = 0; i < kWarmupRuns + runs; ++i) {
    CycleResult<Scalar> c = rig.cycle(input);
    if (i >= kWarmupRuns) cycles.push_back(std::move(c));
  }
  return finish("parallel", std::move(cycles));
}

void pair_reports(const BenchReport& sequential, BenchReport& parallel) {
  parallel.speedup_vs = sequential.mean_s / parallel.mean_s;
}

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kMssce: return "mssce";
    case LossKind::kIou: return "iou";
    case LossKind::kMseSmoothL1: return "mse_smoothl1";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "mssce") return LossKind::kMssce;
  if (name == "iou") return LossKind::kIou;
  if (name == "mse_smoothl1") return LossKind::kMseSmoothL1;
  throw ConfigError("unknown loss '" + name + "' (valid: mssce, iou, mse_smoothl1)");
}

void TrainConfig::validate() const {
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("train: lr must be >= 0");
  weights().validate();
  canny.validate();
  if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (future_offset_d < 0) throw ConfigError("train: future offset d must be >= 0");
  if (future_len_F < 1) throw ConfigError("train: future length F must be >= 1");
}

namespace {

template <typename Scalar>
void check_finite(Scalar loss, Index iteration) {
  if (!std::isfinite(static_cast<double>(loss))) {
    throw NumericError("non-finite loss at iteration " + std::to_string(iteration));
  }
}

template <typename Scalar>
AdamState<Scalar> make_adam(const TrainConfig& cfg) {
  AdamState<Scalar> adam;
  adam.lr = static_cast<Scalar>(cfg.lr);
  return adam;
}

}  // namespace

template <typename Scalar>
TrainLog train_reconstruction(Worker<Scalar>& recon, const Worker<Scalar>& seg, const SequenceStream& data,
                              const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.loss_kind != LossKind::kMssce && cfg.loss_kind != LossKind::kIou) {
    throw ConfigError("train_reconstruction: loss must be mssce or iou");
  }
  Network<Scalar>& net = recon.network;
  AdamState<Scalar> adam = make_adam<Scalar>(cfg);
  const std::vector<Tensor<Scalar>*> params = net.parameters();
  TrainLog log;
  for (Index it = 0; it < cfg.iterations; ++it) {
    const Tensor<Scalar> input = sequence_tensor<Scalar>(data(it));
    Tensor<Scalar> target = seg.network.forward(input);
    target.values() = (target.values() > Scalar(0.5)).template cast<Scalar>();

    net.zero_grad();
    const Tensor<Scalar> pred = net.forward_train(input);
    if (!pred.values().isFinite().all()) check_finite(std::numeric_limits<Scalar>::quiet_NaN(), it);
    const LossResult<Scalar> loss = cfg.loss_kind == LossKind::kMssce
                                        ? mssce(pred, target, cfg.weights(), cfg.canny, cfg.edge_term)
                                        : iou_loss(pred, target);
    check_finite(loss.value, it);
    net.backward(loss.grad);
    adam_step<Scalar>(params, adam);
    log.push_back({it, static_cast<double>(loss.value), pixel_accuracy(pred, target), {}});
  }
  return log;
}

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> future_window(const std::vector<BevMap>& store, Index t, Index t_in,
                                                        Index d, Index f) {
  const Index size = static_cast<Index>(store.size());
  if (t - (t_in - 1) < 0 || t + d + f > size) {
    throw DataError("future window at t=" + std::to_string(t) + " needs frames " + std::to_string(t - (t_in - 1)) +
                    ".." + std::to_string(t + d + f - 1) + ", store holds 0.." + std::to_string(size - 1));
  }
  auto slice = [&store](Index first, Index count) {
    std::vector<BevMap> maps(store.begin() + first, store.begin() + first + count);
    return sequence_tensor<Scalar>(stack_sequence(std::move(maps)));
  };
  return {slice(t - (t_in - 1), t_in), slice(t + d, f)};
}

template <typename Scalar>
TrainLog train_future_segmentation(Network<Scalar>& net, const std::vector<BevMap>& store, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.loss_kind != LossKind::kMseSmoothL1) {
    throw ConfigError("train_future_segmentation: loss must be mse_smoothl1");
  }
  const NetworkConfig& nc = net.config();
  if (!nc.skips || nc.out_channels != cfg.future_len_F) {
    throw ConfigError("train_future_segmentation: need a skip-connected network with F=" +
                      std::to_string(cfg.future_len_F) + " output channels");
  }
  const Index lo = nc.t_in - 1;
  const Index hi = static_cast<Index>(store.size()) - cfg.future_offset_d - cfg.future_len_F;
  if (hi < lo) {
    throw DataError("store of " + std::to_string(store.size()) + " frames too short for T=" +
                    std::to_string(nc.t_in) + ", d=" + std::to_string(cfg.future_offset_d) +
                    ", F=" + std::to_string(cfg.future_len_F));
  }

  AdamState<Scalar> adam = make_adam<Scalar>(cfg);
  const std::vector<Tensor<Scalar>*> params = net.parameters();
  SplitMix64 rng(mix64(cfg.seed));
  TrainLog log;
  for (Index it = 0; it < cfg.iterations; ++it) {
    const Index t = lo + static_cast<Index>(rng.next() % static_cast<std::uint64_t>(hi - lo + 1));
    const auto [input, target] = future_window<Scalar>(store, t, nc.t_in, cfg.future_offset_d, cfg.future_len_F);

    net.zero_grad();
    const Tensor<Scalar> pred = net.forward_train(input);
    if (!pred.values().isFinite().all()) check_finite(std::numeric_limits<Scalar>::quiet_NaN(), it);
    LossResult<Scalar> loss = mse(pred, target);
    const LossResult<Scalar> sl1 = smooth_l1(pred, target, static_cast<Scalar>(cfg.beta_smooth));
    loss.value += sl1.value;
    loss.grad.values() += sl1.grad.values();
    check_finite(loss.value, it);
    net.backward(loss.grad);
    adam_step<Scalar>(params, adam);

    TrainRecord rec{it, static_cast<double>(loss.value), pixel_accuracy(pred, target), {}};
    const Index plane = pred.height() * pred.width();
    for (Index c = 0; c < pred.channels(); ++c) {
      const Shape one{1, pred.height(), pred.width()};
      rec.frame_accuracy.push_back(pixel_accuracy(Tensor<Scalar>(one, pred.values().segment(c * plane, plane)),
                                                  Tensor<Scalar>(one, target.values().segment(c * plane, plane))));
    }
    log.push_back(std::move(rec));
  }
  return log;
}

std::pair<double, double> smoothed_endpoints(const TrainLog& log, Index window) {
  if (log.empty() || window < 1) throw DataError("smoothed_endpoints: empty log or window");
  const auto w = static_cast<std::ptrdiff_t>(std::min<std::size_t>(static_cast<std::size_t>(window), log.size()));
  auto mean = [](auto first, auto last) {
    double s = 0;
    for (auto it = first; it != last; ++it) s += it->loss;
    return s / static_cast<double>(std::distance(first, last));
  };
  return {mean(log.begin(), log.begin() + w), mean(log.end() - w, log.end())};
}

#define PPN_INSTANTIATE_ENGINE(S)                                                                             \
  template BenchRun<S> run_sequential(const Worker<S>&, const Worker<S>&, const BevSequence&, Index);         \
  template BenchRun<S> run_parallel(const Worker<S>&, const Worker<S>&, const BevSequence&, Index);           \
  template TrainLog train_reconstruction(Worker<S>&, const Worker<S>&, const SequenceStream&,                 \
                                         const TrainConfig&);                                                 \
  template std::pair<Tensor<S>, Tensor<S>> future_window(const std::vector<BevMap>&, Index, Index, Index,     \
                                                         Index);                                              \
  template TrainLog train_future_segmentation(Network<S>&, const std::vector<BevMap>&, const TrainConfig&);

PPN_INSTANTIATE_ENGINE(float)
PPN_INSTANTIATE_ENGINE(double)

#undef PPN_INSTANTIATE_ENGINE

}  // namespace ppn
