#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppn/bev.hpp"
#include "ppn/loss.hpp"
#include "ppn/network.hpp"

namespace ppn {

enum class Role { kSegmentation, kReconstruction };

const char* role_name(Role role);

/// An execution context that exclusively owns one network.
template <typename Scalar>
struct Worker {
  int id = 0;
  Role role = Role::kSegmentation;
  Network<Scalar> network;
};

/// A worker failed mid-cycle; no partial outputs are returned.
struct CycleError : std::runtime_error {
  CycleError(int worker_id, const std::string& what)
      : std::runtime_error("worker " + std::to_string(worker_id) + " failed: " + what), worker(worker_id) {}
  int worker;
};

template <typename Scalar>
struct CycleResult {
  Tensor<Scalar> seg_output;
  Tensor<Scalar> recon_output;
  double cycle_latency = 0;                     // s, dispatch to both outputs ready
  std::array<double, 2> per_worker_latency{};   // s, indexed by worker id
};

struct BenchReport {
  std::string mode;  // "sequential" | "parallel"
  Index runs = 0;    // post-warmup samples
  double min_s = 0;
  double max_s = 0;
  double mean_s = 0;
  std::optional<double> speedup_vs;  // paired sequential mean / this mean
  int threads = 0;                   // worker hardware threads in effect

  /// One `key=value` per line: mode, runs, min_s, max_s, mean_s,
  /// speedup_vs (when paired), threads.
  std::string to_text() const;
  static BenchReport from_text(const std::string& text);
};

template <typename Scalar>
struct BenchRun {
  BenchReport report;
  std::vector<CycleResult<Scalar>> cycles;  // post-warmup; outputs kept on the last one only
};

inline constexpr Index kWarmupRuns = 3;

/// Hardware threads available to workers: hardware_concurrency, capped by
/// the PPN_THREADS environment variable when set.
int worker_thread_budget();

/// Segmentation then reconstruction on the calling thread, one tensor
/// conversion per cycle.
template <typename Scalar>
BenchRun<Scalar> run_sequential(const Worker<Scalar>& seg, const Worker<Scalar>& recon, const BevSequence& input,
                                Index runs);

/// Both workers on their own long-lived threads; each materializes its own
/// input tensor, and the cycle ends at a completion barrier.
template <typename Scalar>
BenchRun<Scalar> run_parallel(const Worker<Scalar>& seg, const Worker<Scalar>& recon, const BevSequence& input,
                              Index runs);

/// Sets `speedup_vs` on the parallel report from the sequential mean.
void pair_reports(const BenchReport& sequential, BenchReport& parallel);

enum class LossKind { kMssce, kIou, kMseSmoothL1 };

const char* loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct TrainConfig {
  double lr = 1e-4;
  double lambda_weight = 0.85;
  double beta_smooth = 1.0;
  Index iterations = 700;
  LossKind loss_kind = LossKind::kMssce;
  std::uint64_t seed = 0;
  Index future_offset_d = 1;
  Index future_len_F = 1;
  EdgeTerm edge_term = EdgeTerm::kCanny;
  CannyParams canny;

  void validate() const;
  LossWeights weights() const { return {lambda_weight, beta_smooth}; }
};

struct TrainRecord {
  Index iteration = 0;
  double loss = 0;
  double accuracy = 0;
  std::vector<double> frame_accuracy;  // per output channel (future regime)
};

using TrainLog = std::vector<TrainRecord>;
using SequenceStream = std::function<BevSequence(Index iteration)>;

/// Trains `recon` to reproduce the binarized output of the frozen `seg`
/// network. Only `recon` is mutated.
template <typename Scalar>
TrainLog train_reconstruction(Worker<Scalar>& recon, const Worker<Scalar>& seg, const SequenceStream& data,
                              const TrainConfig& cfg);

/// Input frames t-(T-1) .. t and target frames t+d .. t+d+F-1 from a store.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> future_window(const std::vector<BevMap>& store, Index t, Index t_in,
                                                        Index d, Index f);

/// Trains a skip-connected network with F output channels to predict future
/// frames under mse + smooth_l1. Window end t is drawn per iteration from
/// the config seed.
template <typename Scalar>
TrainLog train_future_segmentation(Network<Scalar>& net, const std::vector<BevMap>& store, const TrainConfig& cfg);

/// Mean loss over the first and last `window` records.
std::pair<double, double> smoothed_endpoints(const TrainLog& log, Index window);

}  // namespace ppn
