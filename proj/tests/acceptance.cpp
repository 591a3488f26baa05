// Acceptance checks. `acceptance N` runs criterion N; with no argument all
// eight run in order. Each prints one PASS / FAIL / NOT EVALUATED line.
// Exit status: 0 pass, 1 fail, 77 when a precondition of the environment is
// unmet (ctest reports that as skipped).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "ppn/bev.hpp"
#include "ppn/datagen.hpp"
#include "ppn/engine.hpp"
#include "ppn/gradient_suite.hpp"
#include "ppn/loss.hpp"
#include "ppn/model_io.hpp"
#include "ppn/network.hpp"

using namespace ppn;

namespace {

// Criterion 1
constexpr int kVoxelClouds = 500;
constexpr int kVoxelMaxPoints = 1000;
constexpr Index kVoxelMaxDim = 64;
constexpr double kVoxelBudgetS = 30;
// Criterion 2
constexpr double kKernelGradTol = 1e-4;
constexpr double kNetworkGradTol = 1e-3;
constexpr double kGradBudgetS = 120;
// Criterion 3
constexpr double kSpeedupRatio = 0.75;
constexpr Index kBenchRuns = 20;
constexpr double kBenchBudgetS = 120;
// Criterion 4
constexpr Index kTrainIterations = 300;
constexpr Index kSmoothWindow = 20;
constexpr double kLossDropRatio = 0.5;
constexpr double kIouAccuracy = 0.90;
constexpr double kTrainBudgetS = 600;
// Criterion 5
constexpr double kIdentityTol = 1e-12;
constexpr double kLossBudgetS = 5;
// Criterion 6
constexpr double kEdgeBand = 2.0;
constexpr double kCannyBudgetS = 5;
// Criterion 7, 8
constexpr double kShapeBudgetS = 30;
constexpr double kSerialBudgetS = 30;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kNotEvaluated = 77;

struct Verdict {
  int status = kPass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Collects failed conditions with a short reason each.
struct Checks {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
  std::string summary() const {
    std::string s;
    for (std::size_t i = 0; i < failures.size() && i < 5; ++i) s += (i ? "; " : "") + failures[i];
    if (failures.size() > 5) s += "; +" + std::to_string(failures.size() - 5) + " more";
    return s;
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Verdict timed(double budget_s, double elapsed_s, Checks& checks, const std::string& detail) {
  checks.expect(elapsed_s < budget_s, "runtime " + fmt(elapsed_s) + " s over budget " + fmt(budget_s) + " s");
  return {checks.ok() ? kPass : kFail, checks.ok() ? detail : checks.summary() + " | " + detail};
}

// 1. Voxelization oracle equivalence.
Verdict voxelization() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<Index> dim(1, kVoxelMaxDim);
  std::uniform_int_distribution<int> count(0, kVoxelMaxPoints);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long long cells = 0, mismatched = 0;
  Checks checks;
  for (int trial = 0; trial < kVoxelClouds; ++trial) {
    BevConfig c;
    c.width = dim(rng);
    c.height = dim(rng);
    c.depth_size = dim(rng);
    c.resolution = 0.05 + 0.95 * unit(rng);
    c.threshold = 0.01 + 0.98 * unit(rng);
    PointCloud cloud;
    const int n = count(rng);
    // Extents slightly beyond the grid so some points fall outside; a third
    // of the points sit exactly on voxel boundaries.
    for (int i = 0; i < n; ++i) {
      auto coord = [&](Index extent) {
        const double half = 0.6 * static_cast<double>(extent) * c.resolution;
        double v = (2 * unit(rng) - 1) * half;
        if (unit(rng) < 0.33) v = std::round(v / c.resolution) * c.resolution;
        return static_cast<float>(v);
      };
      cloud.points.push_back({coord(c.width), coord(c.height), coord(c.depth_size), static_cast<float>(unit(rng))});
    }
    const BevMap got = pointcloud_to_bev(cloud, c);
    const auto want = oracle::bev(cloud, c);
    for (Index x = 0; x < c.width; ++x) {
      for (Index y = 0; y < c.height; ++y) {
        ++cells;
        if (got.cells(x, y) != want[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)]) ++mismatched;
      }
    }
  }
  checks.expect(mismatched == 0, std::to_string(mismatched) + " mismatched cells");
  const double elapsed = seconds_since(t0);
  return timed(kVoxelBudgetS, elapsed, checks,
               std::to_string(kVoxelClouds) + " clouds, " + std::to_string(cells) + " cells, " +
                   std::to_string(mismatched) + " mismatches, " + fmt(elapsed) + " s");
}

// 2. Gradient suite.
Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradSuiteOptions opt;
  opt.kernel_threshold = kKernelGradTol;
  opt.network_threshold = kNetworkGradTol;
  const std::vector<GradCheckEntry> entries = run_gradient_suite(opt);
  Checks checks;
  double worst_kernel = 0, worst_network = 0;
  for (const GradCheckEntry& e : entries) {
    checks.expect(e.passed(), e.kernel + " at " + fmt(e.worst_rel_error));
    const bool network = e.threshold == kNetworkGradTol && e.kernel.rfind("network", 0) == 0;
    (network ? worst_network : worst_kernel) = std::max(network ? worst_network : worst_kernel, e.worst_rel_error);
  }
  for (const char* required : {"conv2d", "conv_transpose2d", "batchnorm2d", "leaky_relu", "maxpool2d", "sigmoid",
                               "tanh", "mse", "smooth_l1", "iou_loss", "mssce", "network_segmentation",
                               "network_reconstruction"}) {
    bool found = false;
    for (const GradCheckEntry& e : entries) found = found || e.kernel == required;
    checks.expect(found, std::string("missing check ") + required);
  }
  const double elapsed = seconds_since(t0);
  return timed(kGradBudgetS, elapsed, checks,
               std::to_string(entries.size()) + " checks, worst kernel " + fmt(worst_kernel) + " (<= " +
                   fmt(kKernelGradTol) + "), worst network " + fmt(worst_network) + " (<= " + fmt(kNetworkGradTol) +
                   "), " + fmt(elapsed) + " s");
}

BevSequence synthetic_window(const BevConfig& bev, Index t0, Index t_len, const SceneSpec& scene) {
  std::vector<BevMap> maps;
  for (Index t = t0; t < t0 + t_len; ++t) maps.push_back(pointcloud_to_bev(gen_frame(scene, t), bev));
  return stack_sequence(std::move(maps));
}

// 3. Parallel speedup with bitwise-identical outputs.
Verdict speedup() {
  const auto t0 = std::chrono::steady_clock::now();
  // Two equal-cost networks: same topology, different weights.
  NetworkConfig a = NetworkConfig::segmentation(16, 16, 3);
  a.seed = 1;
  NetworkConfig b = a;
  b.seed = 2;
  const Worker<float> seg{0, Role::kSegmentation, Network<float>(a)};
  const Worker<float> recon{1, Role::kReconstruction, Network<float>(b)};
  const BevSequence input = synthetic_window(BevConfig::desk(), 0, 16, SceneSpec{});

  const BenchRun<float> seq = run_sequential(seg, recon, input, kBenchRuns);
  const BenchRun<float> par = run_parallel(seg, recon, input, kBenchRuns);
  BenchReport par_report = par.report;
  pair_reports(seq.report, par_report);

  Checks checks;
  const auto& sc = seq.cycles.back();
  const auto& pc = par.cycles.back();
  const bool identical = sc.seg_output.shape() == pc.seg_output.shape() &&
                         sc.recon_output.shape() == pc.recon_output.shape() &&
                         (sc.seg_output.values() == pc.seg_output.values()).all() &&
                         (sc.recon_output.values() == pc.recon_output.values()).all();
  checks.expect(identical, "parallel outputs differ from sequential outputs");
  const double ratio = par.report.mean_s / seq.report.mean_s;
  const int threads = worker_thread_budget();
  const double elapsed = seconds_since(t0);
  const std::string detail = "sequential mean " + fmt(seq.report.mean_s * 1e3) + " ms, parallel mean " +
                             fmt(par.report.mean_s * 1e3) + " ms, ratio " + fmt(ratio) + " (<= " +
                             fmt(kSpeedupRatio) + "), outputs bitwise " + (identical ? "identical" : "DIFFERENT") +
                             ", threads " + std::to_string(threads) + ", " + fmt(elapsed) + " s";
  if (threads < 2) {
    // The bitwise part still has to hold; only the timing claim is skipped.
    checks.expect(elapsed < kBenchBudgetS, "runtime over budget");
    if (!checks.ok()) return {kFail, checks.summary() + " | " + detail};
    return {kNotEvaluated, "precondition unmet (" + std::to_string(threads) +
                               " hardware thread available, need >= 2) | " + detail};
  }
  checks.expect(ratio <= kSpeedupRatio, "parallel/sequential ratio " + fmt(ratio));
  return timed(kBenchBudgetS, elapsed, checks, detail);
}

// 4. Training convergence.
Verdict convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr Index kTIn = 16;
  constexpr Index kDepth = 2;
  constexpr Index kWindows = 32;
  const BevConfig bev = BevConfig::desk();
  const SceneSpec scene;
  std::vector<BevMap> store;
  for (Index t = 0; t < kTIn + kWindows; ++t) store.push_back(pointcloud_to_bev(gen_frame(scene, t), bev));
  auto window = [&](Index it) {
    const Index first = it % kWindows;
    return stack_sequence(std::vector<BevMap>(store.begin() + first, store.begin() + first + kTIn));
  };

  // The segmentation network is trained on next-frame prediction first and
  // then frozen; its binarized output is the reconstruction target.
  NetworkConfig seg_config = NetworkConfig::segmentation(kTIn, 16, kDepth);
  seg_config.seed = 1;
  Worker<float> seg{0, Role::kSegmentation, Network<float>(seg_config)};
  TrainConfig future;
  future.loss_kind = LossKind::kMseSmoothL1;
  future.iterations = kTrainIterations;
  future.seed = 3;
  const TrainLog seg_log = train_future_segmentation(seg.network, store, future);

  auto train = [&](LossKind kind) {
    NetworkConfig rc = NetworkConfig::reconstruction(kTIn, 16, kDepth);
    rc.seed = 2;
    Worker<float> recon{1, Role::kReconstruction, Network<float>(rc)};
    TrainConfig cfg;
    cfg.loss_kind = kind;
    cfg.iterations = kTrainIterations;
    return train_reconstruction<float>(recon, seg, window, cfg);
  };
  const TrainLog mssce_log = train(LossKind::kMssce);
  const TrainLog iou_log = train(LossKind::kIou);

  const auto [first, last] = smoothed_endpoints(mssce_log, kSmoothWindow);
  const double accuracy = iou_log.back().accuracy;
  Checks checks;
  checks.expect(last < kLossDropRatio * first, "MSSCE smoothed loss " + fmt(first) + " -> " + fmt(last));
  checks.expect(accuracy >= kIouAccuracy, "IoU-run accuracy " + fmt(accuracy));
  const double elapsed = seconds_since(t0);
  return timed(kTrainBudgetS, elapsed, checks,
               "(a) MSSCE smoothed loss " + fmt(first) + " -> " + fmt(last) + ", ratio " + fmt(last / first) +
                   " (< " + fmt(kLossDropRatio) + "); (b) IoU-run pixel accuracy " + fmt(accuracy) + " (>= " +
                   fmt(kIouAccuracy) + "); segmentation pre-training loss " + fmt(seg_log.front().loss) + " -> " +
                   fmt(seg_log.back().loss) + ", " + fmt(elapsed) + " s");
}

Tensor<double> random_unit(const Shape& shape, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// 5. Loss identities in 64-bit.
Verdict loss_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(5);
  const CannyParams canny_params;
  Checks checks;
  double worst = 0;
  auto near = [&](double a, double b, const std::string& what) {
    const double d = std::abs(a - b);
    worst = std::max(worst, d);
    checks.expect(d <= kIdentityTol, what + " off by " + fmt(d));
  };
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<double> pred = random_unit({1, 24, 24}, rng);
    Tensor<double> target = random_unit({1, 24, 24}, rng);
    target.values() = (target.values() > 0.6).cast<double>();
    const double beta = 0.25 + trial * 0.1;
    const double m = mse(pred, target).value;
    const double s = smooth_l1(pred, target, beta).value;
    const double e = edge_preserving(pred, target, canny_params).value;

    near(mse_canny(pred, target, LossWeights{1.0, beta}, canny_params).value, m, "lambda=1 mse_canny");
    near(smoothl1_canny(pred, target, LossWeights{1.0, beta}, canny_params).value, s, "lambda=1 smoothl1_canny");
    near(mse_canny(pred, target, LossWeights{0.0, beta}, canny_params).value, e, "lambda=0 mse_canny");
    near(smoothl1_canny(pred, target, LossWeights{0.0, beta}, canny_params).value, e, "lambda=0 smoothl1_canny");
    for (double lambda : {0.0, 0.25, 0.85, 1.0}) {
      const LossWeights w{lambda, beta};
      near(mssce(pred, target, w, canny_params).value,
           mse_canny(pred, target, w, canny_params).value + smoothl1_canny(pred, target, w, canny_params).value,
           "mssce additivity");
    }
    near(mse(pred, pred).value, 0, "mse identity");
    near(smooth_l1(pred, pred, beta).value, 0, "smooth_l1 identity");
    near(edge_preserving(pred, pred, canny_params).value, 0, "edge identity");
    near(mse_canny(pred, pred, LossWeights{0.85, beta}, canny_params).value, 0, "mse_canny identity");
    near(smoothl1_canny(pred, pred, LossWeights{0.85, beta}, canny_params).value, 0, "smoothl1_canny identity");
    near(mssce(pred, pred, LossWeights{0.85, beta}, canny_params).value, 0, "mssce identity");
    near(iou_loss(target, target).value, 0, "iou identity");

    // Branch continuity at |d| = beta, approached from both sides.
    const Tensor<double> zero({1}, 0.0);
    const double delta = 1e-13;
    for (double sign : {-1.0, 1.0}) {
      const double below = smooth_l1(Tensor<double>({1}, sign * (beta - delta)), zero, beta).value;
      const double at = smooth_l1(Tensor<double>({1}, sign * beta), zero, beta).value;
      const double above = smooth_l1(Tensor<double>({1}, sign * (beta + delta)), zero, beta).value;
      near(at, 0.5 * beta, "smooth_l1 at beta");
      near(below, above, "smooth_l1 across beta");
    }
  }
  const double elapsed = seconds_since(t0);
  return timed(kLossBudgetS, elapsed, checks,
               "worst deviation " + fmt(worst) + " (<= " + fmt(kIdentityTol) + "), " + fmt(elapsed) + " s");
}

// 6. Canny behavior.
Verdict canny_behavior() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks checks;
  for (double level : {0.0, 0.3, 1.0}) {
    checks.expect(canny(Eigen::ArrayXXd::Constant(32, 40, level)).cast<int>().sum() == 0,
                  "constant image " + fmt(level) + " has edges");
  }
  int band_images = 0;
  for (Index w : {16, 17, 32, 48}) {
    for (Index h : {8, 20, 33}) {
      Eigen::ArrayXXd img = Eigen::ArrayXXd::Zero(h, w);
      const Index step = w / 2;
      img.rightCols(w - step) = 1.0;
      const EdgeMap e = canny(img);
      const double boundary = static_cast<double>(step) - 0.5;
      bool in_band = e.cast<int>().sum() > 0;
      for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
          if (e(y, x) && std::abs(static_cast<double>(x) - boundary) > kEdgeBand) in_band = false;
        }
      }
      checks.expect(in_band, "step " + std::to_string(h) + "x" + std::to_string(w) + " edges outside band");
      ++band_images;
    }
  }
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::ArrayXXd img(24, 24);
    for (Index i = 0; i < img.size(); ++i) img(i) = u(rng);
    if (trial % 2) img = (img > 0.5).cast<double>();
    const EdgeMap e = canny(img);
    checks.expect(((e == 0) || (e == 1)).all(), "non-binary output");
  }
  const double elapsed = seconds_since(t0);
  return timed(kCannyBudgetS, elapsed, checks,
               "constant images edge-free, " + std::to_string(band_images) + " step images within " +
                   fmt(kEdgeBand) + " px, 50 random images binary, " + fmt(elapsed) + " s");
}

// 7. Shapes and architecture.
Verdict shapes() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks checks;
  std::mt19937 rng(7);
  std::bernoulli_distribution bit(0.3);
  for (Index depth : {1, 2, 3}) {
    for (bool skips : {true, false}) {
      const Network<float> net(NetworkConfig{4, 8, depth, 1, Activation::kSigmoid, skips, 0});
      for (const auto& [h, w] : {std::pair<Index, Index>{64, 64}, {32, 48}, {24, 40}}) {
        Tensor<float> x({4, h, w});
        for (Index i = 0; i < x.size(); ++i) x[i] = bit(rng) ? 1.f : 0.f;
        const Tensor<float> y = net.forward(x);
        checks.expect(y.shape() == Shape({1, h, w}), "depth " + std::to_string(depth) + " output " +
                                                         shape_string(y.shape()) + " for " + std::to_string(h) +
                                                         "x" + std::to_string(w));
      }
    }
    const Network<float> seg(NetworkConfig::segmentation(16, 16, depth));
    const Network<float> rec(NetworkConfig::reconstruction(16, 16, depth));
    for (std::size_t j = 0; j < seg.decoder().size(); ++j) {
      const Shape& a = seg.decoder()[j].block.first.conv.weight.shape();
      const Shape& b = rec.decoder()[j].block.first.conv.weight.shape();
      const Index tap = seg.encoder()[seg.decoder().size() - 1 - j].second.conv.weight.dim(0);
      const bool rule = a.size() == 4 && b.size() == 4 && a[0] == b[0] && a[2] == b[2] && a[3] == b[3] &&
                        a[1] - b[1] == tap && b[1] == rec.decoder()[j].up.weight.dim(1);
      checks.expect(rule, "decoder stage " + std::to_string(j) + " widths " + shape_string(a) + " vs " +
                              shape_string(b));
      for (std::size_t k = 0; k < seg.encoder().size(); ++k) {
        checks.expect(seg.encoder()[k].first.conv.weight.shape() == rec.encoder()[k].first.conv.weight.shape(),
                      "encoder shapes differ");
      }
    }
  }
  checks.expect(tanh_to_byte(-1.0) == 0 && tanh_to_byte(1.0) == 255 && tanh_to_byte(0.0) == 128,
                "tanh byte endpoints");
  Network<float> rgb(NetworkConfig::rgb(8, 2));
  rgb.head().weight.values().setZero();
  rgb.head().bias.values() << 30.f, -30.f, 0.f;
  const BevSequence pair = synthetic_window(BevConfig::desk(), 0, 2, SceneSpec{});
  const Image img = render_rgb(rgb, pair);
  checks.expect(img.channels == 3 && img.width == 64 && img.height == 64 && img.bytes.size() == 64u * 64u * 3u,
                "rgb image shape");
  bool endpoints = true;
  for (std::size_t p = 0; p + 2 < img.bytes.size(); p += 3) {
    endpoints = endpoints && img.bytes[p] == 255 && img.bytes[p + 1] == 0 && img.bytes[p + 2] == 128;
  }
  checks.expect(endpoints, "saturated tanh channels do not map to 255/0/128");
  const double elapsed = seconds_since(t0);
  return timed(kShapeBudgetS, elapsed, checks,
               "depths 1-3 preserve H x W, decoder widths follow the concatenation rule, RGB bytes saturate to "
               "0/255, " + fmt(elapsed) + " s");
}

// 8. Serialization round trip.
Verdict serialization() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks checks;
  std::mt19937 rng(8);
  std::uniform_int_distribution<Index> t_in(1, 8), base(2, 8), depth(1, 3), out(1, 4), coin(0, 1);
  std::bernoulli_distribution bit(0.3);
  const auto dir = std::filesystem::temp_directory_path() / "ppn_acceptance_models";
  std::filesystem::create_directories(dir);
  std::string configs;
  for (int k = 0; k < 5; ++k) {
    NetworkConfig c{t_in(rng), base(rng), depth(rng), out(rng),
                    coin(rng) ? Activation::kTanh : Activation::kSigmoid, coin(rng) == 1, static_cast<std::uint64_t>(k)};
    Network<float> net(c);
    const Index side = Index{8} << c.depth;
    auto sample = [&]() {
      Tensor<float> x({c.t_in, side, side});
      for (Index i = 0; i < x.size(); ++i) x[i] = bit(rng) ? 1.f : 0.f;
      return x;
    };
    for (int warm = 0; warm < 2; ++warm) net.forward_train(sample());
    const Tensor<float> x = sample();
    const auto path = dir / ("model_" + std::to_string(k) + ".ppn");
    save_model(path, net);
    const Network<float> back = load_model<float>(path);
    const Tensor<float> a = net.forward(x);
    const Tensor<float> b = back.forward(x);
    checks.expect(a.shape() == b.shape() && (a.values() == b.values()).all(),
                  "config " + std::to_string(k) + " forward differs after reload");
    checks.expect(back.config().t_in == c.t_in && back.config().skips == c.skips &&
                      back.config().output_activation == c.output_activation,
                  "config " + std::to_string(k) + " header mismatch");
    configs += (k ? ", " : "") + std::to_string(c.t_in) + "/" + std::to_string(c.base_channels) + "/" +
               std::to_string(c.depth) + "/" + std::to_string(c.out_channels) + (c.skips ? "/skip" : "/plain");
  }
  std::filesystem::remove_all(dir);
  const double elapsed = seconds_since(t0);
  return timed(kSerialBudgetS, elapsed, checks,
               "5 configs (t_in/base/depth/out) " + configs + " bit-identical, " + fmt(elapsed) + " s");
}

struct Criterion {
  const char* title;
  std::function<Verdict()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> kAll{
      {"voxelization matches brute-force oracle", voxelization},
      {"gradient suite within finite-difference tolerance", gradients},
      {"parallel inference speedup, bitwise-identical outputs", speedup},
      {"reconstruction training convergence", convergence},
      {"loss identities", loss_identities},
      {"Canny edge behavior", canny_behavior},
      {"shape and architecture rules", shapes},
      {"model serialization round trip", serialization},
  };
  return kAll;
}

int run_one(std::size_t index) {
  const Criterion& c = criteria()[index];
  Verdict v;
  try {
    v = c.run();
  } catch (const std::exception& e) {
    v = {kFail, std::string("exception: ") + e.what()};
  }
  const char* label = v.status == kPass ? "PASS" : (v.status == kNotEvaluated ? "NOT EVALUATED" : "FAIL");
  std::cout << "criterion " << index + 1 << " [" << label << "] " << c.title << ": " << v.detail << std::endl;
  return v.status;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 2) {
    std::cerr << "usage: acceptance [criterion 1-8]\n";
    return 2;
  }
  if (argc == 2) {
    const int n = std::atoi(argv[1]);
    if (n < 1 || n > static_cast<int>(criteria().size())) {
      std::cerr << "usage: acceptance [criterion 1-8]\n";
      return 2;
    }
    return run_one(static_cast<std::size_t>(n - 1));
  }
  bool failed = false;
  for (std::size_t i = 0; i < criteria().size(); ++i) failed = run_one(i) == kFail || failed;
  return failed ? kFail : kPass;
}
