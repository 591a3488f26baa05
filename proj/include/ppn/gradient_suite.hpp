#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ppn {

struct GradSuiteOptions {
  double kernel_threshold = 1e-4;   // every kernel and loss
  double network_threshold = 1e-3;  // full network + loss composites
  double step = 1e-5;
  std::uint64_t seed = 0;
  bool include_networks = true;
  // Test hook: scales this kernel's analytic gradient by 1.01.
  std::string corrupt_kernel;
};

struct GradCheckEntry {
  std::string kernel;
  double worst_rel_error = 0;
  double threshold = 0;

  bool passed() const { return worst_rel_error <= threshold; }
};

/// Names accepted by GradSuiteOptions::corrupt_kernel.
const std::vector<std::string>& gradient_suite_kernels();

/// Finite-difference checks in 64-bit for every differentiable kernel and
/// loss, plus depth-2 16x16 segmentation/reconstruction networks under MSE.
std::vector<GradCheckEntry> run_gradient_suite(const GradSuiteOptions& options);

}  // namespace ppn
