#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kmp/numerics/gradcheck.hpp"

namespace kmp {

inline constexpr double kOpTolerance = 1e-6;
inline constexpr double kModelTolerance = 1e-4;

struct SuiteCase {
  std::string name;
  double tolerance = kOpTolerance;
  GradCheckReport report;
  double seconds = 0.0;

  bool passed() const { return report.passed(tolerance); }
};

struct SuiteOptions {
  bool include_model = true;
  // Elements sampled per parameter in the full-model checks (0 = all).
  std::size_t model_sample = 4;
  std::uint64_t seed = 7;
};

// Finite-difference checks of every differentiable op in isolation, the
// backbone on one 16x16 frame, and the full network loss on a T=2, 32x32,
// 12-joint toy tracklet (with and without kinematics input).
std::vector<SuiteCase> run_gradcheck_suite(const SuiteOptions& options = {});

}  // namespace kmp
