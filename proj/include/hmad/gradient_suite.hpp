#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hmad {

struct GradTarget {
  std::string name;  // "input", "input.depth", or a parameter name
  double error = 0.0;
};

struct GradOpReport {
  std::string op;  // channel_attention, spatial_attention, cbam, distribute
  std::vector<GradTarget> targets;
  double max_error = 0.0;
  bool passed = false;
};

struct GradSuiteOptions {
  std::uint64_t seed = 7;
  double eps = 1e-5;
  double tolerance = 1e-4;
  // Adds a constant to every analytic gradient so the checks must fail.
  double analytic_bias = 0.0;
};

// Checks analytic input and parameter gradients of the four fusion operations
// against central differences on seeded instances (C <= 8, H, W <= 6). The
// scalar objective is a seeded random projection of each operation's output.
std::vector<GradOpReport> run_gradient_suite(const GradSuiteOptions& options = {});

}  // namespace hmad
