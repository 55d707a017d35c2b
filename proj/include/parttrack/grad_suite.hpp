#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parttrack/config.hpp"

namespace parttrack {

struct GradCheckEntry {
  std::string name;
  double max_error = 0;
  int trials = 0;
};

/// Central-difference checks of every differentiable primitive on random
/// float64 inputs kept away from kinks. One entry per primitive.
std::vector<GradCheckEntry> primitive_grad_suite(int trials, std::uint64_t seed);

/// A network small enough to finite-difference every parameter.
Config toy_config();

/// Gradient check of the full training loss of the toy network on one
/// synthetic triplet, over all parameters. Returns the max relative error.
double toy_total_loss_grad_check(std::uint64_t seed, Index max_coords_per_param = 0);

}  // namespace parttrack
