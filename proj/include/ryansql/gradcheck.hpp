#pragma once

#include <string>
#include <vector>

namespace ryansql {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;  // worst case over the seed sweep
};

/// Central finite-difference verification (h = 1e-5) of the analytic
/// gradients of every differentiable operation in the tensor, encoder and
/// decoder modules, each over `seeds` seeded input draws at small shapes.
/// Composite operations inject their activations as inputs so each entry
/// checks its own parameters.
std::vector<GradCheckEntry> gradient_suite(int seeds = 20);

}  // namespace ryansql
