#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace crowdsense::forecast {

struct NelderMeadOptions {
  double loss_tolerance = 1e-8;  ///< relative spread of simplex losses
  std::size_t max_evaluations = 5000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double loss = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  /// Best loss after each iteration; never increases.
  std::vector<double> best_trace;
};

using Objective = std::function<double(std::span<const double>)>;

/// Derivative-free downhill simplex. `steps[i]` sizes the initial simplex
/// along axis i. Non-finite losses are treated as +infinity.
NelderMeadResult nelder_mead(const Objective &f, std::vector<double> x0,
                             std::span<const double> steps, const NelderMeadOptions &options = {});

} // namespace crowdsense::forecast
