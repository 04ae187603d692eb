#include "crowdsense/forecast/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crowdsense::forecast {

NelderMeadResult nelder_mead(const Objective &f, std::vector<double> x0,
                             std::span<const double> steps, const NelderMeadOptions &options) {
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  const std::size_t n = x0.size();
  NelderMeadResult result;

  auto eval = [&](std::span<const double> x) {
    ++result.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  if (n == 0) {
    result.loss = eval(x0);
    result.x = std::move(x0);
    result.converged = true;
    result.best_trace.push_back(result.loss);
    return result;
  }

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> loss(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += steps[i];
  for (std::size_t i = 0; i <= n; ++i) loss[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto point = [&](double coef, const std::vector<double> &worst, std::vector<double> &out) {
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + coef * (centroid[j] - worst[j]);
  };

  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return loss[a] < loss[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    result.best_trace.push_back(loss[best]);

    const double spread = loss[worst] - loss[best];
    if (std::isfinite(spread) &&
        spread <= options.loss_tolerance * (std::abs(loss[best]) + options.loss_tolerance)) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= options.max_evaluations) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
    }
    for (auto &c : centroid) c /= static_cast<double>(n);

    point(kReflect, simplex[worst], trial);
    const double fr = eval(trial);
    if (fr < loss[best]) {
      point(kExpand, simplex[worst], trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[worst] = trial2;
        loss[worst] = fe;
      } else {
        simplex[worst] = trial;
        loss[worst] = fr;
      }
      continue;
    }
    if (fr < loss[second]) {
      simplex[worst] = trial;
      loss[worst] = fr;
      continue;
    }
    const bool outside = fr < loss[worst];
    point(outside ? kContract : -kContract, simplex[worst], trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : loss[worst])) {
      simplex[worst] = trial2;
      loss[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) {
        simplex[i][j] = simplex[best][j] + kShrink * (simplex[i][j] - simplex[best][j]);
      }
      loss[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(loss.begin(), loss.end());
  result.loss = *best_it;
  result.x = simplex[static_cast<std::size_t>(best_it - loss.begin())];
  return result;
}

} // namespace crowdsense::forecast
