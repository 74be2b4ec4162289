#pragma once

// Independent brute-force reference implementations used to pin expected
// values in tests. These deliberately avoid the library's recursion and
// streaming shortcuts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "evopp/kernels.hpp"
#include "evopp/model.hpp"
#include "evopp/point_pattern.hpp"

namespace oracle {

// Direct O(n) sum over the strict history, no recursion.
inline double kernel_sum(const evopp::TriggerKernel& k, const evopp::PointPattern& p, double s) {
  double sum = 0.0;
  for (double t : p.times()) {
    if (t >= s) break;
    sum += k.density(s - t);
  }
  return k.alpha * sum;
}

inline double kernel_sum_just_after(const evopp::TriggerKernel& k, const evopp::PointPattern& p,
                                    double s) {
  double sum = kernel_sum(k, p, s);
  for (double t : p.times()) {
    if (t == s) {
      const double f0 = k.density_limit_at_zero();
      if (std::isfinite(f0)) sum += k.alpha * f0;
    }
  }
  return sum;
}

// Log-likelihood with direct kernel sums and the same grid construction as
// the library: even K-point grid over (0, T] merged with the event times,
// trapezoid with right/left limits at event nodes.
inline double log_likelihood(const evopp::ModelSpec& model, const evopp::PointPattern& p) {
  const double T = p.horizon();
  const int K = model.quad_points;
  std::vector<double> nodes;
  nodes.reserve(static_cast<std::size_t>(K) + p.size() + 1);
  for (int k = 0; k < K; ++k) nodes.push_back(T * k / K);
  nodes.push_back(T);
  for (double t : p.times()) nodes.push_back(t);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  auto lambda_left = [&](double s) {
    return model.link.apply(background_argument(model.background, s) + kernel_sum(model.kernel, p, s));
  };
  auto lambda_right = [&](double s) {
    return model.link.apply(background_argument(model.background, s) +
                            kernel_sum_just_after(model.kernel, p, s));
  };

  double comp = 0.0;
  for (std::size_t j = 1; j < nodes.size(); ++j) {
    comp += 0.5 * (lambda_right(nodes[j - 1]) + lambda_left(nodes[j])) * (nodes[j] - nodes[j - 1]);
  }

  double events = 0.0;
  for (double t : p.times()) {
    const double lam = lambda_left(t);
    if (lam <= 0.0) return -std::numeric_limits<double>::infinity();
    events += std::log(lam);
  }
  return events - comp;
}

}  // namespace oracle
