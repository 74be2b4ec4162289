#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "evopp/kernels.hpp"
#include "evopp/model.hpp"
#include "evopp/point_pattern.hpp"

namespace evopp {

// lambda*(s) = h(mu(s) + sum_{t_i < s} g(s - t_i)); strict history, so an
// event at s does not feed its own intensity. s must lie in [0, T].
[[nodiscard]] double conditional_intensity(const ModelSpec& model, const PointPattern& pattern,
                                           double s, const ExpRecursionState* state = nullptr);

// Integral of lambda* over (0, upto], 0 < upto <= T. Trapezoid on an even
// quad_points grid merged with the event times; at an event node the left
// limit feeds the segment ending there and the right limit (including the
// newly arrived kernel mass at lag 0+) feeds the segment leaving it, so the
// jump in lambda* does not bias the rule.
[[nodiscard]] double compensator(const ModelSpec& model, const PointPattern& pattern, double upto);

// -Lambda*(T) + sum_i log lambda*(t_i). -inf is a legal value (an event where
// the intensity is zero); it is returned, not thrown. A constant-background
// model with no kernel uses the closed Poisson form instead of quadrature.
[[nodiscard]] double log_likelihood(const ModelSpec& model, const PointPattern& pattern);

// Reusable likelihood engine for repeated evaluations over one pattern, as in
// MCMC. The merged quadrature grid is built once; kernel sums are cached
// keyed by the kernel shape (family, beta, nu), so proposals that leave those
// untouched skip the kernel pass entirely; a single latent effect move is
// re-priced on just its own grid cell.
//
// All evaluations must share the shape of the construction-time model: same
// background form, kernel family fixed or swapped only for None, same grid
// sizes. Parameter values are free to vary.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const ModelSpec& shape, const PointPattern& pattern);

  // Full recompute under `model`; returns and stores the log-likelihood.
  double evaluate(const ModelSpec& model);

  [[nodiscard]] double current() const { return ll_; }

  // Log-likelihood if the latent effect in `cell` moved to w_new, everything
  // else as in the last evaluate/accept state. Does not commit.
  double propose_gp(const ModelSpec& model, std::size_t cell, double w_new);

  // Commit the most recent propose_gp. Must follow it directly.
  void accept_gp_proposal();

  [[nodiscard]] std::size_t node_count() const { return s_.size(); }

 private:
  void build_grid(const PointPattern& pattern, double horizon, int quad_points);
  void rebuild_unit_sums(const TriggerKernel& kernel);

  double horizon_;
  int quad_points_ = 0;
  bool has_gp_ = false;
  bool seasonal_ = false;
  bool evaluated_ = false;

  // Node-aligned arrays. unit_* hold kernel sums with alpha = 1 so that
  // alpha-only moves reuse them.
  std::vector<double> s_;
  std::vector<std::uint8_t> is_event_;
  std::vector<double> sinv_, cosv_;
  std::vector<std::int32_t> cell_;
  std::vector<std::size_t> cell_first_, cell_last_;  // node ranges per GP cell
  std::vector<double> unit_left_, unit_right_;
  std::vector<double> bg_log_;  // log-scale background without w, GP form only
  std::vector<double> lam_left_, lam_right_;

  KernelFamily sums_family_ = KernelFamily::None;
  double sums_beta_ = 0.0, sums_nu_ = 0.0;
  bool sums_valid_ = false;

  double comp_ = 0.0;
  double event_terms_ = 0.0;
  double ll_ = -std::numeric_limits<double>::infinity();

  // Pending single-cell proposal.
  bool pending_ = false;
  std::size_t pend_first_ = 0, pend_last_ = 0;
  std::vector<double> pend_lam_left_, pend_lam_right_;
  double pend_comp_ = 0.0, pend_event_terms_ = 0.0, pend_ll_ = 0.0;
};

}  // namespace evopp
