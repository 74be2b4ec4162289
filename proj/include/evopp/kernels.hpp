#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "evopp/point_pattern.hpp"

namespace evopp {

enum class KernelFamily { None, Exponential, Uniform, Gaussian, Triangle, Gamma };

// Triggering kernel g(dt) = alpha * f(dt) for lag dt > 0. alpha is the signed
// mass (alpha > 0 excites, alpha < 0 inhibits); f is the family shape with
// rate/width beta and, for the Gamma family, shape nu.
struct TriggerKernel {
  KernelFamily family = KernelFamily::None;
  double alpha = 0.0;
  double beta = 1.0;
  double nu = 1.0;

  void validate() const;

  // g(dt); rejects dt <= 0.
  [[nodiscard]] double eval(double dt) const;

  // Family shape f(dt) without the alpha factor, dt > 0 assumed. Inline: this
  // is the per-node cost of direct kernel sums.
  [[nodiscard]] double density(double dt) const {
    switch (family) {
      case KernelFamily::None:
        return 0.0;
      case KernelFamily::Exponential:
        return beta * std::exp(-beta * dt);
      case KernelFamily::Uniform:
        return dt < beta ? 1.0 / beta : 0.0;
      case KernelFamily::Gaussian:
        // Normal(0, 1/beta) shape; the constant normalizes over the whole line.
        return std::sqrt(beta / (2.0 * std::numbers::pi)) * std::exp(-beta * dt * dt / 2.0);
      case KernelFamily::Triangle:
        return dt < beta ? (2.0 / beta) * (1.0 - dt / beta) : 0.0;
      case KernelFamily::Gamma:
        return std::exp(nu * std::log(beta) - std::lgamma(nu) + (nu - 1.0) * std::log(dt) -
                        beta * dt);
    }
    return 0.0;
  }

  // lim dt->0+ of f(dt); +inf for the Gamma family with nu < 1.
  [[nodiscard]] double density_limit_at_zero() const {
    switch (family) {
      case KernelFamily::None: return 0.0;
      case KernelFamily::Exponential: return beta;
      case KernelFamily::Uniform: return 1.0 / beta;
      case KernelFamily::Gaussian: return std::sqrt(beta / (2.0 * std::numbers::pi));
      case KernelFamily::Triangle: return 2.0 / beta;
      case KernelFamily::Gamma:
        if (nu > 1.0) return 0.0;
        if (nu == 1.0) return beta;
        return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  // sup of f over lags [lo, hi], 0 <= lo <= hi. Used for thinning bounds.
  [[nodiscard]] double density_sup(double lo, double hi) const;
};

[[nodiscard]] const char* kernel_family_name(KernelFamily f);

// Prefix sums a[i] = sum_{j<i} exp(-beta (t_i - t_j)) for the exponential
// family, built by a[i] = exp(-beta (t_i - t_{i-1})) (1 + a[i-1]), a[0] = 0.
// beta and n fingerprint the inputs so a stale state cannot be reused.
struct ExpRecursionState {
  double beta = 0.0;
  std::size_t n = 0;
  std::vector<double> a;
};

[[nodiscard]] ExpRecursionState build_recursion(const PointPattern& pattern, double beta);

// sum_{t_j < s} g(s - t_j). With a recursion state (exponential family only)
// the cost is one binary search; otherwise a direct pass over the history.
[[nodiscard]] double kernel_sum_at(const TriggerKernel& kernel, const PointPattern& pattern,
                                   double s, const ExpRecursionState* state = nullptr);

// Streaming kernel sums for nondecreasing query points: amortized O(1) per
// query for the exponential family, O(history) per query otherwise.
class KernelSumStream {
 public:
  KernelSumStream(const TriggerKernel& kernel, const PointPattern& pattern);

  // sum over t_j < s.
  double before(double s);

  // Right limit: sum over t_j <= s with f at 0+ for a t_j equal to s. Families
  // with an unbounded f at 0+ fall back to the strict sum there.
  double just_after(double s);

 private:
  void advance(double s);

  const TriggerKernel& kernel_;
  const PointPattern& pattern_;
  std::size_t idx_ = 0;   // events consumed, all < the last query point
  double decayed_ = 0.0;  // exponential family: sum exp(-beta (ref_ - t_j)) over consumed
  double ref_ = 0.0;
  double last_query_;
};

}  // namespace evopp
