#include "evopp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "evopp/errors.hpp"

namespace evopp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

const char* kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::None: return "none";
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::Uniform: return "uniform";
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Triangle: return "triangle";
    case KernelFamily::Gamma: return "gamma";
  }
  return "?";
}

void TriggerKernel::validate() const {
  if (family == KernelFamily::None) return;
  if (!std::isfinite(alpha)) {
    throw ConfigError("kernel alpha must be finite");
  }
  if (!std::isfinite(beta) || beta <= 0.0) {
    throw ConfigError("kernel beta must be positive and finite");
  }
  if (family == KernelFamily::Gamma && (!std::isfinite(nu) || nu <= 0.0)) {
    throw ConfigError("gamma kernel nu must be positive and finite");
  }
}

double TriggerKernel::eval(double dt) const {
  if (!(dt > 0.0)) {
    std::ostringstream msg;
    msg << "kernel lag must be positive, got " << dt;
    throw std::invalid_argument(msg.str());
  }
  if (family == KernelFamily::None) return 0.0;
  return alpha * density(dt);
}

double TriggerKernel::density_sup(double lo, double hi) const {
  if (!(0.0 <= lo && lo <= hi)) {
    throw std::invalid_argument("density_sup requires 0 <= lo <= hi");
  }
  const double at_lo = lo > 0.0 ? density(lo) : density_limit_at_zero();
  if (family == KernelFamily::Gamma && nu > 1.0) {
    // Unimodal with mode (nu - 1) / beta; elsewhere monotone toward the mode.
    const double mode = (nu - 1.0) / beta;
    return density(std::clamp(mode, std::max(lo, std::numeric_limits<double>::min()), hi));
  }
  // All other families are nonincreasing in the lag.
  return at_lo;
}

ExpRecursionState build_recursion(const PointPattern& pattern, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0) {
    throw ConfigError("recursion beta must be positive and finite");
  }
  ExpRecursionState state;
  state.beta = beta;
  state.n = pattern.size();
  state.a.resize(pattern.size());
  if (pattern.empty()) return state;
  state.a[0] = 0.0;
  for (std::size_t i = 1; i < pattern.size(); ++i) {
    state.a[i] = std::exp(-beta * (pattern[i] - pattern[i - 1])) * (1.0 + state.a[i - 1]);
  }
  return state;
}

double kernel_sum_at(const TriggerKernel& kernel, const PointPattern& pattern, double s,
                     const ExpRecursionState* state) {
  if (kernel.family == KernelFamily::None) return 0.0;
  const auto history = pattern.history_before(s);
  if (history.empty()) return 0.0;

  if (state != nullptr) {
    if (kernel.family != KernelFamily::Exponential) {
      throw std::invalid_argument("recursion state only applies to the exponential family");
    }
    if (state->beta != kernel.beta || state->n != pattern.size()) {
      throw std::invalid_argument("recursion state does not match kernel/pattern");
    }
    // Nearest event before s: sum = exp(-beta (s - t_i)) (1 + a[i]).
    const std::size_t i = history.size() - 1;
    return kernel.alpha * kernel.beta * std::exp(-kernel.beta * (s - history[i])) *
           (1.0 + state->a[i]);
  }

  double sum = 0.0;
  for (double t : history) sum += kernel.density(s - t);
  return kernel.alpha * sum;
}

KernelSumStream::KernelSumStream(const TriggerKernel& kernel, const PointPattern& pattern)
    : kernel_(kernel), pattern_(pattern), last_query_(-kInf) {}

void KernelSumStream::advance(double s) {
  if (s < last_query_) {
    throw std::invalid_argument("kernel sum stream queries must be nondecreasing");
  }
  last_query_ = s;
  while (idx_ < pattern_.size() && pattern_[idx_] < s) {
    const double t = pattern_[idx_];
    decayed_ = decayed_ * std::exp(-kernel_.beta * (t - ref_)) + 1.0;
    ref_ = t;
    ++idx_;
  }
}

double KernelSumStream::before(double s) {
  if (kernel_.family == KernelFamily::None) return 0.0;
  if (kernel_.family == KernelFamily::Exponential) {
    advance(s);
    if (idx_ == 0) return 0.0;
    return kernel_.alpha * kernel_.beta * decayed_ * std::exp(-kernel_.beta * (s - ref_));
  }
  if (s < last_query_) {
    throw std::invalid_argument("kernel sum stream queries must be nondecreasing");
  }
  last_query_ = s;
  double sum = 0.0;
  for (double t : pattern_.history_before(s)) sum += kernel_.density(s - t);
  return kernel_.alpha * sum;
}

double KernelSumStream::just_after(double s) {
  double sum = before(s);
  // A pattern is tie-free, so at most one event sits exactly at s.
  const std::size_t n_le = pattern_.count_in(0.0, s);
  const std::size_t n_lt = pattern_.history_before(s).size();
  if (n_le > n_lt) {
    const double f0 = kernel_.density_limit_at_zero();
    // Unbounded f at 0+ (Gamma, nu < 1): keep the strict sum at the node.
    if (std::isfinite(f0)) sum += kernel_.alpha * f0;
  }
  return sum;
}

}  // namespace evopp
