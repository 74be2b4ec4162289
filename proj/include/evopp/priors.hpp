#pragma once

#include <map>
#include <random>

#include "evopp/model.hpp"

namespace evopp {

enum class PriorFamily { Normal, Uniform, Gamma, LogNormal, InverseGamma };

// Scalar prior. Hyperparameter meaning per family:
//   Normal(mean, variance), Uniform(lo, hi), Gamma(shape, rate),
//   LogNormal(log-mean, log-variance), InverseGamma(shape, scale).
struct Prior {
  PriorFamily family = PriorFamily::Normal;
  double a = 0.0;
  double b = 1.0;

  void validate() const;
  [[nodiscard]] bool in_support(double x) const;
  [[nodiscard]] double log_density(double x) const;  // -inf outside support
  [[nodiscard]] double sample(std::mt19937_64& rng) const;
  [[nodiscard]] double support_lower_bound() const;
};

[[nodiscard]] const char* prior_family_name(PriorFamily f);

// Parameters with an entry are sampled; everything else stays fixed at its
// configured value, which is how submodels (no seasonality, no kernel, ...)
// share one code path.
struct PriorSpec {
  std::map<ParamId, Prior> entries;

  [[nodiscard]] const Prior* find(ParamId id) const;
};

// Constraint region per parameter given the model structure (mu > 0 under a
// Constant background with an identity or tobit link, beta > 0, alpha >= 0
// under the identity link, ...).
[[nodiscard]] bool param_in_constraint(const ModelSpec& model, ParamId id, double x);

// Rejects priors on parameters the model does not expose, and priors whose
// support escapes the parameter's constraint region (a draw must always be a
// legal value).
void validate_priors(const ModelSpec& model, const PriorSpec& priors);

}  // namespace evopp
