#include "evopp/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "evopp/errors.hpp"

namespace evopp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

}  // namespace

const char* prior_family_name(PriorFamily f) {
  switch (f) {
    case PriorFamily::Normal: return "normal";
    case PriorFamily::Uniform: return "uniform";
    case PriorFamily::Gamma: return "gamma";
    case PriorFamily::LogNormal: return "lognormal";
    case PriorFamily::InverseGamma: return "inverse_gamma";
  }
  return "?";
}

void Prior::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw ConfigError("prior hyperparameters must be finite");
  }
  switch (family) {
    case PriorFamily::Normal:
    case PriorFamily::LogNormal:
      if (b <= 0.0) throw ConfigError("prior variance must be positive");
      return;
    case PriorFamily::Uniform:
      if (a >= b) throw ConfigError("uniform prior needs lo < hi");
      return;
    case PriorFamily::Gamma:
    case PriorFamily::InverseGamma:
      if (a <= 0.0 || b <= 0.0) throw ConfigError("prior shape and rate/scale must be positive");
      return;
  }
}

bool Prior::in_support(double x) const {
  if (!std::isfinite(x)) return false;
  switch (family) {
    case PriorFamily::Normal: return true;
    case PriorFamily::Uniform: return x >= a && x <= b;
    case PriorFamily::Gamma:
    case PriorFamily::LogNormal:
    case PriorFamily::InverseGamma: return x > 0.0;
  }
  return false;
}

double Prior::log_density(double x) const {
  if (!in_support(x)) return -kInf;
  switch (family) {
    case PriorFamily::Normal:
      return log_normal_density(x, a, b);
    case PriorFamily::Uniform:
      return -std::log(b - a);
    case PriorFamily::Gamma:
      return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x) - b * x;
    case PriorFamily::LogNormal:
      return -std::log(x) + log_normal_density(std::log(x), a, b);
    case PriorFamily::InverseGamma:
      return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
  }
  return -kInf;
}

double Prior::sample(std::mt19937_64& rng) const {
  switch (family) {
    case PriorFamily::Normal:
      return std::normal_distribution<double>(a, std::sqrt(b))(rng);
    case PriorFamily::Uniform:
      return std::uniform_real_distribution<double>(a, b)(rng);
    case PriorFamily::Gamma:
      return std::gamma_distribution<double>(a, 1.0 / b)(rng);
    case PriorFamily::LogNormal:
      return std::lognormal_distribution<double>(a, std::sqrt(b))(rng);
    case PriorFamily::InverseGamma:
      return b / std::gamma_distribution<double>(a, 1.0)(rng);
  }
  return 0.0;
}

double Prior::support_lower_bound() const {
  switch (family) {
    case PriorFamily::Normal: return -kInf;
    case PriorFamily::Uniform: return a;
    case PriorFamily::Gamma:
    case PriorFamily::LogNormal:
    case PriorFamily::InverseGamma: return 0.0;
  }
  return -kInf;
}

const Prior* PriorSpec::find(ParamId id) const {
  const auto it = entries.find(id);
  return it == entries.end() ? nullptr : &it->second;
}

bool param_in_constraint(const ModelSpec& model, ParamId id, double x) {
  if (!std::isfinite(x)) return false;
  switch (id) {
    case ParamId::Mu:
      // A constant background feeds mu straight into the link. Identity and
      // the tobit power assume a positive baseline; the softplus and
      // exponential families map all of R to positive rates, so mu is free.
      if (model.background.form != BackgroundForm::Constant) return true;
      if (model.link.family == LinkFamily::SoftPlus ||
          model.link.family == LinkFamily::Log10SoftPlus ||
          model.link.family == LinkFamily::Exponential) {
        return true;
      }
      return x > 0.0;
    case ParamId::Gamma1:
    case ParamId::Gamma2:
      return true;
    case ParamId::Alpha:
      return model.link.family != LinkFamily::Identity || x >= 0.0;
    case ParamId::Beta:
    case ParamId::Nu:
    case ParamId::Sigma2:
    case ParamId::Phi:
      return x > 0.0;
  }
  return false;
}

void validate_priors(const ModelSpec& model, const PriorSpec& priors) {
  const std::vector<ParamId> exposed = model_parameters(model);
  for (const auto& [id, prior] : priors.entries) {
    prior.validate();
    bool found = false;
    for (ParamId e : exposed) found = found || e == id;
    if (!found) {
      std::ostringstream msg;
      msg << "prior given for " << param_name(id) << ", which this model does not expose";
      throw ConfigError(msg.str());
    }
    // A constrained parameter needs a prior that cannot draw outside the
    // constraint region. All constraints here are lower bounds at zero.
    const bool lower_bounded =
        !param_in_constraint(model, id, -1.0);  // probe: is x < 0 illegal?
    if (lower_bounded && prior.support_lower_bound() < 0.0) {
      std::ostringstream msg;
      msg << "prior " << prior_family_name(prior.family) << " on " << param_name(id)
          << " puts mass on negative values, outside the parameter's range";
      throw ConfigError(msg.str());
    }
  }
}

}  // namespace evopp
