#include "evopp/links.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "evopp/errors.hpp"

namespace evopp {

namespace detail {

void throw_negative_identity(double x) {
  std::ostringstream msg;
  msg << "identity link got negative pre-intensity " << x
      << "; restrict to nonnegative background and trigger mass";
  throw NumericError(msg.str());
}

}  // namespace detail

const char* link_family_name(LinkFamily f) {
  switch (f) {
    case LinkFamily::Identity: return "identity";
    case LinkFamily::PowerTobit: return "power";
    case LinkFamily::SoftPlus: return "softplus";
    case LinkFamily::Log10SoftPlus: return "log10_softplus";
    case LinkFamily::Exponential: return "exponential";
  }
  return "?";
}

void LinkFunction::validate() const {
  if (family == LinkFamily::PowerTobit && (!std::isfinite(eta) || eta <= 0.0)) {
    throw ConfigError("power link eta must be positive and finite");
  }
}

StabilityAdvisory stability_check(const LinkFunction& link, double alpha) {
  StabilityAdvisory out;
  switch (link.family) {
    case LinkFamily::Identity:
    case LinkFamily::SoftPlus:
    case LinkFamily::Log10SoftPlus:
      out.stable = true;
      out.note = "link is Lipschitz; simulation is stable for |alpha| < 1 branching";
      return out;
    case LinkFamily::PowerTobit:
      if (link.eta <= 1.0) {
        out.stable = true;
        out.note = "power link with eta <= 1 is Lipschitz";
      } else {
        out.stable = false;
        std::ostringstream msg;
        msg << "power link with eta = " << link.eta
            << " > 1 is not Lipschitz; expect runaway event counts";
        out.note = msg.str();
      }
      return out;
    case LinkFamily::Exponential:
      if (alpha > 0.0) {
        out.stable = false;
        std::ostringstream msg;
        msg << "exponential link with exciting alpha = " << alpha
            << " is explosive; simulation will hit the event budget";
        out.note = msg.str();
      } else {
        out.stable = true;
        out.note = "exponential link with inhibitory alpha is stable";
      }
      return out;
  }
  return out;
}

}  // namespace evopp
