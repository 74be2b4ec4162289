#pragma once

#include <cmath>
#include <numbers>
#include <string>

namespace evopp {

enum class LinkFamily { Identity, PowerTobit, SoftPlus, Log10SoftPlus, Exponential };

namespace detail {

// The log10 softplus uses the literal 2.3 inner scale.
inline constexpr double kLog10InnerScale = 2.3;

inline double softplus(double x) {
  // ln(1 + e^x); for large x the direct form overflows, so switch to
  // x + ln(1 + e^-x).
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

[[noreturn]] void throw_negative_identity(double x);

}  // namespace detail

// Nonlinear link h applied to the background-plus-kernel sum; the intensity is
// h(mu(t) + sum g(t - t_i)) and must be nonnegative.
struct LinkFunction {
  LinkFamily family = LinkFamily::PowerTobit;
  double eta = 1.0;  // exponent, PowerTobit only

  void validate() const;

  // h(x) >= 0. Identity rejects negative input; the other families accept all
  // of R. Inline: this sits inside the likelihood quadrature loop.
  [[nodiscard]] double apply(double x) const {
    switch (family) {
      case LinkFamily::Identity:
        if (x < 0.0) detail::throw_negative_identity(x);
        return x;
      case LinkFamily::PowerTobit:
        if (x <= 0.0) return 0.0;
        return eta == 1.0 ? x : std::pow(x, eta);
      case LinkFamily::SoftPlus:
        return detail::softplus(x);
      case LinkFamily::Log10SoftPlus:
        return detail::softplus(detail::kLog10InnerScale * x) / std::numbers::ln10;
      case LinkFamily::Exponential:
        return std::exp(x);
    }
    return 0.0;
  }
};

[[nodiscard]] const char* link_family_name(LinkFamily f);

struct StabilityAdvisory {
  bool stable = true;
  std::string note;
};

// Whether h is alpha-Lipschitz for the given trigger mass, so that simulation
// cannot run away. Advisory only: fitting is never blocked on this.
[[nodiscard]] StabilityAdvisory stability_check(const LinkFunction& link, double alpha);

}  // namespace evopp
