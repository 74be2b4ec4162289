#include "evopp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "evopp/errors.hpp"

namespace evopp {

namespace {

// sup over s in [t0, t1] of g1 sin(w s) + g2 cos(w s) with w = 2 pi / period.
// The sum is R sin(w s + phase); the sup is R if a crest falls inside the
// window and the larger endpoint value otherwise.
double harmonic_sup(double g1, double g2, double period, double t0, double t1) {
  const double amp = std::hypot(g1, g2);
  if (amp == 0.0) return 0.0;
  const double omega = 2.0 * std::numbers::pi / period;
  const double phase = std::atan2(g2, g1);
  const double crest0 = (std::numbers::pi / 2.0 - phase) / omega;
  const double k = std::ceil((t0 - crest0) / period);
  const double crest = crest0 + k * period;
  if (crest <= t1) return amp;
  auto value = [&](double s) { return g1 * std::sin(omega * s) + g2 * std::cos(omega * s); };
  return std::max(value(t0), value(t1));
}

// sup over [t0, t1] of the pre-link background summand.
double background_sup(const BackgroundModel& bg, double t0, double t1) {
  switch (bg.form) {
    case BackgroundForm::Constant:
      return bg.mu;
    case BackgroundForm::LogLinearSeasonal:
      return std::exp(bg.mu + harmonic_sup(bg.gamma1, bg.gamma2, bg.period, t0, t1));
    case BackgroundForm::LogLinearSeasonalGP: {
      const LatentGP& gp = *bg.gp;
      double w_max = gp.w_star[gp.cell_of(t0)];
      const std::size_t last = gp.cell_of(t1);
      for (std::size_t c = gp.cell_of(t0); c <= last; ++c) w_max = std::max(w_max, gp.w_star[c]);
      return std::exp(bg.mu + harmonic_sup(bg.gamma1, bg.gamma2, bg.period, t0, t1) + w_max);
    }
  }
  return bg.mu;
}

// lambda*(t) against an explicit sorted history, strict in t.
double intensity_at(const ModelSpec& model, const std::vector<double>& events, double t) {
  double arg = background_argument(model.background, t);
  if (model.kernel.family != KernelFamily::None && model.kernel.alpha != 0.0) {
    double sum = 0.0;
    for (auto it = events.rbegin(); it != events.rend() && *it < t; ++it) {
      // History is sorted, so once a compact-support kernel dies the rest do.
      const double f = model.kernel.density(t - *it);
      if (f == 0.0 && (model.kernel.family == KernelFamily::Uniform ||
                       model.kernel.family == KernelFamily::Triangle)) {
        break;
      }
      sum += f;
    }
    arg += model.kernel.alpha * sum;
  }
  return model.link.apply(arg);
}

std::string instability_message(const ModelSpec& model, std::size_t n_events, const char* cause) {
  std::ostringstream os;
  os << cause << " after " << n_events << " events: the " << link_family_name(model.link.family)
     << "-link model with kernel " << kernel_family_name(model.kernel.family)
     << " (alpha=" << model.kernel.alpha << ") appears unstable on this horizon";
  return os.str();
}

}  // namespace

void ThinningConfig::validate() const {
  if (event_budget == 0) throw ConfigError("event_budget must be positive");
  if (!std::isfinite(lookahead_scale) || lookahead_scale <= 0.0) {
    throw ConfigError("lookahead_scale must be positive and finite");
  }
}

double valid_upper_bound(const ModelSpec& model, double t, const std::vector<double>& history,
                         double window) {
  if (!std::isfinite(t) || !(window >= 0.0) || !std::isfinite(window)) {
    throw std::invalid_argument("valid_upper_bound needs finite t and window >= 0");
  }
  const double t1 = t + window;
  double arg = background_sup(model.background, t, t1);
  if (model.kernel.family != KernelFamily::None && model.kernel.alpha > 0.0) {
    double sum = 0.0;
    for (double ti : history) {
      if (ti > t) break;
      sum += model.kernel.density_sup(t - ti, t1 - ti);
    }
    arg += model.kernel.alpha * sum;
  }
  return model.link.apply(arg);
}

PointPattern simulate_thinning(const ModelSpec& model, double t_end, const ThinningConfig& config) {
  model.validate();
  config.validate();
  if (!std::isfinite(t_end) || t_end <= 0.0) {
    throw ConfigError("simulation horizon must be positive and finite");
  }
  if (model.kernel.family == KernelFamily::Gamma && model.kernel.nu < 1.0 &&
      model.kernel.alpha > 0.0) {
    throw NumericError(
        "gamma kernel with nu < 1 is unbounded at zero lag; no finite thinning bound exists "
        "once an event has occurred");
  }

  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);

  std::vector<double> events;
  double t = 0.0;
  double prev_bound = 0.0;  // nonpositive: no informative bound yet, scan the full remainder

  while (t < t_end) {
    const double remaining = t_end - t;
    double window = remaining;
    if (prev_bound > 0.0) window = std::min(remaining, config.lookahead_scale / prev_bound);
    // A window too small to move t means the intensity bound has outgrown the
    // clock's floating-point resolution; the realization cannot continue.
    if (!(window > 0.0) || t + window == t) {
      throw NumericError(instability_message(model, events.size(), "time step underflowed"));
    }

    const double bound = valid_upper_bound(model, t, events, window);
    prev_bound = bound;
    if (!(bound > 0.0)) {  // certified quiet stretch
      t += window;
      continue;
    }
    if (!std::isfinite(bound)) {
      throw NumericError(instability_message(model, events.size(), "intensity bound overflowed"));
    }

    const double wait = std::exponential_distribution<double>(bound)(rng);
    if (wait > window) {  // the bound only certifies this window; rebound and retry
      t += window;
      continue;
    }
    if (t + wait == t) {
      throw NumericError(instability_message(model, events.size(), "time step underflowed"));
    }
    t += wait;
    const double u = unif01(rng);
    const double lam = intensity_at(model, events, t);
    if (lam > bound * (1.0 + 1e-9)) {
      throw NumericError("thinning bound violated; the intensity bound is not certified here");
    }
    if (u * bound <= lam) {
      events.push_back(t);
      if (events.size() > config.event_budget) {
        throw NumericError(instability_message(model, events.size(), "event budget exceeded"));
      }
    }
  }
  return PointPattern(std::move(events), t_end);
}

}  // namespace evopp
