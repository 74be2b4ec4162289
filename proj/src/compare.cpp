#include "evopp/compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "evopp/errors.hpp"
#include "evopp/intensity.hpp"
#include "evopp/kernels.hpp"

namespace evopp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<ParamId> resolve_columns(const PosteriorSamples& draws) {
  std::vector<ParamId> ids(draws.names.size());
  for (std::size_t c = 0; c < draws.names.size(); ++c) {
    if (!param_id_from_name(draws.names[c], ids[c])) {
      throw ConfigError("posterior column '" + draws.names[c] + "' is not a model parameter");
    }
  }
  return ids;
}

void check_gp_shape(const ModelSpec& tmpl, const PosteriorSamples& draws) {
  const bool model_gp = tmpl.background.form == BackgroundForm::LogLinearSeasonalGP;
  if (model_gp) {
    if (!tmpl.background.gp.has_value()) throw ConfigError("latent background without a grid");
    if (draws.gp_size != tmpl.background.gp->grid_times.size()) {
      throw ConfigError("posterior latent draws do not match the model's grid size");
    }
  } else if (draws.gp_size != 0) {
    throw ConfigError("posterior has latent draws but the model has no latent background");
  }
}

void apply_row(ModelSpec& model, const PosteriorSamples& draws, const std::vector<ParamId>& ids,
               std::size_t row) {
  for (std::size_t c = 0; c < ids.size(); ++c) set_param(model, ids[c], draws.at(row, c));
  if (draws.gp_size > 0) {
    auto& w = model.background.gp->w_star;
    for (std::size_t g = 0; g < draws.gp_size; ++g) w[g] = draws.gp_at(row, g);
  }
}

void apply_posterior_mean(ModelSpec& model, const PosteriorSamples& draws,
                          const std::vector<ParamId>& ids) {
  for (std::size_t c = 0; c < ids.size(); ++c) set_param(model, ids[c], draws.col_mean(c));
  if (draws.gp_size > 0) {
    auto& w = model.background.gp->w_star;
    for (std::size_t g = 0; g < draws.gp_size; ++g) w[g] = draws.gp_cell_mean(g);
  }
}

bool closed_form_rate(const ModelSpec& m) {
  return m.kernel.family == KernelFamily::None && m.background.form == BackgroundForm::Constant;
}

}  // namespace

void WindowConfig::validate() const {
  switch (law) {
    case WindowLaw::Uniform01:
      break;
    case WindowLaw::UniformScaled:
      if (!(law_param > 0.0) || law_param > 1.0) {
        throw ConfigError("UniformScaled window law needs an upper end in (0, 1]");
      }
      break;
    case WindowLaw::Beta:
      if (!(law_param > 0.0) || !std::isfinite(law_param)) {
        throw ConfigError("Beta window law needs a positive shape");
      }
      break;
  }
}

std::size_t WindowSet::active_count() const {
  std::size_t n = 0;
  for (auto d : degenerate) n += d == 0;
  return n;
}

WindowSet build_windows(const PointPattern& pattern, const WindowConfig& config) {
  config.validate();
  if (pattern.empty()) throw DataError("window construction needs at least one event");

  const double horizon = pattern.horizon();
  const double rate_hat = double(pattern.size()) / horizon;
  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::gamma_distribution<double> gamma_shape(config.law_param, 1.0);

  auto draw_p = [&]() {
    switch (config.law) {
      case WindowLaw::Uniform01:
        return unif01(rng);
      case WindowLaw::UniformScaled:
        return config.law_param * unif01(rng);
      case WindowLaw::Beta: {
        const double a = gamma_shape(rng);
        const double b = gamma_shape(rng);
        const double s = a + b;
        return s > 0.0 ? a / s : 0.5;
      }
    }
    return 0.5;
  };

  WindowSet w;
  w.rate_hat = rate_hat;
  w.rng_seed = config.rng_seed;
  const std::size_t n = pattern.size();
  w.anchors.resize(n);
  w.deltas.resize(n);
  w.p.resize(n);
  w.y.assign(n, 0);
  w.truncated.assign(n, 0);
  w.degenerate.assign(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    const double t = pattern[i];
    const double p_raw = draw_p();
    const double end = std::min(t + p_raw / rate_hat, horizon);
    const double delta = end - t;
    w.anchors[i] = t;
    w.deltas[i] = delta;
    w.truncated[i] = end == horizon && t + p_raw / rate_hat > horizon ? 1 : 0;
    if (delta <= 0.0) {
      w.degenerate[i] = 1;
      w.deltas[i] = 0.0;
      w.p[i] = 0.0;
      continue;
    }
    w.p[i] = rate_hat * delta;
    w.y[i] = pattern.count_in(t, end) >= 1 ? 1 : 0;
  }
  return w;
}

std::vector<double> model_probabilities(const ModelSpec& tmpl, const PosteriorSamples& draws,
                                        const PointPattern& pattern, const WindowSet& windows,
                                        bool per_draw_average) {
  if (draws.n_rows == 0) throw DataError("model probabilities need at least one posterior draw");
  const std::vector<ParamId> ids = resolve_columns(draws);
  check_gp_shape(tmpl, draws);

  const std::size_t n = windows.size();
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (windows.degenerate[i] == 0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return windows.anchors[a] + windows.deltas[a] / 2.0 <
           windows.anchors[b] + windows.deltas[b] / 2.0;
  });

  std::vector<double> acc(n, 0.0);
  ModelSpec model = tmpl;
  for (std::size_t r = 0; r < draws.n_rows; ++r) {
    apply_row(model, draws, ids, r);
    KernelSumStream stream(model.kernel, pattern);
    for (std::size_t i : order) {
      const double mid = windows.anchors[i] + windows.deltas[i] / 2.0;
      const double lam =
          model.link.apply(background_argument(model.background, mid) + stream.before(mid));
      acc[i] += per_draw_average ? std::min(1.0, lam * windows.deltas[i]) : lam;
    }
  }

  std::vector<double> q(n, 0.0);
  const double m = double(draws.n_rows);
  for (std::size_t i : order) {
    q[i] = per_draw_average ? acc[i] / m : std::min(1.0, (acc[i] / m) * windows.deltas[i]);
  }
  return q;
}

double pmr(const WindowSet& windows, const std::vector<double>& q, PmrDirection direction) {
  if (q.size() != windows.size()) {
    throw std::invalid_argument("probability vector does not match the window set");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows.degenerate[i]) continue;
    const double yi = windows.y[i] ? 1.0 : 0.0;
    if (direction == PmrDirection::Excite) {
      num += (1.0 - q[i]) * yi;
      den += yi;
    } else {
      num += q[i] * (1.0 - yi);
      den += 1.0 - yi;
    }
  }
  if (den == 0.0) {
    throw DataError(direction == PmrDirection::Excite
                        ? "misclassification rate undefined: no window contains an event"
                        : "misclassification rate undefined: every window contains an event");
  }
  return num / den;
}

DicResult dic(const ModelSpec& tmpl, const PosteriorSamples& draws, const PointPattern& pattern) {
  if (draws.n_rows == 0) throw DataError("DIC needs at least one posterior draw");
  const std::vector<ParamId> ids = resolve_columns(draws);
  check_gp_shape(tmpl, draws);

  ModelSpec model = tmpl;
  const bool fast = closed_form_rate(tmpl);
  std::optional<LikelihoodEvaluator> ev;
  if (!fast) ev.emplace(tmpl, pattern);
  auto deviance = [&](const ModelSpec& m) {
    return -2.0 * (fast ? log_likelihood(m, pattern) : ev->evaluate(m));
  };

  double sum = 0.0;
  for (std::size_t r = 0; r < draws.n_rows; ++r) {
    apply_row(model, draws, ids, r);
    sum += deviance(model);
  }
  DicResult out;
  out.mean_deviance = sum / double(draws.n_rows);

  apply_posterior_mean(model, draws, ids);
  out.deviance_at_mean = deviance(model);
  if (!std::isfinite(out.deviance_at_mean)) {
    std::ostringstream os;
    os << "deviance at the posterior mean is " << out.deviance_at_mean
       << "; the averaged parameters leave the model's support";
    throw NumericError(os.str());
  }
  out.p_d = out.mean_deviance - out.deviance_at_mean;
  out.dic = 2.0 * out.mean_deviance - out.deviance_at_mean;
  return out;
}

double rps_score(const std::vector<long long>& predictive, long long observed) {
  if (predictive.size() < 2) {
    throw ConfigError("ranked probability score needs at least two predictive draws");
  }
  const double m = double(predictive.size());
  double first = 0.0;
  for (long long n : predictive) first += std::abs(double(n - observed));
  first /= m;

  std::vector<long long> sorted = predictive;
  std::sort(sorted.begin(), sorted.end());
  // sum_{j,k} |x_j - x_k| = 2 sum_i x_(i) (2i + 1 - m) for 0-based sorted order.
  double pair_sum = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    pair_sum += double(sorted[i]) * (2.0 * double(i) + 1.0 - m);
  }
  pair_sum *= 2.0;
  return first - pair_sum / (2.0 * m * m);
}

double rps(const ModelSpec& tmpl, const PosteriorSamples& draws, const PointPattern& pattern,
           const RpsConfig& config) {
  if (draws.n_rows < 2) throw ConfigError("RPS needs at least two posterior draws");
  if (pattern.empty()) throw DataError("RPS needs at least one observed event");
  const std::vector<ParamId> ids = resolve_columns(draws);
  check_gp_shape(tmpl, draws);

  const double horizon = pattern.horizon();
  const double rate_hat = double(pattern.size()) / horizon;
  const double dt = config.dt > 0.0 ? config.dt : 1.0 / rate_hat;

  struct Anchor {
    double mid;
    double length;
    long long observed;
  };
  std::vector<Anchor> anchors;
  anchors.reserve(pattern.size());
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const double t = pattern[i];
    const double end = std::min(t + dt, horizon);
    if (!(end > t)) continue;  // zero-length window at the horizon
    anchors.push_back({t + (end - t) / 2.0, end - t,
                       static_cast<long long>(pattern.count_in(t, end))});
  }
  if (anchors.empty()) throw DataError("every RPS window is empty; shrink dt or check the data");

  const std::size_t m = draws.n_rows;
  std::vector<std::vector<long long>> counts(anchors.size());
  for (auto& c : counts) c.reserve(m);

  std::mt19937_64 rng(config.rng_seed);
  ModelSpec model = tmpl;
  for (std::size_t r = 0; r < m; ++r) {
    apply_row(model, draws, ids, r);
    KernelSumStream stream(model.kernel, pattern);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double lam = model.link.apply(background_argument(model.background, anchors[a].mid) +
                                          stream.before(anchors[a].mid));
      const double mean = lam * anchors[a].length;
      if (!std::isfinite(mean)) {
        throw NumericError("predictive Poisson mean is not finite; the posterior draw is unstable");
      }
      long long n = 0;
      if (mean > 0.0) n = std::poisson_distribution<long long>(mean)(rng);
      counts[a].push_back(n);
    }
  }

  double total = 0.0;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    total += rps_score(counts[a], anchors[a].observed);
  }
  return total / double(anchors.size());
}

ComparisonReport evaluate_fit(const ModelSpec& tmpl, const PosteriorSamples& draws,
                              const PointPattern& pattern, const WindowConfig& window_config,
                              const RpsConfig& rps_config) {
  ComparisonReport report;
  const WindowSet windows = build_windows(pattern, window_config);
  report.n_windows = windows.active_count();
  report.window_seed = windows.rng_seed;
  report.q = model_probabilities(tmpl, draws, pattern, windows);

  auto rate_or_nan = [&](const std::vector<double>& probs, PmrDirection dir) {
    try {
      return pmr(windows, probs, dir);
    } catch (const DataError&) {
      return kNaN;
    }
  };
  report.pmr_excite = rate_or_nan(report.q, PmrDirection::Excite);
  report.pmr_inhibit = rate_or_nan(report.q, PmrDirection::Inhibit);
  report.pmr_excite_hpp = rate_or_nan(windows.p, PmrDirection::Excite);
  report.pmr_inhibit_hpp = rate_or_nan(windows.p, PmrDirection::Inhibit);

  report.dic = dic(tmpl, draws, pattern);
  report.rps_mean = draws.n_rows >= 2 ? rps(tmpl, draws, pattern, rps_config) : kNaN;
  return report;
}

}  // namespace evopp
