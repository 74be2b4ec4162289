#include "evopp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "evopp/errors.hpp"
#include "evopp/intensity.hpp"

namespace evopp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

// Likelihood evaluation with a closed form for the homogeneous special case;
// everything else goes through the shared quadrature evaluator.
struct LikelihoodBackend {
  bool fast;
  double horizon;
  double n_events;
  std::optional<LikelihoodEvaluator> ev;

  LikelihoodBackend(const ModelSpec& shape, const PointPattern& p)
      : fast(shape.kernel.family == KernelFamily::None &&
             shape.background.form == BackgroundForm::Constant),
        horizon(p.horizon()),
        n_events(static_cast<double>(p.size())) {
    if (!fast) ev.emplace(shape, p);
  }

  double eval(const ModelSpec& m) {
    if (fast) {
      const double lam = m.link.apply(m.background.mu);
      if (lam <= 0.0) return n_events == 0.0 ? 0.0 : -kInf;
      return -lam * horizon + n_events * std::log(lam);
    }
    return ev->evaluate(m);
  }
};

// Lower Cholesky factor of a row-major symmetric matrix; the caller adds a
// ridge, so pivots stay strictly positive.
void cholesky(const std::vector<double>& a, std::size_t d, std::vector<double>& l) {
  l.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) sum -= l[i * d + k] * l[j * d + k];
      if (i == j) {
        l[i * d + i] = std::sqrt(std::max(sum, 1e-300));
      } else {
        l[i * d + j] = sum / l[j * d + j];
      }
    }
  }
}

// Running mean/scatter of the chain for the adaptive proposal. The deviation
// products keep the scatter symmetric by construction.
struct RunningCov {
  std::size_t d = 0;
  std::size_t count = 0;
  std::vector<double> mean, m2, delta;

  void init(std::size_t dim) {
    d = dim;
    count = 0;
    mean.assign(d, 0.0);
    m2.assign(d * d, 0.0);
    delta.assign(d, 0.0);
  }

  void add(const std::vector<double>& x) {
    ++count;
    const double w = static_cast<double>(count - 1) / static_cast<double>(count);
    for (std::size_t i = 0; i < d; ++i) delta[i] = x[i] - mean[i];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) m2[i * d + j] += w * delta[i] * delta[j];
    }
    for (std::size_t i = 0; i < d; ++i) mean[i] += delta[i] / static_cast<double>(count);
  }
};

}  // namespace

void SamplerConfig::validate() const {
  if (n_iterations <= 0) throw ConfigError("n_iterations must be positive");
  if (burn_in <= 0 || burn_in >= n_iterations) {
    throw ConfigError("burn_in must satisfy 0 < burn_in < n_iterations");
  }
  const int uni = univariate_length();
  if (uni < 0 || uni >= burn_in) {
    throw ConfigError("univariate phase must end before burn_in");
  }
  if (!(target_accept_low >= 0.0) || !(target_accept_low < target_accept_high) ||
      !(target_accept_high <= 1.0)) {
    throw ConfigError("acceptance window must satisfy 0 <= low < high <= 1");
  }
  if (!(initial_step > 0.0) || !(gp_initial_step > 0.0)) {
    throw ConfigError("initial step sizes must be positive");
  }
  if (adaptation_stride <= 0) throw ConfigError("adaptation_stride must be positive");
}

std::size_t PosteriorSamples::col_index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw std::invalid_argument("no sampled parameter named " + name);
}

double PosteriorSamples::col_mean(std::size_t col) const {
  if (n_rows == 0) throw std::invalid_argument("no posterior rows");
  double sum = 0.0;
  for (std::size_t r = 0; r < n_rows; ++r) sum += at(r, col);
  return sum / static_cast<double>(n_rows);
}

double PosteriorSamples::col_variance(std::size_t col) const {
  if (n_rows < 2) throw std::invalid_argument("need at least two rows for a variance");
  const double m = col_mean(col);
  double sum = 0.0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double dev = at(r, col) - m;
    sum += dev * dev;
  }
  return sum / static_cast<double>(n_rows - 1);
}

double PosteriorSamples::col_quantile(std::size_t col, double q) const {
  if (n_rows == 0) throw std::invalid_argument("no posterior rows");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  std::vector<double> v(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) v[r] = at(r, col);
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(n_rows - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, n_rows - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double PosteriorSamples::gp_cell_mean(std::size_t cell) const {
  if (n_rows == 0 || gp_size == 0) throw std::invalid_argument("no latent draws");
  double sum = 0.0;
  for (std::size_t r = 0; r < n_rows; ++r) sum += gp_at(r, cell);
  return sum / static_cast<double>(n_rows);
}

double ar1_term(const LatentGP& gp, std::size_t s) {
  if (!(gp.sigma2 > 0.0) || !(gp.phi > 0.0)) return -kInf;
  if (s == 0) return log_normal_pdf(gp.w_star[0], 0.0, gp.sigma2);
  const double dt = gp.grid_times[s] - gp.grid_times[s - 1];
  const double rho = std::exp(-gp.phi * dt);
  const double innov = gp.sigma2 * (1.0 - rho * rho);
  if (!(innov > 0.0)) return -kInf;
  return log_normal_pdf(gp.w_star[s], rho * gp.w_star[s - 1], innov);
}

double ar1_log_prior(const LatentGP& gp) {
  double lp = 0.0;
  for (std::size_t s = 0; s < gp.w_star.size(); ++s) {
    const double t = ar1_term(gp, s);
    if (t == -kInf) return -kInf;
    lp += t;
  }
  return lp;
}

void ar1_sample_path(LatentGP& gp, std::mt19937_64& rng) {
  gp.validate();
  std::normal_distribution<double> standard(0.0, 1.0);
  gp.w_star[0] = std::sqrt(gp.sigma2) * standard(rng);
  for (std::size_t s = 1; s < gp.w_star.size(); ++s) {
    const double dt = gp.grid_times[s] - gp.grid_times[s - 1];
    const double rho = std::exp(-gp.phi * dt);
    const double innov_sd = std::sqrt(gp.sigma2 * (1.0 - rho * rho));
    gp.w_star[s] = rho * gp.w_star[s - 1] + innov_sd * standard(rng);
  }
}

double log_posterior(const ModelSpec& model, const PriorSpec& priors,
                     const PointPattern& pattern) {
  double lp = 0.0;
  for (ParamId id : model_parameters(model)) {
    const double x = get_param(model, id);
    if (!param_in_constraint(model, id, x)) return -kInf;
    if (const Prior* p = priors.find(id)) {
      const double dens = p->log_density(x);
      if (dens == -kInf) return -kInf;
      lp += dens;
    }
  }
  if (model.background.form == BackgroundForm::LogLinearSeasonalGP) {
    const double g = ar1_log_prior(*model.background.gp);
    if (g == -kInf) return -kInf;
    lp += g;
  }
  return lp + log_likelihood(model, pattern);
}

double tune_step(double current_step, double accept_rate, double low, double high) {
  if (accept_rate > high) return current_step * 2.0;
  if (accept_rate < low) return current_step * 0.5;
  return current_step;
}

PosteriorSamples run_mcmc(const ModelSpec& tmpl, const PriorSpec& priors,
                          const PointPattern& pattern, const SamplerConfig& config) {
  config.validate();
  ModelSpec model = tmpl;
  model.validate();
  validate_priors(model, priors);

  const bool has_gp = model.background.form == BackgroundForm::LogLinearSeasonalGP;
  LatentGP* gp = has_gp ? &*model.background.gp : nullptr;
  const std::size_t gp_size = has_gp ? gp->w_star.size() : 0;

  std::vector<ParamId> sampled;
  for (ParamId id : model_parameters(model)) {
    if (priors.find(id) != nullptr) sampled.push_back(id);
  }

  // sigma2 and phi only touch the latent prior, so they get dedicated
  // updates; everything else forms the Metropolis block.
  std::vector<ParamId> block;
  const Prior* phi_prior = nullptr;
  const Prior* sigma2_prior = nullptr;
  for (ParamId id : sampled) {
    if (id == ParamId::Phi) {
      phi_prior = priors.find(id);
    } else if (id == ParamId::Sigma2) {
      sigma2_prior = priors.find(id);
    } else {
      block.push_back(id);
    }
  }
  const bool gibbs_sigma2 =
      sigma2_prior != nullptr && sigma2_prior->family == PriorFamily::InverseGamma;
  const std::size_t d = block.size();

  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);

  LikelihoodBackend backend(model, pattern);

  // Starting point: prior draws with the latent path at zero, retried until
  // the posterior is finite.
  double cur_ll = -kInf;
  double cur_ar1 = 0.0;
  bool started = false;
  for (int attempt = 0; attempt < 1000 && !started; ++attempt) {
    for (ParamId id : sampled) set_param(model, id, priors.find(id)->sample(rng));
    if (has_gp) std::fill(gp->w_star.begin(), gp->w_star.end(), 0.0);
    bool legal = true;
    for (ParamId id : sampled) {
      legal = legal && param_in_constraint(model, id, get_param(model, id));
    }
    if (!legal) continue;
    cur_ar1 = has_gp ? ar1_log_prior(*gp) : 0.0;
    if (cur_ar1 == -kInf) continue;
    cur_ll = backend.eval(model);
    started = std::isfinite(cur_ll);
  }
  if (!started) {
    throw NumericError(
        "no finite log-posterior in 1000 prior draws; re-initialize with a different seed or "
        "revised priors");
  }
  bool ev_synced = true;  // evaluator state matches the current model

  std::vector<double> step(d, config.initial_step);
  std::vector<int> win_prop(d, 0), win_acc(d, 0);
  std::vector<long> tot_prop(d, 0), tot_acc(d, 0);
  std::vector<double> gp_step(gp_size, config.gp_initial_step);
  std::vector<int> gp_win_prop(gp_size, 0), gp_win_acc(gp_size, 0);
  long gp_tot_prop = 0, gp_tot_acc = 0;
  double phi_step = config.initial_step;
  int phi_win_prop = 0, phi_win_acc = 0;
  long phi_tot_prop = 0, phi_tot_acc = 0;
  double s2_step = config.initial_step;
  int s2_win_prop = 0, s2_win_acc = 0;
  long s2_tot_prop = 0, s2_tot_acc = 0;
  long joint_prop = 0, joint_acc = 0;

  RunningCov cov;
  cov.init(d);
  std::vector<double> x(d), x_old(d), dx(d), z(d), prop(d * d), chol_l(d * d);

  const int uni_len = config.univariate_length();
  const int half_burn = config.burn_in / 2;

  PosteriorSamples out;
  out.rng_seed = config.rng_seed;
  for (ParamId id : sampled) out.names.emplace_back(param_name(id));
  out.n_rows = static_cast<std::size_t>(config.n_iterations - config.burn_in);
  out.gp_size = gp_size;
  out.draws.reserve(out.n_rows * sampled.size());
  out.gp_draws.reserve(out.n_rows * gp_size);

  for (int iter = 0; iter < config.n_iterations; ++iter) {
    const bool phase1 = iter < uni_len;

    if (d > 0 && (phase1 || cov.count < 10)) {
      // One tuned random-walk update per parameter.
      for (std::size_t i = 0; i < d; ++i) {
        const ParamId id = block[i];
        const Prior& pr = *priors.find(id);
        const double xi = get_param(model, id);
        const double xc = xi + step[i] * std_normal(rng);
        ++win_prop[i];
        ++tot_prop[i];
        if (!param_in_constraint(model, id, xc)) continue;
        const double dp = pr.log_density(xc) - pr.log_density(xi);
        if (dp == -kInf) continue;
        set_param(model, id, xc);
        const double cand_ll = backend.eval(model);
        ev_synced = false;
        if (std::log(unif01(rng)) < dp + cand_ll - cur_ll) {
          cur_ll = cand_ll;
          ev_synced = true;
          ++win_acc[i];
          ++tot_acc[i];
        } else {
          set_param(model, id, xi);
        }
      }
    } else if (d > 0) {
      // Joint proposal from the scaled running covariance.
      const double sd = 2.38 * 2.38 / static_cast<double>(d);
      const double denom = static_cast<double>(cov.count - 1);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          prop[i * d + j] = sd * (cov.m2[i * d + j] / denom + (i == j ? 1e-8 : 0.0));
        }
      }
      cholesky(prop, d, chol_l);
      for (std::size_t i = 0; i < d; ++i) z[i] = std_normal(rng);
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += chol_l[i * d + j] * z[j];
        dx[i] = s;
      }
      ++joint_prop;
      double dp = 0.0;
      bool legal = true;
      for (std::size_t i = 0; i < d && legal; ++i) {
        x_old[i] = get_param(model, block[i]);
        const double xc = x_old[i] + dx[i];
        legal = param_in_constraint(model, block[i], xc);
        if (legal) {
          const double dd =
              priors.find(block[i])->log_density(xc) - priors.find(block[i])->log_density(x_old[i]);
          legal = dd != -kInf;
          dp += dd;
        }
      }
      if (legal) {
        for (std::size_t i = 0; i < d; ++i) set_param(model, block[i], x_old[i] + dx[i]);
        const double cand_ll = backend.eval(model);
        ev_synced = false;
        if (std::log(unif01(rng)) < dp + cand_ll - cur_ll) {
          cur_ll = cand_ll;
          ev_synced = true;
          ++joint_acc;
        } else {
          for (std::size_t i = 0; i < d; ++i) set_param(model, block[i], x_old[i]);
        }
      }
    }

    if (has_gp) {
      LikelihoodEvaluator& ev = *backend.ev;
      if (!ev_synced) {
        cur_ll = backend.eval(model);
        ev_synced = true;
      }
      // Latent effects one at a time; only the two adjacent prior factors and
      // the effect's own grid cell move.
      for (std::size_t c = 0; c < gp_size; ++c) {
        const double w_old = gp->w_star[c];
        const double w_new = w_old + gp_step[c] * std_normal(rng);
        ++gp_win_prop[c];
        ++gp_tot_prop;
        const double t_old = ar1_term(*gp, c) + (c + 1 < gp_size ? ar1_term(*gp, c + 1) : 0.0);
        gp->w_star[c] = w_new;
        const double t_new = ar1_term(*gp, c) + (c + 1 < gp_size ? ar1_term(*gp, c + 1) : 0.0);
        gp->w_star[c] = w_old;
        const double cand_ll = ev.propose_gp(model, c, w_new);
        if (std::log(unif01(rng)) < (t_new - t_old) + (cand_ll - cur_ll)) {
          ev.accept_gp_proposal();
          gp->w_star[c] = w_new;
          cur_ll = cand_ll;
          cur_ar1 += t_new - t_old;
          ++gp_win_acc[c];
          ++gp_tot_acc;
        }
      }
      if (phi_prior != nullptr) {
        ++phi_win_prop;
        ++phi_tot_prop;
        const double phi_old = gp->phi;
        const double phi_new = phi_old * std::exp(phi_step * std_normal(rng));
        const double u = unif01(rng);
        const double dp = phi_prior->log_density(phi_new) - phi_prior->log_density(phi_old);
        if (dp != -kInf && phi_new > 0.0) {
          gp->phi = phi_new;
          const double ar1_new = ar1_log_prior(*gp);
          // log-scale walk, so the ratio carries the phi'/phi Jacobian
          const double lr = dp + (ar1_new - cur_ar1) + std::log(phi_new / phi_old);
          if (ar1_new != -kInf && std::log(u) < lr) {
            cur_ar1 = ar1_new;
            ++phi_win_acc;
            ++phi_tot_acc;
          } else {
            gp->phi = phi_old;
          }
        }
      }
      if (sigma2_prior != nullptr) {
        if (gibbs_sigma2) {
          // Inverse-gamma conjugacy in the AR(1) quadratic form.
          const double dt = gp->spacing();
          const double rho = std::exp(-gp->phi * dt);
          const double r2 = 1.0 - rho * rho;
          double q = gp->w_star[0] * gp->w_star[0];
          for (std::size_t s = 1; s < gp_size; ++s) {
            const double e = gp->w_star[s] - rho * gp->w_star[s - 1];
            q += e * e / r2;
          }
          const double shape = sigma2_prior->a + static_cast<double>(gp_size) / 2.0;
          const double scale = sigma2_prior->b + q / 2.0;
          gp->sigma2 = scale / std::gamma_distribution<double>(shape, 1.0)(rng);
          cur_ar1 = ar1_log_prior(*gp);
          ++s2_tot_prop;
          ++s2_tot_acc;
        } else {
          ++s2_win_prop;
          ++s2_tot_prop;
          const double s_old = gp->sigma2;
          const double s_new = s_old * std::exp(s2_step * std_normal(rng));
          const double u = unif01(rng);
          const double dp =
              sigma2_prior->log_density(s_new) - sigma2_prior->log_density(s_old);
          if (dp != -kInf && s_new > 0.0) {
            gp->sigma2 = s_new;
            const double ar1_new = ar1_log_prior(*gp);
            const double lr = dp + (ar1_new - cur_ar1) + std::log(s_new / s_old);
            if (ar1_new != -kInf && std::log(u) < lr) {
              cur_ar1 = ar1_new;
              ++s2_win_acc;
              ++s2_tot_acc;
            } else {
              gp->sigma2 = s_old;
            }
          }
        }
      }
    }

    if (d > 0 && iter >= half_burn) {
      for (std::size_t i = 0; i < d; ++i) x[i] = get_param(model, block[i]);
      cov.add(x);
    }

    if (phase1 && (iter + 1) % config.adaptation_stride == 0) {
      for (std::size_t i = 0; i < d; ++i) {
        if (win_prop[i] > 0) {
          step[i] = tune_step(step[i], static_cast<double>(win_acc[i]) / win_prop[i],
                              config.target_accept_low, config.target_accept_high);
        }
        win_prop[i] = win_acc[i] = 0;
      }
      for (std::size_t c = 0; c < gp_size; ++c) {
        if (gp_win_prop[c] > 0) {
          gp_step[c] = tune_step(gp_step[c], static_cast<double>(gp_win_acc[c]) / gp_win_prop[c],
                                 config.target_accept_low, config.target_accept_high);
        }
        gp_win_prop[c] = gp_win_acc[c] = 0;
      }
      if (phi_win_prop > 0) {
        phi_step = tune_step(phi_step, static_cast<double>(phi_win_acc) / phi_win_prop,
                             config.target_accept_low, config.target_accept_high);
        phi_win_prop = phi_win_acc = 0;
      }
      if (s2_win_prop > 0) {
        s2_step = tune_step(s2_step, static_cast<double>(s2_win_acc) / s2_win_prop,
                            config.target_accept_low, config.target_accept_high);
        s2_win_prop = s2_win_acc = 0;
      }
    }

    if (iter >= config.burn_in) {
      for (ParamId id : sampled) out.draws.push_back(get_param(model, id));
      if (has_gp) {
        out.gp_draws.insert(out.gp_draws.end(), gp->w_star.begin(), gp->w_star.end());
      }
    }
  }

  for (std::size_t i = 0; i < d; ++i) {
    out.acceptance.push_back({param_name(block[i]),
                              tot_prop[i] > 0
                                  ? static_cast<double>(tot_acc[i]) / static_cast<double>(tot_prop[i])
                                  : 0.0});
  }
  if (joint_prop > 0) {
    out.acceptance.push_back(
        {"joint", static_cast<double>(joint_acc) / static_cast<double>(joint_prop)});
  }
  if (gp_tot_prop > 0) {
    out.acceptance.push_back(
        {"gp", static_cast<double>(gp_tot_acc) / static_cast<double>(gp_tot_prop)});
  }
  if (phi_tot_prop > 0) {
    out.acceptance.push_back(
        {"phi", static_cast<double>(phi_tot_acc) / static_cast<double>(phi_tot_prop)});
  }
  if (s2_tot_prop > 0) {
    out.acceptance.push_back(
        {"sigma2", static_cast<double>(s2_tot_acc) / static_cast<double>(s2_tot_prop)});
  }
  return out;
}

}  // namespace evopp
