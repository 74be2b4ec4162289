#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "evopp/model.hpp"
#include "evopp/point_pattern.hpp"
#include "evopp/priors.hpp"

namespace evopp {

struct SamplerConfig {
  int n_iterations = 30000;
  int burn_in = 10000;
  int univariate_phase_length = -1;  // negative: burn_in / 2 + 100
  double target_accept_low = 0.15;
  double target_accept_high = 0.6;
  double initial_step = 0.1;
  double gp_initial_step = 0.1;
  int adaptation_stride = 100;
  std::uint64_t rng_seed = 1;

  [[nodiscard]] int univariate_length() const {
    return univariate_phase_length >= 0 ? univariate_phase_length : burn_in / 2 + 100;
  }
  void validate() const;
};

struct AcceptanceEntry {
  std::string name;
  double rate = 0.0;
};

struct PosteriorSamples {
  std::vector<std::string> names;  // sampled scalar parameters, canonical order
  std::size_t n_rows = 0;
  std::vector<double> draws;  // row-major, n_rows x names.size()
  std::size_t gp_size = 0;
  std::vector<double> gp_draws;  // row-major, n_rows x gp_size
  std::vector<AcceptanceEntry> acceptance;
  std::uint64_t rng_seed = 0;

  [[nodiscard]] double at(std::size_t row, std::size_t col) const {
    return draws[row * names.size() + col];
  }
  [[nodiscard]] double gp_at(std::size_t row, std::size_t cell) const {
    return gp_draws[row * gp_size + cell];
  }
  [[nodiscard]] std::size_t col_index(const std::string& name) const;  // throws if absent
  [[nodiscard]] double col_mean(std::size_t col) const;
  [[nodiscard]] double col_variance(std::size_t col) const;
  // Linear-interpolation quantile of one column, q in [0, 1].
  [[nodiscard]] double col_quantile(std::size_t col, double q) const;
  [[nodiscard]] double gp_cell_mean(std::size_t cell) const;
};

// Sequential log prior of the latent path at its grid values:
// w_1 ~ N(0, sigma2), w_s | w_{s-1} ~ N(e^{-phi dt} w_{s-1}, sigma2 (1 - e^{-2 phi dt})).
[[nodiscard]] double ar1_log_prior(const LatentGP& gp);

// One factor of that product; s = 0 is the marginal term.
[[nodiscard]] double ar1_term(const LatentGP& gp, std::size_t s);

// Draws w_star from that prior in place; used to generate latent backgrounds.
void ar1_sample_path(LatentGP& gp, std::mt19937_64& rng);

// Likelihood + scalar prior log-densities + (for latent models) the AR(1)
// prior. -inf on any support or constraint violation; never throws for that.
[[nodiscard]] double log_posterior(const ModelSpec& model, const PriorSpec& priors,
                                   const PointPattern& pattern);

// Step doubling/halving toward an acceptance window; applied once per
// adaptation stride during the univariate phase.
[[nodiscard]] double tune_step(double current_step, double accept_rate, double low = 0.15,
                               double high = 0.6);

// Adaptive Metropolis chain: per-parameter random walks with tuned steps for
// the first univariate_length() iterations, then a joint random walk whose
// covariance tracks the chain (scaled 2.38^2/d, ridged); latent effects move
// one at a time every iteration; sigma2 uses its conjugate update under an
// InverseGamma prior; phi moves on the log scale. Parameters without priors
// stay fixed. Throws NumericError if no finite starting point is found.
[[nodiscard]] PosteriorSamples run_mcmc(const ModelSpec& tmpl, const PriorSpec& priors,
                                        const PointPattern& pattern,
                                        const SamplerConfig& config);

}  // namespace evopp
