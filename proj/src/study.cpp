#include "evopp/study.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "evopp/errors.hpp"
#include "evopp/simulate.hpp"

namespace evopp {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Stream tags for the per-replicate seed streams.
constexpr std::uint64_t kSimStream = 0;
constexpr std::uint64_t kPathStream = 1;
constexpr std::uint64_t kWindowStream = 2;
constexpr std::uint64_t kRpsStream = 3;
constexpr std::uint64_t kFitStreamBase = 100;

// splitmix64 absorption: every (seed, cell, replicate, stream) tuple maps to
// its own well-mixed seed, so results do not depend on the thread count.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t cell, std::uint64_t replicate,
                          std::uint64_t stream) {
  std::uint64_t x = seed;
  for (std::uint64_t word : {cell, replicate, stream}) {
    x += 0x9e3779b97f4a7c15ull + word;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    x = z ^ (z >> 31);
  }
  return x;
}

std::string grid_cell_name(double mu, double alpha) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "mu=%g alpha=%g", mu, alpha);
  return buffer;
}

ModelSpec constant_hawkes(double mu, double alpha, double beta, double eta) {
  ModelSpec model;
  model.background.form = BackgroundForm::Constant;
  model.background.mu = mu;
  model.kernel = {KernelFamily::Exponential, alpha, beta, 1.0};
  model.link = {LinkFamily::PowerTobit, eta};
  model.quad_points = 2000;
  return model;
}

ModelSpec constant_poisson(double mu) {
  ModelSpec model;
  model.background.form = BackgroundForm::Constant;
  model.background.mu = mu;
  model.kernel = {KernelFamily::None, 0.0, 1.0, 1.0};
  model.link = {LinkFamily::PowerTobit, 1.0};
  model.quad_points = 2000;
  return model;
}

PriorSpec hawkes_priors(double alpha_half_width) {
  PriorSpec priors;
  priors.entries[ParamId::Mu] = {PriorFamily::Gamma, 1.0, 0.1};
  priors.entries[ParamId::Alpha] = {PriorFamily::Uniform, -alpha_half_width, alpha_half_width};
  priors.entries[ParamId::Beta] = {PriorFamily::Gamma, 1.0, 1.0 / 24.0};
  return priors;
}

PriorSpec poisson_priors() {
  PriorSpec priors;
  priors.entries[ParamId::Mu] = {PriorFamily::Gamma, 1.0, 0.1};
  return priors;
}

StudyFit poisson_comparator() {
  StudyFit fit;
  fit.name = "hpp";
  fit.tmpl = constant_poisson(1.0);
  fit.priors = poisson_priors();
  // The constant-rate comparator scores windows by their own construction
  // probability rather than a posterior intensity.
  fit.pmr_from_window_p = true;
  return fit;
}

StudyFit hawkes_fit() {
  StudyFit fit;
  fit.name = "hawkes";
  fit.tmpl = constant_hawkes(1.0, 0.0, 1.0, 1.0);
  fit.priors = hawkes_priors(2.0);
  return fit;
}

StudyPreset excitation_grid() {
  StudyPreset preset;
  preset.name = "excite_grid";
  preset.direction = PmrDirection::Excite;
  preset.use_rps = true;
  preset.default_replicates = 1000;
  for (double mu : {0.5, 1.0}) {
    for (double alpha : {0.01, 0.03, 0.05, 0.07, 0.09}) {
      StudyCell cell;
      cell.name = grid_cell_name(mu, alpha);
      cell.generative = constant_hawkes(mu, alpha, 1.0, 1.0);
      cell.horizon = 100.0;
      cell.fits = {hawkes_fit(), poisson_comparator()};
      preset.cells.push_back(std::move(cell));
    }
  }
  return preset;
}

StudyPreset inhibition_grid() {
  StudyPreset preset;
  preset.name = "inhibit_grid";
  preset.direction = PmrDirection::Inhibit;
  preset.use_rps = false;
  preset.default_replicates = 1000;
  for (double mu : {2.0, 5.0}) {
    for (double alpha : {-0.1, -0.3, -0.5, -0.7, -0.9}) {
      StudyCell cell;
      cell.name = grid_cell_name(mu, alpha);
      cell.generative = constant_hawkes(mu, alpha, 1.0, 1.0);
      cell.horizon = 100.0;
      cell.fits = {hawkes_fit(), poisson_comparator()};
      preset.cells.push_back(std::move(cell));
    }
  }
  return preset;
}

StudyPreset link_grid() {
  // Common excitatory kernel; the four fits differ only in the link. The
  // generative alpha sits outside the narrow Hawkes prior, so alpha gets a
  // wide uniform here.
  PriorSpec power_priors;
  power_priors.entries[ParamId::Mu] = {PriorFamily::Gamma, 1.0, 0.1};
  power_priors.entries[ParamId::Alpha] = {PriorFamily::Uniform, -10.0, 10.0};
  power_priors.entries[ParamId::Beta] = {PriorFamily::Gamma, 1.0, 1.0 / 24.0};

  // Softplus-family links accept any real baseline, so mu gets a diffuse
  // normal instead of a positive prior.
  PriorSpec softplus_priors;
  softplus_priors.entries[ParamId::Mu] = {PriorFamily::Normal, 0.0, 10.0};
  softplus_priors.entries[ParamId::Alpha] = {PriorFamily::Uniform, -10.0, 10.0};
  softplus_priors.entries[ParamId::Beta] = {PriorFamily::Gamma, 1.0, 1.0 / 24.0};

  auto link_fit = [&](const std::string& name, LinkFamily family, double eta) {
    StudyFit fit;
    fit.name = name;
    fit.tmpl = constant_hawkes(1.0, 0.0, 1.0, 1.0);
    fit.tmpl.link = {family, eta};
    fit.priors = family == LinkFamily::PowerTobit ? power_priors : softplus_priors;
    return fit;
  };
  const std::vector<StudyFit> fits = {
      link_fit("power_eta_0.5", LinkFamily::PowerTobit, 0.5),
      link_fit("power_eta_1", LinkFamily::PowerTobit, 1.0),
      link_fit("softplus", LinkFamily::SoftPlus, 1.0),
      link_fit("log10_softplus", LinkFamily::Log10SoftPlus, 1.0),
  };

  StudyPreset preset;
  preset.name = "link_grid";
  preset.direction = PmrDirection::Excite;
  preset.use_rps = true;
  preset.default_replicates = 1000;

  StudyCell sqrt_cell;
  sqrt_cell.name = "power_eta_0.5";
  sqrt_cell.generative = constant_hawkes(3.0, 4.0, 1.0, 0.5);
  sqrt_cell.horizon = 100.0;
  sqrt_cell.fits = fits;
  preset.cells.push_back(std::move(sqrt_cell));

  StudyCell linear_cell;
  linear_cell.name = "power_eta_1";
  linear_cell.generative = constant_hawkes(0.5, 0.9, 1.0, 1.0);
  linear_cell.horizon = 100.0;
  linear_cell.fits = fits;
  preset.cells.push_back(std::move(linear_cell));
  return preset;
}

StudyPreset evolutionary_lgcp() {
  // A latent AR(1) background with fast decay plus strong short-range
  // excitation; each replicate draws a fresh latent path. The sharp kernel
  // needs the fine quadrature grid.
  constexpr std::size_t kGridCells = 100;
  constexpr double kHorizon = 100.0;

  ModelSpec generative;
  generative.background.form = BackgroundForm::LogLinearSeasonalGP;
  generative.background.mu = std::log(1.5);
  generative.background.gamma1 = 0.0;
  generative.background.gamma2 = 0.0;
  generative.background.gp = LatentGP::make_grid(kGridCells, kHorizon, 1.0, 0.05);
  generative.kernel = {KernelFamily::Exponential, 0.9, 20.0, 1.0};
  generative.link = {LinkFamily::PowerTobit, 1.0};
  generative.quad_points = 10000;

  PriorSpec gp_priors;
  gp_priors.entries[ParamId::Mu] = {PriorFamily::Normal, 0.0, 10.0};
  gp_priors.entries[ParamId::Sigma2] = {PriorFamily::InverseGamma, 1.0, 1.0};
  gp_priors.entries[ParamId::Phi] = {PriorFamily::Gamma, 0.01, 0.01};

  StudyFit gp_evo;
  gp_evo.name = "gp_evo";
  gp_evo.tmpl = generative;
  gp_evo.tmpl.kernel = {KernelFamily::Exponential, 0.0, 1.0, 1.0};
  gp_evo.priors = gp_priors;
  gp_evo.priors.entries[ParamId::Alpha] = {PriorFamily::Uniform, -2.0, 2.0};
  gp_evo.priors.entries[ParamId::Beta] = {PriorFamily::Gamma, 1.0, 1.0 / 24.0};

  StudyFit gp_only;
  gp_only.name = "gp_only";
  gp_only.tmpl = generative;
  gp_only.tmpl.kernel = {KernelFamily::None, 0.0, 1.0, 1.0};
  gp_only.priors = gp_priors;

  StudyFit evo_only;
  evo_only.name = "evo_only";
  evo_only.tmpl = generative;
  evo_only.tmpl.background.form = BackgroundForm::LogLinearSeasonal;
  evo_only.tmpl.background.gp.reset();
  evo_only.tmpl.kernel = {KernelFamily::Exponential, 0.0, 1.0, 1.0};
  evo_only.priors.entries[ParamId::Mu] = {PriorFamily::Normal, 0.0, 10.0};
  evo_only.priors.entries[ParamId::Alpha] = {PriorFamily::Uniform, -2.0, 2.0};
  evo_only.priors.entries[ParamId::Beta] = {PriorFamily::Gamma, 1.0, 1.0 / 24.0};

  StudyCell cell;
  cell.name = "evo_lgcp";
  cell.generative = generative;
  cell.horizon = kHorizon;
  cell.fits = {std::move(gp_evo), std::move(gp_only), std::move(evo_only)};

  StudyPreset preset;
  preset.name = "evo_lgcp";
  preset.direction = PmrDirection::Excite;
  preset.use_rps = true;
  preset.default_replicates = 1;
  preset.cells.push_back(std::move(cell));
  return preset;
}

struct FitOutcome {
  double dic = kNan;
  double pmr = kNan;
  double rps = kNan;
  bool ok = false;
};

struct ReplicateOutcome {
  double n = kNan;
  bool simulated = false;
  std::vector<FitOutcome> fits;
};

ReplicateOutcome run_replicate(const StudyPreset& preset, std::size_t cell_index,
                               std::size_t replicate, const StudyConfig& config) {
  const StudyCell& cell = preset.cells[cell_index];
  ReplicateOutcome outcome;
  outcome.fits.resize(cell.fits.size());

  PointPattern data({}, cell.horizon);
  try {
    ModelSpec generative = cell.generative;
    if (generative.background.gp.has_value()) {
      std::mt19937_64 path_rng(derive_seed(config.rng_seed, cell_index, replicate, kPathStream));
      ar1_sample_path(*generative.background.gp, path_rng);
    }
    ThinningConfig sim;
    sim.rng_seed = derive_seed(config.rng_seed, cell_index, replicate, kSimStream);
    data = simulate_thinning(generative, cell.horizon, sim);
  } catch (const NumericError&) {
    return outcome;  // every fit of this replicate counts as failed
  }
  outcome.n = static_cast<double>(data.size());
  outcome.simulated = true;

  WindowSet windows;
  try {
    WindowConfig window_config;
    window_config.rng_seed = derive_seed(config.rng_seed, cell_index, replicate, kWindowStream);
    windows = build_windows(data, window_config);
  } catch (const DataError&) {
    return outcome;  // empty pattern: nothing to score
  }

  for (std::size_t f = 0; f < cell.fits.size(); ++f) {
    const StudyFit& fit = cell.fits[f];
    try {
      SamplerConfig sampler = config.sampler;
      sampler.rng_seed = derive_seed(config.rng_seed, cell_index, replicate, kFitStreamBase + f);
      const PosteriorSamples posterior = run_mcmc(fit.tmpl, fit.priors, data, sampler);

      FitOutcome& result = outcome.fits[f];
      result.dic = dic(fit.tmpl, posterior, data).dic;
      if (fit.pmr_from_window_p) {
        result.pmr = pmr(windows, windows.p, preset.direction);
      } else {
        const std::vector<double> q = model_probabilities(fit.tmpl, posterior, data, windows);
        result.pmr = pmr(windows, q, preset.direction);
      }
      if (preset.use_rps) {
        RpsConfig rps_config;
        rps_config.rng_seed = derive_seed(config.rng_seed, cell_index, replicate, kRpsStream);
        result.rps = rps(fit.tmpl, posterior, data, rps_config);
      }
      result.ok = true;
    } catch (const ConfigError&) {
    } catch (const DataError&) {
    } catch (const NumericError&) {
    }
  }
  return outcome;
}

}  // namespace

StudyPreset make_study_preset(const std::string& name) {
  if (name == "excite_grid") return excitation_grid();
  if (name == "inhibit_grid") return inhibition_grid();
  if (name == "link_grid") return link_grid();
  if (name == "evo_lgcp") return evolutionary_lgcp();
  throw ConfigError("unknown study preset '" + name +
                    "'; expected excite_grid, inhibit_grid, link_grid, or evo_lgcp");
}

void StudyConfig::validate() const {
  static_cast<void>(make_study_preset(preset));  // throws for unknown names
  if (threads < 1) {
    throw ConfigError("study threads must be at least 1");
  }
  sampler.validate();
}

std::vector<StudyRow> run_replicate_study(const StudyPreset& preset_in,
                                          const StudyConfig& config) {
  if (config.threads < 1) {
    throw ConfigError("study threads must be at least 1");
  }
  config.sampler.validate();

  StudyPreset preset = preset_in;
  if (!config.cell_filter.empty()) {
    std::erase_if(preset.cells,
                  [&](const StudyCell& cell) { return cell.name != config.cell_filter; });
    if (preset.cells.empty()) {
      throw ConfigError("cell filter '" + config.cell_filter + "' matches no cell of preset '" +
                        preset_in.name + "'");
    }
  }
  const std::size_t replicates =
      config.n_replicates > 0 ? config.n_replicates : preset.default_replicates;

  std::vector<std::vector<ReplicateOutcome>> outcomes(preset.cells.size());
  for (auto& cell_outcomes : outcomes) {
    cell_outcomes.resize(replicates);
  }

  const std::size_t total = preset.cells.size() * replicates;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) break;
      const std::size_t cell_index = task / replicates;
      const std::size_t replicate = task % replicates;
      outcomes[cell_index][replicate] = run_replicate(preset, cell_index, replicate, config);
    }
  };

  if (config.threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min<std::size_t>(config.threads, total);
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) {
      pool.emplace_back(worker);
    }
    for (auto& thread : pool) {
      thread.join();
    }
  }

  std::vector<StudyRow> rows;
  for (std::size_t c = 0; c < preset.cells.size(); ++c) {
    const StudyCell& cell = preset.cells[c];
    double n_sum = 0.0;
    std::size_t n_count = 0;
    for (const ReplicateOutcome& outcome : outcomes[c]) {
      if (outcome.simulated) {
        n_sum += outcome.n;
        ++n_count;
      }
    }
    const double avg_n = n_count > 0 ? n_sum / static_cast<double>(n_count) : kNan;

    for (std::size_t f = 0; f < cell.fits.size(); ++f) {
      StudyRow row;
      row.cell = cell.name;
      row.model = cell.fits[f].name;
      row.avg_n = avg_n;
      row.replicates = replicates;

      double dic_sum = 0.0;
      double pmr_sum = 0.0;
      double rps_sum = 0.0;
      std::size_t ok = 0;
      for (const ReplicateOutcome& outcome : outcomes[c]) {
        const FitOutcome& result = outcome.fits[f];
        if (!result.ok) continue;
        dic_sum += result.dic;
        pmr_sum += result.pmr;
        rps_sum += result.rps;
        ++ok;
      }
      row.failures = replicates - ok;
      if (ok > 0) {
        row.avg_dic = dic_sum / static_cast<double>(ok);
        row.avg_pmr = pmr_sum / static_cast<double>(ok);
        row.avg_rps = preset.use_rps ? rps_sum / static_cast<double>(ok) : kNan;
      } else {
        row.avg_dic = kNan;
        row.avg_pmr = kNan;
        row.avg_rps = kNan;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<StudyRow> run_replicate_study(const StudyConfig& config) {
  return run_replicate_study(make_study_preset(config.preset), config);
}

}  // namespace evopp
