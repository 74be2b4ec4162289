#include "evopp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "evopp/errors.hpp"

namespace evopp {

void LatentGP::validate() const {
  if (grid_times.empty()) {
    throw ConfigError("latent GP needs at least one grid time");
  }
  if (w_star.size() != grid_times.size()) {
    throw ConfigError("latent GP effects must align with the grid");
  }
  if (!std::isfinite(sigma2) || sigma2 <= 0.0) {
    throw ConfigError("latent GP sigma2 must be positive");
  }
  if (!std::isfinite(phi) || phi <= 0.0) {
    throw ConfigError("latent GP phi must be positive");
  }
  if (grid_times.front() <= 0.0) {
    throw ConfigError("latent GP grid must start after 0");
  }
  const double d = grid_times.size() > 1 ? grid_times[1] - grid_times[0] : 0.0;
  for (std::size_t i = 1; i < grid_times.size(); ++i) {
    const double step = grid_times[i] - grid_times[i - 1];
    if (step <= 0.0 || std::abs(step - d) > 1e-9 * std::max(1.0, d)) {
      throw ConfigError("latent GP grid must be strictly increasing and evenly spaced");
    }
  }
}

std::size_t LatentGP::cell_of(double t) const {
  auto it = std::lower_bound(grid_times.begin(), grid_times.end(), t);
  if (it == grid_times.begin()) return 0;
  if (it == grid_times.end()) return grid_times.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - grid_times.begin());
  const std::size_t lo = hi - 1;
  // Ties go to the earlier grid point.
  return (t - grid_times[lo]) <= (grid_times[hi] - t) ? lo : hi;
}

double LatentGP::spacing() const {
  if (grid_times.size() < 2) return 0.0;
  return grid_times[1] - grid_times[0];
}

LatentGP LatentGP::make_grid(std::size_t size, double horizon, double sigma2, double phi) {
  if (size == 0 || horizon <= 0.0) {
    throw ConfigError("latent GP grid needs positive size and horizon");
  }
  LatentGP gp;
  gp.sigma2 = sigma2;
  gp.phi = phi;
  gp.grid_times.resize(size);
  gp.w_star.assign(size, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    gp.grid_times[i] = horizon * static_cast<double>(i + 1) / static_cast<double>(size);
  }
  return gp;
}

const char* background_form_name(BackgroundForm f) {
  switch (f) {
    case BackgroundForm::Constant: return "constant";
    case BackgroundForm::LogLinearSeasonal: return "loglinear_seasonal";
    case BackgroundForm::LogLinearSeasonalGP: return "loglinear_seasonal_gp";
  }
  return "?";
}

void BackgroundModel::validate() const {
  if (!std::isfinite(mu)) {
    throw ConfigError("background mu must be finite");
  }
  if (form == BackgroundForm::Constant) {
    if (mu <= 0.0) {
      throw ConfigError("constant background is a direct rate and requires mu > 0");
    }
    return;
  }
  if (!std::isfinite(gamma1) || !std::isfinite(gamma2)) {
    throw ConfigError("seasonal coefficients must be finite");
  }
  if (!std::isfinite(period) || period <= 0.0) {
    throw ConfigError("seasonal period must be positive");
  }
  if (form == BackgroundForm::LogLinearSeasonalGP) {
    if (!gp.has_value()) {
      throw ConfigError("GP background form requires a latent GP block");
    }
    gp->validate();
  }
}

double background_argument(const BackgroundModel& bg, double t) {
  if (bg.form == BackgroundForm::Constant) return bg.mu;
  const double angle = 2.0 * std::numbers::pi * t / bg.period;
  double x = bg.mu + bg.gamma1 * std::sin(angle) + bg.gamma2 * std::cos(angle);
  if (bg.form == BackgroundForm::LogLinearSeasonalGP) x += bg.gp->at(t);
  return std::exp(x);
}

void ModelSpec::validate() const {
  background.validate();
  kernel.validate();
  link.validate();
  if (quad_points < 100) {
    throw ConfigError("quad_points must be at least 100");
  }
  if (link.family == LinkFamily::Identity) {
    const bool kernel_ok = kernel.family == KernelFamily::None || kernel.alpha >= 0.0;
    if (background.form != BackgroundForm::Constant || !kernel_ok) {
      throw ConfigError(
          "identity link requires a constant background with mu > 0 and alpha >= 0, "
          "or the intensity could go negative");
    }
  }
}

const char* param_name(ParamId id) {
  switch (id) {
    case ParamId::Mu: return "mu";
    case ParamId::Gamma1: return "gamma1";
    case ParamId::Gamma2: return "gamma2";
    case ParamId::Alpha: return "alpha";
    case ParamId::Beta: return "beta";
    case ParamId::Nu: return "nu";
    case ParamId::Sigma2: return "sigma2";
    case ParamId::Phi: return "phi";
  }
  return "?";
}

bool param_id_from_name(const std::string& name, ParamId& id) {
  static constexpr ParamId all[] = {ParamId::Mu,    ParamId::Gamma1, ParamId::Gamma2,
                                    ParamId::Alpha, ParamId::Beta,   ParamId::Nu,
                                    ParamId::Sigma2, ParamId::Phi};
  for (ParamId candidate : all) {
    if (name == param_name(candidate)) {
      id = candidate;
      return true;
    }
  }
  return false;
}

std::vector<ParamId> model_parameters(const ModelSpec& model) {
  std::vector<ParamId> out;
  out.push_back(ParamId::Mu);
  if (model.background.form != BackgroundForm::Constant) {
    out.push_back(ParamId::Gamma1);
    out.push_back(ParamId::Gamma2);
  }
  if (model.kernel.family != KernelFamily::None) {
    out.push_back(ParamId::Alpha);
    out.push_back(ParamId::Beta);
    if (model.kernel.family == KernelFamily::Gamma) out.push_back(ParamId::Nu);
  }
  if (model.background.form == BackgroundForm::LogLinearSeasonalGP) {
    out.push_back(ParamId::Sigma2);
    out.push_back(ParamId::Phi);
  }
  return out;
}

namespace {

[[noreturn]] void bad_param(const ModelSpec& model, ParamId id) {
  std::ostringstream msg;
  msg << "parameter " << param_name(id) << " does not apply to this model (background "
      << background_form_name(model.background.form) << ", kernel "
      << kernel_family_name(model.kernel.family) << ")";
  throw ConfigError(msg.str());
}

}  // namespace

double get_param(const ModelSpec& model, ParamId id) {
  switch (id) {
    case ParamId::Mu: return model.background.mu;
    case ParamId::Gamma1: return model.background.gamma1;
    case ParamId::Gamma2: return model.background.gamma2;
    case ParamId::Alpha: return model.kernel.alpha;
    case ParamId::Beta: return model.kernel.beta;
    case ParamId::Nu: return model.kernel.nu;
    case ParamId::Sigma2:
      if (!model.background.gp) bad_param(model, id);
      return model.background.gp->sigma2;
    case ParamId::Phi:
      if (!model.background.gp) bad_param(model, id);
      return model.background.gp->phi;
  }
  bad_param(model, id);
}

void set_param(ModelSpec& model, ParamId id, double value) {
  switch (id) {
    case ParamId::Mu: model.background.mu = value; return;
    case ParamId::Gamma1: model.background.gamma1 = value; return;
    case ParamId::Gamma2: model.background.gamma2 = value; return;
    case ParamId::Alpha: model.kernel.alpha = value; return;
    case ParamId::Beta: model.kernel.beta = value; return;
    case ParamId::Nu: model.kernel.nu = value; return;
    case ParamId::Sigma2:
      if (!model.background.gp) bad_param(model, id);
      model.background.gp->sigma2 = value;
      return;
    case ParamId::Phi:
      if (!model.background.gp) bad_param(model, id);
      model.background.gp->phi = value;
      return;
  }
  bad_param(model, id);
}

}  // namespace evopp
