#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "evopp/kernels.hpp"
#include "evopp/links.hpp"

namespace evopp {

enum class BackgroundForm { Constant, LogLinearSeasonal, LogLinearSeasonalGP };

// Gridded latent process: one effect per grid time, looked up by nearest grid
// time with ties broken toward the earlier point.
struct LatentGP {
  std::vector<double> grid_times;  // strictly increasing, evenly spaced over (0, T]
  std::vector<double> w_star;      // aligned with grid_times
  double sigma2 = 1.0;
  double phi = 1.0;

  void validate() const;
  [[nodiscard]] std::size_t cell_of(double t) const;
  [[nodiscard]] double at(double t) const { return w_star[cell_of(t)]; }
  [[nodiscard]] double spacing() const;

  static LatentGP make_grid(std::size_t size, double horizon, double sigma2, double phi);
};

struct BackgroundModel {
  BackgroundForm form = BackgroundForm::Constant;
  double mu = 1.0;  // direct rate for Constant, log-scale intercept otherwise
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double period = 24.0;
  std::optional<LatentGP> gp;

  void validate() const;
};

[[nodiscard]] const char* background_form_name(BackgroundForm f);

// Pre-link background summand: mu for Constant, else
// exp(mu + gamma1 sin(2 pi t / period) + gamma2 cos(2 pi t / period) + w(t)).
[[nodiscard]] double background_argument(const BackgroundModel& bg, double t);

struct ModelSpec {
  BackgroundModel background;
  TriggerKernel kernel;
  LinkFunction link;
  int quad_points = 10000;

  void validate() const;
};

// Fit-time view of the scalar parameters. The sampler moves the subset that
// has priors; everything else stays at its configured value.
enum class ParamId { Mu, Gamma1, Gamma2, Alpha, Beta, Nu, Sigma2, Phi };

[[nodiscard]] const char* param_name(ParamId id);

// Inverse of param_name; returns false when the name matches no parameter.
[[nodiscard]] bool param_id_from_name(const std::string& name, ParamId& id);

// The parameters this model actually exposes, in canonical order.
[[nodiscard]] std::vector<ParamId> model_parameters(const ModelSpec& model);

[[nodiscard]] double get_param(const ModelSpec& model, ParamId id);
void set_param(ModelSpec& model, ParamId id, double value);

}  // namespace evopp
