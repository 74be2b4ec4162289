#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "doctest.h"
#include "evopp/errors.hpp"
#include "evopp/priors.hpp"

using namespace evopp;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("prior hyperparameter validation") {
  CHECK_NOTHROW(Prior{PriorFamily::Normal, 0.0, 10.0}.validate());
  CHECK_THROWS_AS(Prior({PriorFamily::Normal, 0.0, 0.0}).validate(), ConfigError);
  CHECK_THROWS_AS(Prior({PriorFamily::Uniform, 2.0, 2.0}).validate(), ConfigError);
  CHECK_THROWS_AS(Prior({PriorFamily::Gamma, 0.0, 1.0}).validate(), ConfigError);
  CHECK_THROWS_AS(Prior({PriorFamily::InverseGamma, 1.0, -1.0}).validate(), ConfigError);
  CHECK_THROWS_AS(Prior({PriorFamily::LogNormal, 0.0, -2.0}).validate(), ConfigError);
  CHECK_THROWS_AS(Prior({PriorFamily::Normal, kInf, 1.0}).validate(), ConfigError);
}

TEST_CASE("prior log densities against hand-computed values") {
  const Prior n01{PriorFamily::Normal, 0.0, 1.0};
  CHECK(n01.log_density(0.0) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  const Prior n14{PriorFamily::Normal, 1.0, 4.0};
  CHECK(n14.log_density(3.0) ==
        doctest::Approx(-0.5 * std::log(8.0 * std::numbers::pi) - 0.5).epsilon(1e-14));

  const Prior u{PriorFamily::Uniform, -2.0, 2.0};
  CHECK(u.log_density(0.3) == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  CHECK(u.log_density(-2.0) == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  CHECK(u.log_density(2.0001) == -kInf);

  const Prior g11{PriorFamily::Gamma, 1.0, 1.0};
  CHECK(g11.log_density(1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  const Prior g23{PriorFamily::Gamma, 2.0, 3.0};
  CHECK(g23.log_density(0.5) ==
        doctest::Approx(2.0 * std::log(3.0) + std::log(0.5) - 1.5).epsilon(1e-14));
  CHECK(g23.log_density(0.0) == -kInf);
  CHECK(g23.log_density(-1.0) == -kInf);

  const Prior ln{PriorFamily::LogNormal, 0.0, 1.0};
  CHECK(ln.log_density(1.0) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(ln.log_density(0.0) == -kInf);

  const Prior ig11{PriorFamily::InverseGamma, 1.0, 1.0};
  CHECK(ig11.log_density(1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  const Prior ig32{PriorFamily::InverseGamma, 3.0, 2.0};
  CHECK(ig32.log_density(0.5) == doctest::Approx(6.0 * std::log(2.0) - 4.0).epsilon(1e-13));
}

TEST_CASE("prior sampling hits the right moments and support") {
  std::mt19937_64 rng(12345);
  const int n = 40000;

  auto moments = [&](const Prior& p, bool positive) {
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = p.sample(rng);
      REQUIRE(p.in_support(x));
      if (positive) REQUIRE(x > 0.0);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    return std::pair<double, double>(mean, sum2 / n - mean * mean);
  };

  auto [nm, nv] = moments({PriorFamily::Normal, 2.0, 9.0}, false);
  CHECK(nm == doctest::Approx(2.0).epsilon(0.05));
  CHECK(nv == doctest::Approx(9.0).epsilon(0.05));

  auto [um, uv] = moments({PriorFamily::Uniform, -1.0, 3.0}, false);
  CHECK(um == doctest::Approx(1.0).epsilon(0.05));
  CHECK(uv == doctest::Approx(16.0 / 12.0).epsilon(0.05));

  auto [gm, gv] = moments({PriorFamily::Gamma, 2.0, 4.0}, true);
  CHECK(gm == doctest::Approx(0.5).epsilon(0.05));
  CHECK(gv == doctest::Approx(2.0 / 16.0).epsilon(0.1));

  auto [lm, lv] = moments({PriorFamily::LogNormal, 0.0, 1.0}, true);
  CHECK(lm == doctest::Approx(std::exp(0.5)).epsilon(0.05));
  (void)lv;

  // InverseGamma(3, 2): mean 2/(3-1) = 1, variance 4/(4*1) = 1.
  auto [im, iv] = moments({PriorFamily::InverseGamma, 3.0, 2.0}, true);
  CHECK(im == doctest::Approx(1.0).epsilon(0.05));
  CHECK(iv == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("support lower bounds") {
  CHECK(Prior({PriorFamily::Normal, 0.0, 1.0}).support_lower_bound() == -kInf);
  CHECK(Prior({PriorFamily::Uniform, -2.0, 2.0}).support_lower_bound() == -2.0);
  CHECK(Prior({PriorFamily::Uniform, 0.5, 2.0}).support_lower_bound() == 0.5);
  CHECK(Prior({PriorFamily::Gamma, 1.0, 1.0}).support_lower_bound() == 0.0);
  CHECK(Prior({PriorFamily::LogNormal, 0.0, 1.0}).support_lower_bound() == 0.0);
  CHECK(Prior({PriorFamily::InverseGamma, 1.0, 1.0}).support_lower_bound() == 0.0);
}

namespace {

ModelSpec hawkes_spec() {
  ModelSpec m;
  m.background.form = BackgroundForm::Constant;
  m.background.mu = 1.0;
  m.kernel = {KernelFamily::Exponential, 0.5, 1.0, 1.0};
  m.link = {LinkFamily::PowerTobit, 1.0};
  return m;
}

}  // namespace

TEST_CASE("parameter constraint regions follow the model structure") {
  ModelSpec m = hawkes_spec();
  CHECK(param_in_constraint(m, ParamId::Mu, 0.5));
  CHECK_FALSE(param_in_constraint(m, ParamId::Mu, 0.0));
  CHECK_FALSE(param_in_constraint(m, ParamId::Mu, -1.0));
  CHECK(param_in_constraint(m, ParamId::Alpha, -3.0));
  CHECK_FALSE(param_in_constraint(m, ParamId::Beta, 0.0));
  CHECK_FALSE(param_in_constraint(m, ParamId::Beta, kInf));

  m.background.form = BackgroundForm::LogLinearSeasonal;
  CHECK(param_in_constraint(m, ParamId::Mu, -4.0));
  CHECK(param_in_constraint(m, ParamId::Gamma1, -9.0));

  m.background.form = BackgroundForm::Constant;
  m.link.family = LinkFamily::Identity;
  CHECK(param_in_constraint(m, ParamId::Alpha, 0.0));
  CHECK_FALSE(param_in_constraint(m, ParamId::Alpha, -0.1));

  // Links that map all of R to positive rates free the constant baseline.
  m.link.family = LinkFamily::SoftPlus;
  CHECK(param_in_constraint(m, ParamId::Mu, -0.4));
  m.link.family = LinkFamily::Exponential;
  CHECK(param_in_constraint(m, ParamId::Mu, -3.0));
  m.link.family = LinkFamily::PowerTobit;
  CHECK_FALSE(param_in_constraint(m, ParamId::Mu, -0.4));
}

TEST_CASE("prior specs are validated against the model") {
  ModelSpec m = hawkes_spec();

  PriorSpec ok;
  ok.entries[ParamId::Mu] = {PriorFamily::Gamma, 1.0, 0.1};
  ok.entries[ParamId::Alpha] = {PriorFamily::Uniform, -2.0, 2.0};
  ok.entries[ParamId::Beta] = {PriorFamily::Gamma, 1.0, 1.0 / 24.0};
  CHECK_NOTHROW(validate_priors(m, ok));

  // Parameter the model does not expose.
  PriorSpec extra = ok;
  extra.entries[ParamId::Nu] = {PriorFamily::Gamma, 1.0, 1.0};
  CHECK_THROWS_AS(validate_priors(m, extra), ConfigError);
  PriorSpec seasonal = ok;
  seasonal.entries[ParamId::Gamma1] = {PriorFamily::Normal, 0.0, 10.0};
  CHECK_THROWS_AS(validate_priors(m, seasonal), ConfigError);

  // Support escaping the constraint region.
  PriorSpec bad_beta = ok;
  bad_beta.entries[ParamId::Beta] = {PriorFamily::Normal, 1.0, 1.0};
  CHECK_THROWS_AS(validate_priors(m, bad_beta), ConfigError);
  PriorSpec bad_mu = ok;
  bad_mu.entries[ParamId::Mu] = {PriorFamily::Uniform, -1.0, 1.0};
  CHECK_THROWS_AS(validate_priors(m, bad_mu), ConfigError);

  // The same mu prior is fine once the background is log-scale.
  ModelSpec seasonal_model = m;
  seasonal_model.background.form = BackgroundForm::LogLinearSeasonal;
  PriorSpec log_mu;
  log_mu.entries[ParamId::Mu] = {PriorFamily::Normal, 0.0, 10.0};
  CHECK_NOTHROW(validate_priors(seasonal_model, log_mu));

  // Identity link pins alpha to the nonnegative half-line.
  ModelSpec ident = m;
  ident.link.family = LinkFamily::Identity;
  PriorSpec signed_alpha;
  signed_alpha.entries[ParamId::Alpha] = {PriorFamily::Uniform, -2.0, 2.0};
  CHECK_THROWS_AS(validate_priors(ident, signed_alpha), ConfigError);
  signed_alpha.entries[ParamId::Alpha] = {PriorFamily::Uniform, 0.0, 2.0};
  CHECK_NOTHROW(validate_priors(ident, signed_alpha));

  // Broken hyperparameters surface through the same gate.
  PriorSpec broken;
  broken.entries[ParamId::Mu] = {PriorFamily::Gamma, -1.0, 1.0};
  CHECK_THROWS_AS(validate_priors(m, broken), ConfigError);
}
