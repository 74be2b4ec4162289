#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "evopp/errors.hpp"
#include "evopp/intensity.hpp"
#include "oracles.hpp"

using namespace evopp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PointPattern random_pattern(std::mt19937& rng, double horizon, std::size_t n) {
  std::uniform_real_distribution<double> u(1e-6, horizon);
  std::vector<double> t(n);
  for (auto& x : t) x = u(rng);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return PointPattern(t, horizon);
}

ModelSpec hpp_model(double mu) {
  ModelSpec m;
  m.background.form = BackgroundForm::Constant;
  m.background.mu = mu;
  m.kernel.family = KernelFamily::None;
  m.link = {LinkFamily::PowerTobit, 1.0};
  return m;
}

}  // namespace

TEST_CASE("conditional intensity composes background, kernel sum, link") {
  ModelSpec m = hpp_model(1.0);
  PointPattern p({5.0}, 100.0);
  CHECK(conditional_intensity(m, p, 0.0) == 1.0);
  CHECK(conditional_intensity(m, p, 42.0) == 1.0);

  m.kernel = {KernelFamily::Exponential, -5.0, 1.0, 1.0};
  // Just after the event the inhibition swamps the background.
  CHECK(conditional_intensity(m, p, 5.0 + 1e-9) == 0.0);
  // Strict history: at the event itself nothing has arrived yet.
  CHECK(conditional_intensity(m, p, 5.0) == 1.0);

  ModelSpec e;
  e.background.form = BackgroundForm::Constant;
  e.background.mu = 0.0;
  e.kernel.family = KernelFamily::None;
  e.link.family = LinkFamily::Exponential;
  CHECK(conditional_intensity(e, p, 33.0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(static_cast<void>(conditional_intensity(m, p, -0.5)), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(conditional_intensity(m, p, 100.5)), std::invalid_argument);
}

TEST_CASE("conditional intensity accepts a matching recursion state") {
  ModelSpec m = hpp_model(1.0);
  m.kernel = {KernelFamily::Exponential, 0.7, 1.3, 1.0};
  std::mt19937 rng(881);
  PointPattern p = random_pattern(rng, 50.0, 40);
  ExpRecursionState state = build_recursion(p, m.kernel.beta);
  for (double s : {3.7, 12.0, 49.9}) {
    CHECK(conditional_intensity(m, p, s, &state) ==
          doctest::Approx(conditional_intensity(m, p, s)).epsilon(1e-12));
  }
}

TEST_CASE("compensator is exact for constant intensity") {
  ModelSpec m = hpp_model(1.0);
  PointPattern empty({}, 100.0);
  CHECK(compensator(m, empty, 100.0) == doctest::Approx(100.0).epsilon(1e-11));

  // Events do not change a kernel-free intensity; the merged grid must not
  // perturb the rule.
  PointPattern p({10.0, 20.0, 77.7}, 100.0);
  CHECK(compensator(m, p, 100.0) == doctest::Approx(100.0).epsilon(1e-11));

  ModelSpec sp;
  sp.background.form = BackgroundForm::Constant;
  sp.background.mu = 0.0;
  sp.kernel.family = KernelFamily::None;
  sp.link.family = LinkFamily::SoftPlus;
  PointPattern none({}, 7.5);
  CHECK(compensator(sp, none, 7.5) ==
        doctest::Approx(std::log(2.0) * 7.5).epsilon(1e-11));
}

TEST_CASE("compensator matches the identity-link closed form") {
  ModelSpec m;
  m.background.form = BackgroundForm::Constant;
  m.background.mu = 1.0;
  m.kernel = {KernelFamily::Exponential, 0.5, 1.0, 1.0};
  m.link.family = LinkFamily::Identity;
  PointPattern p({10.0}, 100.0);
  const double expected = 100.0 + 0.5 * (1.0 - std::exp(-90.0));
  CHECK(compensator(m, p, 100.0) == doctest::Approx(expected).epsilon(1e-6));

  // Random exciting configurations, 0.1% relative.
  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> umu(0.5, 2.0), ua(0.1, 0.9), ub(0.4, 3.0);
  for (int rep = 0; rep < 20; ++rep) {
    ModelSpec r = m;
    r.background.mu = umu(rng);
    r.kernel.alpha = ua(rng);
    r.kernel.beta = ub(rng);
    PointPattern rp = random_pattern(rng, 60.0, 80);
    double closed = r.background.mu * 60.0;
    for (double t : rp.times()) {
      closed += r.kernel.alpha * (1.0 - std::exp(-r.kernel.beta * (60.0 - t)));
    }
    CHECK(compensator(r, rp, 60.0) == doctest::Approx(closed).epsilon(1e-3));
  }
}

TEST_CASE("compensator validates its upper bound") {
  ModelSpec m = hpp_model(1.0);
  PointPattern p({1.0}, 10.0);
  CHECK_THROWS_AS(static_cast<void>(compensator(m, p, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(compensator(m, p, -1.0)), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(compensator(m, p, 10.1)), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(compensator(m, p, kInf)), std::invalid_argument);
}

TEST_CASE("compensator is monotone in the upper bound") {
  ModelSpec m;
  m.background.form = BackgroundForm::LogLinearSeasonal;
  m.background.mu = 0.1;
  m.background.gamma1 = 0.4;
  m.background.gamma2 = -0.2;
  m.kernel = {KernelFamily::Exponential, 0.5, 2.0, 1.0};
  m.link = {LinkFamily::PowerTobit, 1.0};
  std::mt19937 rng(17);
  PointPattern p = random_pattern(rng, 100.0, 120);
  double prev = 0.0;
  for (double upto : {5.0, 20.0, 50.0, 80.0, 100.0}) {
    const double c = compensator(m, p, upto);
    CHECK(c >= prev - 1e-9);
    prev = c;
  }
}

TEST_CASE("quadrature converges: K=1e4 against K=1e5") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> umu(0.3, 2.0), ua(-0.8, 0.9), ub(0.5, 4.0);
  for (int rep = 0; rep < 5; ++rep) {
    ModelSpec m;
    m.background.form = BackgroundForm::Constant;
    m.background.mu = umu(rng);
    m.kernel = {KernelFamily::Exponential, ua(rng), ub(rng), 1.0};
    m.link = {LinkFamily::PowerTobit, 1.0};
    PointPattern p = random_pattern(rng, 50.0, 100);
    m.quad_points = 10000;
    const double coarse = compensator(m, p, 50.0);
    m.quad_points = 100000;
    const double fine = compensator(m, p, 50.0);
    CHECK(std::abs(coarse - fine) / fine < 1e-4);
  }
}

TEST_CASE("log-likelihood closed forms for the homogeneous process") {
  std::mt19937 rng(5);
  {
    ModelSpec m = hpp_model(1.0);
    PointPattern p = random_pattern(rng, 100.0, 100);
    REQUIRE(p.size() == 100);
    CHECK(log_likelihood(m, p) == -100.0);
  }
  {
    ModelSpec m = hpp_model(2.0);
    PointPattern p = random_pattern(rng, 50.0, 80);
    REQUIRE(p.size() == 80);
    CHECK(log_likelihood(m, p) ==
          doctest::Approx(-100.0 + 80.0 * std::log(2.0)).epsilon(1e-12));
  }
  {
    // Empty pattern under a dead rate is vacuously certain.
    ModelSpec m = hpp_model(-1.0);  // Tobit clamps to zero
    PointPattern p({}, 10.0);
    CHECK(log_likelihood(m, p) == 0.0);
    PointPattern q({1.0}, 10.0);
    CHECK(log_likelihood(m, q) == -kInf);
  }
}

TEST_CASE("log-likelihood returns -inf when inhibition zeroes an event") {
  ModelSpec m;
  m.background.form = BackgroundForm::Constant;
  m.background.mu = 1.0;
  m.kernel = {KernelFamily::Exponential, -2.0, 1.0, 1.0};
  m.link = {LinkFamily::PowerTobit, 1.0};
  PointPattern p({1.0, 1.001}, 2.0);
  CHECK(log_likelihood(m, p) == -kInf);
  CHECK(oracle::log_likelihood(m, p) == -kInf);
}

TEST_CASE("log-likelihood agrees with the naive oracle") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> umu(0.3, 2.5), ua(-1.0, 1.0), ub(0.3, 3.0);
  const LinkFamily links[] = {LinkFamily::Identity, LinkFamily::PowerTobit, LinkFamily::SoftPlus,
                              LinkFamily::Log10SoftPlus, LinkFamily::Exponential};
  int checked = 0;
  for (int rep = 0; rep < 30; ++rep) {
    ModelSpec m;
    m.background.form = BackgroundForm::Constant;
    m.background.mu = umu(rng);
    m.kernel = {KernelFamily::Exponential, ua(rng), ub(rng), 1.0};
    m.link.family = links[rep % 5];
    m.link.eta = (rep % 2 == 0) ? 1.0 : 0.5;
    if (m.link.family == LinkFamily::Identity) m.kernel.alpha = std::abs(m.kernel.alpha);
    // Keep the exponential link away from overflow-scale intensities so the
    // 1e-10 absolute band stays meaningful.
    if (m.link.family == LinkFamily::Exponential) {
      m.kernel.alpha = std::min(m.kernel.alpha, 0.2);
    }
    m.quad_points = 2000;
    PointPattern p = random_pattern(rng, 30.0, 1 + rep * 5);
    const double mine = log_likelihood(m, p);
    const double ref = oracle::log_likelihood(m, p);
    if (std::isfinite(ref)) {
      CHECK(std::abs(mine - ref) < 1e-10);
      ++checked;
    } else {
      CHECK(mine == ref);
    }
  }
  CHECK(checked >= 25);
}

TEST_CASE("log-likelihood handles every kernel family against the oracle") {
  std::mt19937 rng(31337);
  std::uniform_real_distribution<double> ua(-0.6, 0.8);
  const KernelFamily fams[] = {KernelFamily::None, KernelFamily::Exponential,
                               KernelFamily::Uniform, KernelFamily::Gaussian,
                               KernelFamily::Triangle, KernelFamily::Gamma};
  for (KernelFamily f : fams) {
    ModelSpec m;
    m.background.form = BackgroundForm::LogLinearSeasonal;
    m.background.mu = 0.2;
    m.background.gamma1 = 0.3;
    m.background.gamma2 = -0.1;
    m.kernel = {f, ua(rng), 1.5, 2.0};
    m.link = {LinkFamily::SoftPlus, 1.0};
    m.quad_points = 1500;
    PointPattern p = random_pattern(rng, 24.0, 40);
    const double mine = log_likelihood(m, p);
    const double ref = oracle::log_likelihood(m, p);
    CHECK(std::abs(mine - ref) < 1e-10);
  }
}

TEST_CASE("evaluator caches kernel sums across parameter moves") {
  std::mt19937 rng(7);
  PointPattern p = random_pattern(rng, 40.0, 60);
  ModelSpec m;
  m.background.form = BackgroundForm::Constant;
  m.background.mu = 1.2;
  m.kernel = {KernelFamily::Exponential, 0.5, 1.0, 1.0};
  m.link = {LinkFamily::SoftPlus, 1.0};  // strictly positive, so finite on both sides
  m.quad_points = 1200;

  LikelihoodEvaluator ev(m, p);
  CHECK(ev.evaluate(m) == doctest::Approx(oracle::log_likelihood(m, p)).epsilon(1e-12));

  // alpha-only move reuses the cached sums.
  m.kernel.alpha = -0.15;
  CHECK(ev.evaluate(m) == doctest::Approx(oracle::log_likelihood(m, p)).epsilon(1e-12));

  // beta move forces a rebuild.
  m.kernel.beta = 2.5;
  CHECK(ev.evaluate(m) == doctest::Approx(oracle::log_likelihood(m, p)).epsilon(1e-12));

  // background move leaves the kernel cache untouched.
  m.background.mu = 0.4;
  CHECK(ev.evaluate(m) == doctest::Approx(oracle::log_likelihood(m, p)).epsilon(1e-12));

  ModelSpec wrong = m;
  wrong.quad_points = 900;
  CHECK_THROWS_AS(ev.evaluate(wrong), std::invalid_argument);
  wrong = m;
  wrong.background.form = BackgroundForm::LogLinearSeasonalGP;
  wrong.background.gp = LatentGP::make_grid(4, 40.0, 1.0, 1.0);
  CHECK_THROWS_AS(ev.evaluate(wrong), std::invalid_argument);
}

namespace {

ModelSpec gp_model(double horizon, std::size_t cells, std::mt19937& rng) {
  ModelSpec m;
  m.background.form = BackgroundForm::LogLinearSeasonalGP;
  m.background.mu = 0.3;
  m.background.gamma1 = 0.2;
  m.background.gamma2 = 0.1;
  m.background.gp = LatentGP::make_grid(cells, horizon, 1.0, 0.05);
  std::normal_distribution<double> nw(0.0, 0.5);
  for (auto& w : m.background.gp->w_star) w = nw(rng);
  m.kernel = {KernelFamily::Exponential, 0.6, 3.0, 1.0};
  m.link = {LinkFamily::PowerTobit, 1.0};
  m.quad_points = 1000;
  return m;
}

}  // namespace

TEST_CASE("evaluator matches the oracle for the latent-process background") {
  std::mt19937 rng(404);
  PointPattern p = random_pattern(rng, 20.0, 50);
  ModelSpec m = gp_model(20.0, 8, rng);
  LikelihoodEvaluator ev(m, p);
  CHECK(ev.evaluate(m) == doctest::Approx(oracle::log_likelihood(m, p)).epsilon(1e-12));
  CHECK(log_likelihood(m, p) == doctest::Approx(oracle::log_likelihood(m, p)).epsilon(1e-12));
}

TEST_CASE("single-cell latent proposals price exactly like a full recompute") {
  std::mt19937 rng(1234);
  PointPattern p = random_pattern(rng, 20.0, 50);
  ModelSpec m = gp_model(20.0, 8, rng);

  LikelihoodEvaluator ev(m, p);
  ev.evaluate(m);
  std::normal_distribution<double> step(0.0, 0.4);

  for (std::size_t sweep = 0; sweep < 3; ++sweep) {
    for (std::size_t c = 0; c < m.background.gp->w_star.size(); ++c) {
      const double w_new = m.background.gp->w_star[c] + step(rng);
      const double cand = ev.propose_gp(m, c, w_new);

      ModelSpec moved = m;
      moved.background.gp->w_star[c] = w_new;
      LikelihoodEvaluator fresh(moved, p);
      CHECK(cand == doctest::Approx(fresh.evaluate(moved)).epsilon(1e-10));

      if (sweep % 2 == 0) {  // accept on even sweeps, discard on odd
        ev.accept_gp_proposal();
        m = moved;
      }
    }
  }
  // After mixed accept/reject traffic the running state still matches.
  LikelihoodEvaluator fresh(m, p);
  CHECK(ev.current() == doctest::Approx(fresh.evaluate(m)).epsilon(1e-9));
}

TEST_CASE("latent proposal guards") {
  std::mt19937 rng(66);
  PointPattern p = random_pattern(rng, 20.0, 30);
  ModelSpec m = gp_model(20.0, 4, rng);
  LikelihoodEvaluator ev(m, p);
  CHECK_THROWS_AS(ev.propose_gp(m, 0, 0.1), std::logic_error);
  ev.evaluate(m);
  CHECK_THROWS_AS(ev.propose_gp(m, 99, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(ev.accept_gp_proposal(), std::logic_error);

  ModelSpec flat = hpp_model(1.0);
  LikelihoodEvaluator no_gp(flat, p);
  no_gp.evaluate(flat);
  CHECK_THROWS_AS(no_gp.propose_gp(flat, 0, 0.1), std::invalid_argument);
}

TEST_CASE("rejected latent proposals leave the evaluator untouched") {
  std::mt19937 rng(909);
  PointPattern p = random_pattern(rng, 20.0, 40);
  ModelSpec m = gp_model(20.0, 6, rng);
  LikelihoodEvaluator ev(m, p);
  const double base = ev.evaluate(m);
  (void)ev.propose_gp(m, 2, 5.0);
  CHECK(ev.current() == base);
  // A later proposal prices against the unchanged state.
  const double again = ev.propose_gp(m, 2, m.background.gp->w_star[2]);
  CHECK(again == doctest::Approx(base).epsilon(1e-12));
}
