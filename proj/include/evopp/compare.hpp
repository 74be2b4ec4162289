#pragma once

#include <cstdint>
#include <vector>

#include "evopp/model.hpp"
#include "evopp/point_pattern.hpp"
#include "evopp/sampler.hpp"

namespace evopp {

// Law for the window probabilities p_t.
enum class WindowLaw { Uniform01, UniformScaled, Beta };

struct WindowConfig {
  std::uint64_t rng_seed = 1;
  WindowLaw law = WindowLaw::Uniform01;
  double law_param = 1.0;  // upper end for UniformScaled, both shapes for Beta

  void validate() const;
};

// One randomized window per observed event. p = rate_hat * delta holds
// bit-exactly, including after truncation at the horizon; zero-length windows
// (anchor at the horizon) are flagged degenerate and excluded from rates.
struct WindowSet {
  std::vector<double> anchors;
  std::vector<double> deltas;
  std::vector<double> p;            // HPP probability of an event in the window
  std::vector<std::uint8_t> y;      // 1 if the pattern has an event in (t, t+delta]
  std::vector<std::uint8_t> truncated;
  std::vector<std::uint8_t> degenerate;
  double rate_hat = 0.0;
  std::uint64_t rng_seed = 0;

  [[nodiscard]] std::size_t size() const { return anchors.size(); }
  [[nodiscard]] std::size_t active_count() const;
};

[[nodiscard]] WindowSet build_windows(const PointPattern& pattern, const WindowConfig& config);

// q = min(1, intensity(midpoint) * delta) per window. The default averages
// the intensity over the posterior draws first; per_draw_average instead
// averages the per-draw clamped probabilities.
[[nodiscard]] std::vector<double> model_probabilities(const ModelSpec& tmpl,
                                                      const PosteriorSamples& draws,
                                                      const PointPattern& pattern,
                                                      const WindowSet& windows,
                                                      bool per_draw_average = false);

enum class PmrDirection { Excite, Inhibit };

// Probabilistic misclassification rate over the non-degenerate windows.
// Excite: sum (1-q) Y / sum Y. Inhibit: sum q (1-Y) / sum (1-Y). Pass
// windows.p as q for the constant-rate comparator.
[[nodiscard]] double pmr(const WindowSet& windows, const std::vector<double>& q,
                         PmrDirection direction);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;
  double deviance_at_mean = 0.0;
};

// Deviance information criterion: 2 * mean deviance - deviance at the
// parameter means (latent cells included via their posterior means).
[[nodiscard]] DicResult dic(const ModelSpec& tmpl, const PosteriorSamples& draws,
                            const PointPattern& pattern);

// Ranked probability score of one predictive sample against the observed
// count: mean |N_j - obs| - (1/(2 m^2)) sum_jk |N_j - N_k|.
[[nodiscard]] double rps_score(const std::vector<long long>& predictive, long long observed);

struct RpsConfig {
  double dt = -1.0;  // nonpositive: use 1 / rate_hat (one expected event)
  std::uint64_t rng_seed = 1;
};

// Mean RPS over per-event windows of length dt (truncated at the horizon),
// with Poisson predictive counts at each posterior draw's midpoint intensity.
[[nodiscard]] double rps(const ModelSpec& tmpl, const PosteriorSamples& draws,
                         const PointPattern& pattern, const RpsConfig& config);

struct ComparisonReport {
  DicResult dic;
  double pmr_excite = 0.0;
  double pmr_inhibit = 0.0;
  double pmr_excite_hpp = 0.0;
  double pmr_inhibit_hpp = 0.0;
  double rps_mean = 0.0;
  std::size_t n_windows = 0;  // non-degenerate
  std::uint64_t window_seed = 0;
  std::vector<double> q;  // per-window model probabilities
};

// Full criteria bundle for one fitted model on one pattern. Directions with
// an empty denominator are reported as NaN rather than failing the bundle.
[[nodiscard]] ComparisonReport evaluate_fit(const ModelSpec& tmpl, const PosteriorSamples& draws,
                                            const PointPattern& pattern,
                                            const WindowConfig& window_config,
                                            const RpsConfig& rps_config);

}  // namespace evopp
