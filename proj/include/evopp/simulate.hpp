#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "evopp/model.hpp"
#include "evopp/point_pattern.hpp"

namespace evopp {

struct ThinningConfig {
  std::uint64_t rng_seed = 1;
  std::size_t event_budget = 1000000;
  // Lookahead window = lookahead_scale / previous bound, clipped to the
  // remaining horizon. Any positive value is exact; only efficiency changes.
  double lookahead_scale = 1.0;

  void validate() const;
};

// Certified upper bound on the conditional intensity over [t, t + window],
// given the accepted events so far (sorted; entries after t are ignored).
// Negative kernel contributions are dropped, positive ones take each lag's
// supremum over the window, and seasonal or latent backgrounds are maximized
// over the window before the (monotone) link is applied.
[[nodiscard]] double valid_upper_bound(const ModelSpec& model, double t,
                                       const std::vector<double>& history, double window);

// Exact simulation on (0, t_end] by thinning: bound the intensity over a
// lookahead window, draw an exponential waiting time at the bound rate, and
// accept the proposal with probability intensity / bound. Exceeding the
// event budget raises NumericError naming the runaway configuration.
[[nodiscard]] PointPattern simulate_thinning(const ModelSpec& model, double t_end,
                                             const ThinningConfig& config);

}  // namespace evopp
