#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evopp/compare.hpp"
#include "evopp/model.hpp"
#include "evopp/priors.hpp"
#include "evopp/sampler.hpp"

namespace evopp {

// One model fitted to every replicate of a study cell. When
// pmr_from_window_p is set the reported PMR uses the windows' own event
// probabilities instead of posterior intensities (the constant-rate
// comparator convention).
struct StudyFit {
  std::string name;
  ModelSpec tmpl;
  PriorSpec priors;
  bool pmr_from_window_p = false;
};

// A generative configuration plus the models fitted to its replicates.
struct StudyCell {
  std::string name;
  ModelSpec generative;
  double horizon = 100.0;
  std::vector<StudyFit> fits;
};

struct StudyPreset {
  std::string name;
  std::vector<StudyCell> cells;
  PmrDirection direction = PmrDirection::Excite;
  bool use_rps = true;
  std::size_t default_replicates = 1000;
};

// Named experiment grids: excite_grid, inhibit_grid, link_grid, evo_lgcp.
// Throws ConfigError for unknown names.
[[nodiscard]] StudyPreset make_study_preset(const std::string& name);

struct StudyConfig {
  std::string preset;
  std::string cell_filter;       // empty: every cell; otherwise one cell's exact name
  std::size_t n_replicates = 0;  // 0: the preset's default
  int threads = 1;
  std::uint64_t rng_seed = 1;
  SamplerConfig sampler;  // applied to every fit; rng_seed is re-derived

  void validate() const;
};

// One output row per (cell, fitted model): averages over the replicates
// whose simulation and fit both succeeded, plus the failure count. avg_rps
// is NaN for presets that do not use RPS.
struct StudyRow {
  std::string cell;
  std::string model;
  double avg_n = 0.0;
  double avg_dic = 0.0;
  double avg_pmr = 0.0;
  double avg_rps = 0.0;
  std::size_t failures = 0;
  std::size_t replicates = 0;
};

// Simulate -> fit -> score over every cell of the preset. Replicates fan out
// across a worker pool; per-replicate seeds derive from (rng_seed, cell,
// replicate), so results are identical for any thread count. Failed
// replicates are counted and excluded from the averages, never dropped
// silently. The first form runs an explicit preset (config.preset is
// ignored); the second resolves config.preset by name.
[[nodiscard]] std::vector<StudyRow> run_replicate_study(const StudyPreset& preset,
                                                        const StudyConfig& config);
[[nodiscard]] std::vector<StudyRow> run_replicate_study(const StudyConfig& config);

}  // namespace evopp
