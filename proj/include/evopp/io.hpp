#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "evopp/compare.hpp"
#include "evopp/model.hpp"
#include "evopp/point_pattern.hpp"
#include "evopp/priors.hpp"
#include "evopp/sampler.hpp"

namespace evopp {

// Formats a double with enough digits to round-trip exactly.
[[nodiscard]] std::string round_trip_format(double value);

// ---------- pattern files ----------

// Single time_hours column, #-prefixed metadata lines first. The horizon is
// stored as `# horizon_hours=...`; extra comment lines are free-form.
void write_pattern_csv(const std::string& path, const PointPattern& pattern,
                       const std::vector<std::string>& comments = {});

// Reads a file written by write_pattern_csv (or by hand: comments, one
// header row, one time per line). A write/read round trip is bit-exact.
[[nodiscard]] PointPattern read_pattern_csv(const std::string& path);

// ---------- raw event-table ingestion ----------

// City data-portal export: Date / District / Primary Type columns, any other
// columns ignored. Timestamps look like "MM/DD/YYYY HH:MM:SS AM".
struct IngestConfig {
  int year = 2018;
  std::string district;                    // empty: keep every district
  std::vector<std::string> primary_types;  // empty: keep every type
  double jitter_seconds = 30.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

// Keeps the rows matching the filters, converts each timestamp to hours
// since the start of the filter year, perturbs it by Unif(-jitter, +jitter)
// seconds, and redraws any remaining ties until the times are strictly
// increasing; deterministic per seed. The horizon is the year's hour count.
[[nodiscard]] PointPattern ingest_events(const std::string& path, const IngestConfig& config);

// Resolves a config "data" block: {"path": ...} names a pattern file;
// {"source": "events", "path": ..., ...filters...} ingests a raw event table.
[[nodiscard]] PointPattern load_data(const nlohmann::json& block);

// ---------- strict JSON configuration blocks ----------
// Every parser rejects unknown keys, naming the key and the block. A model
// with a latent background needs the horizon to place its grid.

[[nodiscard]] ModelSpec model_from_json(const nlohmann::json& block, double horizon);
[[nodiscard]] PriorSpec priors_from_json(const nlohmann::json& block);
[[nodiscard]] SamplerConfig sampler_from_json(const nlohmann::json& block);
[[nodiscard]] WindowConfig windows_from_json(const nlohmann::json& block);
[[nodiscard]] RpsConfig rps_from_json(const nlohmann::json& block);

// Serializers for embedding the resolved configuration in emitted reports.
[[nodiscard]] nlohmann::json model_to_json(const ModelSpec& model);
[[nodiscard]] nlohmann::json priors_to_json(const PriorSpec& priors);
[[nodiscard]] nlohmann::json sampler_to_json(const SamplerConfig& config);
[[nodiscard]] nlohmann::json windows_to_json(const WindowConfig& config);
[[nodiscard]] nlohmann::json rps_to_json(const RpsConfig& config);

}  // namespace evopp
