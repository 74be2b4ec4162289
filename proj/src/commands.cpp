#include "evopp/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "evopp/compare.hpp"
#include "evopp/errors.hpp"
#include "evopp/io.hpp"
#include "evopp/model.hpp"
#include "evopp/point_pattern.hpp"
#include "evopp/sampler.hpp"
#include "evopp/simulate.hpp"
#include "evopp/study.hpp"

namespace evopp {

namespace {

using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ull + tag;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

json parse_config(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
}

void check_top_keys(const json& config, const std::string& command,
                    std::initializer_list<const char*> allowed) {
  if (!config.is_object()) throw ConfigError(command + ": configuration must be a JSON object");
  for (auto it = config.begin(); it != config.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) throw ConfigError(command + ": unknown key '" + it.key() + "'");
  }
}

const json& require_block(const json& config, const std::string& command, const char* key) {
  if (!config.contains(key)) {
    throw ConfigError(command + ": missing required block '" + key + "'");
  }
  return config.at(key);
}

std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + out_dir + "': " + ec.message());
  return dir;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_json_file(const std::filesystem::path& path, const json& body) {
  std::ofstream out = open_output(path);
  out << body.dump(2) << "\n";
  finish_output(out, path);
}

// The per-command primary seed the CLI's --seed replaces.
std::uint64_t resolve_seed(const json& config, const std::string& command,
                           const CommandOverrides& overrides, std::uint64_t fallback) {
  if (overrides.seed.has_value()) return *overrides.seed;
  if (!config.contains("seed")) return fallback;
  const json& value = config.at("seed");
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw ConfigError(command + ": 'seed' must be a nonnegative integer");
  }
  return value.get<std::uint64_t>();
}

void reject_threads(const std::string& command, const CommandOverrides& overrides) {
  if (overrides.threads.has_value()) {
    throw ConfigError("--threads applies to the study command, not " + command);
  }
}

// ---------- simulate ----------

void cmd_simulate(const json& config, const std::filesystem::path& out_dir,
                  const CommandOverrides& overrides) {
  check_top_keys(config, "simulate", {"model", "horizon", "seed"});
  reject_threads("simulate", overrides);
  if (!config.contains("horizon")) throw ConfigError("simulate: missing required key 'horizon'");
  const double horizon = config.at("horizon").is_number() ? config.at("horizon").get<double>()
                                                          : -1.0;
  if (!(horizon > 0.0)) throw ConfigError("simulate: 'horizon' must be a positive number");
  const std::uint64_t seed = resolve_seed(config, "simulate", overrides, 1);

  ModelSpec model = model_from_json(require_block(config, "simulate", "model"), horizon);
  if (model.background.gp.has_value()) {
    std::mt19937_64 path_rng(mix_seed(seed, 1));
    ar1_sample_path(*model.background.gp, path_rng);
  }
  ThinningConfig sim;
  sim.rng_seed = seed;
  const PointPattern pattern = simulate_thinning(model, horizon, sim);

  write_pattern_csv(out_dir / "pattern.csv", pattern,
                    {"command=simulate", "seed=" + std::to_string(seed),
                     "model=" + model_to_json(model).dump()});
}

// ---------- fit ----------

struct FitBundle {
  PointPattern pattern;
  ModelSpec model;
  PriorSpec priors;
  SamplerConfig sampler;
  PosteriorSamples posterior;
  json resolved;  // config blocks as actually used
};

FitBundle run_fit(const json& config, const std::string& command,
                  const CommandOverrides& overrides) {
  FitBundle bundle;
  bundle.pattern = load_data(require_block(config, command, "data"));
  bundle.model =
      model_from_json(require_block(config, command, "model"), bundle.pattern.horizon());
  bundle.priors = priors_from_json(require_block(config, command, "priors"));
  bundle.sampler = config.contains("sampler") ? sampler_from_json(config.at("sampler"))
                                              : SamplerConfig{};
  if (overrides.seed.has_value()) bundle.sampler.rng_seed = *overrides.seed;
  bundle.posterior = run_mcmc(bundle.model, bundle.priors, bundle.pattern, bundle.sampler);
  bundle.resolved = json{{"model", model_to_json(bundle.model)},
                         {"priors", priors_to_json(bundle.priors)},
                         {"sampler", sampler_to_json(bundle.sampler)},
                         {"data", config.at("data")}};
  return bundle;
}

void write_draws_csv(const std::filesystem::path& path, const PosteriorSamples& posterior) {
  std::ofstream out = open_output(path);
  for (std::size_t c = 0; c < posterior.names.size(); ++c) {
    out << (c == 0 ? "" : ",") << posterior.names[c];
  }
  out << "\n";
  for (std::size_t r = 0; r < posterior.n_rows; ++r) {
    for (std::size_t c = 0; c < posterior.names.size(); ++c) {
      out << (c == 0 ? "" : ",") << round_trip_format(posterior.at(r, c));
    }
    out << "\n";
  }
  finish_output(out, path);
}

void write_gp_draws_csv(const std::filesystem::path& path, const PosteriorSamples& posterior) {
  std::ofstream out = open_output(path);
  for (std::size_t c = 0; c < posterior.gp_size; ++c) out << (c == 0 ? "" : ",") << "w_" << c;
  out << "\n";
  for (std::size_t r = 0; r < posterior.n_rows; ++r) {
    for (std::size_t c = 0; c < posterior.gp_size; ++c) {
      out << (c == 0 ? "" : ",") << round_trip_format(posterior.gp_at(r, c));
    }
    out << "\n";
  }
  finish_output(out, path);
}

void write_acceptance_csv(const std::filesystem::path& path, const PosteriorSamples& posterior) {
  std::ofstream out = open_output(path);
  out << "name,rate\n";
  for (const AcceptanceEntry& entry : posterior.acceptance) {
    out << entry.name << "," << round_trip_format(entry.rate) << "\n";
  }
  finish_output(out, path);
}

// Template with every sampled scalar (and latent cell) replaced by its
// posterior mean; the basis for the plot-ready curves.
ModelSpec posterior_mean_model(const ModelSpec& tmpl, const PosteriorSamples& posterior) {
  ModelSpec model = tmpl;
  for (std::size_t c = 0; c < posterior.names.size(); ++c) {
    ParamId id;
    if (param_id_from_name(posterior.names[c], id)) {
      set_param(model, id, posterior.col_mean(c));
    }
  }
  if (model.background.gp.has_value() &&
      posterior.gp_size == model.background.gp->w_star.size()) {
    for (std::size_t cell = 0; cell < posterior.gp_size; ++cell) {
      model.background.gp->w_star[cell] = posterior.gp_cell_mean(cell);
    }
  }
  return model;
}

void write_background_curve(const std::filesystem::path& path, const ModelSpec& mean_model) {
  // Daily profile of the non-latent background part.
  BackgroundModel bg = mean_model.background;
  if (bg.form == BackgroundForm::LogLinearSeasonalGP) {
    bg.form = BackgroundForm::LogLinearSeasonal;
    bg.gp.reset();
  }
  std::ofstream out = open_output(path);
  out << "hour,background_rate\n";
  const int steps = 240;
  for (int i = 0; i <= steps; ++i) {
    const double hour = 24.0 * i / steps;
    out << round_trip_format(hour) << "," << round_trip_format(background_argument(bg, hour))
        << "\n";
  }
  finish_output(out, path);
}

void write_latent_curve(const std::filesystem::path& path, const LatentGP& gp,
                        const PosteriorSamples& posterior) {
  // Posterior mean of e^{w(t)} per grid cell, not e^{mean w}: the exp of a
  // spread posterior is systematically larger than exp at its center.
  std::ofstream out = open_output(path);
  out << "time_hours,exp_w_mean\n";
  for (std::size_t cell = 0; cell < gp.w_star.size(); ++cell) {
    double sum = 0.0;
    for (std::size_t r = 0; r < posterior.n_rows; ++r) {
      sum += std::exp(posterior.gp_at(r, cell));
    }
    out << round_trip_format(gp.grid_times[cell]) << ","
        << round_trip_format(sum / static_cast<double>(posterior.n_rows)) << "\n";
  }
  finish_output(out, path);
}

void write_trigger_curve(const std::filesystem::path& path, const TriggerKernel& kernel) {
  double reach = 1.0;
  switch (kernel.family) {
    case KernelFamily::Exponential:
    case KernelFamily::Gamma: reach = 5.0 / kernel.beta; break;
    case KernelFamily::Gaussian: reach = 5.0 / std::sqrt(kernel.beta); break;
    case KernelFamily::Uniform:
    case KernelFamily::Triangle: reach = kernel.beta; break;
    case KernelFamily::None: break;
  }
  std::ofstream out = open_output(path);
  out << "lag_hours,trigger\n";
  const int steps = 200;
  for (int i = 1; i <= steps; ++i) {
    const double lag = reach * i / steps;
    out << round_trip_format(lag) << "," << round_trip_format(kernel.eval(lag)) << "\n";
  }
  finish_output(out, path);
}

json summarize_parameters(const ModelSpec& model, const PosteriorSamples& posterior) {
  json out = json::object();
  for (std::size_t c = 0; c < posterior.names.size(); ++c) {
    out[posterior.names[c]] = json{{"mean", posterior.col_mean(c)},
                                   {"sd", std::sqrt(posterior.col_variance(c))},
                                   {"p5", posterior.col_quantile(c, 0.05)},
                                   {"p95", posterior.col_quantile(c, 0.95)}};
  }
  // Log-scale baselines also get their rate-scale summary.
  if (model.background.form != BackgroundForm::Constant) {
    for (std::size_t c = 0; c < posterior.names.size(); ++c) {
      if (posterior.names[c] != "mu") continue;
      double mean = 0.0;
      double second = 0.0;
      for (std::size_t r = 0; r < posterior.n_rows; ++r) {
        const double value = std::exp(posterior.at(r, c));
        mean += value;
        second += value * value;
      }
      mean /= static_cast<double>(posterior.n_rows);
      second /= static_cast<double>(posterior.n_rows);
      out["exp_mu"] = json{{"mean", mean},
                           {"sd", std::sqrt(std::max(0.0, second - mean * mean))},
                           {"p5", std::exp(posterior.col_quantile(c, 0.05))},
                           {"p95", std::exp(posterior.col_quantile(c, 0.95))}};
    }
  }
  return out;
}

json acceptance_to_json(const PosteriorSamples& posterior) {
  json out = json::object();
  for (const AcceptanceEntry& entry : posterior.acceptance) out[entry.name] = entry.rate;
  return out;
}

void write_fit_outputs(const FitBundle& bundle, const std::filesystem::path& out_dir) {
  write_draws_csv(out_dir / "draws.csv", bundle.posterior);
  if (bundle.posterior.gp_size > 0) {
    write_gp_draws_csv(out_dir / "gp_draws.csv", bundle.posterior);
  }
  write_acceptance_csv(out_dir / "acceptance.csv", bundle.posterior);

  const ModelSpec mean_model = posterior_mean_model(bundle.model, bundle.posterior);
  write_background_curve(out_dir / "background_daily.csv", mean_model);
  if (mean_model.background.gp.has_value() && bundle.posterior.gp_size > 0) {
    write_latent_curve(out_dir / "latent_year.csv", *mean_model.background.gp,
                       bundle.posterior);
  }
  if (mean_model.kernel.family != KernelFamily::None) {
    write_trigger_curve(out_dir / "trigger_curve.csv", mean_model.kernel);
  }

  const json summary{{"command", "fit"},
                     {"seed", bundle.sampler.rng_seed},
                     {"n_events", bundle.pattern.size()},
                     {"horizon_hours", bundle.pattern.horizon()},
                     {"n_draws", bundle.posterior.n_rows},
                     {"parameters", summarize_parameters(bundle.model, bundle.posterior)},
                     {"acceptance", acceptance_to_json(bundle.posterior)},
                     {"config", bundle.resolved}};
  write_json_file(out_dir / "summary.json", summary);
}

void cmd_fit(const json& config, const std::filesystem::path& out_dir,
             const CommandOverrides& overrides) {
  check_top_keys(config, "fit", {"model", "priors", "sampler", "data"});
  reject_threads("fit", overrides);
  const FitBundle bundle = run_fit(config, "fit", overrides);
  write_fit_outputs(bundle, out_dir);
}

// ---------- compare ----------

void write_windows_csv(const std::filesystem::path& path, const WindowSet& windows,
                       const std::vector<double>& q) {
  std::ofstream out = open_output(path);
  out << "anchor,delta,p,q,y,truncated,degenerate\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    out << round_trip_format(windows.anchors[i]) << "," << round_trip_format(windows.deltas[i])
        << "," << round_trip_format(windows.p[i]) << "," << round_trip_format(q[i]) << ","
        << int(windows.y[i]) << "," << int(windows.truncated[i]) << ","
        << int(windows.degenerate[i]) << "\n";
  }
  finish_output(out, path);
}

void cmd_compare(const json& config, const std::filesystem::path& out_dir,
                 const CommandOverrides& overrides) {
  check_top_keys(config, "compare",
                 {"model", "priors", "sampler", "data", "windows", "rps", "emit_windows"});
  reject_threads("compare", overrides);
  const FitBundle bundle = run_fit(config, "compare", overrides);

  const WindowConfig window_config = config.contains("windows")
                                         ? windows_from_json(config.at("windows"))
                                         : WindowConfig{};
  const RpsConfig rps_config =
      config.contains("rps") ? rps_from_json(config.at("rps")) : RpsConfig{};
  bool emit_windows = false;
  if (config.contains("emit_windows")) {
    if (!config.at("emit_windows").is_boolean()) {
      throw ConfigError("compare: 'emit_windows' must be a boolean");
    }
    emit_windows = config.at("emit_windows").get<bool>();
  }

  const ComparisonReport report = evaluate_fit(bundle.model, bundle.posterior, bundle.pattern,
                                               window_config, rps_config);

  json resolved = bundle.resolved;
  resolved["windows"] = windows_to_json(window_config);
  resolved["rps"] = rps_to_json(rps_config);
  const json body{{"command", "compare"},
                  {"seed", bundle.sampler.rng_seed},
                  {"dic", report.dic.dic},
                  {"p_d", report.dic.p_d},
                  {"mean_deviance", report.dic.mean_deviance},
                  {"deviance_at_mean", report.dic.deviance_at_mean},
                  {"pmr_excite", report.pmr_excite},
                  {"pmr_inhibit", report.pmr_inhibit},
                  {"pmr_excite_hpp", report.pmr_excite_hpp},
                  {"pmr_inhibit_hpp", report.pmr_inhibit_hpp},
                  {"rps", report.rps_mean},
                  {"n_windows", report.n_windows},
                  {"window_seed", report.window_seed},
                  {"n_events", bundle.pattern.size()},
                  {"config", resolved}};
  write_json_file(out_dir / "report.json", body);

  if (emit_windows) {
    const WindowSet windows = build_windows(bundle.pattern, window_config);
    write_windows_csv(out_dir / "windows.csv", windows, report.q);
  }
}

// ---------- study ----------

void cmd_study(const json& config, const std::filesystem::path& out_dir,
               const CommandOverrides& overrides) {
  check_top_keys(config, "study", {"study", "sampler"});
  const json& block = require_block(config, "study", "study");
  const std::string context = "study.study";
  if (!block.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (auto it = block.begin(); it != block.end(); ++it) {
    const std::string& key = it.key();
    if (key != "preset" && key != "cell" && key != "replicates" && key != "threads" &&
        key != "seed") {
      throw ConfigError(context + ": unknown key '" + key + "'");
    }
  }

  StudyConfig study;
  if (!block.contains("preset") || !block.at("preset").is_string()) {
    throw ConfigError(context + ": missing preset name");
  }
  study.preset = block.at("preset").get<std::string>();
  if (block.contains("cell")) {
    if (!block.at("cell").is_string()) throw ConfigError(context + ": 'cell' must be a string");
    study.cell_filter = block.at("cell").get<std::string>();
  }
  if (block.contains("replicates")) {
    if (!block.at("replicates").is_number_integer() || block.at("replicates").get<long long>() < 0) {
      throw ConfigError(context + ": 'replicates' must be a nonnegative integer");
    }
    study.n_replicates = block.at("replicates").get<std::size_t>();
  }
  if (block.contains("threads")) {
    if (!block.at("threads").is_number_integer()) {
      throw ConfigError(context + ": 'threads' must be an integer");
    }
    study.threads = block.at("threads").get<int>();
  }
  if (block.contains("seed")) {
    if (!block.at("seed").is_number_integer() || block.at("seed").get<long long>() < 0) {
      throw ConfigError(context + ": 'seed' must be a nonnegative integer");
    }
    study.rng_seed = block.at("seed").get<std::uint64_t>();
  }
  if (config.contains("sampler")) study.sampler = sampler_from_json(config.at("sampler"));
  if (overrides.seed.has_value()) study.rng_seed = *overrides.seed;
  if (overrides.threads.has_value()) study.threads = *overrides.threads;
  study.validate();

  const auto start = std::chrono::steady_clock::now();
  const std::vector<StudyRow> rows = run_replicate_study(study);
  const double wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::filesystem::path csv_path = out_dir / "study.csv";
  std::ofstream csv = open_output(csv_path);
  csv << "preset_cell,model,avg_n,avg_DIC,avg_PMR,avg_RPS,failures\n";
  for (const StudyRow& row : rows) {
    csv << row.cell << "," << row.model << "," << round_trip_format(row.avg_n) << ","
        << round_trip_format(row.avg_dic) << "," << round_trip_format(row.avg_pmr) << ","
        << round_trip_format(row.avg_rps) << "," << row.failures << "\n";
  }
  finish_output(csv, csv_path);

  json row_list = json::array();
  for (const StudyRow& row : rows) {
    row_list.push_back(json{{"cell", row.cell},
                            {"model", row.model},
                            {"avg_n", row.avg_n},
                            {"avg_dic", row.avg_dic},
                            {"avg_pmr", row.avg_pmr},
                            {"avg_rps", row.avg_rps},
                            {"failures", row.failures},
                            {"replicates", row.replicates}});
  }
  const json body{{"command", "study"},
                  {"preset", study.preset},
                  {"cell_filter", study.cell_filter},
                  {"replicates", study.n_replicates},
                  {"threads", study.threads},
                  {"seed", study.rng_seed},
                  {"wall_clock_seconds", wall_seconds},
                  {"sampler", sampler_to_json(study.sampler)},
                  {"rows", row_list}};
  write_json_file(out_dir / "study.json", body);
}

}  // namespace

void run_command(const std::string& command, const std::string& config_text,
                 const std::string& out_dir, const CommandOverrides& overrides) {
  const json config = parse_config(config_text);
  const std::filesystem::path dir = prepare_out_dir(out_dir);
  if (command == "simulate") {
    cmd_simulate(config, dir, overrides);
  } else if (command == "fit") {
    cmd_fit(config, dir, overrides);
  } else if (command == "compare") {
    cmd_compare(config, dir, overrides);
  } else if (command == "study") {
    cmd_study(config, dir, overrides);
  } else {
    throw ConfigError("unknown command '" + command +
                      "'; expected simulate, fit, compare, or study");
  }
}

}  // namespace evopp
