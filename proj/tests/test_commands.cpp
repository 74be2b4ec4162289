#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "evopp/commands.hpp"
#include "evopp/errors.hpp"
#include "evopp/io.hpp"

using namespace evopp;
using nlohmann::json;

namespace {

// Fresh directory under the system temp directory; removed with its contents
// when the guard dies.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("evopp_cmd_" + name);
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  [[nodiscard]] std::string str() const { return path.string(); }
  [[nodiscard]] std::string file(const std::string& name) const {
    return (path / name).string();
  }
  [[nodiscard]] bool has(const std::string& name) const {
    return std::filesystem::exists(path / name);
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json read_json(const std::string& path) { return json::parse(read_text(path)); }

std::size_t line_count(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  return lines;
}

const char* kHawkesModel = R"({
  "background": {"form": "constant", "mu": 1.0},
  "kernel": {"family": "exponential", "alpha": 0.5, "beta": 1.0},
  "link": {"family": "power", "eta": 1.0},
  "quad_points": 500
})";

json hawkes_fit_config(const std::string& data_path) {
  json config;
  config["model"] = json::parse(kHawkesModel);
  config["priors"] = {{"mu", {{"family", "gamma"}, {"a", 1.0}, {"b", 0.1}}},
                      {"alpha", {{"family", "uniform"}, {"a", -2.0}, {"b", 2.0}}},
                      {"beta", {{"family", "gamma"}, {"a", 1.0}, {"b", 1.0}}}};
  config["sampler"] = {{"iterations", 800}, {"burn_in", 400}, {"seed", 5}};
  config["data"] = {{"path", data_path}};
  return config;
}

// A pattern file for the fit/compare cases: one simulate run, reused.
std::string make_pattern(const TempDir& dir, const std::string& model_text,
                         double horizon, std::uint64_t seed) {
  json config;
  config["model"] = json::parse(model_text);
  config["horizon"] = horizon;
  config["seed"] = seed;
  run_command("simulate", config.dump(), dir.str());
  return dir.file("pattern.csv");
}

}  // namespace

TEST_CASE("simulate command writes a reproducible pattern") {
  TempDir dir("simulate");

  SUBCASE("the pattern file parses and matches the requested horizon") {
    json config;
    config["model"] = json::parse(kHawkesModel);
    config["horizon"] = 80.0;
    config["seed"] = 3;
    run_command("simulate", config.dump(), dir.str());
    REQUIRE(dir.has("pattern.csv"));
    const PointPattern pattern = read_pattern_csv(dir.file("pattern.csv"));
    CHECK(pattern.horizon() == 80.0);
    CHECK(pattern.size() > 20);
    CHECK(pattern.size() < 400);

    const std::string text = read_text(dir.file("pattern.csv"));
    CHECK(text.find("# command=simulate") != std::string::npos);
    CHECK(text.find("# seed=3") != std::string::npos);
    CHECK(text.find("exponential") != std::string::npos);
  }

  SUBCASE("the same seed gives byte-identical output") {
    json config;
    config["model"] = json::parse(kHawkesModel);
    config["horizon"] = 60.0;
    config["seed"] = 9;
    run_command("simulate", config.dump(), dir.str());
    const std::string first = read_text(dir.file("pattern.csv"));

    run_command("simulate", config.dump(), dir.str());
    CHECK(read_text(dir.file("pattern.csv")) == first);

    // --seed replaces the config seed, so an override to the same value
    // reproduces the run and a different value changes it.
    config["seed"] = 1;
    CommandOverrides same;
    same.seed = 9;
    run_command("simulate", config.dump(), dir.str(), same);
    CHECK(read_text(dir.file("pattern.csv")) == first);

    CommandOverrides other;
    other.seed = 10;
    run_command("simulate", config.dump(), dir.str(), other);
    CHECK(read_text(dir.file("pattern.csv")) != first);
  }

  SUBCASE("latent backgrounds draw their path before simulating") {
    json config;
    config["model"] = {{"background",
                        {{"form", "loglinear_seasonal_gp"},
                         {"mu", std::log(1.5)},
                         {"gp", {{"cells", 10}, {"sigma2", 1.0}, {"phi", 0.05}}}}},
                       {"kernel", {{"family", "none"}}},
                       {"link", {{"family", "power"}}},
                       {"quad_points", 2000}};
    config["horizon"] = 50.0;
    config["seed"] = 21;
    run_command("simulate", config.dump(), dir.str());
    const PointPattern pattern = read_pattern_csv(dir.file("pattern.csv"));
    CHECK(pattern.horizon() == 50.0);
    const std::string first = read_text(dir.file("pattern.csv"));

    run_command("simulate", config.dump(), dir.str());
    CHECK(read_text(dir.file("pattern.csv")) == first);

    config["seed"] = 22;
    run_command("simulate", config.dump(), dir.str());
    CHECK(read_text(dir.file("pattern.csv")) != first);
  }

  SUBCASE("a runaway configuration raises NumericError") {
    json config;
    config["model"] = {{"background", {{"form", "constant"}, {"mu", 1.0e9}}},
                       {"kernel", {{"family", "none"}}},
                       {"link", {{"family", "identity"}}}};
    config["horizon"] = 10.0;
    CHECK_THROWS_AS(run_command("simulate", config.dump(), dir.str()), NumericError);
  }

  SUBCASE("config mistakes are rejected with ConfigError") {
    CHECK_THROWS_AS(run_command("simulate", "{not json", dir.str()), ConfigError);
    CHECK_THROWS_AS(run_command("simulate", R"({"horizon": 10})", dir.str()), ConfigError);
    CHECK_THROWS_AS(run_command("simulate", R"({"model": {}})", dir.str()), ConfigError);
    CHECK_THROWS_AS(run_command("simulate", R"({"model": {}, "horizon": -1})", dir.str()),
                    ConfigError);
    CHECK_THROWS_AS(
        run_command("simulate", R"({"model": {}, "horizon": 10, "priors": {}})", dir.str()),
        ConfigError);
    CHECK_THROWS_AS(
        run_command("simulate", R"({"model": {}, "horizon": 10, "seed": -4})", dir.str()),
        ConfigError);

    CommandOverrides threads;
    threads.threads = 2;
    CHECK_THROWS_AS(
        run_command("simulate", R"({"model": {}, "horizon": 10})", dir.str(), threads),
        ConfigError);
  }

  SUBCASE("unknown commands are rejected") {
    CHECK_THROWS_AS(run_command("simulat", "{}", dir.str()), ConfigError);
    CHECK_THROWS_WITH(run_command("bogus", "{}", dir.str()),
                      doctest::Contains("unknown command 'bogus'"));
  }
}

TEST_CASE("fit command writes draws, summaries, and curves") {
  TempDir data_dir("fit_data");
  TempDir out("fit_out");

  SUBCASE("a constant-rate fit recovers the conjugate posterior") {
    // Pure Poisson data with a gamma prior: the posterior over mu is known
    // exactly, so the chain summary has a closed-form target.
    const std::string pattern_path = make_pattern(
        data_dir,
        R"({"background": {"form": "constant", "mu": 2.0},
            "kernel": {"family": "none"},
            "link": {"family": "identity"}})",
        200.0, 13);
    const PointPattern pattern = read_pattern_csv(pattern_path);

    json config;
    config["model"] = {{"background", {{"form", "constant"}}},
                       {"kernel", {{"family", "none"}}},
                       {"link", {{"family", "identity"}}}};
    config["priors"] = {{"mu", {{"family", "gamma"}, {"a", 1.0}, {"b", 1.0}}}};
    config["sampler"] = {{"iterations", 3000}, {"burn_in", 1000}, {"seed", 2}};
    config["data"] = {{"path", pattern_path}};
    run_command("fit", config.dump(), out.str());

    REQUIRE(out.has("draws.csv"));
    REQUIRE(out.has("summary.json"));
    REQUIRE(out.has("acceptance.csv"));
    REQUIRE(out.has("background_daily.csv"));
    CHECK_FALSE(out.has("trigger_curve.csv"));
    CHECK_FALSE(out.has("gp_draws.csv"));
    CHECK_FALSE(out.has("latent_year.csv"));

    const std::string draws = read_text(out.file("draws.csv"));
    CHECK(draws.rfind("mu\n", 0) == 0);
    CHECK(line_count(draws) == 2001);

    const json summary = read_json(out.file("summary.json"));
    CHECK(summary.at("command") == "fit");
    CHECK(summary.at("seed") == 2);
    CHECK(summary.at("n_events") == pattern.size());
    CHECK(summary.at("horizon_hours") == 200.0);
    CHECK(summary.at("n_draws") == 2000);
    CHECK(summary.at("config").contains("model"));
    CHECK(summary.at("config").contains("priors"));
    CHECK(summary.at("config").at("sampler").at("iterations") == 3000);
    CHECK(summary.at("config").at("data").at("path") == pattern_path);

    const double n = static_cast<double>(pattern.size());
    const double posterior_mean = (1.0 + n) / (1.0 + 200.0);
    const double posterior_sd = std::sqrt(1.0 + n) / (1.0 + 200.0);
    const json& mu = summary.at("parameters").at("mu");
    CHECK(mu.at("mean").get<double>() == doctest::Approx(posterior_mean).epsilon(0.05));
    CHECK(mu.at("sd").get<double>() == doctest::Approx(posterior_sd).epsilon(0.35));
    CHECK(mu.at("p5").get<double>() < posterior_mean);
    CHECK(mu.at("p95").get<double>() > posterior_mean);
    CHECK_FALSE(summary.at("parameters").contains("exp_mu"));
    CHECK(summary.at("acceptance").contains("mu"));

    // Constant background: the daily profile is flat at the fitted rate.
    const std::string curve = read_text(out.file("background_daily.csv"));
    CHECK(curve.rfind("hour,background_rate\n", 0) == 0);
    CHECK(line_count(curve) == 242);
    std::istringstream rows(curve.substr(curve.find('\n') + 1));
    std::string row;
    while (std::getline(rows, row)) {
      const double value = std::strtod(row.c_str() + row.find(',') + 1, nullptr);
      CHECK(value == doctest::Approx(mu.at("mean").get<double>()));
    }
  }

  SUBCASE("a self-exciting fit writes the trigger curve") {
    const std::string pattern_path = make_pattern(data_dir, kHawkesModel, 150.0, 7);
    const json config = hawkes_fit_config(pattern_path);
    run_command("fit", config.dump(), out.str());

    const std::string draws = read_text(out.file("draws.csv"));
    CHECK(draws.rfind("mu,alpha,beta\n", 0) == 0);
    CHECK(line_count(draws) == 401);

    REQUIRE(out.has("trigger_curve.csv"));
    const std::string curve = read_text(out.file("trigger_curve.csv"));
    CHECK(curve.rfind("lag_hours,trigger\n", 0) == 0);
    CHECK(line_count(curve) == 201);

    const json summary = read_json(out.file("summary.json"));
    CHECK(summary.at("parameters").contains("alpha"));
    CHECK(summary.at("parameters").contains("beta"));
    const json acceptance = summary.at("acceptance");
    for (const auto& [name, rate] : acceptance.items()) {
      CHECK(rate.get<double>() >= 0.0);
      CHECK(rate.get<double>() <= 1.0);
    }
  }

  SUBCASE("a latent-background fit writes the latent curve") {
    const std::string pattern_path = make_pattern(
        data_dir,
        R"({"background": {"form": "constant", "mu": 2.0},
            "kernel": {"family": "none"},
            "link": {"family": "identity"}})",
        100.0, 17);

    json config;
    config["model"] = {{"background",
                        {{"form", "loglinear_seasonal_gp"},
                         {"mu", 0.0},
                         {"gp", {{"cells", 8}, {"sigma2", 1.0}, {"phi", 0.05}}}}},
                       {"kernel", {{"family", "none"}}},
                       {"link", {{"family", "power"}}},
                       {"quad_points", 2000}};
    config["priors"] = {{"mu", {{"family", "normal"}, {"a", 0.0}, {"b", 10.0}}},
                        {"sigma2", {{"family", "inverse_gamma"}, {"a", 2.0}, {"b", 1.0}}}};
    config["sampler"] = {{"iterations", 500}, {"burn_in", 300}, {"seed", 3}};
    config["data"] = {{"path", pattern_path}};
    run_command("fit", config.dump(), out.str());

    REQUIRE(out.has("gp_draws.csv"));
    REQUIRE(out.has("latent_year.csv"));
    const std::string gp_draws = read_text(out.file("gp_draws.csv"));
    CHECK(gp_draws.rfind("w_0,w_1,", 0) == 0);
    CHECK(line_count(gp_draws) == 201);  // 200 retained draws + header

    const std::string latent = read_text(out.file("latent_year.csv"));
    CHECK(latent.rfind("time_hours,exp_w_mean\n", 0) == 0);
    CHECK(line_count(latent) == 9);

    // Log-scale baseline: the summary adds the rate-scale view of mu.
    const json summary = read_json(out.file("summary.json"));
    REQUIRE(summary.at("parameters").contains("exp_mu"));
    const json& exp_mu = summary.at("parameters").at("exp_mu");
    const json& mu = summary.at("parameters").at("mu");
    CHECK(exp_mu.at("mean").get<double>() > std::exp(mu.at("mean").get<double>()) - 1e-12);
    CHECK(exp_mu.at("p5").get<double>() ==
          doctest::Approx(std::exp(mu.at("p5").get<double>())));
  }

  SUBCASE("fit configs are validated strictly") {
    const std::string pattern_path = make_pattern(data_dir, kHawkesModel, 50.0, 1);
    json config = hawkes_fit_config(pattern_path);

    json no_data = config;
    no_data.erase("data");
    CHECK_THROWS_AS(run_command("fit", no_data.dump(), out.str()), ConfigError);

    json no_priors = config;
    no_priors.erase("priors");
    CHECK_THROWS_AS(run_command("fit", no_priors.dump(), out.str()), ConfigError);

    json no_model = config;
    no_model.erase("model");
    CHECK_THROWS_AS(run_command("fit", no_model.dump(), out.str()), ConfigError);

    json stray = config;
    stray["horizon"] = 10.0;
    CHECK_THROWS_WITH(run_command("fit", stray.dump(), out.str()),
                      doctest::Contains("unknown key 'horizon'"));

    json missing_file = config;
    missing_file["data"]["path"] = data_dir.file("no_such.csv");
    CHECK_THROWS_AS(run_command("fit", missing_file.dump(), out.str()), DataError);

    CommandOverrides threads;
    threads.threads = 2;
    CHECK_THROWS_AS(run_command("fit", config.dump(), out.str(), threads), ConfigError);
  }

  SUBCASE("the sampler seed can be overridden") {
    const std::string pattern_path = make_pattern(data_dir, kHawkesModel, 50.0, 1);
    json config = hawkes_fit_config(pattern_path);
    config["sampler"]["seed"] = 77;
    run_command("fit", config.dump(), out.str());
    const std::string baseline = read_text(out.file("draws.csv"));
    CHECK(read_json(out.file("summary.json")).at("seed") == 77);

    config["sampler"]["seed"] = 1;
    CommandOverrides same;
    same.seed = 77;
    run_command("fit", config.dump(), out.str(), same);
    CHECK(read_text(out.file("draws.csv")) == baseline);
    CHECK(read_json(out.file("summary.json")).at("seed") == 77);
  }
}

TEST_CASE("compare command reports the criteria bundle") {
  TempDir data_dir("compare_data");
  TempDir out("compare_out");
  const std::string pattern_path = make_pattern(data_dir, kHawkesModel, 150.0, 29);
  const PointPattern pattern = read_pattern_csv(pattern_path);

  json config = hawkes_fit_config(pattern_path);
  config["windows"] = {{"seed", 4}, {"law", "uniform"}};
  config["rps"] = {{"seed", 6}};
  run_command("compare", config.dump(), out.str());

  REQUIRE(out.has("report.json"));
  CHECK_FALSE(out.has("windows.csv"));
  const json report = read_json(out.file("report.json"));
  CHECK(report.at("command") == "compare");
  CHECK(report.at("seed") == 5);
  CHECK(report.at("n_events") == pattern.size());
  CHECK(std::isfinite(report.at("dic").get<double>()));
  CHECK(report.at("p_d").get<double>() > 0.0);
  CHECK(report.at("mean_deviance").get<double>() > report.at("deviance_at_mean").get<double>());
  for (const char* key : {"pmr_excite", "pmr_inhibit", "pmr_excite_hpp", "pmr_inhibit_hpp"}) {
    const double value = report.at(key).get<double>();
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
  }
  CHECK(report.at("rps").get<double>() >= 0.0);
  CHECK(report.at("n_windows").get<std::size_t>() <= pattern.size());
  CHECK(report.at("n_windows").get<std::size_t>() > 0);
  CHECK(report.at("window_seed") == 4);
  CHECK(report.at("config").at("windows").at("seed") == 4);
  CHECK(report.at("config").at("rps").at("seed") == 6);

  SUBCASE("emit_windows adds the per-window table") {
    config["emit_windows"] = true;
    run_command("compare", config.dump(), out.str());
    REQUIRE(out.has("windows.csv"));
    const std::string windows = read_text(out.file("windows.csv"));
    CHECK(windows.rfind("anchor,delta,p,q,y,truncated,degenerate\n", 0) == 0);
    CHECK(line_count(windows) == pattern.size() + 1);

    std::istringstream rows(windows.substr(windows.find('\n') + 1));
    std::string row;
    while (std::getline(rows, row)) {
      double anchor = 0.0, delta = 0.0, p = 0.0, q = 0.0;
      int y = 0, truncated = 0, degenerate = 0;
      REQUIRE(std::sscanf(row.c_str(), "%lf,%lf,%lf,%lf,%d,%d,%d", &anchor, &delta, &p, &q,
                          &y, &truncated, &degenerate) == 7);
      CHECK(anchor >= 0.0);
      CHECK(anchor <= 150.0);
      CHECK(delta >= 0.0);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(q >= 0.0);
      CHECK(q <= 1.0);
      CHECK((y == 0 || y == 1));
    }
  }

  SUBCASE("window defaults apply when the blocks are omitted") {
    json bare = hawkes_fit_config(pattern_path);
    run_command("compare", bare.dump(), out.str());
    const json defaulted = read_json(out.file("report.json"));
    CHECK(defaulted.at("window_seed") == 1);
    CHECK(defaulted.at("config").at("windows").at("law") == "uniform");
    CHECK(defaulted.at("config").at("rps").at("dt") <= 0.0);
  }

  SUBCASE("emit_windows must be boolean") {
    config["emit_windows"] = "yes";
    CHECK_THROWS_AS(run_command("compare", config.dump(), out.str()), ConfigError);
  }
}

TEST_CASE("study command writes the replicate table") {
  TempDir out("study_out");

  json config;
  config["study"] = {{"preset", "excite_grid"},
                     {"cell", "mu=1 alpha=0.09"},
                     {"replicates", 2},
                     {"threads", 1},
                     {"seed", 11}};
  config["sampler"] = {{"iterations", 600}, {"burn_in", 300}};
  run_command("study", config.dump(), out.str());

  REQUIRE(out.has("study.csv"));
  REQUIRE(out.has("study.json"));
  const std::string table = read_text(out.file("study.csv"));
  CHECK(table.rfind("preset_cell,model,avg_n,avg_DIC,avg_PMR,avg_RPS,failures\n", 0) == 0);
  CHECK(line_count(table) == 3);
  CHECK(table.find("mu=1 alpha=0.09,hawkes,") != std::string::npos);
  CHECK(table.find("mu=1 alpha=0.09,hpp,") != std::string::npos);

  const json body = read_json(out.file("study.json"));
  CHECK(body.at("command") == "study");
  CHECK(body.at("preset") == "excite_grid");
  CHECK(body.at("seed") == 11);
  CHECK(body.at("replicates") == 2);
  CHECK(body.at("wall_clock_seconds").get<double>() > 0.0);
  REQUIRE(body.at("rows").size() == 2);
  for (const json& row : body.at("rows")) {
    CHECK(row.at("failures") == 0);
    CHECK(row.at("replicates") == 2);
    CHECK(std::isfinite(row.at("avg_dic").get<double>()));
  }

  SUBCASE("the threads override applies to studies") {
    CommandOverrides overrides;
    overrides.threads = 2;
    run_command("study", config.dump(), out.str(), overrides);
    const std::string threaded = read_text(out.file("study.csv"));
    CHECK(threaded == table);
  }

  SUBCASE("study configs are validated strictly") {
    CHECK_THROWS_AS(run_command("study", "{}", out.str()), ConfigError);
    CHECK_THROWS_AS(run_command("study", R"({"study": {}})", out.str()), ConfigError);
    CHECK_THROWS_AS(run_command("study", R"({"study": {"preset": "nope"}})", out.str()),
                    ConfigError);
    CHECK_THROWS_WITH(
        run_command("study", R"({"study": {"preset": "excite_grid", "cells": 3}})", out.str()),
        doctest::Contains("unknown key 'cells'"));
    CHECK_THROWS_AS(
        run_command("study", R"({"study": {"preset": "excite_grid"}, "model": {}})", out.str()),
        ConfigError);
    CHECK_THROWS_AS(
        run_command(
            "study",
            R"({"study": {"preset": "excite_grid", "cell": "mu=1 alpha=0.09", "threads": 0}})",
            out.str()),
        ConfigError);
  }
}
