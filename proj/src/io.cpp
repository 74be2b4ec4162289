#include "evopp/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "evopp/errors.hpp"

namespace evopp {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& context, const std::string& what) {
  throw ConfigError(context + ": " + what);
}

void check_keys(const json& obj, const std::string& context,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad_config(context, "expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) bad_config(context, "unknown key '" + it.key() + "'");
  }
}

double get_number(const json& obj, const std::string& context, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& value = obj.at(key);
  if (!value.is_number()) bad_config(context, std::string("'") + key + "' must be a number");
  return value.get<double>();
}

double require_number(const json& obj, const std::string& context, const char* key) {
  if (!obj.contains(key)) bad_config(context, std::string("missing required key '") + key + "'");
  return get_number(obj, context, key, 0.0);
}

int get_integer(const json& obj, const std::string& context, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& value = obj.at(key);
  if (!value.is_number_integer()) {
    bad_config(context, std::string("'") + key + "' must be an integer");
  }
  return value.get<int>();
}

std::uint64_t get_seed(const json& obj, const std::string& context, const char* key,
                       std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& value = obj.at(key);
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    bad_config(context, std::string("'") + key + "' must be a nonnegative integer");
  }
  return value.get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& context, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& value = obj.at(key);
  if (!value.is_string()) bad_config(context, std::string("'") + key + "' must be a string");
  return value.get<std::string>();
}

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::string upper(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

// District values show up as "11", "011", or "11.0" depending on the export;
// compare numerically when both sides parse, else as trimmed strings.
bool district_matches(const std::string& row_value, const std::string& wanted) {
  const std::string a = trim(row_value);
  const std::string b = trim(wanted);
  char* end_a = nullptr;
  char* end_b = nullptr;
  const double da = std::strtod(a.c_str(), &end_a);
  const double db = std::strtod(b.c_str(), &end_b);
  if (!a.empty() && !b.empty() && *end_a == '\0' && *end_b == '\0') return da == db;
  return a == b;
}

// One CSV record, quotes honored, "" unescaped inside quoted fields.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

bool is_leap_year(int year) { return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0); }

int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

// "MM/DD/YYYY HH:MM:SS AM" -> hours since the start of its year.
double parse_portal_timestamp(const std::string& text, std::size_t line_number, int& year_out) {
  int month = 0, day = 0, year = 0, hour = 0, minute = 0, second = 0;
  char half[3] = {0, 0, 0};
  const int matched = std::sscanf(text.c_str(), "%d/%d/%d %d:%d:%d %2s", &month, &day, &year,
                                  &hour, &minute, &second, half);
  const bool shape_ok = matched == 7 && month >= 1 && month <= 12 && year >= 1 && day >= 1 &&
                        day <= days_in_month(year, month) && hour >= 1 && hour <= 12 &&
                        minute >= 0 && minute <= 59 && second >= 0 && second <= 59 &&
                        (std::string(half) == "AM" || std::string(half) == "PM");
  if (!shape_ok) {
    std::ostringstream msg;
    msg << "line " << line_number << ": unparseable timestamp '" << text << "'";
    throw DataError(msg.str());
  }
  int hour24 = hour % 12;  // 12 AM -> 0, 12 PM -> 12 via the PM branch
  if (half[0] == 'P') hour24 += 12;
  int day_of_year = day - 1;
  for (int m = 1; m < month; ++m) day_of_year += days_in_month(year, m);
  year_out = year;
  return 24.0 * day_of_year + hour24 + minute / 60.0 + second / 3600.0;
}

KernelFamily kernel_family_from_name(const std::string& name, const std::string& context) {
  for (KernelFamily f : {KernelFamily::None, KernelFamily::Exponential, KernelFamily::Uniform,
                         KernelFamily::Gaussian, KernelFamily::Triangle, KernelFamily::Gamma}) {
    if (name == kernel_family_name(f)) return f;
  }
  bad_config(context, "unknown kernel family '" + name +
                          "'; expected none, exponential, uniform, gaussian, triangle, or gamma");
}

LinkFamily link_family_from_name(const std::string& name, const std::string& context) {
  for (LinkFamily f : {LinkFamily::Identity, LinkFamily::PowerTobit, LinkFamily::SoftPlus,
                       LinkFamily::Log10SoftPlus, LinkFamily::Exponential}) {
    if (name == link_family_name(f)) return f;
  }
  bad_config(context, "unknown link family '" + name +
                          "'; expected identity, power, softplus, log10_softplus, or exponential");
}

BackgroundForm background_form_from_name(const std::string& name, const std::string& context) {
  for (BackgroundForm f : {BackgroundForm::Constant, BackgroundForm::LogLinearSeasonal,
                           BackgroundForm::LogLinearSeasonalGP}) {
    if (name == background_form_name(f)) return f;
  }
  bad_config(context, "unknown background form '" + name +
                          "'; expected constant, loglinear_seasonal, or loglinear_seasonal_gp");
}

PriorFamily prior_family_from_name(const std::string& name, const std::string& context) {
  for (PriorFamily f : {PriorFamily::Normal, PriorFamily::Uniform, PriorFamily::Gamma,
                        PriorFamily::LogNormal, PriorFamily::InverseGamma}) {
    if (name == prior_family_name(f)) return f;
  }
  bad_config(context, "unknown prior family '" + name +
                          "'; expected normal, uniform, gamma, lognormal, or inverse_gamma");
}

}  // namespace

std::string round_trip_format(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_pattern_csv(const std::string& path, const PointPattern& pattern,
                       const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write pattern file '" + path + "'");
  out << "# horizon_hours=" << round_trip_format(pattern.horizon()) << "\n";
  for (const std::string& comment : comments) out << "# " << comment << "\n";
  out << "time_hours\n";
  for (double t : pattern.times()) out << round_trip_format(t) << "\n";
  out.flush();
  if (!out) throw DataError("write failed for pattern file '" + path + "'");
}

PointPattern read_pattern_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pattern file '" + path + "'");

  constexpr const char* kHorizonTag = "horizon_hours=";
  double horizon = -1.0;
  bool header_seen = false;
  std::vector<double> times;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text[0] == '#') {
      const std::string body = trim(text.substr(1));
      if (body.rfind(kHorizonTag, 0) == 0) {
        const std::string value = body.substr(std::string(kHorizonTag).size());
        char* end = nullptr;
        horizon = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0') {
          throw DataError(path + " line " + std::to_string(line_number) +
                          ": unparseable horizon '" + value + "'");
        }
      }
      continue;
    }
    if (!header_seen) {
      if (text != "time_hours") {
        throw DataError(path + " line " + std::to_string(line_number) +
                        ": expected header 'time_hours', got '" + text + "'");
      }
      header_seen = true;
      continue;
    }
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (*end != '\0') {
      throw DataError(path + " line " + std::to_string(line_number) + ": unparseable time '" +
                      text + "'");
    }
    times.push_back(value);
  }
  if (horizon <= 0.0) throw DataError(path + ": missing '# horizon_hours=' metadata");
  if (!header_seen) throw DataError(path + ": missing 'time_hours' header");
  try {
    return PointPattern(std::move(times), horizon);
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

void IngestConfig::validate() const {
  if (year < 1) throw ConfigError("ingest year must be positive");
  if (!(jitter_seconds >= 0.0)) throw ConfigError("jitter_seconds must be nonnegative");
}

PointPattern ingest_events(const std::string& path, const IngestConfig& config) {
  config.validate();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("event file is empty: " + path);
  if (line.size() >= 3 && line[0] == '\xEF' && line[1] == '\xBB' && line[2] == '\xBF') {
    line.erase(0, 3);
  }
  const std::vector<std::string> header = split_csv(line);
  std::size_t date_col = header.size();
  std::size_t district_col = header.size();
  std::size_t type_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = trim(header[i]);
    if (name == "Date") date_col = i;
    if (name == "District") district_col = i;
    if (name == "Primary Type") type_col = i;
  }
  if (date_col == header.size()) throw DataError(path + ": no 'Date' column in the header");
  if (!config.district.empty() && district_col == header.size()) {
    throw DataError(path + ": district filter given but no 'District' column");
  }
  if (!config.primary_types.empty() && type_col == header.size()) {
    throw DataError(path + ": type filter given but no 'Primary Type' column");
  }
  std::vector<std::string> wanted_types;
  wanted_types.reserve(config.primary_types.size());
  for (const std::string& t : config.primary_types) wanted_types.push_back(upper(trim(t)));

  std::vector<double> base;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() <= date_col || (!config.district.empty() && fields.size() <= district_col) ||
        (!wanted_types.empty() && fields.size() <= type_col)) {
      throw DataError(path + " line " + std::to_string(line_number) + ": too few columns");
    }
    if (!config.district.empty() && !district_matches(fields[district_col], config.district)) {
      continue;
    }
    if (!wanted_types.empty()) {
      const std::string row_type = upper(trim(fields[type_col]));
      bool match = false;
      for (const std::string& t : wanted_types) match = match || row_type == t;
      if (!match) continue;
    }
    int row_year = 0;
    const double hours = parse_portal_timestamp(trim(fields[date_col]), line_number, row_year);
    if (row_year != config.year) continue;
    base.push_back(hours);
  }
  if (base.empty()) throw DataError("no events match the filters in " + path);

  const double horizon = 24.0 * (is_leap_year(config.year) ? 366.0 : 365.0);
  std::mt19937_64 rng(config.rng_seed);
  const double jitter = config.jitter_seconds / 3600.0;
  std::uniform_real_distribution<double> offset(-jitter, jitter);
  auto draw = [&](double b) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double value = jitter > 0.0 ? b + offset(rng) : b;
      if (value > 0.0 && value <= horizon) return value;
      if (jitter == 0.0) break;
    }
    throw DataError("cannot jitter an event at " + std::to_string(b) +
                    " hours into (0, horizon]");
  };

  std::vector<std::pair<double, double>> events;  // (jittered, original)
  events.reserve(base.size());
  for (double b : base) events.emplace_back(draw(b), b);

  // Continuous jitter almost never collides; redraw the rare exact ties.
  for (int round = 0; round < 100; ++round) {
    std::sort(events.begin(), events.end());
    bool tied = false;
    for (std::size_t i = 1; i < events.size(); ++i) {
      if (events[i].first == events[i - 1].first) {
        tied = true;
        events[i - 1].first = draw(events[i - 1].second);
        events[i].first = draw(events[i].second);
      }
    }
    if (!tied) break;
    if (round == 99) {
      throw DataError("tied event times survive jittering; increase jitter_seconds");
    }
  }

  std::vector<double> times;
  times.reserve(events.size());
  for (const auto& [t, b] : events) times.push_back(t);
  return PointPattern(std::move(times), horizon);
}

PointPattern load_data(const json& block) {
  const std::string context = "data";
  check_keys(block, context,
             {"source", "path", "year", "district", "primary_types", "jitter_seconds", "seed"});
  const std::string source = get_string(block, context, "source", "pattern");
  const std::string path = get_string(block, context, "path", "");
  if (path.empty()) bad_config(context, "missing required key 'path'");

  if (source == "pattern") {
    for (const char* key : {"year", "district", "primary_types", "jitter_seconds", "seed"}) {
      if (block.contains(key)) {
        bad_config(context, std::string("'") + key + "' applies only to source \"events\"");
      }
    }
    return read_pattern_csv(path);
  }
  if (source == "events") {
    IngestConfig config;
    config.year = get_integer(block, context, "year", config.year);
    config.district = get_string(block, context, "district", "");
    if (block.contains("primary_types")) {
      const json& types = block.at("primary_types");
      if (!types.is_array()) bad_config(context, "'primary_types' must be an array of strings");
      for (const json& t : types) {
        if (!t.is_string()) bad_config(context, "'primary_types' must be an array of strings");
        config.primary_types.push_back(t.get<std::string>());
      }
    }
    config.jitter_seconds = get_number(block, context, "jitter_seconds", config.jitter_seconds);
    config.rng_seed = get_seed(block, context, "seed", config.rng_seed);
    return ingest_events(path, config);
  }
  bad_config(context, "unknown source '" + source + "'; expected pattern or events");
}

ModelSpec model_from_json(const json& block, double horizon) {
  const std::string context = "model";
  check_keys(block, context, {"background", "kernel", "link", "quad_points"});
  ModelSpec model;

  if (block.contains("background")) {
    const std::string bg_context = "model.background";
    const json& bg = block.at("background");
    check_keys(bg, bg_context, {"form", "mu", "gamma1", "gamma2", "period", "gp"});
    model.background.form = background_form_from_name(
        get_string(bg, bg_context, "form", background_form_name(model.background.form)),
        bg_context);
    model.background.mu = get_number(bg, bg_context, "mu", model.background.mu);
    model.background.gamma1 = get_number(bg, bg_context, "gamma1", model.background.gamma1);
    model.background.gamma2 = get_number(bg, bg_context, "gamma2", model.background.gamma2);
    model.background.period = get_number(bg, bg_context, "period", model.background.period);
    const bool wants_gp = model.background.form == BackgroundForm::LogLinearSeasonalGP;
    if (bg.contains("gp") != wants_gp) {
      bad_config(bg_context, wants_gp ? "form loglinear_seasonal_gp needs a 'gp' block"
                                      : "only form loglinear_seasonal_gp takes a 'gp' block");
    }
    if (wants_gp) {
      const std::string gp_context = "model.background.gp";
      const json& gp = bg.at("gp");
      check_keys(gp, gp_context, {"cells", "sigma2", "phi"});
      const int cells = get_integer(gp, gp_context, "cells", 0);
      if (cells < 1) bad_config(gp_context, "'cells' must be a positive integer");
      if (!(horizon > 0.0)) {
        bad_config(gp_context, "a latent background needs a positive horizon for its grid");
      }
      const double sigma2 = get_number(gp, gp_context, "sigma2", 1.0);
      const double phi = get_number(gp, gp_context, "phi", 1.0);
      model.background.gp = LatentGP::make_grid(static_cast<std::size_t>(cells), horizon, sigma2,
                                                phi);
    }
  }

  if (block.contains("kernel")) {
    const std::string k_context = "model.kernel";
    const json& kernel = block.at("kernel");
    check_keys(kernel, k_context, {"family", "alpha", "beta", "nu"});
    model.kernel.family = kernel_family_from_name(
        get_string(kernel, k_context, "family", kernel_family_name(model.kernel.family)),
        k_context);
    model.kernel.alpha = get_number(kernel, k_context, "alpha", model.kernel.alpha);
    model.kernel.beta = get_number(kernel, k_context, "beta", model.kernel.beta);
    model.kernel.nu = get_number(kernel, k_context, "nu", model.kernel.nu);
  }

  if (block.contains("link")) {
    const std::string l_context = "model.link";
    const json& link = block.at("link");
    check_keys(link, l_context, {"family", "eta"});
    model.link.family = link_family_from_name(
        get_string(link, l_context, "family", link_family_name(model.link.family)), l_context);
    model.link.eta = get_number(link, l_context, "eta", model.link.eta);
  }

  model.quad_points = get_integer(block, context, "quad_points", model.quad_points);
  model.validate();
  return model;
}

PriorSpec priors_from_json(const json& block) {
  if (!block.is_object()) bad_config("priors", "expected a JSON object");
  PriorSpec priors;
  for (auto it = block.begin(); it != block.end(); ++it) {
    ParamId id;
    if (!param_id_from_name(it.key(), id)) {
      bad_config("priors", "unknown parameter '" + it.key() + "'");
    }
    const std::string context = "priors." + it.key();
    const json& entry = it.value();
    check_keys(entry, context, {"family", "a", "b"});
    Prior prior;
    prior.family = prior_family_from_name(get_string(entry, context, "family", ""), context);
    prior.a = require_number(entry, context, "a");
    prior.b = require_number(entry, context, "b");
    prior.validate();
    priors.entries[id] = prior;
  }
  return priors;
}

SamplerConfig sampler_from_json(const json& block) {
  const std::string context = "sampler";
  check_keys(block, context,
             {"iterations", "burn_in", "univariate_phase", "accept_low", "accept_high",
              "initial_step", "gp_initial_step", "adaptation_stride", "seed"});
  SamplerConfig config;
  config.n_iterations = get_integer(block, context, "iterations", config.n_iterations);
  config.burn_in = get_integer(block, context, "burn_in", config.burn_in);
  config.univariate_phase_length =
      get_integer(block, context, "univariate_phase", config.univariate_phase_length);
  config.target_accept_low = get_number(block, context, "accept_low", config.target_accept_low);
  config.target_accept_high = get_number(block, context, "accept_high", config.target_accept_high);
  config.initial_step = get_number(block, context, "initial_step", config.initial_step);
  config.gp_initial_step = get_number(block, context, "gp_initial_step", config.gp_initial_step);
  config.adaptation_stride =
      get_integer(block, context, "adaptation_stride", config.adaptation_stride);
  config.rng_seed = get_seed(block, context, "seed", config.rng_seed);
  config.validate();
  return config;
}

WindowConfig windows_from_json(const json& block) {
  const std::string context = "windows";
  check_keys(block, context, {"seed", "law", "param"});
  WindowConfig config;
  config.rng_seed = get_seed(block, context, "seed", config.rng_seed);
  const std::string law = get_string(block, context, "law", "uniform");
  if (law == "uniform") {
    config.law = WindowLaw::Uniform01;
  } else if (law == "uniform_scaled") {
    config.law = WindowLaw::UniformScaled;
  } else if (law == "beta") {
    config.law = WindowLaw::Beta;
  } else {
    bad_config(context, "unknown law '" + law + "'; expected uniform, uniform_scaled, or beta");
  }
  config.law_param = get_number(block, context, "param", config.law_param);
  config.validate();
  return config;
}

RpsConfig rps_from_json(const json& block) {
  const std::string context = "rps";
  check_keys(block, context, {"dt", "seed"});
  RpsConfig config;
  config.dt = get_number(block, context, "dt", config.dt);
  config.rng_seed = get_seed(block, context, "seed", config.rng_seed);
  return config;
}

json model_to_json(const ModelSpec& model) {
  json background{{"form", background_form_name(model.background.form)},
                  {"mu", model.background.mu}};
  if (model.background.form != BackgroundForm::Constant) {
    background["gamma1"] = model.background.gamma1;
    background["gamma2"] = model.background.gamma2;
    background["period"] = model.background.period;
  }
  if (model.background.gp.has_value()) {
    background["gp"] = json{{"cells", model.background.gp->w_star.size()},
                            {"sigma2", model.background.gp->sigma2},
                            {"phi", model.background.gp->phi}};
  }
  json kernel{{"family", kernel_family_name(model.kernel.family)}};
  if (model.kernel.family != KernelFamily::None) {
    kernel["alpha"] = model.kernel.alpha;
    kernel["beta"] = model.kernel.beta;
    if (model.kernel.family == KernelFamily::Gamma) kernel["nu"] = model.kernel.nu;
  }
  json link{{"family", link_family_name(model.link.family)}};
  if (model.link.family == LinkFamily::PowerTobit) link["eta"] = model.link.eta;
  return json{{"background", background},
              {"kernel", kernel},
              {"link", link},
              {"quad_points", model.quad_points}};
}

json priors_to_json(const PriorSpec& priors) {
  json out = json::object();
  for (const auto& [id, prior] : priors.entries) {
    out[param_name(id)] =
        json{{"family", prior_family_name(prior.family)}, {"a", prior.a}, {"b", prior.b}};
  }
  return out;
}

json sampler_to_json(const SamplerConfig& config) {
  return json{{"iterations", config.n_iterations},
              {"burn_in", config.burn_in},
              {"univariate_phase", config.univariate_length()},
              {"accept_low", config.target_accept_low},
              {"accept_high", config.target_accept_high},
              {"initial_step", config.initial_step},
              {"gp_initial_step", config.gp_initial_step},
              {"adaptation_stride", config.adaptation_stride},
              {"seed", config.rng_seed}};
}

json windows_to_json(const WindowConfig& config) {
  const char* law = config.law == WindowLaw::Uniform01
                        ? "uniform"
                        : (config.law == WindowLaw::UniformScaled ? "uniform_scaled" : "beta");
  return json{{"seed", config.rng_seed}, {"law", law}, {"param", config.law_param}};
}

json rps_to_json(const RpsConfig& config) {
  return json{{"dt", config.dt}, {"seed", config.rng_seed}};
}

}  // namespace evopp
