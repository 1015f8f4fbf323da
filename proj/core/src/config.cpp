#include "stormfield/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "stormfield/errors.hpp"

namespace stormfield {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

template <typename T>
Setter number(std::function<T&(RunConfig&)> ref) {
  return [ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_number<T>(k, v); };
}

#define SF_REF(type, expr) number<type>(std::function<type&(RunConfig&)>([](RunConfig& c) -> type& { return expr; }))

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"grid.n", SF_REF(int, c.grid.n)},
      {"grid.cell_size_m", SF_REF(double, c.grid.cell_size_m)},
      {"time.T", number(&RunConfig::times)},
      {"time.t_tilde", SF_REF(int, c.hyper.imputed_steps)},
      {"time.obs_interval_min", number(&RunConfig::obs_interval_min)},
      {"time.gauge_interval_min", number(&RunConfig::gauge_interval_min)},
      {"radar.range_bin_m", number(&RunConfig::range_bin_m)},
      {"hyper.phi_g", SF_REF(double, c.hyper.phi_gauge)},
      {"hyper.phi_r", SF_REF(double, c.hyper.phi_radar)},
      {"hyper.phi_theta", SF_REF(double, c.hyper.phi_theta)},
      {"hyper.phi_s", SF_REF(double, c.hyper.phi_source)},
      {"hyper.phi_nu", SF_REF(double, c.hyper.phi_nu)},
      {"hyper.alpha_nu", SF_REF(double, c.hyper.alpha_nu)},
      {"hyper.alpha_star", SF_REF(double, c.hyper.alpha_source)},
      {"hyper.beta_star", SF_REF(double, c.hyper.beta_source)},
      {"priors.mu_mean", SF_REF(double, c.priors.mu.mean)},
      {"priors.mu_var", SF_REF(double, c.priors.mu.variance)},
      {"priors.mu_r_mean", SF_REF(double, c.priors.mu_radar.mean)},
      {"priors.mu_r_var", SF_REF(double, c.priors.mu_radar.variance)},
      {"priors.alpha_mean", SF_REF(double, c.priors.alpha.mean)},
      {"priors.alpha_var", SF_REF(double, c.priors.alpha.variance)},
      {"priors.beta_mean", SF_REF(double, c.priors.beta.mean)},
      {"priors.beta_var", SF_REF(double, c.priors.beta.variance)},
      {"priors.theta0_mean", SF_REF(double, c.priors.theta0.mean)},
      {"priors.theta0_var", SF_REF(double, c.priors.theta0.variance)},
      {"priors.s0_mean", SF_REF(double, c.priors.source0.mean)},
      {"priors.s0_var", SF_REF(double, c.priors.source0.variance)},
      {"priors.nu0_x", SF_REF(double, c.priors.nu0_mean.x)},
      {"priors.nu0_y", SF_REF(double, c.priors.nu0_mean.y)},
      {"priors.nu0_var", SF_REF(double, c.priors.nu0_variance)},
      {"mcmc.iters", SF_REF(int, c.mcmc.iterations)},
      {"mcmc.burnin", SF_REF(int, c.mcmc.burnin)},
      {"mcmc.thin", SF_REF(int, c.mcmc.thin)},
      {"mcmc.state_thin", SF_REF(int, c.mcmc.state_thin)},
      {"mcmc.sampler",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "enks") c.mcmc.sampler = StateSampler::kEnks;
         else if (v == "exact") c.mcmc.sampler = StateSampler::kExact;
         else throw ConfigError("invalid value for " + k + ": '" + v + "' (expected enks or exact)");
       }},
      {"enks.ensemble_size", SF_REF(int, c.mcmc.smoother.ensemble_size)},
      {"enks.lag", SF_REF(int, c.mcmc.smoother.lag)},
      {"enks.solve",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") c.mcmc.smoother.solve = GainSolve::kAuto;
         else if (v == "observation") c.mcmc.smoother.solve = GainSolve::kObservationSpace;
         else if (v == "ensemble") c.mcmc.smoother.solve = GainSolve::kEnsembleSpace;
         else throw ConfigError("invalid value for " + k + ": '" + v + "'");
       }},
      {"enks.lag_update",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") c.mcmc.smoother.lag_update = LagUpdate::kAuto;
         else if (v == "transform") c.mcmc.smoother.lag_update = LagUpdate::kTransform;
         else if (v == "direct") c.mcmc.smoother.lag_update = LagUpdate::kDirect;
         else throw ConfigError("invalid value for " + k + ": '" + v + "'");
       }},
      {"rng.seed", number(&RunConfig::seed)},
      {"run.threads", number(&RunConfig::threads)},
      {"sim.mu", SF_REF(double, c.truth.mu)},
      {"sim.mu_r", SF_REF(double, c.truth.mu_radar)},
      {"sim.alpha", SF_REF(double, c.truth.alpha)},
      {"sim.beta", SF_REF(double, c.truth.beta)},
      {"sim.gauges", number(&RunConfig::sim_gauges)},
      {"data.dir", [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; }},
      {"data.radar_polar", [](RunConfig& c, const std::string&, const std::string& v) { c.radar_polar = v; }},
      {"data.gauges", [](RunConfig& c, const std::string&, const std::string& v) { c.gauge_records = v; }},
      {"data.gauge_meta", [](RunConfig& c, const std::string&, const std::string& v) { c.gauge_meta = v; }},
      {"forecast.horizon", number(&RunConfig::forecast_horizon)},
      {"forecast.write_draws",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.forecast_write_draws = parse_bool(k, v); }},
  };
  return table;
}

#undef SF_REF

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[h & 0xF];
    h >>= 4;
  }
  return out;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!config.entries.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    it->second(config, key, value);
  }
  config.data_dir = resolve(base, config.data_dir);
  config.radar_polar = resolve(base, config.radar_polar);
  config.gauge_records = resolve(base, config.gauge_records);
  config.gauge_meta = resolve(base, config.gauge_meta);

  std::string canonical;
  for (const auto& [k, v] : config.entries) canonical += k + "=" + v + "\n";
  config.hash = fnv1a_hex(canonical);
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

void RunConfig::validate() const {
  try {
    grid.validate();
    hyper.validate();
    priors.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  mcmc.validate();
  if (times < 1) throw ConfigError("time.T must be >= 1");
  if (!(obs_interval_min > 0.0) || !(gauge_interval_min > 0.0)) throw ConfigError("intervals must be positive");
  if (!(range_bin_m > 0.0)) throw ConfigError("radar.range_bin_m must be positive");
  if (threads < 1) throw ConfigError("run.threads must be >= 1");
  if (sim_gauges < 0 || sim_gauges > grid.cells()) throw ConfigError("sim.gauges must lie in [0, N]");
  if (forecast_horizon < 1) throw ConfigError("forecast.horizon must be >= 1");
  if (!(truth.alpha > 0.0 && truth.alpha < 1.0)) throw ConfigError("sim.alpha must lie in (0, 1)");
}

ModelSpec model_spec(const RunConfig& config, std::vector<int> gauge_cells) {
  ModelSpec spec{Lattice(config.grid), time_map(config.times, config.hyper.imputed_steps), config.hyper,
                 config.priors, std::move(gauge_cells)};
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

}  // namespace stormfield
