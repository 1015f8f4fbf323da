#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "stormfield/gibbs.hpp"
#include "stormfield/lattice.hpp"
#include "stormfield/model.hpp"

namespace stormfield {

/// Settings read from a flat `key = value` file. Lines starting with '#'
/// are comments. Unknown or repeated keys are rejected with ConfigError.
struct RunConfig {
  GridSpec grid;
  int times = 24;
  double obs_interval_min = 10.0;
  double gauge_interval_min = 10.0;
  double range_bin_m = 150.0;

  Hyperparams hyper;
  Priors priors;
  GibbsConfig mcmc;

  std::uint64_t seed = 1;
  int threads = 1;

  // Ground truth for `simulate`.
  StaticParams truth{0.0, 0.0, 0.8, 0.1};
  int sim_gauges = 5;

  // Input files, resolved against the config file's directory.
  std::filesystem::path data_dir;
  std::filesystem::path radar_polar;
  std::filesystem::path gauge_records;
  std::filesystem::path gauge_meta;

  int forecast_horizon = 3;
  bool forecast_write_draws = true;

  /// Stable hash of the normalised key/value pairs (hex FNV-1a 64).
  std::string hash;
  std::map<std::string, std::string> entries;

  void validate() const;
};

/// Parse config text. `base` resolves relative paths.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Build the ModelSpec implied by the config for the given gauge cells.
ModelSpec model_spec(const RunConfig& config, std::vector<int> gauge_cells);

std::string fnv1a_hex(std::string_view text);

}  // namespace stormfield
