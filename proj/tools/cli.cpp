#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stormfield/analysis.hpp"
#include "stormfield/config.hpp"
#include "stormfield/csv.hpp"
#include "stormfield/errors.hpp"
#include "stormfield/gibbs.hpp"
#include "stormfield/ingest.hpp"
#include "stormfield/simulator.hpp"

namespace stormfield {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string command;
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  fs::path out = ".";
  fs::path data;
  fs::path fit;
};

struct Context {
  Options opt;
  RunConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> written;

  void save(const std::string& name, const std::string& content) {
    write_file(opt.out / name, content);
    written.push_back(name);
  }

  void manifest(json extra) {
    json m;
    m["command"] = opt.command;
    m["version"] = kVersion;
    m["seed"] = seed;
    m["config_hash"] = config.hash;
    m["outputs"] = written;
    for (auto& [k, v] : extra.items()) m[k] = v;
    write_file(opt.out / ("manifest_" + opt.command + ".json"), m.dump(2) + "\n");
  }
};

int row_of(int cell, int n) { return cell / n + 1; }
int col_of(int cell, int n) { return cell % n + 1; }

std::string gauge_name(int g) { return "g" + std::to_string(g + 1); }

// Observation-resolution files shared by simulate and ingest.
void write_observation_files(Context& ctx, const ObservationSet& obs, const GridSpec& grid) {
  const int n = grid.n;
  std::ostringstream radar;
  {
    CsvWriter w(radar, {"time_index", "row", "col", "rate_mm_h", "missing"});
    for (int t = 0; t < obs.times; ++t) {
      for (int c = 0; c < obs.cells; ++c) {
        const ObsFlag f = obs.flag(t, c);
        const double rate = f == ObsFlag::kPositive ? inverse_transform(obs.value(t, c)) : 0.0;
        w.field(t + 1).field(row_of(c, n)).field(col_of(c, n)).field(rate).field(f == ObsFlag::kMissing ? 1 : 0);
        w.end_row();
      }
    }
  }
  ctx.save("radar_grid.csv", radar.str());

  const double to_accum = ctx.config.obs_interval_min / 60.0;
  std::ostringstream gauges;
  {
    CsvWriter w(gauges, {"time_index", "gauge_id", "accum_mm"});
    for (int t = 0; t < obs.times; ++t) {
      for (int g = 0; g < obs.gauges(); ++g) {
        const ObsFlag f = obs.flag(t, obs.cells + g);
        if (f == ObsFlag::kMissing) continue;
        const double rate = f == ObsFlag::kPositive ? inverse_transform(obs.value(t, obs.cells + g)) : 0.0;
        w.field(t + 1).field(obs.gauge_ids[static_cast<std::size_t>(g)]).field(rate * to_accum);
        w.end_row();
      }
    }
  }
  ctx.save("gauges.csv", gauges.str());

  std::ostringstream meta;
  {
    CsvWriter w(meta, {"gauge_id", "row", "col"});
    for (int g = 0; g < obs.gauges(); ++g) {
      const int cell = obs.gauge_cells[static_cast<std::size_t>(g)];
      w.field(obs.gauge_ids[static_cast<std::size_t>(g)]).field(row_of(cell, n)).field(col_of(cell, n));
      w.end_row();
    }
  }
  ctx.save("gauge_meta.csv", meta.str());
}

int cmd_simulate(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  std::vector<int> gauge_cells = place_gauges(cfg.grid.cells(), cfg.sim_gauges, ctx.seed);
  const ModelSpec spec = model_spec(cfg, gauge_cells);
  SimulationOutput sim = simulate_observations(simulate_system(spec, cfg.truth, ctx.seed), spec, cfg.truth, ctx.seed);
  for (int g = 0; g < sim.observed.gauges(); ++g) sim.observed.gauge_ids.push_back(gauge_name(g));

  write_observation_files(ctx, sim.observed, cfg.grid);

  const int n = cfg.grid.n;
  const int cells = spec.cells();
  std::ostringstream states;
  {
    CsvWriter w(states, {"time_index", "row", "col", "theta", "source"});
    for (std::size_t s = 0; s < sim.paths.states.size(); ++s) {
      const Eigen::VectorXd& x = sim.paths.states[s];
      for (int c = 0; c < cells; ++c) {
        w.field(static_cast<int>(s)).field(row_of(c, n)).field(col_of(c, n)).field(x[c]).field(x[cells + c]);
        w.end_row();
      }
    }
  }
  ctx.save("truth_states.csv", states.str());

  std::ostringstream vel;
  {
    CsvWriter w(vel, {"time_index", "nu_x", "nu_y"});
    for (std::size_t s = 0; s < sim.paths.velocities.size(); ++s) {
      w.field(static_cast<int>(s)).field(sim.paths.velocities[s].x).field(sim.paths.velocities[s].y);
      w.end_row();
    }
  }
  ctx.save("truth_velocity.csv", vel.str());

  std::ostringstream params;
  {
    CsvWriter w(params, {"name", "value"});
    w.field("mu").field(cfg.truth.mu).end_row();
    w.field("mu_r").field(cfg.truth.mu_radar).end_row();
    w.field("alpha").field(cfg.truth.alpha).end_row();
    w.field("beta").field(cfg.truth.beta).end_row();
  }
  ctx.save("truth_params.csv", params.str());

  int censored = 0;
  for (ObsFlag f : sim.observed.flags) censored += f == ObsFlag::kCensored ? 1 : 0;
  ctx.manifest({{"times", cfg.times}, {"cells", cells}, {"gauges", cfg.sim_gauges}, {"censored", censored}});
  return kExitOk;
}

fs::path require_path(const fs::path& p, const char* key) {
  if (p.empty()) throw ConfigError(std::string("config key ") + key + " is required for ingest");
  return p;
}

int cmd_ingest(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const auto polar = read_polar_records(read_csv(require_path(cfg.radar_polar, "data.radar_polar")));
  const RateGrid radar = ingest_radar_polar(polar, cfg.times, RadarGeometry{cfg.grid, cfg.range_bin_m});

  GaugeRates gauges;
  gauges.rate.resize(cfg.times, 0);
  if (!cfg.gauge_meta.empty()) {
    const auto meta = read_gauge_meta(read_csv(cfg.gauge_meta));
    const auto records = read_gauge_records(read_csv(require_path(cfg.gauge_records, "data.gauges")));
    gauges = ingest_gauges(records, meta, cfg.times, cfg.obs_interval_min, cfg.gauge_interval_min, cfg.grid);
  }
  const ObservationSet obs = build_observations(radar, gauges);
  write_observation_files(ctx, obs, cfg.grid);

  int missing = 0;
  for (ObsFlag f : obs.flags) missing += f == ObsFlag::kMissing ? 1 : 0;
  ctx.manifest({{"times", obs.times}, {"records", polar.size()}, {"gauges", obs.gauges()}, {"missing", missing}});
  return kExitOk;
}

fs::path data_dir(const Context& ctx) {
  if (!ctx.opt.data.empty()) return ctx.opt.data;
  if (!ctx.config.data_dir.empty()) return ctx.config.data_dir;
  return ctx.opt.out;
}

ObservationSet load_observations(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const fs::path dir = data_dir(ctx);
  const RateGrid radar = read_radar_grid(read_csv(dir / "radar_grid.csv"), cfg.times, cfg.grid);
  GaugeRates gauges;
  gauges.rate.resize(cfg.times, 0);
  if (fs::exists(dir / "gauge_meta.csv")) {
    const auto meta = read_gauge_meta(read_csv(dir / "gauge_meta.csv"));
    const auto records = read_gauge_records(read_csv(dir / "gauges.csv"));
    // Files in the data directory are already at the observation interval.
    gauges = ingest_gauges(records, meta, cfg.times, cfg.obs_interval_min, cfg.obs_interval_min, cfg.grid);
  }
  return build_observations(radar, gauges);
}

int cmd_fit(Context& ctx, std::ostream& out) {
  const RunConfig& cfg = ctx.config;
  const ObservationSet obs = load_observations(ctx);
  const ModelSpec spec = model_spec(cfg, obs.gauge_cells);
  GibbsConfig mcmc = cfg.mcmc;
  mcmc.smoother.threads = cfg.threads;
  const DrawStore store = run_genks(spec, obs, mcmc, ctx.seed);

  std::ostringstream traces;
  {
    CsvWriter w(traces, {"iteration", "name", "value"});
    for (std::size_t d = 0; d < store.iteration.size(); ++d) {
      const int it = store.iteration[d];
      const StaticParams& p = store.params[d];
      const Velocity& nu = store.velocities[d].back();
      w.field(it).field("mu").field(p.mu).end_row();
      w.field(it).field("mu_r").field(p.mu_radar).end_row();
      w.field(it).field("alpha").field(p.alpha).end_row();
      w.field(it).field("beta").field(p.beta).end_row();
      w.field(it).field("nu_x_last").field(nu.x).end_row();
      w.field(it).field("nu_y_last").field(nu.y).end_row();
      w.field(it).field("loglik_observed").field(store.loglik_observed[d]).end_row();
      w.field(it).field("loglik_complete").field(store.loglik_complete[d]).end_row();
    }
  }
  ctx.save("traces.csv", traces.str());

  const int n = cfg.grid.n;
  const int cells = spec.cells();
  if (store.theta.count >= 2) {
    const StateSummary summary = summarize_states(store);
    std::ostringstream states;
    {
      CsvWriter w(states, {"time_index", "row", "col", "mean", "sd", "pr_positive"});
      for (Eigen::Index s = 0; s < summary.mean.rows(); ++s) {
        for (int c = 0; c < cells; ++c) {
          w.field(static_cast<int>(s)).field(row_of(c, n)).field(col_of(c, n));
          w.field(summary.mean(s, c)).field(summary.sd(s, c)).field(summary.pr_positive(s, c));
          w.end_row();
        }
      }
    }
    ctx.save("state_summary.csv", states.str());

    std::ostringstream vel;
    {
      CsvWriter w(vel, {"time_index", "nu_x_mean", "nu_x_lower", "nu_x_upper", "nu_y_mean", "nu_y_lower",
                        "nu_y_upper"});
      for (std::size_t s = 0; s < summary.nu_x.size(); ++s) {
        const Interval& x = summary.nu_x[s];
        const Interval& y = summary.nu_y[s];
        w.field(static_cast<int>(s)).field(x.mean).field(x.lower).field(x.upper);
        w.field(y.mean).field(y.lower).field(y.upper);
        w.end_row();
      }
    }
    ctx.save("velocity_summary.csv", vel.str());
  }

  std::ostringstream terminal;
  std::ostringstream fields;
  {
    CsvWriter w(terminal, {"draw_id", "mu", "mu_r", "alpha", "beta", "nu_x", "nu_y"});
    CsvWriter f(fields, {"draw_id", "component", "row", "col", "value"});
    for (const TerminalDraw& d : store.terminal) {
      w.field(d.iteration).field(d.params.mu).field(d.params.mu_radar).field(d.params.alpha).field(d.params.beta);
      w.field(d.velocity.x).field(d.velocity.y).end_row();
      for (int c = 0; c < cells; ++c) {
        f.field(d.iteration).field("theta").field(row_of(c, n)).field(col_of(c, n)).field(d.state[c]).end_row();
      }
      for (int c = 0; c < cells; ++c) {
        f.field(d.iteration).field("source").field(row_of(c, n)).field(col_of(c, n)).field(d.state[cells + c]);
        f.end_row();
      }
    }
  }
  ctx.save("terminal_draws.csv", terminal.str());
  ctx.save("terminal_states.csv", fields.str());

  json extra{{"iterations", store.iterations},
             {"burnin", store.burnin},
             {"thin", store.thin},
             {"state_thin", store.state_thin},
             {"stored_draws", store.iteration.size()},
             {"terminal_draws", store.terminal.size()},
             {"ensemble_size", cfg.mcmc.smoother.ensemble_size},
             {"lag", cfg.mcmc.smoother.lag},
             {"sampler", cfg.mcmc.sampler == StateSampler::kExact ? "exact" : "enks"}};
  ctx.manifest(extra);
  out << "stored " << store.iteration.size() << " draws\n";
  return kExitOk;
}

fs::path fit_dir(const Context& ctx) { return ctx.opt.fit.empty() ? ctx.opt.out : ctx.opt.fit; }

int cmd_dic(Context& ctx, std::ostream& out) {
  const CsvTable traces = read_csv(fit_dir(ctx) / "traces.csv");
  const int cn = traces.column("name");
  const int cv = traces.column("value");
  std::vector<double> loglik;
  for (std::size_t r = 0; r < traces.rows.size(); ++r) {
    if (traces.get(r, cn) == "loglik_observed") loglik.push_back(traces.get_double(r, cv));
  }
  if (loglik.size() < 2) throw DataError("traces.csv holds fewer than two observed-data log-likelihood values");
  const DicResult r = dic(loglik);
  std::ostringstream s;
  {
    CsvWriter w(s, {"name", "value"});
    w.field("dic").field(r.dic).end_row();
    w.field("p_d").field(r.p_d).end_row();
    w.field("mean_deviance").field(r.mean_deviance).end_row();
    w.field("draws").field(static_cast<int>(loglik.size())).end_row();
  }
  ctx.save("dic.csv", s.str());
  ctx.manifest({{"draws", loglik.size()}});
  out << "DIC " << format_double(r.dic) << " p_D " << format_double(r.p_d) << "\n";
  return kExitOk;
}

std::vector<TerminalDraw> load_terminal(const Context& ctx, const ModelSpec& spec) {
  const fs::path dir = fit_dir(ctx);
  const CsvTable draws = read_csv(dir / "terminal_draws.csv");
  const CsvTable fields = read_csv(dir / "terminal_states.csv");
  const int n = ctx.config.grid.n;
  const int cells = spec.cells();

  std::vector<TerminalDraw> out;
  std::map<int, std::size_t> by_id;
  const int ci = draws.column("draw_id");
  const int cols[] = {draws.column("mu"), draws.column("mu_r"), draws.column("alpha"), draws.column("beta"),
                      draws.column("nu_x"), draws.column("nu_y")};
  for (std::size_t r = 0; r < draws.rows.size(); ++r) {
    TerminalDraw d;
    d.iteration = draws.get_int(r, ci);
    d.params = {draws.get_double(r, cols[0]), draws.get_double(r, cols[1]), draws.get_double(r, cols[2]),
                draws.get_double(r, cols[3])};
    d.velocity = {draws.get_double(r, cols[4]), draws.get_double(r, cols[5])};
    d.state = Eigen::VectorXd::Constant(spec.state_dim(), std::nan(""));
    if (!by_id.emplace(d.iteration, out.size()).second) {
      throw DataError(draws.source + ":" + std::to_string(draws.lines[r]) + ": duplicate draw_id");
    }
    out.push_back(std::move(d));
  }
  const int fi = fields.column("draw_id");
  const int fc = fields.column("component");
  const int fr = fields.column("row");
  const int fcol = fields.column("col");
  const int fv = fields.column("value");
  for (std::size_t r = 0; r < fields.rows.size(); ++r) {
    const std::string where = fields.source + ":" + std::to_string(fields.lines[r]);
    const auto it = by_id.find(fields.get_int(r, fi));
    if (it == by_id.end()) throw DataError(where + ": unknown draw_id");
    const int row = fields.get_int(r, fr);
    const int col = fields.get_int(r, fcol);
    if (row < 1 || row > n || col < 1 || col > n) throw DataError(where + ": cell outside grid");
    const std::string& comp = fields.get(r, fc);
    int offset = 0;
    if (comp == "source") {
      offset = cells;
    } else if (comp != "theta") {
      throw DataError(where + ": component must be theta or source");
    }
    out[it->second].state[offset + (row - 1) * n + (col - 1)] = fields.get_double(r, fv);
  }
  for (const TerminalDraw& d : out) {
    if (d.state.hasNaN()) throw DataError("terminal state for draw " + std::to_string(d.iteration) + " is incomplete");
  }
  return out;
}

int cmd_forecast(Context& ctx, std::ostream& out) {
  const RunConfig& cfg = ctx.config;
  const ModelSpec spec = model_spec(cfg, {});
  const std::vector<TerminalDraw> draws = load_terminal(ctx, spec);
  if (draws.size() < 2) throw DataError("forecasting needs at least two terminal draws");

  ForecastOptions options;
  options.horizon = cfg.forecast_horizon;
  options.threads = cfg.threads;
  options.keep_paths = cfg.forecast_write_draws;
  const ForecastSet fc = forecast(spec, draws, options, ctx.seed);

  const int n = cfg.grid.n;
  const int cells = spec.cells();
  std::ostringstream s;
  {
    CsvWriter w(s, {"draw_id", "horizon_step", "row", "col", "stat", "value"});
    const std::pair<const char*, const Eigen::MatrixXd*> stats[] = {
        {"mean", &fc.mean}, {"sd", &fc.sd}, {"pr_positive", &fc.pr_positive}, {"rate_mean_mm_h", &fc.rate_mean}};
    for (int h = 0; h < fc.steps(); ++h) {
      for (const auto& [name, m] : stats) {
        for (int c = 0; c < cells; ++c) {
          w.field("summary").field(h + 1).field(row_of(c, n)).field(col_of(c, n)).field(name).field((*m)(h, c));
          w.end_row();
        }
      }
    }
    for (std::size_t d = 0; d < fc.paths.size(); ++d) {
      for (int h = 0; h < fc.steps(); ++h) {
        const Eigen::VectorXd& x = fc.paths[d][static_cast<std::size_t>(h)];
        for (int c = 0; c < cells; ++c) {
          w.field(fc.draw_ids[d]).field(h + 1).field(row_of(c, n)).field(col_of(c, n)).field("theta").field(x[c]);
          w.end_row();
        }
      }
    }
  }
  ctx.save("forecast.csv", s.str());
  ctx.manifest({{"horizon", fc.horizon}, {"steps_per_obs", fc.steps_per_obs}, {"draws", fc.draws}});
  out << "forecast " << fc.steps() << " steps from " << fc.draws << " draws\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatio-temporal precipitation model: simulate, ingest, fit, dic, forecast"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string config, out_dir = ".", data, fit;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Config file (key = value)")->required();
    sub->add_option("--seed", seed, "Override rng.seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    return sub;
  };
  add_common(app.add_subcommand("simulate", "Simulate synthetic data and ground truth"));
  add_common(app.add_subcommand("ingest", "Grid polar radar and aggregate gauge records"));
  add_common(app.add_subcommand("fit", "Run the Gibbs ensemble Kalman smoother"))
      ->add_option("--data", data, "Directory with radar_grid.csv, gauges.csv, gauge_meta.csv");
  add_common(app.add_subcommand("dic", "Deviance information criterion from a fit"))
      ->add_option("--fit", fit, "Fit output directory (default: --out)");
  add_common(app.add_subcommand("forecast", "Forecast forward from a fit's terminal draws"))
      ->add_option("--fit", fit, "Fit output directory (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    Context ctx;
    ctx.opt.command = app.get_subcommands().front()->get_name();
    CLI::App* sub = app.get_subcommands().front();
    ctx.opt.config = config;
    ctx.opt.out = out_dir;
    ctx.opt.data = data;
    ctx.opt.fit = fit;
    ctx.config = load_config(ctx.opt.config);
    ctx.seed = sub->count("--seed") > 0 ? seed : ctx.config.seed;
    if (sub->count("--threads") > 0) ctx.config.threads = threads;
    fs::create_directories(ctx.opt.out);

    const std::string& c = ctx.opt.command;
    if (c == "simulate") return cmd_simulate(ctx);
    if (c == "ingest") return cmd_ingest(ctx);
    if (c == "fit") return cmd_fit(ctx, out);
    if (c == "dic") return cmd_dic(ctx, out);
    return cmd_forecast(ctx, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
}

}  // namespace stormfield
