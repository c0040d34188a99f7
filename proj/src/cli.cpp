#include "vsgdfd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "vsgdfd/aggregation.hpp"
#include "vsgdfd/gain.hpp"
#include "vsgdfd/harness.hpp"
#include "vsgdfd/heatmap.hpp"
#include "vsgdfd/text.hpp"

namespace vsgdfd {

namespace fs = std::filesystem;

namespace {

constexpr Command kCommands[] = {Command::RunGrid, Command::GainSim, Command::ReweightDemo, Command::SingleRun};

std::string flag(std::string_view key) { return "--" + std::string(key); }

template <class T, class Parse>
std::vector<T> parse_list(std::string_view value, Parse parse) {
  std::vector<T> out;
  for (const auto& item : text::split(value, ',')) {
    const auto t = text::trim(item);
    if (!t.empty()) out.push_back(parse(t));
  }
  return out;
}

// Every manifest setting, keyed by its long flag name.
void apply_setting(RunManifest& m, const std::string& key, const std::string& value) {
  try {
    if (key == "command") {
      m.command = parse_command(text::trim(value));
    } else if (key == "seed") {
      m.master_seed = text::parse_u64(value, key);
    } else if (key == "out") {
      m.output_dir = std::string(text::trim(value));
    } else if (key == "workers") {
      m.workers = static_cast<std::size_t>(text::parse_u64(value, key));
    } else if (key == "format") {
      m.formats = parse_list<std::string>(value, [](std::string_view s) { return std::string(s); });
    } else if (key == "functions") {
      m.functions = parse_list<LossKind>(value, parse_loss_kind);
    } else if (key == "curvatures") {
      m.curvatures = text::parse_double_list(value, key);
    } else if (key == "noise-vars") {
      m.noise_vars = text::parse_double_list(value, key);
    } else if (key == "algos") {
      m.algorithms = parse_list<Algorithm>(value, parse_algorithm);
    } else if (key == "n") {
      m.minibatch_sizes = text::parse_size_list(value, key);
    } else if (key == "trials") {
      m.trials = static_cast<std::size_t>(text::parse_u64(value, key));
    } else if (key == "updates") {
      m.updates = static_cast<std::size_t>(text::parse_u64(value, key));
    } else if (key == "theta0") {
      m.theta0 = text::parse_double(value, key);
    } else if (key == "pnz") {
      m.pnz = text::parse_double_list(value, key);
    } else if (key == "sigma") {
      m.sigma = text::parse_double_list(value, key);
    } else if (key == "horizon") {
      m.horizon = static_cast<std::size_t>(text::parse_u64(value, key));
    } else if (key == "eta0") {
      m.eta0 = text::parse_double(value, key);
    } else if (key == "gamma") {
      m.gamma = text::parse_double(value, key);
    } else {
      throw UsageError(flag(key), "unknown setting '" + key + "'");
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(flag(key), flag(key) + ": " + e.what());
  }
}

void require(bool ok, std::string_view key, const std::string& message) {
  if (!ok) throw UsageError(flag(key), flag(key) + ": " + message);
}

bool all_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0 && std::isfinite(x); });
}

struct FlagSpec {
  const char* name;
  const char* help;
};

// Flags accepted by each subcommand besides --seed, --out, --workers and --config.
std::vector<FlagSpec> command_flags(Command c) {
  const FlagSpec functions{"functions", "loss families: quad,abs,rectlin,gauss"};
  const FlagSpec curvatures{"curvatures", "curvature scales A"};
  const FlagSpec noise{"noise-vars", "noise variances"};
  const FlagSpec algos{"algos", "sgd,adagrad,natural,vsgd,vsgd-fd"};
  const FlagSpec updates{"updates", "updates per trial"};
  const FlagSpec theta0{"theta0", "initial parameter"};
  switch (c) {
    case Command::RunGrid:
      return {functions, curvatures, noise, algos, {"n", "minibatch sizes"}, {"trials", "trials per cell"},
              updates, theta0, {"format", "heatmap formats: csv,svg,ppm"}};
    case Command::GainSim:
      return {{"n", "minibatch sizes"}, {"trials", "repetitions per point"}, {"pnz", "non-zero probabilities"},
              {"sigma", "noise standard deviations"}, {"horizon", "updates per trajectory"}};
    case Command::ReweightDemo:
      return {{"n", "samples per draw"}, {"trials", "number of draws"}};
    case Command::SingleRun:
      return {functions, curvatures, noise, algos, {"n", "minibatch size"}, updates, theta0,
              {"eta0", "baseline learning rate"}, {"gamma", "SGD decay exponent"}};
  }
  return {};
}

std::string command_description(Command c) {
  switch (c) {
    case Command::RunGrid: return "benchmark grid with trials.csv, summary.csv and heatmaps";
    case Command::GainSim: return "parallelization gain of the sparse noisy quadratic (gains.csv)";
    case Command::ReweightDemo: return "average vs orthogonally reweighted vs hard-clustered gradients";
    case Command::SingleRun: return "one trajectory with per-checkpoint diagnostics";
  }
  return {};
}

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path final_path = dir_ / name;
    fs::create_directories(final_path.parent_path());
    fs::path partial = final_path;
    partial += ".partial";
    std::ofstream os(partial, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + partial.string());
    body(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + partial.string());
    pending_.emplace_back(partial, final_path);
  }

  void commit() {
    for (const auto& [from, to] : pending_) fs::rename(from, to);
    pending_.clear();
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, fs::path>> pending_;
};

bool wants(const RunManifest& m, std::string_view format) {
  return std::find(m.formats.begin(), m.formats.end(), format) != m.formats.end();
}

std::vector<OptimizerConfig> selected_rows(const RunManifest& m) {
  std::vector<OptimizerConfig> rows;
  for (const auto& row : default_algorithm_rows(m.minibatch_sizes)) {
    if (std::find(m.algorithms.begin(), m.algorithms.end(), row.algorithm) != m.algorithms.end()) {
      rows.push_back(row);
    }
  }
  return rows;
}

void run_grid_command(const RunManifest& m, OutputDir& out, std::ostream& log) {
  ExperimentGrid grid;
  grid.functions = m.functions;
  grid.curvatures = m.curvatures;
  grid.noise_vars = m.noise_vars;
  grid.algorithms = selected_rows(m);
  grid.trials = m.trials;
  grid.updates = m.updates;
  grid.theta0 = m.theta0;
  grid.master_seed = m.master_seed;
  grid.workers = m.workers;

  log << "run-grid: " << grid.cases().size() << " cases x " << grid.algorithms.size() << " rows x " << grid.trials
      << " trials x " << grid.updates << " updates\n";
  const auto start = std::chrono::steady_clock::now();
  const auto result = run_grid(grid);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log << "run-grid: " << result.total_steps << " steps in " << text::format_double(std::round(secs * 10) / 10)
      << " s\n";

  out.write("trials.csv", [&](std::ostream& os) { write_trials_csv(os, result); });
  out.write("summary.csv", [&](std::ostream& os) {
    os << "case_id,algo_id,initial_loss,median_final_loss,diverged_trials\n";
    for (std::size_t c = 0; c < result.cases.size(); ++c) {
      for (std::size_t r = 0; r < grid.algorithms.size(); ++r) {
        std::size_t diverged = 0;
        for (std::size_t t = 0; t < grid.trials; ++t) diverged += result.at(c, r, t).diverged;
        os << result.cases[c].id() << ',' << grid.algorithms[r].label() << ','
           << text::format_double(result.at(c, r, 0).initial_loss()) << ','
           << text::format_double(median(result.final_losses(c, r))) << ',' << diverged << '\n';
      }
    }
  });

  const auto heat = heatmap_encode(result);
  out.write("heatmap.csv", [&](std::ostream& os) { write_heatmap_csv(os, result, heat); });
  for (auto format : {ImageFormat::Svg, ImageFormat::Ppm}) {
    if (!wants(m, format == ImageFormat::Svg ? "svg" : "ppm")) continue;
    for (auto function : grid.functions) {
      for (std::size_t r = 0; r < grid.algorithms.size(); ++r) {
        out.write("heatmaps/" + heatmap_filename(function, grid.algorithms[r], format), [&](std::ostream& os) {
          if (format == ImageFormat::Svg) {
            write_function_svg(os, result, heat, function, r);
          } else {
            write_function_ppm(os, result, heat, function, r);
          }
        });
      }
    }
  }
}

void gain_command(const RunManifest& m, OutputDir& out, std::ostream& log) {
  std::vector<GainResult> results;
  for (double sigma : m.sigma) {
    for (double p : m.pnz) {
      GainConfig g;
      g.sigma = sigma;
      g.p_nz = p;
      g.minibatch_sizes = m.minibatch_sizes;
      g.repetitions = m.trials;
      g.horizon = m.horizon;
      g.master_seed = m.master_seed;
      g.workers = m.workers;
      log << "gain-sim: sigma=" << text::format_double(sigma) << " p_nz=" << text::format_double(p) << '\n';
      results.push_back(simulate_parallel_gain(g));
    }
  }
  out.write("gains.csv", [&](std::ostream& os) { write_gains_csv(os, results); });
}

void reweight_command(const RunManifest& m, OutputDir& out, std::ostream& log) {
  const auto problem = default_two_cluster_problem();
  const std::size_t n = m.minibatch_sizes.front();
  std::vector<ReweightDemo> draws;
  for (std::size_t k = 0; k < m.trials; ++k) {
    Rng rng(derive_seed(m.master_seed, 0, 0, k));
    draws.push_back(demo_reweighting(problem, n, rng));
  }
  std::size_t wins = 0;
  out.write("reweight.csv", [&](std::ostream& os) { write_reweight_csv(os, draws.front()); });
  out.write("reweight_draws.csv", [&](std::ostream& os) {
    os << "draw,cluster1,cluster2,cos_average_oracle,cos_reweighted_oracle\n";
    for (std::size_t k = 0; k < draws.size(); ++k) {
      const auto& d = draws[k];
      const double ca = cosine(d.average, d.oracle);
      const double cr = cosine(d.reweighted, d.oracle);
      wins += cr > ca;
      os << k << ',' << d.cluster_counts[0] << ',' << d.cluster_counts[1] << ',' << text::format_double(ca) << ','
         << text::format_double(cr) << '\n';
    }
  });
  log << "reweight-demo: reweighted closer to the oracle in " << wins << " of " << draws.size() << " draws\n";
}

void single_run_command(const RunManifest& m, OutputDir& out, std::ostream& log) {
  const TestCase test_case{m.functions.front(), m.curvatures.front(), m.noise_vars.front()};
  OptimizerConfig config;
  config.algorithm = m.algorithms.front();
  config.minibatch_n = m.minibatch_sizes.front();
  config.eta0 = m.eta0;
  config.gamma = m.gamma;
  const auto problem = test_case.problem();
  const auto checkpoints = checkpoint_iterations(m.updates);

  Rng rng(derive_seed(m.master_seed, 0, 0, 0));
  std::vector<double> theta{m.theta0};
  Optimizer opt(config, problem);
  opt.initialize(theta, rng);

  std::ostringstream trajectory;
  trajectory << "iteration,theta,loss\n";
  const auto emit = [&](std::size_t t) {
    trajectory << t << ',' << text::format_double(theta[0]) << ','
               << text::format_double(expected_loss(problem, theta)) << '\n';
  };
  emit(0);
  DiagnosticsLog diagnostics;
  std::size_t next = 1;
  bool diverged = false;
  for (std::size_t t = 1; t <= m.updates && !diverged; ++t) {
    const auto diag = opt.step(theta, rng);
    const bool checkpoint = t == checkpoints[next];
    diagnostics.record(t, diag, checkpoint);
    diverged = !std::isfinite(theta[0]);
    if (checkpoint) {
      emit(t);
      ++next;
    }
  }
  log << "single-run: " << test_case.id() << ' ' << config.label() << " final theta "
      << text::format_double(theta[0]) << (diverged ? " (diverged)" : "") << '\n';
  out.write("trajectory.csv", [&](std::ostream& os) { os << trajectory.str(); });
  out.write("diagnostics.csv", [&](std::ostream& os) { diagnostics.write_csv(os); });
}

}  // namespace

std::string_view to_string(Command c) {
  switch (c) {
    case Command::RunGrid: return "run-grid";
    case Command::GainSim: return "gain-sim";
    case Command::ReweightDemo: return "reweight-demo";
    case Command::SingleRun: return "single-run";
  }
  return "?";
}

Command parse_command(std::string_view name) {
  for (auto c : kCommands) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown command '" + std::string(name) + "'");
}

UsageError::UsageError(std::string flag, const std::string& message)
    : std::runtime_error(message), flag_(std::move(flag)) {}

RunManifest default_manifest(Command command) {
  RunManifest m;
  m.command = command;
  switch (command) {
    case Command::RunGrid: break;
    case Command::GainSim:
      m.minibatch_sizes = {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
      m.trials = 1000;
      break;
    case Command::ReweightDemo:
      m.minibatch_sizes = {20};
      m.trials = 100;
      break;
    case Command::SingleRun:
      m.functions = {LossKind::Quad};
      m.curvatures = {1.0};
      m.noise_vars = {1.0};
      m.algorithms = {Algorithm::VsgdFd};
      m.minibatch_sizes = {1};
      m.trials = 1;
      break;
  }
  return m;
}

void RunManifest::validate() const {
  require(!output_dir.empty(), "out", "must not be empty");
  for (const auto& f : formats) require(f == "csv" || f == "svg" || f == "ppm", "format", "unknown format '" + f + "'");
  require(!minibatch_sizes.empty(), "n", "needs at least one value");
  for (auto n : minibatch_sizes) require(n > 0, "n", "values must be positive");
  require(trials > 0, "trials", "must be positive");

  const bool grid_like = command == Command::RunGrid || command == Command::SingleRun;
  if (grid_like) {
    require(!functions.empty(), "functions", "needs at least one value");
    for (auto f : functions) {
      require(f != LossKind::SparseQuad && f != LossKind::TwoCluster, "functions",
              "only quad, abs, rectlin and gauss are supported");
    }
    require(!curvatures.empty() && all_positive(curvatures), "curvatures", "values must be positive");
    require(!noise_vars.empty() && all_positive(noise_vars), "noise-vars", "values must be positive");
    require(!algorithms.empty(), "algos", "needs at least one value");
    require(updates > 0, "updates", "must be positive");
    require(std::isfinite(theta0), "theta0", "must be finite");
  }
  if (command == Command::SingleRun) {
    require(functions.size() == 1, "functions", "single-run takes exactly one value");
    require(curvatures.size() == 1, "curvatures", "single-run takes exactly one value");
    require(noise_vars.size() == 1, "noise-vars", "single-run takes exactly one value");
    require(algorithms.size() == 1, "algos", "single-run takes exactly one value");
    require(minibatch_sizes.size() == 1, "n", "single-run takes exactly one value");
    require(eta0 > 0.0 && std::isfinite(eta0), "eta0", "must be positive");
    require(gamma >= 0.0 && std::isfinite(gamma), "gamma", "must be non-negative");
  }
  if (command == Command::GainSim) {
    require(trials >= 2, "trials", "needs at least 2 repetitions");
    require(!pnz.empty(), "pnz", "needs at least one value");
    for (double p : pnz) require(p > 0.0 && p <= 1.0, "pnz", "values must lie in (0, 1]");
    require(!sigma.empty() && all_positive(sigma), "sigma", "values must be positive");
    require(horizon > 0, "horizon", "must be positive");
  }
  if (command == Command::ReweightDemo) require(minibatch_sizes.size() == 1, "n", "takes exactly one value");
}

RunManifest parse_args(int argc, const char* const* argv) {
  CLI::App app{"vSGD-fd optimizer experiments"};
  app.require_subcommand(1);

  struct Sub {
    Command command;
    CLI::App* app;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config;
  };
  std::vector<Sub> subs;
  subs.reserve(std::size(kCommands));
  for (auto c : kCommands) {
    auto& s = subs.emplace_back();
    s.command = c;
    s.app = app.add_subcommand(std::string(to_string(c)), command_description(c));
  }
  for (auto& s : subs) {
    std::vector<FlagSpec> flags{{"seed", "master seed"}, {"out", "output directory"}, {"workers", "worker threads, 0 = all cores"}};
    const auto extra = command_flags(s.command);
    flags.insert(flags.end(), extra.begin(), extra.end());
    for (const auto& f : flags) s.options[f.name] = s.app->add_option(flag(f.name), s.values[f.name], f.help);
    s.app->add_option("--config", s.config, "key=value file with defaults for any flag");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError("", e.what());
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    if (s.app->get_help_ptr() && s.app->get_help_ptr()->count() > 0) throw HelpRequested(s.app->help());
    RunManifest m = default_manifest(s.command);
    if (!s.config.empty()) {
      std::ifstream in(s.config);
      if (!in) throw UsageError("--config", "--config: cannot read '" + s.config + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      std::map<std::string, std::string> kv;
      try {
        kv = text::parse_key_values(buf.str());
      } catch (const std::exception& e) {
        throw UsageError("--config", std::string("--config: ") + e.what());
      }
      for (const auto& [key, value] : kv) apply_setting(m, key, value);
      if (m.command != s.command) throw UsageError("--config", "--config: file is for a different command");
    }
    for (const auto& [name, option] : s.options) {
      if (option->count() > 0) apply_setting(m, name, s.values[name]);
    }
    m.validate();
    return m;
  }
  throw UsageError("", "a subcommand is required");
}

std::string render_manifest(const RunManifest& m) {
  std::vector<std::string> functions;
  for (auto f : m.functions) functions.emplace_back(to_string(f));
  std::vector<std::string> algos;
  for (auto a : m.algorithms) algos.emplace_back(to_string(a));
  std::vector<std::string> ns;
  for (auto n : m.minibatch_sizes) ns.push_back(std::to_string(n));

  std::ostringstream os;
  os << "command=" << to_string(m.command) << '\n'
     << "seed=" << m.master_seed << '\n'
     << "out=" << m.output_dir << '\n'
     << "workers=" << m.workers << '\n'
     << "format=" << text::join(m.formats) << '\n'
     << "functions=" << text::join(functions) << '\n'
     << "curvatures=" << text::join_doubles(m.curvatures) << '\n'
     << "noise-vars=" << text::join_doubles(m.noise_vars) << '\n'
     << "algos=" << text::join(algos) << '\n'
     << "n=" << text::join(ns) << '\n'
     << "trials=" << m.trials << '\n'
     << "updates=" << m.updates << '\n'
     << "theta0=" << text::format_double(m.theta0) << '\n'
     << "pnz=" << text::join_doubles(m.pnz) << '\n'
     << "sigma=" << text::join_doubles(m.sigma) << '\n'
     << "horizon=" << m.horizon << '\n'
     << "eta0=" << text::format_double(m.eta0) << '\n'
     << "gamma=" << text::format_double(m.gamma) << '\n';
  return os.str();
}

RunManifest parse_manifest(std::string_view text_in) {
  std::map<std::string, std::string> kv;
  try {
    kv = text::parse_key_values(text_in);
  } catch (const std::exception& e) {
    throw UsageError("", std::string("manifest: ") + e.what());
  }
  RunManifest m;
  if (const auto it = kv.find("command"); it != kv.end()) m = default_manifest(parse_command(text::trim(it->second)));
  for (const auto& [key, value] : kv) apply_setting(m, key, value);
  m.validate();
  return m;
}

int execute(const RunManifest& manifest, std::ostream& log) {
  try {
    manifest.validate();
    OutputDir out(manifest.output_dir);
    switch (manifest.command) {
      case Command::RunGrid: run_grid_command(manifest, out, log); break;
      case Command::GainSim: gain_command(manifest, out, log); break;
      case Command::ReweightDemo: reweight_command(manifest, out, log); break;
      case Command::SingleRun: single_run_command(manifest, out, log); break;
    }
    out.write("manifest.txt", [&](std::ostream& os) { os << render_manifest(manifest); });
    out.commit();
    log << to_string(manifest.command) << ": outputs in " << manifest.output_dir << '\n';
    return 0;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunManifest manifest;
  try {
    manifest = parse_args(argc, argv);
  } catch (const HelpRequested& h) {
    out << h.what();
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }
  return execute(manifest, err);
}

}  // namespace vsgdfd
