#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vsgdfd/optimizers.hpp"
#include "vsgdfd/problems.hpp"

namespace vsgdfd {

enum class Command { RunGrid, GainSim, ReweightDemo, SingleRun };

std::string_view to_string(Command c);
Command parse_command(std::string_view name);

/// Everything needed to reproduce one run. Settings that do not apply to
/// `command` are carried along unchanged.
struct RunManifest {
  Command command = Command::RunGrid;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  std::size_t workers = 0;
  /// Image formats for heatmaps (svg, ppm); CSV is always written.
  std::vector<std::string> formats{"svg"};

  std::vector<LossKind> functions{LossKind::Quad, LossKind::Abs, LossKind::RectLin, LossKind::Gauss};
  std::vector<double> curvatures{0.1, 1.0, 10.0};
  std::vector<double> noise_vars{0.1, 1.0, 10.0};
  std::vector<Algorithm> algorithms{Algorithm::Sgd, Algorithm::AdaGrad, Algorithm::NaturalGrad,
                                    Algorithm::VsgdBbprop, Algorithm::VsgdFd};
  std::vector<std::size_t> minibatch_sizes{1, 10};
  /// Grid trials, reweighting draws, or gain repetitions depending on command.
  std::size_t trials = 100;
  std::size_t updates = 1024;
  double theta0 = 1.0;

  std::vector<double> pnz{1.0};
  std::vector<double> sigma{0.1, 10.0};
  std::size_t horizon = 10;

  double eta0 = 0.1;
  double gamma = 0.0;

  /// Throws UsageError naming the offending flag.
  void validate() const;
  bool operator==(const RunManifest&) const = default;
};

/// Defaults of one command (e.g. gain-sim uses n = 1..1000 and 1000 repetitions).
RunManifest default_manifest(Command command);

/// Invalid flag value, unknown flag or missing subcommand. `flag` is the
/// offending option including its dashes, empty when not attributable.
class UsageError : public std::runtime_error {
 public:
  UsageError(std::string flag, const std::string& message);
  const std::string& flag() const { return flag_; }

 private:
  std::string flag_;
};

/// --help was given; `what()` is the help text.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// argv[0] is the program name, argv[1] the subcommand. Values from
/// --config are applied first, explicit flags override them.
RunManifest parse_args(int argc, const char* const* argv);

/// key=value lines using the long flag names as keys.
std::string render_manifest(const RunManifest& manifest);
RunManifest parse_manifest(std::string_view text);

/// Runs the command and writes its outputs plus manifest.txt into
/// output_dir. Files are written with a .partial suffix and renamed once
/// everything succeeded. Returns the process exit status.
int execute(const RunManifest& manifest, std::ostream& log);

/// parse_args + execute with exit codes 0 (success), 1 (runtime failure)
/// and 2 (usage error).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vsgdfd
