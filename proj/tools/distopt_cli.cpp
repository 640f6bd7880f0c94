// Command-line experiment runner.
//
//   distopt-cli run|sweep|drops <config.json | preset-name> [options]
//
// Exit codes: 0 success, 2 config error, 3 some trial diverged, 4 incompatible
// algorithm/topology pairing, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "distopt/distopt.h"

namespace fs = std::filesystem;

namespace {

// A bare name such as "case-study" refers to a checked-in preset.
std::string ResolveConfig(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  if (arg.find('/') != std::string::npos || fs::path(arg).has_extension()) return arg;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("DISTOPT_PRESET_DIR")) dirs.emplace_back(env);
  dirs.emplace_back("presets");
#ifdef DISTOPT_PRESET_DIR
  dirs.emplace_back(DISTOPT_PRESET_DIR);
#endif
  for (const auto& d : dirs) {
    const fs::path p = d / (arg + ".json");
    if (fs::exists(p)) return p.string();
  }
  return arg;
}

int ExitFor(distopt_status s) {
  switch (s) {
    case DISTOPT_ERR_CONFIG:
    case DISTOPT_ERR_INVALID_ARGUMENT:
      return 2;
    case DISTOPT_ERR_INCOMPATIBLE:
      return 4;
    default:
      return 1;
  }
}

int Report(distopt_status s) {
  std::fprintf(stderr, "distopt-cli: %s: %s\n", distopt_status_string(s), distopt_last_error());
  return ExitFor(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed optimization experiments on a simulated mesh network"};
  app.set_version_flag("--version", std::string(distopt_version()));
  app.require_subcommand(1);

  std::string config;
  int seed_count = 0;
  long long max_iters = -1;
  std::string out;
  bool allow_unsupported = false;
  long long payload_bytes = 0;
  int workers = -1;
  bool quiet = false;

  for (const char* mode : {"run", "sweep", "drops"}) {
    const char* help = std::string(mode) == "run"     ? "run each algorithm per seed, write traces and a summary"
                       : std::string(mode) == "sweep" ? "parameter sensitivity grid per algorithm"
                                                      : "robustness to dropped edges";
    CLI::App* sub = app.add_subcommand(mode, help);
    sub->add_option("config", config, "config file or preset name")->required();
    sub->add_option("--seed-count", seed_count, "use this many consecutive seeds")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-iters", max_iters, "iteration limit per run")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out, "output path prefix");
    sub->add_flag("--allow-unsupported", allow_unsupported,
                  "run pairings outside the supported algorithm/topology matrix");
    sub->add_option("--payload-bytes", payload_bytes, "enable packet accounting with this payload")
        ->check(CLI::PositiveNumber);
    sub->add_option("--workers", workers, "worker threads per run (0 = all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("-q,--quiet", quiet, "suppress the result table");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string mode = app.get_subcommands().front()->get_name();

  distopt_experiment* exp = nullptr;
  distopt_status s = distopt_experiment_load(ResolveConfig(config).c_str(), &exp);
  // An unreadable config file is a config error too.
  if (s == DISTOPT_ERR_IO) return Report(s), 2;
  if (s != DISTOPT_OK) return Report(s);

  distopt_overrides ov;
  distopt_overrides_init(&ov);
  ov.seed_count = seed_count;
  ov.max_iters = max_iters;
  ov.output = out.empty() ? nullptr : out.c_str();
  ov.allow_unsupported = allow_unsupported ? 1 : 0;
  ov.payload_bytes = payload_bytes;
  ov.workers = workers;

  int exit_code = 0;
  if ((s = distopt_experiment_apply_overrides(exp, &ov)) != DISTOPT_OK ||
      (s = distopt_experiment_validate(exp, mode.c_str())) != DISTOPT_OK ||
      (s = distopt_experiment_execute(exp, mode.c_str(), &exit_code)) != DISTOPT_OK) {
    distopt_experiment_destroy(exp);
    return Report(s);
  }
  if (!quiet) std::fputs(distopt_experiment_report(exp), stdout);
  const size_t n = distopt_experiment_file_count(exp);
  if (n > 0) std::fprintf(stderr, "wrote %zu files; summary: %s\n", n, distopt_experiment_file(exp, n - 1));
  if (exit_code == 3) std::fprintf(stderr, "distopt-cli: at least one trial diverged\n");
  distopt_experiment_destroy(exp);
  return exit_code;
}
