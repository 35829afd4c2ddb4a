// dfts-otfs: PAPR / BER experiments for uplink DFT-spread OTFS.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime or numerical
// error, 3 selftest failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfts_otfs/dfts_otfs.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitSelftest = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dfts_otfs::FileError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& csv, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << csv;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dfts_otfs::FileError("cannot write output file: " + path);
  out << csv;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dfts_otfs;

  CLI::App app{"DFT-spread OTFS PAPR and BER experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_path;
  int frames = 0;
  int threads = 0;
  std::vector<std::string> overrides;
  bool corrupt_norm = false;

  auto* o_config = app.add_option("--config", config_path, "Experiment config file")
                       ->envname("DFTS_OTFS_CONFIG");
  auto* o_seed = app.add_option("--seed", seed, "Master seed (montecarlo.seed)")
                     ->envname("DFTS_OTFS_SEED");
  auto* o_out = app.add_option("--out", out_path, "Output CSV path (default: stdout)")
                    ->envname("DFTS_OTFS_OUT");
  auto* o_frames = app.add_option("--frames", frames, "Monte Carlo frames (montecarlo.frames)")
                       ->envname("DFTS_OTFS_FRAMES");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads, 0 = all cores")
                        ->envname("DFTS_OTFS_THREADS");
  app.add_option("--set", overrides, "Override a config key: --set key=value (repeatable)");

  auto* ccdf = app.add_subcommand("ccdf", "CCDF of per-frame PAPR");
  auto* bounds = app.add_subcommand("bounds", "Analytic PAPR upper bounds");
  auto* ber = app.add_subcommand("ber", "BER versus SNR over the configured channel");
  auto* g0 = app.add_subcommand("g0", "RRC peak factor g0, numeric and closed form");
  auto* selftest = app.add_subcommand("selftest", "Fast invariant checks");
  selftest->add_flag("--corrupt-dft-norm", corrupt_norm,
                     "Negative control: transmit with an unnormalized IDFT")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (selftest->parsed()) {
    const auto checks = run_selftest({corrupt_norm});
    bool ok = true;
    for (const auto& c : checks) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
      ok = ok && c.passed;
    }
    std::cout << (ok ? "selftest passed" : "selftest FAILED") << "\n";
    return ok ? 0 : kExitSelftest;
  }

  Command command = Command::ccdf;
  if (bounds->parsed()) command = Command::bounds;
  if (ber->parsed()) command = Command::ber;
  if (g0->parsed()) command = Command::g0;
  (void)ccdf;

  ResolvedConfig cfg;
  try {
    ExperimentConfig raw;
    if (*o_config) raw = ExperimentConfig::parse(read_file(config_path));
    for (const auto& o : overrides) raw.set_assignment(o);
    if (*o_seed) raw.set("montecarlo.seed", std::to_string(seed));
    if (*o_frames) raw.set("montecarlo.frames", std::to_string(frames));
    if (*o_threads) raw.set("montecarlo.threads", std::to_string(threads));
    if (*o_out) raw.set("output", out_path);
    cfg = resolve(raw, command);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FileError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    RunResult result;
    switch (command) {
      case Command::ccdf: result = run_ccdf(cfg); break;
      case Command::bounds: result = run_bounds(cfg); break;
      case Command::ber: result = run_ber(cfg); break;
      case Command::g0: result = run_g0(cfg); break;
      case Command::selftest: break;
    }
    emit(result.csv, cfg.output);
    if (!result.summary.empty()) std::cerr << result.summary;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FileError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
