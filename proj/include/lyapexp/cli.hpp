#pragma once

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lyapexp::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { ok = 0, usage = 1, validation = 2, numerical = 3 };

/// Runs one subcommand: coeffs, alpha, chain, lyap, fit, highdim, ising, selftest or
/// replay. `args` excludes the program name. Tables go to `out`, diagnostics to `err`.
/// With --out DIR, outputs are also written to DIR with a manifest.json listing the
/// resolved configuration and output checksums.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct OutputFile {
  std::string name;
  std::string contents;
};

/// Manifest of a run: resolved argv (without --out and --threads), configuration,
/// seed, version, wall time and FNV-1a checksums of the outputs.
nlohmann::ordered_json make_manifest(const std::string& subcommand, const std::vector<std::string>& argv,
                                     const nlohmann::ordered_json& config, std::size_t threads, double wall_seconds,
                                     const std::vector<OutputFile>& outputs);

struct ReplayResult {
  bool identical = true;
  std::vector<std::string> lines;   // one per output: "match name hash" / "MISMATCH name ..."
  int exit_code = ok;
};

/// Re-runs the manifest's argv into `out_dir` with `threads` workers and compares
/// checksums.
ReplayResult replay(const std::filesystem::path& manifest, const std::filesystem::path& out_dir, std::size_t threads);

}  // namespace lyapexp::cli
