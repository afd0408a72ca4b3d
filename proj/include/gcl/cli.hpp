#pragma once

// Experiment front end.
//
//   gcl pretrain --config F [--preset P] [--seed S] --out DIR
//   gcl eval --ckpt C [--data D] --out DIR
//   gcl sweep --grid F --out DIR
//   gcl dump-embeddings --ckpt C --out F.csv [--data D]
//   gcl gen-data --spec F --seed S --out DIR
//
// Exit status: 0 success, 1 internal failure, 2 usage or configuration
// error, 3 I/O error, 4 training aborted on a non-finite value.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gcl/config.hpp"

namespace gcl::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIoFailure = 3, kAborted = 4 };

/// A sweep grid file is a config file with an extra [sweep] section:
///
///   [sweep]
///   presets = multi-naive, multi-mitigated
///   seeds = 1, 2, 3, 4, 5
///   base = base.ini        # optional, relative to the grid file
///
/// All other sections override the base configuration for every cell.
struct SweepGrid {
  RunConfig base;
  std::vector<std::string> presets;
  std::vector<std::uint64_t> seeds;
};

SweepGrid load_sweep_grid(const std::filesystem::path& path);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace gcl::cli
