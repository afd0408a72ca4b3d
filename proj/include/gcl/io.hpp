#pragma once

// On-disk artifacts.
//
//   checkpoint dir: params.bin         flat parameters, little-endian float64
//                   params.json        dims, block layout, seed, step
//                   trainer_state.json mitigator EMA targets, step, velocity
//                   config.json        resolved run configuration
//   dataset dir:    data.bin           class means then every image's pixels
//                   manifest.json      spec, seed, shapes, per-image labels
//                   labels.csv         id, meta labels, factors, image class
//
// Doubles in JSON are written with round-trip precision, so a checkpoint
// reload is bit-exact.

#include <filesystem>
#include <string>
#include <vector>

#include "gcl/config.hpp"
#include "gcl/encoder.hpp"
#include "gcl/probe.hpp"
#include "gcl/synthdata.hpp"
#include "gcl/trainer.hpp"
#include "json.hpp"

namespace gcl::io {

namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

void write_doubles(const fs::path& path, const Vec& values);
Vec read_doubles(const fs::path& path);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

struct Checkpoint {
  EncoderParams params;
  TrainerState state;
  RunConfig config;
};

void save_checkpoint(const fs::path& dir, const EncoderParams& params, const TrainerState& state,
                     const RunConfig& config);
Checkpoint load_checkpoint(const fs::path& dir);

nlohmann::json to_json(const MitigatorState& state);
MitigatorState mitigator_state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainerState& state);
TrainerState trainer_state_from_json(const nlohmann::json& j);

void save_dataset(const fs::path& dir, const Dataset& data);
Dataset load_dataset(const fs::path& dir);

nlohmann::json to_json(const MetricsRecord& record);
/// One line per pair: {step, pair, omega, omega_hat, class, fired}.
std::vector<nlohmann::json> conflict_lines(const ConflictReport& report);
nlohmann::json pool_line(std::uint64_t step, std::size_t objective, const PoolStats& stats);
nlohmann::json to_json(const ProbeScores& scores);

/// id, meta_0.., latent class, z_0..
void write_embeddings_csv(const fs::path& path, const Dataset& data,
                          const std::vector<Vec>& image_embeddings);

}  // namespace gcl::io
