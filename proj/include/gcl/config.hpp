#pragma once

// Experiment configuration files and presets.
//
// Files are plain text, one `key = value` per line, grouped under
// `[section]` headers; `#` and `;` start comments. Sections and keys:
//
//   [data]    height width feature_dim meta_labels factor_a_classes
//             factor_b_classes contradiction pixel_noise nuisance_scale
//             mean_range min_mean_distance count
//   [model]   hidden img_proj pix_proj
//   [augment] noise_sigma mask
//   [train]   steps batch_sources lr tau beta pool_fraction momentum
//             anchors_per_pair partners_per_anchor mitigator filter
//             pixel_loss per_layer_mitigation score_layers meta_labels
//             single_label seed
//   [probe]   folds l2 iterations step_size kmeans_restarts
//
// `[train] seed` is the run's root seed and also seeds the probe.
// Meta-label indices are 0-based; `meta_labels = none` trains with co-view
// positives only. Booleans accept true/false/1/0/on/off.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gcl/probe.hpp"
#include "gcl/trainer.hpp"
#include "json.hpp"

namespace gcl {

struct RunConfig {
  TrainConfig train;
  ProbeConfig probe{.seed = 1};  // follows train.seed, see set_seed
  std::size_t single_label = 0;  // meta label used by the single-meta preset
  std::string preset;            // applied preset, empty if none
};

/// Sets the root seed of a run; the probe's fold and k-means draws use it too.
inline void set_seed(RunConfig& config, std::uint64_t seed) {
  config.train.seed = seed;
  config.probe.seed = seed;
}

using IniSections = std::map<std::string, std::map<std::string, std::string>>;

/// Throws ConfigError with the offending line number on malformed input.
IniSections parse_ini(std::string_view text);

/// Applies every key of `ini` onto `config`. Unknown sections/keys are errors.
void apply_ini(RunConfig& config, const IniSections& ini);

RunConfig load_run_config(const std::string& path);

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"vanilla",  "single-meta", "multi-naive",
                                              "multi-mitigated", "+pixcl", "+gradfilter",
                                              "full"};
  return names;
}

/// Applies a named preset. "single-meta@K" selects meta label K.
void apply_preset(RunConfig& config, std::string_view name);

/// Fully resolved configuration, sufficient to reproduce a run.
nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

}  // namespace gcl
