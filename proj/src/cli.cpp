#include "gcl/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "gcl/errors.hpp"
#include "gcl/io.hpp"
#include "gcl/probe.hpp"
#include "gcl/trainer.hpp"

namespace gcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

json run_manifest(const std::string& command, const RunConfig& config) {
  return {{"tool", "gcl"}, {"version", kToolVersion}, {"command", command}, {"config", to_json(config)}};
}

// Line-buffered JSON-lines sink.
class JsonLines {
 public:
  explicit JsonLines(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  void write(const json& line) {
    out_ << line.dump() << '\n';
    if (!out_) throw IoError("write failed for " + path_.string());
  }
  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
    out_.close();
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

struct PretrainOutcome {
  TrainResult result;
  bool aborted = false;
  std::string abort_reason;
};

// Trains and streams metrics/conflicts/pools into `dir`; checkpoint goes to dir/checkpoint.
PretrainOutcome pretrain_into(const fs::path& dir, const RunConfig& config,
                              std::optional<std::pair<EncoderParams, TrainerState>> resume,
                              std::uint64_t stop_after) {
  io::ensure_dir(dir);
  const std::uint64_t start = resume ? resume->second.step : 0;
  json manifest = run_manifest("pretrain", config);
  manifest["resumed_at_step"] = resume ? json(start) : json(nullptr);
  manifest["stop_after"] = stop_after > 0 ? json(stop_after) : json(nullptr);
  io::write_json(dir / "manifest.json", manifest);

  const Dataset data = make_dataset(config.train);
  JsonLines metrics(dir / "metrics.jsonl");
  JsonLines conflicts(dir / "conflicts.jsonl");
  JsonLines pools(dir / "pools.jsonl");

  // Keep the latest state so an abort still leaves a consistent checkpoint.
  PretrainOutcome outcome;
  try {
    outcome.result = train(
        config.train, data, std::move(resume),
        [&](const StepOutput& step) {
          metrics.write(io::to_json(step.metrics));
          for (const auto& line : io::conflict_lines(step.conflicts)) conflicts.write(line);
          for (std::size_t k = 0; k < step.pools.size(); ++k) {
            if (step.pools[k].anchors > 0) pools.write(io::pool_line(step.metrics.step, k, step.pools[k]));
          }
        },
        stop_after);
  } catch (const TrainingAborted& e) {
    json line = io::to_json(e.record());
    line["aborted"] = e.what();
    metrics.write(line);
    outcome.aborted = true;
    outcome.abort_reason = e.what();
  }
  metrics.close();
  conflicts.close();
  pools.close();
  if (!outcome.aborted) {
    io::save_checkpoint(dir / "checkpoint", outcome.result.params, outcome.result.state, config);
  }
  return outcome;
}

int cmd_pretrain(const std::string& config_path, const std::string& preset,
                 const std::optional<std::uint64_t>& seed, const std::optional<std::uint64_t>& steps,
                 const std::string& resume_path, std::uint64_t stop_after, bool with_probe,
                 const fs::path& out_dir, std::ostream& out) {
  RunConfig config;
  std::optional<std::pair<EncoderParams, TrainerState>> resume;
  if (!resume_path.empty()) {
    if (!config_path.empty() || !preset.empty() || seed || steps) {
      throw ConfigError("--resume restores the checkpoint's configuration; drop --config/--preset/--seed/--steps");
    }
    io::Checkpoint ck = io::load_checkpoint(resume_path);
    config = ck.config;
    resume.emplace(std::move(ck.params), std::move(ck.state));
  } else {
    if (!config_path.empty()) config = load_run_config(config_path);
    if (!preset.empty()) apply_preset(config, preset);
    if (seed) set_seed(config, *seed);
    if (steps) config.train.steps = *steps;
  }
  config.train.validate();

  const PretrainOutcome outcome = pretrain_into(out_dir, config, std::move(resume), stop_after);
  if (outcome.aborted) {
    out << "training aborted: " << outcome.abort_reason << "\n";
    return kAborted;
  }
  if (with_probe) {
    const Dataset data = make_dataset(config.train);
    io::write_json(out_dir / "probe.json", io::to_json(probe(outcome.result.params, data, config.probe)));
  }
  const auto& history = outcome.result.history;
  out << "trained to step " << outcome.result.state.step;
  if (!history.empty()) out << ", final loss " << io::format_double(history.back().total_loss);
  out << "\n";
  return kOk;
}

Dataset dataset_for(const io::Checkpoint& ck, const std::string& data_path) {
  Dataset data = data_path.empty() ? make_dataset(ck.config.train) : io::load_dataset(data_path);
  if (data.spec.feature_dim != ck.params.dims().input) {
    throw ConfigError("dataset feature_dim " + std::to_string(data.spec.feature_dim) +
                      " does not match encoder input " + std::to_string(ck.params.dims().input));
  }
  return data;
}

int cmd_eval(const std::string& ckpt, const std::string& data_path, const fs::path& out_dir,
             std::ostream& out) {
  const io::Checkpoint ck = io::load_checkpoint(ckpt);
  const Dataset data = dataset_for(ck, data_path);
  const ProbeScores scores = probe(ck.params, data, ck.config.probe);
  io::ensure_dir(out_dir);
  json manifest = run_manifest("eval", ck.config);
  manifest["checkpoint_step"] = ck.state.step;
  manifest["dataset"] = {{"seed", data.seed}, {"count", data.size()}, {"spec", to_json(data.spec)}};
  io::write_json(out_dir / "manifest.json", manifest);
  io::write_json(out_dir / "probe.json", io::to_json(scores));
  out << "linear " << io::format_double(scores.linear_accuracy) << ", pixel "
      << io::format_double(scores.pixel_accuracy) << ", nmi " << io::format_double(scores.nmi) << "\n";
  return kOk;
}

int cmd_dump(const std::string& ckpt, const std::string& data_path, const fs::path& out_file,
             std::ostream& out) {
  const io::Checkpoint ck = io::load_checkpoint(ckpt);
  const Dataset data = dataset_for(ck, data_path);
  const Embeddings emb = embed(ck.params, data);
  if (out_file.has_parent_path()) io::ensure_dir(out_file.parent_path());
  io::write_embeddings_csv(out_file, data, emb.image);
  out << "wrote " << data.size() << " embeddings\n";
  return kOk;
}

int cmd_gen_data(const std::string& spec_path, std::uint64_t seed, const fs::path& out_dir,
                 std::ostream& out) {
  RunConfig config;
  if (!spec_path.empty()) {
    const IniSections ini = parse_ini(io::read_text(spec_path));
    for (const auto& [section, keys] : ini) {
      if (section != "data") throw ConfigError("data spec files take only a [data] section, found [" + section + "]");
    }
    apply_ini(config, ini);
  }
  const Dataset data = generate(config.train.data, config.train.dataset_size, seed);
  io::save_dataset(out_dir, data);
  out << "generated " << data.size() << " images, contradiction "
      << (data.spec.meta.labels >= 3 ? io::format_double(contradiction_rate(data, 0, 2)) : "n/a") << "\n";
  return kOk;
}

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

Stat mean_std(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::string cell_dir_name(const std::string& preset, std::uint64_t seed) {
  std::string name;
  for (char c : preset) name += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
  return name + "_seed" + std::to_string(seed);
}

int cmd_sweep(const fs::path& grid_path, const fs::path& out_dir, std::ostream& out) {
  const SweepGrid grid = load_sweep_grid(grid_path);
  io::ensure_dir(out_dir);
  json manifest = run_manifest("sweep", grid.base);
  manifest["presets"] = grid.presets;
  manifest["seeds"] = grid.seeds;
  io::write_json(out_dir / "manifest.json", manifest);

  std::ostringstream results;
  results << "preset,seed,linear_accuracy,pixel_accuracy,nmi,final_loss,status\n";
  std::map<std::string, std::array<std::vector<double>, 3>> cells;
  bool any_aborted = false;
  for (const auto& preset : grid.presets) {
    for (std::uint64_t seed : grid.seeds) {
      RunConfig config = grid.base;
      apply_preset(config, preset);
      set_seed(config, seed);
      config.train.validate();
      const fs::path cell = out_dir / cell_dir_name(preset, seed);
      const PretrainOutcome outcome = pretrain_into(cell, config, std::nullopt, 0);
      results << preset << ',' << seed << ',';
      if (outcome.aborted) {
        any_aborted = true;
        results << ",,,,aborted\n";
        out << preset << " seed " << seed << ": aborted\n";
        continue;
      }
      const ProbeScores scores = probe(outcome.result.params, make_dataset(config.train), config.probe);
      io::write_json(cell / "probe.json", io::to_json(scores));
      const double final_loss = outcome.result.history.empty() ? 0.0 : outcome.result.history.back().total_loss;
      results << io::format_double(scores.linear_accuracy) << ',' << io::format_double(scores.pixel_accuracy)
              << ',' << io::format_double(scores.nmi) << ',' << io::format_double(final_loss) << ",ok\n";
      auto& c = cells[preset];
      c[0].push_back(scores.linear_accuracy);
      c[1].push_back(scores.pixel_accuracy);
      c[2].push_back(scores.nmi);
      out << preset << " seed " << seed << ": linear " << io::format_double(scores.linear_accuracy) << "\n";
    }
  }
  io::write_text(out_dir / "results.csv", results.str());

  std::ostringstream summary;
  summary << "preset,runs,linear_mean,linear_std,pixel_mean,pixel_std,nmi_mean,nmi_std\n";
  for (const auto& preset : grid.presets) {
    const auto it = cells.find(preset);
    if (it == cells.end()) {
      summary << preset << ",0,,,,,,\n";
      continue;
    }
    summary << preset << ',' << it->second[0].size();
    for (const auto& values : it->second) {
      const Stat s = mean_std(values);
      summary << ',' << io::format_double(s.mean) << ',' << io::format_double(s.std);
    }
    summary << '\n';
  }
  io::write_text(out_dir / "summary.csv", summary.str());
  return any_aborted ? kAborted : kOk;
}

}  // namespace

SweepGrid load_sweep_grid(const fs::path& path) {
  IniSections ini = parse_ini(io::read_text(path));
  const auto sweep_it = ini.find("sweep");
  if (sweep_it == ini.end()) throw ConfigError("grid file " + path.string() + " has no [sweep] section");
  const auto sweep = sweep_it->second;
  ini.erase(sweep_it);

  SweepGrid grid;
  for (const auto& [key, value] : sweep) {
    if (key == "presets") {
      grid.presets = split_list(value);
    } else if (key == "seeds") {
      for (const auto& s : split_list(value)) {
        try {
          std::size_t used = 0;
          grid.seeds.push_back(std::stoull(s, &used));
          if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
          throw ConfigError("[sweep] seeds: '" + s + "' is not a seed");
        }
      }
    } else if (key == "base") {
      grid.base = load_run_config((path.parent_path() / value).string());
    } else {
      throw ConfigError("unknown config key [sweep] " + key);
    }
  }
  apply_ini(grid.base, ini);
  if (grid.presets.empty()) throw ConfigError("[sweep] presets is empty");
  if (grid.seeds.empty()) throw ConfigError("[sweep] seeds is empty");
  for (const auto& p : grid.presets) {
    RunConfig probe_config = grid.base;
    apply_preset(probe_config, p);  // rejects unknown names up front
  }
  return grid;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-guided contrastive pre-training with meta labels", "gcl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path, preset, resume_path, ckpt, data_path, grid_path, spec_path, out_path;
  std::optional<std::uint64_t> seed, steps;
  std::uint64_t stop_after = 0;
  std::uint64_t gen_seed = 0;
  bool with_probe = false;

  auto* pretrain = app.add_subcommand("pretrain", "Train an encoder and write metrics and a checkpoint");
  pretrain->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  pretrain->add_option("--preset", preset, "Experiment preset (single-meta@K picks label K)");
  pretrain->add_option("--seed", seed, "Root seed override");
  pretrain->add_option("--steps", steps, "Step count override");
  pretrain->add_option("--resume", resume_path, "Continue from a checkpoint directory")->check(CLI::ExistingDirectory);
  pretrain->add_option("--stop-after", stop_after, "Stop once this many steps are done");
  pretrain->add_flag("--probe", with_probe, "Also write probe scores");
  pretrain->add_option("--out", out_path, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Probe a checkpoint");
  eval->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", data_path, "Dataset directory (default: regenerate)")->check(CLI::ExistingDirectory);
  eval->add_option("--out", out_path, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run a preset x seed grid");
  sweep->add_option("--grid", grid_path, "Grid file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_path, "Output directory")->required();

  auto* dump = app.add_subcommand("dump-embeddings", "Write image embeddings as CSV");
  dump->add_option("--ckpt", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  dump->add_option("--data", data_path, "Dataset directory (default: regenerate)")->check(CLI::ExistingDirectory);
  dump->add_option("--out", out_path, "CSV file")->required();

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "Data spec file ([data] section)")->check(CLI::ExistingFile);
  gen->add_option("--seed", gen_seed, "Dataset seed")->required();
  gen->add_option("--out", out_path, "Output directory")->required();

  std::vector<const char*> argv{"gcl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*pretrain) {
      return cmd_pretrain(config_path, preset, seed, steps, resume_path, stop_after, with_probe, out_path, out);
    }
    if (*eval) return cmd_eval(ckpt, data_path, out_path, out);
    if (*sweep) return cmd_sweep(grid_path, out_path, out);
    if (*dump) return cmd_dump(ckpt, data_path, out_path, out);
    if (*gen) return cmd_gen_data(spec_path, gen_seed, out_path, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const TrainingAborted& e) {
    err << "training aborted: " << e.what() << "\n";
    return kAborted;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace gcl::cli
