#include "gcl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "gcl/errors.hpp"

namespace gcl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

std::uint64_t parse_u64(const std::string& v, const std::string& ctx) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(ctx + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& v, const std::string& ctx) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(ctx + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& ctx) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError(ctx + ": expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> parse_index_list(const std::string& v, const std::string& ctx) {
  std::vector<std::size_t> out;
  if (v == "none" || v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<std::size_t>(parse_u64(trim(item), ctx)));
  }
  return out;
}

ScoreLayers parse_score_layers(const std::string& v, const std::string& ctx) {
  if (v == "encoder_last") return ScoreLayers::kEncoderLast;
  if (v == "encoder_last_and_pixel_head") return ScoreLayers::kEncoderLastAndPixelHead;
  throw ConfigError(ctx + ": expected encoder_last or encoder_last_and_pixel_head");
}

std::string score_layers_name(ScoreLayers l) {
  return l == ScoreLayers::kEncoderLast ? "encoder_last" : "encoder_last_and_pixel_head";
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T>
Setter size_field(T TrainConfig::*field) {
  return [field](RunConfig& c, const std::string& v, const std::string& ctx) {
    c.train.*field = static_cast<T>(parse_u64(v, ctx));
  };
}

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  using std::size_t;
  static const std::map<std::string, std::map<std::string, Setter>> table{
      {"data",
       {
           {"height", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.height = parse_u64(v, x); }},
           {"width", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.width = parse_u64(v, x); }},
           {"feature_dim",
            [](RunConfig& c, const std::string& v, const std::string& x) {
              c.train.data.feature_dim = parse_u64(v, x);
              c.train.dims.input = c.train.data.feature_dim;
            }},
           {"meta_labels", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.meta.labels = parse_u64(v, x); }},
           {"factor_a_classes", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.meta.factor_a_classes = parse_u64(v, x); }},
           {"factor_b_classes", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.meta.factor_b_classes = parse_u64(v, x); }},
           {"contradiction", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.meta.contradiction_target = parse_double(v, x); }},
           {"pixel_noise", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.pixel_noise = parse_double(v, x); }},
           {"nuisance_scale", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.nuisance_scale = parse_double(v, x); }},
           {"mean_range", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.mean_range = parse_double(v, x); }},
           {"min_mean_distance", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.data.min_mean_distance = parse_double(v, x); }},
           {"count", size_field(&TrainConfig::dataset_size)},
       }},
      {"model",
       {
           {"hidden", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.dims.hidden = parse_u64(v, x); }},
           {"img_proj", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.dims.img_proj = parse_u64(v, x); }},
           {"pix_proj", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.dims.pix_proj = parse_u64(v, x); }},
       }},
      {"augment",
       {
           {"noise_sigma", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.augment.noise_sigma = parse_double(v, x); }},
           {"mask", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.augment.mask = parse_bool(v, x); }},
       }},
      {"train",
       {
           {"steps", size_field(&TrainConfig::steps)},
           {"batch_sources", size_field(&TrainConfig::batch_sources)},
           {"lr", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.lr = parse_double(v, x); }},
           {"tau", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.tau = parse_double(v, x); }},
           {"beta", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.beta = parse_double(v, x); }},
           {"pool_fraction", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.pool_fraction = parse_double(v, x); }},
           {"momentum", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.momentum = parse_double(v, x); }},
           {"anchors_per_pair", size_field(&TrainConfig::anchors_per_pair)},
           {"partners_per_anchor", size_field(&TrainConfig::partners_per_anchor)},
           {"mitigator", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.mitigator = parse_bool(v, x); }},
           {"filter", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.filter = parse_bool(v, x); }},
           {"pixel_loss", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.pixel_loss = parse_bool(v, x); }},
           {"per_layer_mitigation", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.per_layer_mitigation = parse_bool(v, x); }},
           {"score_layers", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.score_layers = parse_score_layers(v, x); }},
           {"meta_labels", [](RunConfig& c, const std::string& v, const std::string& x) { c.train.meta_labels = parse_index_list(v, x); }},
           {"single_label", [](RunConfig& c, const std::string& v, const std::string& x) { c.single_label = parse_u64(v, x); }},
           {"seed", [](RunConfig& c, const std::string& v, const std::string& x) { set_seed(c, parse_u64(v, x)); }},
       }},
      {"probe",
       {
           {"folds", [](RunConfig& c, const std::string& v, const std::string& x) { c.probe.folds = parse_u64(v, x); }},
           {"l2", [](RunConfig& c, const std::string& v, const std::string& x) { c.probe.l2 = parse_double(v, x); }},
           {"iterations", [](RunConfig& c, const std::string& v, const std::string& x) { c.probe.iterations = parse_u64(v, x); }},
           {"step_size", [](RunConfig& c, const std::string& v, const std::string& x) { c.probe.step_size = parse_double(v, x); }},
           {"kmeans_restarts", [](RunConfig& c, const std::string& v, const std::string& x) { c.probe.kmeans_restarts = parse_u64(v, x); }},
       }},
  };
  return table;
}

std::vector<std::size_t> all_labels(const RunConfig& c) {
  std::vector<std::size_t> out(c.train.data.meta.labels);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = k;
  return out;
}

}  // namespace

IniSections parse_ini(std::string_view text) {
  IniSections out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find_first_of("#;")));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside any section");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out[section][key] = trim(std::string_view(line).substr(eq + 1));
  }
  return out;
}

void apply_ini(RunConfig& config, const IniSections& ini) {
  const auto& table = setters();
  for (const auto& [section, keys] : ini) {
    const auto sec = table.find(section);
    if (sec == table.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : keys) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) throw ConfigError("unknown config key " + where(section, key));
      setter->second(config, value, where(section, key));
    }
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig config;
  apply_ini(config, parse_ini(ss.str()));
  return config;
}

void apply_preset(RunConfig& c, std::string_view name_in) {
  std::string name(name_in);
  std::optional<std::size_t> label;
  if (const auto at = name.find('@'); at != std::string::npos) {
    label = static_cast<std::size_t>(parse_u64(name.substr(at + 1), "preset " + name));
    name = name.substr(0, at);
    if (name != "single-meta") throw ConfigError("only single-meta takes an @label suffix");
  }
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("unknown preset '" + name + "'");
  }
  TrainConfig& t = c.train;
  t.mitigator = false;
  t.pixel_loss = false;
  t.filter = false;
  if (name == "vanilla") {
    t.meta_labels.clear();
  } else if (name == "single-meta") {
    if (label) c.single_label = *label;
    t.meta_labels = {c.single_label};
  } else if (name == "multi-naive") {
    t.meta_labels = all_labels(c);
  } else if (name == "multi-mitigated") {
    t.meta_labels = all_labels(c);
    t.mitigator = true;
  } else if (name == "+pixcl") {
    t.meta_labels.clear();
    t.pixel_loss = true;
  } else if (name == "+gradfilter") {
    t.meta_labels.clear();
    t.pixel_loss = true;
    t.filter = true;
  } else if (name == "full") {
    t.meta_labels = all_labels(c);
    t.mitigator = true;
    t.pixel_loss = true;
    t.filter = true;
  }
  c.preset = std::string(name_in);
}

nlohmann::json to_json(const SynthSpec& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"feature_dim", s.feature_dim},
          {"meta_labels", s.meta.labels},
          {"factor_a_classes", s.meta.factor_a_classes},
          {"factor_b_classes", s.meta.factor_b_classes},
          {"contradiction", s.meta.contradiction_target},
          {"mean_range", s.mean_range},
          {"min_mean_distance", s.min_mean_distance},
          {"pixel_noise", s.pixel_noise},
          {"nuisance_scale", s.nuisance_scale}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  s.height = j.at("height").get<std::size_t>();
  s.width = j.at("width").get<std::size_t>();
  s.feature_dim = j.at("feature_dim").get<std::size_t>();
  s.meta.labels = j.at("meta_labels").get<std::size_t>();
  s.meta.factor_a_classes = j.at("factor_a_classes").get<std::size_t>();
  s.meta.factor_b_classes = j.at("factor_b_classes").get<std::size_t>();
  s.meta.contradiction_target = j.at("contradiction").get<double>();
  s.mean_range = j.at("mean_range").get<double>();
  s.min_mean_distance = j.at("min_mean_distance").get<double>();
  s.pixel_noise = j.at("pixel_noise").get<double>();
  s.nuisance_scale = j.at("nuisance_scale").get<double>();
  return s;
}

nlohmann::json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  nlohmann::json j;
  j["preset"] = c.preset;
  j["data"] = to_json(t.data);
  j["data"]["count"] = t.dataset_size;
  j["model"] = {{"input", t.dims.input},
                {"hidden", t.dims.hidden},
                {"img_proj", t.dims.img_proj},
                {"pix_proj", t.dims.pix_proj}};
  j["augment"] = {{"noise_sigma", t.augment.noise_sigma}, {"mask", t.augment.mask}};
  j["train"] = {{"steps", t.steps},
                {"batch_sources", t.batch_sources},
                {"lr", t.lr},
                {"tau", t.tau},
                {"beta", t.beta},
                {"pool_fraction", t.pool_fraction},
                {"momentum", t.momentum},
                {"anchors_per_pair", t.anchors_per_pair},
                {"partners_per_anchor", t.partners_per_anchor},
                {"mitigator", t.mitigator},
                {"filter", t.filter},
                {"pixel_loss", t.pixel_loss},
                {"per_layer_mitigation", t.per_layer_mitigation},
                {"score_layers", score_layers_name(t.score_layers)},
                {"meta_labels", t.meta_labels},
                {"single_label", c.single_label},
                {"seed", t.seed}};
  j["probe"] = {{"folds", c.probe.folds},
                {"seed", c.probe.seed},
                {"l2", c.probe.l2},
                {"iterations", c.probe.iterations},
                {"step_size", c.probe.step_size},
                {"kmeans_restarts", c.probe.kmeans_restarts},
                {"kmeans_iterations", c.probe.kmeans_iterations}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  try {
    RunConfig c;
    TrainConfig& t = c.train;
    c.preset = j.value("preset", std::string{});
    t.data = synth_spec_from_json(j.at("data"));
    t.dataset_size = j.at("data").at("count").get<std::size_t>();
    const auto& m = j.at("model");
    t.dims = EncoderDims{m.at("input").get<std::size_t>(), m.at("hidden").get<std::size_t>(),
                         m.at("img_proj").get<std::size_t>(), m.at("pix_proj").get<std::size_t>()};
    t.augment.noise_sigma = j.at("augment").at("noise_sigma").get<double>();
    t.augment.mask = j.at("augment").at("mask").get<bool>();
    const auto& tr = j.at("train");
    t.steps = tr.at("steps").get<std::uint64_t>();
    t.batch_sources = tr.at("batch_sources").get<std::size_t>();
    t.lr = tr.at("lr").get<double>();
    t.tau = tr.at("tau").get<double>();
    t.beta = tr.at("beta").get<double>();
    t.pool_fraction = tr.at("pool_fraction").get<double>();
    t.momentum = tr.at("momentum").get<double>();
    t.anchors_per_pair = tr.at("anchors_per_pair").get<std::size_t>();
    t.partners_per_anchor = tr.at("partners_per_anchor").get<std::size_t>();
    t.mitigator = tr.at("mitigator").get<bool>();
    t.filter = tr.at("filter").get<bool>();
    t.pixel_loss = tr.at("pixel_loss").get<bool>();
    t.per_layer_mitigation = tr.at("per_layer_mitigation").get<bool>();
    t.score_layers = parse_score_layers(tr.at("score_layers").get<std::string>(), "score_layers");
    t.meta_labels = tr.at("meta_labels").get<std::vector<std::size_t>>();
    c.single_label = tr.at("single_label").get<std::size_t>();
    t.seed = tr.at("seed").get<std::uint64_t>();
    const auto& p = j.at("probe");
    c.probe.folds = p.at("folds").get<std::size_t>();
    c.probe.seed = p.at("seed").get<std::uint64_t>();
    c.probe.l2 = p.at("l2").get<double>();
    c.probe.iterations = p.at("iterations").get<std::size_t>();
    c.probe.step_size = p.at("step_size").get<double>();
    c.probe.kmeans_restarts = p.at("kmeans_restarts").get<std::size_t>();
    c.probe.kmeans_iterations = p.at("kmeans_iterations").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run manifest: ") + e.what());
  }
}

}  // namespace gcl
