#include "gcl/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gcl/errors.hpp"

namespace gcl::io {

static_assert(std::endian::native == std::endian::little, "binary artifacts assume little-endian");

using nlohmann::json;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_doubles(const fs::path& path, const Vec& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Vec read_doubles(const fs::path& path) {
  const std::string bytes = read_text(path);
  if (bytes.size() % sizeof(double) != 0) {
    throw IoError(path.string() + " is not a whole number of float64 values");
  }
  Vec out(bytes.size() / sizeof(double));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---- checkpoints -----------------------------------------------------------

namespace {

json dims_json(const EncoderDims& d) {
  return {{"input", d.input}, {"hidden", d.hidden}, {"img_proj", d.img_proj}, {"pix_proj", d.pix_proj}};
}

EncoderDims dims_from_json(const json& j) {
  return EncoderDims{j.at("input").get<std::size_t>(), j.at("hidden").get<std::size_t>(),
                     j.at("img_proj").get<std::size_t>(), j.at("pix_proj").get<std::size_t>()};
}

template <class F>
auto guarded(const fs::path& where, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError("unexpected content in " + where.string() + ": " + e.what());
  }
}

}  // namespace

json to_json(const MitigatorState& s) {
  return {{"labels", s.labels}, {"beta", s.beta}, {"t", s.t}, {"omega_hat", s.omega_hat.data()}};
}

MitigatorState mitigator_state_from_json(const json& j) {
  MitigatorState s;
  s.labels = j.at("labels").get<std::size_t>();
  s.beta = j.at("beta").get<double>();
  s.t = j.at("t").get<std::uint64_t>();
  s.omega_hat = Mat(s.labels, s.labels, j.at("omega_hat").get<Vec>());
  return s;
}

json to_json(const TrainerState& s) {
  json layers = json::array();
  for (const auto& m : s.layer_mitigators) layers.push_back(to_json(m));
  return {{"step", s.step},
          {"mitigator", to_json(s.mitigator)},
          {"layer_mitigators", layers},
          {"velocity", s.velocity}};
}

TrainerState trainer_state_from_json(const json& j) {
  TrainerState s;
  s.step = j.at("step").get<std::uint64_t>();
  s.mitigator = mitigator_state_from_json(j.at("mitigator"));
  for (const auto& m : j.at("layer_mitigators")) {
    s.layer_mitigators.push_back(mitigator_state_from_json(m));
  }
  s.velocity = j.at("velocity").get<Vec>();
  return s;
}

void save_checkpoint(const fs::path& dir, const EncoderParams& params, const TrainerState& state,
                     const RunConfig& config) {
  ensure_dir(dir);
  write_doubles(dir / "params.bin", params.flat());

  json blocks = json::array();
  for (const auto& b : params.layout()) {
    blocks.push_back({{"name", std::string(b.name)},
                      {"offset", b.offset},
                      {"rows", b.rows},
                      {"cols", b.cols}});
  }
  write_json(dir / "params.json", {{"format", "float64-le"},
                                   {"count", params.size()},
                                   {"dims", dims_json(params.dims())},
                                   {"blocks", blocks},
                                   {"seed", config.train.seed},
                                   {"step", state.step}});
  write_json(dir / "trainer_state.json", to_json(state));
  write_json(dir / "config.json", to_json(config));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const json manifest = read_json(dir / "params.json");
  const EncoderDims dims = guarded(dir / "params.json", [&] { return dims_from_json(manifest.at("dims")); });
  Vec flat = read_doubles(dir / "params.bin");
  const auto expected = guarded(dir / "params.json", [&] { return manifest.at("count").get<std::size_t>(); });
  if (flat.size() != expected) {
    throw IoError("params.bin holds " + std::to_string(flat.size()) + " values, manifest says " +
                  std::to_string(expected));
  }
  Checkpoint ck;
  try {
    ck.params = EncoderParams(dims, std::move(flat));
  } catch (const DimensionError& e) {
    throw IoError(std::string("checkpoint shape mismatch: ") + e.what());
  }
  ck.state = guarded(dir / "trainer_state.json",
                     [&] { return trainer_state_from_json(read_json(dir / "trainer_state.json")); });
  ck.config = run_config_from_json(read_json(dir / "config.json"));
  return ck;
}

// ---- datasets ---------------------------------------------------------------

void save_dataset(const fs::path& dir, const Dataset& data) {
  ensure_dir(dir);
  const SynthSpec& spec = data.spec;
  Vec blob = data.class_means.data();
  blob.reserve(blob.size() + data.size() * spec.pixels() * spec.feature_dim);
  json images = json::array();
  std::ostringstream csv;
  csv << "id";
  for (std::size_t m = 0; m < spec.meta.labels; ++m) csv << ",meta_" << m;
  csv << ",factor_a,factor_b,image_class\n";
  for (const auto& img : data.images) {
    blob.insert(blob.end(), img.pixels.data().begin(), img.pixels.data().end());
    images.push_back({{"id", img.id},
                      {"meta", img.meta},
                      {"factor_a", img.factor_a},
                      {"factor_b", img.factor_b},
                      {"image_class", img.image_class},
                      {"latent", img.latent}});
    csv << img.id;
    for (int v : img.meta) csv << ',' << v;
    csv << ',' << img.factor_a << ',' << img.factor_b << ',' << img.image_class << '\n';
  }
  write_doubles(dir / "data.bin", blob);
  write_json(dir / "manifest.json",
             {{"format", "float64-le"},
              {"spec", to_json(spec)},
              {"seed", data.seed},
              {"count", data.size()},
              {"class_means_shape", {data.class_means.rows(), data.class_means.cols()}},
              {"image_shape", {spec.pixels(), spec.feature_dim}},
              {"images", images}});
  write_text(dir / "labels.csv", csv.str());
}

Dataset load_dataset(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  const Vec blob = read_doubles(dir / "data.bin");
  return guarded(dir / "manifest.json", [&] {
    Dataset data;
    data.spec = synth_spec_from_json(manifest.at("spec"));
    data.seed = manifest.at("seed").get<std::uint64_t>();
    const std::size_t count = manifest.at("count").get<std::size_t>();
    const std::size_t k = data.spec.pixel_classes();
    const std::size_t d = data.spec.feature_dim;
    const std::size_t per_image = data.spec.pixels() * d;
    if (blob.size() != k * d + count * per_image) {
      throw IoError("data.bin size does not match manifest shapes");
    }
    data.class_means = Mat(k, d, Vec(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(k * d)));
    const auto& images = manifest.at("images");
    if (images.size() != count) throw IoError("manifest image list does not match count");
    std::size_t cursor = k * d;
    for (const auto& entry : images) {
      SyntheticImage img;
      img.id = entry.at("id").get<std::size_t>();
      img.meta = entry.at("meta").get<std::vector<int>>();
      img.factor_a = entry.at("factor_a").get<int>();
      img.factor_b = entry.at("factor_b").get<int>();
      img.image_class = entry.at("image_class").get<int>();
      img.latent = entry.at("latent").get<std::vector<int>>();
      const auto first = blob.begin() + static_cast<std::ptrdiff_t>(cursor);
      img.pixels = Mat(data.spec.pixels(), d, Vec(first, first + static_cast<std::ptrdiff_t>(per_image)));
      cursor += per_image;
      if (img.latent.size() != data.spec.pixels() || img.meta.size() != data.spec.meta.labels) {
        throw IoError("image " + std::to_string(img.id) + " has inconsistent label shapes");
      }
      data.images.push_back(std::move(img));
    }
    return data;
  });
}

// ---- streams ----------------------------------------------------------------

json to_json(const MetricsRecord& r) {
  json losses = json::array();
  for (const auto& l : r.meta_losses) losses.push_back({{"image", l.image}, {"pixel", l.pixel}});
  return {{"step", r.step},
          {"lr", r.lr},
          {"meta_losses", losses},
          {"total_loss", r.total_loss},
          {"update_norm", r.update_norm},
          {"conflicting_pairs", r.conflicting_pairs},
          {"fired", r.fired},
          {"admitted", r.admitted},
          {"candidates", r.candidates}};
}

std::vector<json> conflict_lines(const ConflictReport& report) {
  std::vector<json> out;
  out.reserve(report.pairs.size());
  for (const auto& p : report.pairs) {
    json line{{"step", report.step},
              {"pair", {p.i, p.j}},
              {"omega", p.omega},
              {"omega_hat", p.omega_hat},
              {"class", std::string(relationship_name(p.relation))},
              {"fired", p.fired}};
    if (p.segment != 0) line["segment"] = p.segment;
    if (p.skipped) line["skipped"] = p.note;
    out.push_back(std::move(line));
  }
  return out;
}

json pool_line(std::uint64_t step, std::size_t objective, const PoolStats& s) {
  json line{{"step", step},
            {"objective", objective},
            {"anchors", s.anchors},
            {"pool_size", s.pool_size},
            {"admitted", s.admitted}};
  line["score_min"] = s.scored ? json(s.score_min) : json(nullptr);
  line["score_max"] = s.scored ? json(s.score_max) : json(nullptr);
  return line;
}

json to_json(const ProbeScores& s) {
  return {{"linear_accuracy", s.linear_accuracy},
          {"fold_accuracy", s.fold_accuracy},
          {"failed_folds", s.failed_folds},
          {"pixel_accuracy", s.pixel_accuracy},
          {"nmi", s.nmi}};
}

void write_embeddings_csv(const fs::path& path, const Dataset& data,
                          const std::vector<Vec>& image_embeddings) {
  if (image_embeddings.size() != data.size()) {
    throw DimensionError("embedding count does not match dataset size");
  }
  std::ostringstream csv;
  csv << "id";
  for (std::size_t m = 0; m < data.spec.meta.labels; ++m) csv << ",meta_" << m;
  csv << ",latent_class";
  const std::size_t dim = image_embeddings.empty() ? 0 : image_embeddings.front().size();
  for (std::size_t k = 0; k < dim; ++k) csv << ",z_" << k;
  csv << '\n';
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& img = data.images[n];
    csv << img.id;
    for (int v : img.meta) csv << ',' << v;
    csv << ',' << img.image_class;
    for (double v : image_embeddings[n]) csv << ',' << format_double(v);
    csv << '\n';
  }
  write_text(path, csv.str());
}

}  // namespace gcl::io
