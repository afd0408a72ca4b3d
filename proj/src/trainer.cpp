#include "gcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "gcl/seed.hpp"

namespace gcl {

namespace {

std::vector<Segment> block_segments(const EncoderParams& params) {
  std::vector<Segment> out;
  for (const BlockInfo& b : params.layout()) out.push_back(Segment{b.offset, b.size()});
  return out;
}

bool all_finite(ConstSpan v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void TrainConfig::validate() const {
  data.validate();
  if (dataset_size < 2) throw ConfigError("train: dataset_size must be >= 2");
  if (dims.input != data.feature_dim) {
    throw ConfigError("train: encoder input dim must equal the data feature dim");
  }
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch_sources < 1) throw ConfigError("train: batch_sources must be >= 1");
  if (batch_sources > dataset_size) throw ConfigError("train: batch larger than dataset");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("train: tau must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("train: beta must lie in (0, 1]");
  if (!(pool_fraction > 0.0 && pool_fraction <= 1.0)) {
    throw ConfigError("train: pool_fraction must lie in (0, 1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (anchors_per_pair < 1 || partners_per_anchor < 1) {
    throw ConfigError("train: anchors_per_pair and partners_per_anchor must be >= 1");
  }
  for (std::size_t m : meta_labels) {
    if (m >= data.meta.labels) {
      throw ConfigError("train: meta label " + std::to_string(m) + " not generated by the data");
    }
  }
  std::vector<std::size_t> sorted = meta_labels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("train: duplicate meta label");
  }
}

std::vector<std::optional<std::size_t>> TrainConfig::objectives() const {
  if (meta_labels.empty()) return {std::nullopt};
  std::vector<std::optional<std::size_t>> out;
  for (std::size_t m : meta_labels) out.emplace_back(m);
  return out;
}

double learning_rate(const TrainConfig& config, std::uint64_t step) {
  const double frac = static_cast<double>(step) / static_cast<double>(config.steps);
  return config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

Dataset make_dataset(const TrainConfig& config) {
  return generate(config.data, config.dataset_size, config.seed);
}

TrainBatch sample_batch(const Dataset& data, const TrainConfig& config, std::uint64_t step) {
  auto rng = seed::rng(config.seed, {seed::kBatch, step});

  // Stratify over the classes of meta label 0.
  int classes = 0;
  for (const auto& img : data.images) classes = std::max(classes, img.meta.at(0) + 1);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t k = 0; k < data.size(); ++k) {
    by_class[static_cast<std::size_t>(data.images[k].meta[0])].push_back(k);
  }
  std::vector<std::size_t> class_order;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (!by_class[c].empty()) class_order.push_back(c);
  }
  std::shuffle(class_order.begin(), class_order.end(), rng);
  for (auto& members : by_class) std::shuffle(members.begin(), members.end(), rng);

  std::vector<std::size_t> cursor(by_class.size(), 0);
  std::vector<std::size_t> chosen;
  std::size_t c = 0;
  while (chosen.size() < config.batch_sources) {
    const std::size_t cls = class_order[c % class_order.size()];
    if (cursor[cls] < by_class[cls].size()) chosen.push_back(by_class[cls][cursor[cls]++]);
    ++c;
  }

  TrainBatch batch;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const SyntheticImage& img = data.images[chosen[k]];
    ViewPair views = augment(img, data.spec, config.augment,
                             seed::derive(config.seed, {seed::kAugment, step, k}));
    for (SyntheticImage* v : {&views.first, &views.second}) {
      batch.labels.source_id.push_back(img.id);
      batch.labels.meta.push_back(img.meta);
      batch.views.push_back(std::move(*v));
    }
  }
  return batch;
}

std::vector<ForwardResult> forward_batch(const EncoderParams& params, const TrainBatch& batch,
                                         bool with_trace) {
  std::vector<ForwardResult> out;
  out.reserve(batch.views.size());
  for (const SyntheticImage& v : batch.views) out.push_back(forward(params, v.pixels, with_trace));
  return out;
}

ObjectivePlan plan_objective(const EncoderParams& params, const std::vector<ForwardResult>& views,
                             const BatchLabels& labels, std::optional<std::size_t> meta,
                             std::size_t objective_index, const TrainConfig& config,
                             std::uint64_t step) {
  ObjectivePlan plan;
  plan.meta = meta;
  plan.positives = build_positive_sets(labels, meta);
  if (!config.pixel_loss) return plan;

  bool any_score = false;
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto rng = seed::rng(config.seed, {seed::kPixelPlan, step, objective_index, i});
    std::vector<std::size_t> partners = plan.positives[i];
    std::shuffle(partners.begin(), partners.end(), rng);
    if (partners.size() > config.partners_per_anchor) partners.resize(config.partners_per_anchor);
    std::sort(partners.begin(), partners.end());

    const RepresentationSet& ri = views[i].reps;
    const std::size_t pixels = ri.pix.rows();
    for (std::size_t j : partners) {
      const RepresentationSet& rj = views[j].reps;
      std::vector<std::size_t> anchors(pixels);
      std::iota(anchors.begin(), anchors.end(), std::size_t{0});
      std::shuffle(anchors.begin(), anchors.end(), rng);
      anchors.resize(std::min(config.anchors_per_pair, pixels));
      std::sort(anchors.begin(), anchors.end());

      PairPlan pair{i, j, {}};
      for (std::size_t u : anchors) {
        Mat anchor_row(1, ri.img_pixel.cols(), Vec(ri.img_pixel.row(u).begin(), ri.img_pixel.row(u).end()));
        const Mat affinity = pixel_affinity(anchor_row, rj.img_pixel);
        const std::vector<std::size_t> pool = build_pool(affinity.row(0), config.pool_fraction);
        PixelPairing pr;
        pr.anchor = u;
        pr.negatives = pool_complement(affinity.cols(), pool);
        if (config.filter) {
          if (!views[i].trace) throw ContractError("plan_objective: screening needs a forward trace");
          std::vector<ScoredCandidate> cands;
          cands.reserve(pool.size());
          for (std::size_t v : pool) {
            const double s = score_positive(params, ri, *views[i].trace, u, rj.pix, v, pr.negatives,
                                            config.tau, config.score_layers);
            cands.push_back(ScoredCandidate{v, affinity(0, v), s, false});
            plan.stats.score_min = any_score ? std::min(plan.stats.score_min, s) : s;
            plan.stats.score_max = any_score ? std::max(plan.stats.score_max, s) : s;
            any_score = true;
          }
          pr.positives = screen(cands, step, config.steps);
        } else {
          pr.positives = pool;
        }
        plan.stats.anchors += 1;
        plan.stats.pool_size = pool.size();
        plan.stats.admitted += pr.positives.size();
        pair.pairings.push_back(std::move(pr));
      }
      plan.pairs.push_back(std::move(pair));
    }
  }
  plan.stats.scored = any_score;
  return plan;
}

ObjectiveEval evaluate_objective(const EncoderParams& params,
                                 const std::vector<ForwardResult>& views,
                                 const ObjectivePlan& plan, const TrainConfig& config) {
  const std::size_t n = views.size();
  std::vector<Vec> z;
  z.reserve(n);
  for (const auto& v : views) z.push_back(v.reps.image);

  ObjectiveEval out;
  ImageLossResult img = image_loss(z, plan.positives, config.tau);
  out.loss.image = img.loss;

  std::vector<Mat> d_pix(n);
  if (config.pixel_loss && !plan.pairs.empty()) {
    const double w = 1.0 / static_cast<double>(plan.pairs.size());
    for (const PairPlan& pair : plan.pairs) {
      const RepresentationSet& ri = views[pair.anchor_item].reps;
      const RepresentationSet& rj = views[pair.partner_item].reps;
      PixelLossResult pl = pixel_loss(ri.pix, rj.pix, pair.pairings, config.tau);
      out.loss.pixel += w * pl.loss;
      for (auto [item, grad] : {std::pair{pair.anchor_item, &pl.d_anchor_image},
                                std::pair{pair.partner_item, &pl.d_partner_image}}) {
        if (d_pix[item].size() == 0) d_pix[item] = Mat(grad->rows(), grad->cols());
        axpy(w, grad->data(), d_pix[item].data());
      }
    }
  }

  out.grad.assign(params.size(), 0.0);
  const Mat no_img_pixel;
  for (std::size_t k = 0; k < n; ++k) {
    if (!views[k].trace) throw ContractError("evaluate_objective: views need forward traces");
    Vec g = backward(params, views[k].reps, *views[k].trace, img.grad[k], no_img_pixel, d_pix[k]);
    axpy(1.0, g, out.grad);
  }
  return out;
}

double objective_loss(const EncoderParams& params, const TrainBatch& batch,
                      const ObjectivePlan& plan, const TrainConfig& config) {
  const std::vector<ForwardResult> views = forward_batch(params, batch, false);
  std::vector<Vec> z;
  for (const auto& v : views) z.push_back(v.reps.image);
  double loss = image_loss(z, plan.positives, config.tau).loss;
  if (config.pixel_loss && !plan.pairs.empty()) {
    const double w = 1.0 / static_cast<double>(plan.pairs.size());
    for (const PairPlan& pair : plan.pairs) {
      loss += w * pixel_loss(views[pair.anchor_item].reps.pix, views[pair.partner_item].reps.pix,
                             pair.pairings, config.tau)
                      .loss;
    }
  }
  return loss;
}

MetaGradients compute_meta_gradients(const EncoderParams& params, const TrainBatch& batch,
                                     const TrainConfig& config, std::uint64_t step) {
  const std::vector<ForwardResult> views = forward_batch(params, batch, true);
  MetaGradients out;
  const auto objectives = config.objectives();
  for (std::size_t o = 0; o < objectives.size(); ++o) {
    ObjectivePlan plan = plan_objective(params, views, batch.labels, objectives[o], o, config, step);
    ObjectiveEval eval = evaluate_objective(params, views, plan, config);
    out.bundle.grads.push_back(std::move(eval.grad));
    out.losses.push_back(eval.loss);
    out.plans.push_back(std::move(plan));
  }
  return out;
}

TrainerState TrainerState::fresh(const TrainConfig& config, std::size_t param_count) {
  TrainerState s;
  const std::size_t m = config.objectives().size();
  s.mitigator = MitigatorState::fresh(m, config.beta);
  if (config.per_layer_mitigation) {
    s.layer_mitigators.assign(kNumBlocks, MitigatorState::fresh(m, config.beta));
  }
  if (config.momentum > 0.0) s.velocity.assign(param_count, 0.0);
  return s;
}

StepOutput train_step(EncoderParams& params, TrainerState& state, const TrainBatch& batch,
                      const TrainConfig& config, double lr) {
  StepOutput out;
  MetricsRecord& rec = out.metrics;
  rec.step = state.step;
  rec.lr = lr;

  MetaGradients mg = compute_meta_gradients(params, batch, config, state.step);
  rec.meta_losses = mg.losses;
  rec.total_loss = gcl_loss(mg.losses).total;
  for (const ObjectivePlan& p : mg.plans) {
    out.pools.push_back(p.stats);
    rec.admitted += p.stats.admitted;
    rec.candidates += p.stats.anchors * p.stats.pool_size;
  }
  if (!std::isfinite(rec.total_loss)) {
    throw TrainingAborted("non-finite loss at step " + std::to_string(state.step), rec);
  }
  for (const Vec& g : mg.bundle.grads) {
    if (!all_finite(g)) {
      throw TrainingAborted("non-finite gradient at step " + std::to_string(state.step), rec);
    }
  }

  Vec direction;
  if (config.mitigator) {
    MitigateResult mr;
    if (config.per_layer_mitigation) {
      const std::vector<Segment> segments = block_segments(params);
      mr = mitigate_segmented(mg.bundle, segments, state.layer_mitigators);
      ++state.mitigator.t;
    } else {
      mr = mitigate(mg.bundle, state.mitigator);
    }
    mr.report.step = state.step;
    rec.conflicting_pairs = mr.report.conflicting_pairs;
    rec.fired = mr.report.fired;
    out.conflicts = std::move(mr.report);
    direction = std::move(mr.direction);
  } else {
    direction = average(mg.bundle);
    out.conflicts.step = state.step;
  }

  if (config.momentum > 0.0) {
    if (state.velocity.size() != direction.size()) state.velocity.assign(direction.size(), 0.0);
    scale_inplace(config.momentum, state.velocity);
    axpy(1.0, direction, state.velocity);
    direction = state.velocity;
  }
  rec.update_norm = lr * norm(direction);
  if (!std::isfinite(rec.update_norm)) {
    throw TrainingAborted("non-finite update at step " + std::to_string(state.step), rec);
  }
  axpy(-lr, direction, params.flat());
  ++state.step;
  return out;
}

TrainResult train(const TrainConfig& config, const Dataset& data,
                  std::optional<std::pair<EncoderParams, TrainerState>> resume,
                  const StepCallback& on_step, std::uint64_t stop_after) {
  config.validate();
  TrainResult result;
  if (resume) {
    result.params = std::move(resume->first);
    result.state = std::move(resume->second);
    if (result.params.dims() != config.dims) throw ConfigError("train: checkpoint dims differ");
  } else {
    result.params = init_params(config.seed, config.dims);
    result.state = TrainerState::fresh(config, result.params.size());
  }
  const std::uint64_t end = stop_after > 0 ? std::min(stop_after, config.steps) : config.steps;
  while (result.state.step < end) {
    const std::uint64_t t = result.state.step;
    const TrainBatch batch = sample_batch(data, config, t);
    StepOutput out = train_step(result.params, result.state, batch, config, learning_rate(config, t));
    if (on_step) on_step(out);
    result.history.push_back(std::move(out.metrics));
  }
  return result;
}

}  // namespace gcl
