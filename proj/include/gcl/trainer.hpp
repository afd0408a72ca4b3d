#pragma once

// Optimization loop: per-meta-label gradients, positive screening, conflict
// mitigation and a plain SGD update.
//
// One training step:
//   1. sample N source images (stratified over meta label 0) and augment each twice;
//   2. forward all 2N views once;
//   3. for every objective (one per selected meta label, or a single
//      co-view-only objective when none is selected) build the pixel plan,
//      then evaluate image + pixel loss and back-propagate to g_m;
//   4. combine the g_m by mitigation (or plain averaging) and step θ.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gcl/encoder.hpp"
#include "gcl/errors.hpp"
#include "gcl/filter.hpp"
#include "gcl/losses.hpp"
#include "gcl/mitigator.hpp"
#include "gcl/synthdata.hpp"

namespace gcl {

struct TrainConfig {
  SynthSpec data;
  std::size_t dataset_size = 240;
  EncoderDims dims;
  AugmentConfig augment;

  std::uint64_t steps = 500;
  std::size_t batch_sources = 8;
  double lr = 0.05;
  double tau = 0.1;
  double beta = 1e-2;
  double pool_fraction = 0.3;
  double momentum = 0.0;
  std::size_t anchors_per_pair = 16;
  std::size_t partners_per_anchor = 2;

  bool mitigator = true;
  bool filter = false;
  bool pixel_loss = false;
  bool per_layer_mitigation = false;
  ScoreLayers score_layers = ScoreLayers::kEncoderLast;
  std::vector<std::size_t> meta_labels;  // empty: co-view positives only

  std::uint64_t seed = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// One entry per objective: a meta-label index, or nullopt for co-view only.
  std::vector<std::optional<std::size_t>> objectives() const;
};

/// α_t = α · ½ (1 + cos(π t / T))
double learning_rate(const TrainConfig& config, std::uint64_t step);

struct TrainBatch {
  std::vector<SyntheticImage> views;  // 2N views; 2k and 2k+1 share a source
  BatchLabels labels;
};

TrainBatch sample_batch(const Dataset& data, const TrainConfig& config, std::uint64_t step);

/// Pixel-loss plan of one (anchor view, partner view) pair.
struct PairPlan {
  std::size_t anchor_item = 0;
  std::size_t partner_item = 0;
  std::vector<PixelPairing> pairings;
};

struct PoolStats {
  std::size_t anchors = 0;
  std::size_t pool_size = 0;    // candidates per anchor (same for every anchor)
  std::size_t admitted = 0;     // total admitted positives over anchors
  double score_min = 0.0;
  double score_max = 0.0;
  bool scored = false;
};

struct ObjectivePlan {
  std::optional<std::size_t> meta;
  PositiveIndexSet positives;
  std::vector<PairPlan> pairs;
  PoolStats stats;
};

/// Builds positive sets and, when the pixel loss is on, the pixel pairings
/// (Top-K pool, optional screening) for one objective at the given step.
ObjectivePlan plan_objective(const EncoderParams& params, const std::vector<ForwardResult>& views,
                             const BatchLabels& labels, std::optional<std::size_t> meta,
                             std::size_t objective_index, const TrainConfig& config,
                             std::uint64_t step);

struct ObjectiveEval {
  MetaLoss loss;
  Vec grad;
};

/// Loss and flat gradient of one objective under a fixed plan.
ObjectiveEval evaluate_objective(const EncoderParams& params,
                                 const std::vector<ForwardResult>& views,
                                 const ObjectivePlan& plan, const TrainConfig& config);

/// Loss only, re-running the forward pass; the plan stays fixed.
double objective_loss(const EncoderParams& params, const TrainBatch& batch,
                      const ObjectivePlan& plan, const TrainConfig& config);

std::vector<ForwardResult> forward_batch(const EncoderParams& params, const TrainBatch& batch,
                                         bool with_trace = true);

struct MetaGradients {
  GradientBundle bundle;
  std::vector<MetaLoss> losses;
  std::vector<ObjectivePlan> plans;
};

MetaGradients compute_meta_gradients(const EncoderParams& params, const TrainBatch& batch,
                                     const TrainConfig& config, std::uint64_t step);

struct TrainerState {
  std::uint64_t step = 0;  // next step to run
  MitigatorState mitigator;
  std::vector<MitigatorState> layer_mitigators;
  Vec velocity;

  static TrainerState fresh(const TrainConfig& config, std::size_t param_count);
  bool operator==(const TrainerState&) const = default;
};

struct MetricsRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  std::vector<MetaLoss> meta_losses;
  double total_loss = 0.0;
  double update_norm = 0.0;
  std::size_t conflicting_pairs = 0;
  std::size_t fired = 0;
  std::size_t admitted = 0;
  std::size_t candidates = 0;
};

struct StepOutput {
  MetricsRecord metrics;
  ConflictReport conflicts;
  std::vector<PoolStats> pools;  // per objective
};

/// Raised when a loss or the update becomes non-finite. Carries the record
/// of the failing step.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, MetricsRecord record)
      : Error(what), record_(std::move(record)) {}
  const MetricsRecord& record() const { return record_; }

 private:
  MetricsRecord record_;
};

/// One update θ <- θ - lr · g' (g' mitigated or averaged).
StepOutput train_step(EncoderParams& params, TrainerState& state, const TrainBatch& batch,
                      const TrainConfig& config, double lr);

struct TrainResult {
  EncoderParams params;
  TrainerState state;
  std::vector<MetricsRecord> history;
};

using StepCallback = std::function<void(const StepOutput&)>;

/// Runs steps state.step .. config.steps-1 on `data`. Starts from a fresh
/// init when `resume` is empty.
TrainResult train(const TrainConfig& config, const Dataset& data,
                  std::optional<std::pair<EncoderParams, TrainerState>> resume = std::nullopt,
                  const StepCallback& on_step = {}, std::uint64_t stop_after = 0);

/// Convenience: generates the dataset from config.data / config.seed.
Dataset make_dataset(const TrainConfig& config);

}  // namespace gcl
