// Surrogate training: split, standardize, minibatch Adam loop, evaluation.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "loadflow/dataset.hpp"
#include "loadflow/models.hpp"
#include "loadflow/nn.hpp"

namespace loadflow::train {

// Shuffled 70/15/15 split (floor / floor / remainder).
struct SplitSpec {
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::uint64_t shuffle_seed = 0;

  nlohmann::json to_json() const;
};

struct SplitIndices {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> val;
  std::vector<std::int64_t> test;
};

// Deterministic disjoint exhaustive partition of [0, n); identical spec gives
// an identical partition.  Throws ValidationError when any part is empty.
SplitIndices split_dataset(std::int64_t n, const SplitSpec& spec);

struct TrainingSettings {
  double learning_rate = 1e-3;  // zero is allowed (no updates)
  int batch_size = 32;
  int max_epochs = 50;
  // Train on the first `training_subset_size` indices of the shuffled train
  // split; 0 means the whole split.  Validation and test always use their
  // full splits so losses stay comparable across subset sizes.
  std::int64_t training_subset_size = 0;
  SplitSpec split;
  int eval_batch = 4096;  // forward-pass chunk size for evaluation

  nlohmann::json to_json() const;
};

struct EpochStats {
  int epoch = 0;           // 1-based
  double train_mse = 0.0;  // running average over the epoch's batches
  double val_mse = 0.0;    // full validation pass
  double seconds = 0.0;    // wall-clock time of this epoch
};

struct TrainResult {
  // Completed epochs only; a non-finite loss aborts before recording.
  std::vector<EpochStats> history;
  int epochs_run = 0;
  int best_epoch = 0;  // 1-based; 0 when no epoch had finite validation MSE
  double best_val_mse = 0.0;
  double final_val_mse = 0.0;
  double test_mse = 0.0;  // evaluated with the best-epoch parameters
  bool diverged = false;
  double train_seconds = 0.0;
  model::Checkpoint checkpoint;  // parameters from the best epoch
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains a fresh surrogate on the dataset.  `seed` drives weight
// initialization and the per-epoch batch shuffles; identical inputs give
// identical results.  Standardizers are fitted on the training subset only;
// losses are MSE in standardized target space.  A non-finite loss stops
// training immediately and marks the run as diverged (its headline metrics
// become +infinity and no test MSE is computed).
TrainResult train_surrogate(const datagen::Dataset& dataset,
                            const model::ModelConfig& config,
                            const TrainingSettings& settings,
                            std::uint64_t seed,
                            const EpochCallback& on_epoch = {});

// MSE of the model over standardized features/targets, evaluated in chunks.
double evaluate_mse(model::Surrogate& model, const nn::Matrix& x_std,
                    const nn::Matrix& y_std, int eval_batch = 4096);

}  // namespace loadflow::train
