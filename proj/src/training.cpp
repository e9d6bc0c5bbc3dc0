#include "loadflow/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace loadflow::train {

using nn::Matrix;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// RNG stream for the split shuffle, distinct from the per-epoch streams.
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;

void check_settings(const TrainingSettings& s) {
  if (!(s.learning_rate >= 0) || !std::isfinite(s.learning_rate))
    throw ValidationError("learning_rate must be finite and >= 0");
  if (s.batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (s.max_epochs <= 0) throw ValidationError("max_epochs must be positive");
  if (s.eval_batch <= 0) throw ValidationError("eval_batch must be positive");
  if (s.training_subset_size < 0)
    throw ValidationError("training_subset_size must be >= 0");
}

// Copies rows of `src` listed in order[first .. first+count) into dst.
void gather_rows(const Matrix& src, const std::vector<std::int64_t>& order,
                 std::int64_t first, std::int64_t count, Matrix& dst) {
  const int cols = src.cols();
  if (dst.rows() != count || dst.cols() != cols)
    dst = Matrix(static_cast<int>(count), cols);
  for (std::int64_t r = 0; r < count; ++r)
    std::memcpy(dst.data() + static_cast<std::size_t>(r) * cols,
                src.data() + static_cast<std::size_t>(order[first + r]) * cols,
                sizeof(double) * cols);
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

json SplitSpec::to_json() const {
  return json{{"train_fraction", train_fraction},
              {"val_fraction", val_fraction},
              {"shuffle_seed", shuffle_seed}};
}

SplitIndices split_dataset(std::int64_t n, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0) || !(spec.val_fraction > 0) ||
      spec.train_fraction + spec.val_fraction >= 1.0)
    throw ValidationError(
        "split fractions must be positive and leave room for a test set");
  const auto n_train =
      static_cast<std::int64_t>(std::floor(n * spec.train_fraction));
  const auto n_val =
      static_cast<std::int64_t>(std::floor(n * spec.val_fraction));
  const std::int64_t n_test = n - n_train - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw ValidationError("dataset too small to split: n = " +
                          std::to_string(n));

  std::vector<std::int64_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(spec.shuffle_seed, kSplitStream);
  rng.shuffle(perm);

  SplitIndices split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  split.test.assign(perm.begin() + n_train + n_val, perm.end());
  return split;
}

json TrainingSettings::to_json() const {
  return json{{"learning_rate", learning_rate},
              {"batch_size", batch_size},
              {"max_epochs", max_epochs},
              {"training_subset_size", training_subset_size},
              {"split", split.to_json()},
              {"eval_batch", eval_batch}};
}

double evaluate_mse(model::Surrogate& model, const Matrix& x_std,
                    const Matrix& y_std, int eval_batch) {
  if (x_std.rows() != y_std.rows())
    throw ValidationError("evaluation features/targets row mismatch");
  if (x_std.rows() == 0) throw ValidationError("evaluation on empty data");
  double total_sq = 0.0;
  std::int64_t total_elems = 0;
  Matrix xb, yb, pred;
  const int cols_x = x_std.cols();
  for (std::int64_t first = 0; first < x_std.rows(); first += eval_batch) {
    const std::int64_t count =
        std::min<std::int64_t>(eval_batch, x_std.rows() - first);
    if (xb.rows() != count || xb.cols() != cols_x)
      xb = Matrix(static_cast<int>(count), cols_x);
    std::memcpy(xb.data(),
                x_std.data() + static_cast<std::size_t>(first) * cols_x,
                sizeof(double) * count * cols_x);
    if (yb.rows() != count || yb.cols() != y_std.cols())
      yb = Matrix(static_cast<int>(count), y_std.cols());
    std::memcpy(yb.data(),
                y_std.data() + static_cast<std::size_t>(first) * y_std.cols(),
                sizeof(double) * count * y_std.cols());
    model.forward(xb, pred);
    const double mse = nn::mse_forward(pred, yb);
    total_sq += mse * static_cast<double>(pred.size());
    total_elems += static_cast<std::int64_t>(pred.size());
  }
  return total_sq / static_cast<double>(total_elems);
}

TrainResult train_surrogate(const datagen::Dataset& dataset,
                            const model::ModelConfig& config,
                            const TrainingSettings& settings,
                            std::uint64_t seed,
                            const EpochCallback& on_epoch) {
  check_settings(settings);

  Matrix x_raw, y_raw;
  model::encode_dataset(dataset, x_raw, y_raw);
  const SplitIndices split = split_dataset(dataset.n_samples, settings.split);

  const std::int64_t n_subset =
      settings.training_subset_size == 0
          ? static_cast<std::int64_t>(split.train.size())
          : settings.training_subset_size;
  if (n_subset > static_cast<std::int64_t>(split.train.size()))
    throw ValidationError(
        "training_subset_size exceeds the train split (" +
        std::to_string(n_subset) + " > " +
        std::to_string(split.train.size()) + ")");

  // Standardizers see the training subset only.
  Matrix x_train, y_train;
  gather_rows(x_raw, split.train, 0, n_subset, x_train);
  gather_rows(y_raw, split.train, 0, n_subset, y_train);
  nn::Standardizer x_std, y_std;
  x_std.fit(x_train);
  y_std.fit(y_train);

  Matrix tmp;
  x_std.transform(x_train, tmp);
  x_train = tmp;
  y_std.transform(y_train, tmp);
  y_train = tmp;

  Matrix x_val, y_val, x_test, y_test;
  gather_rows(x_raw, split.val, 0, split.val.size(), tmp);
  x_std.transform(tmp, x_val);
  gather_rows(y_raw, split.val, 0, split.val.size(), tmp);
  y_std.transform(tmp, y_val);
  gather_rows(x_raw, split.test, 0, split.test.size(), tmp);
  x_std.transform(tmp, x_test);
  gather_rows(y_raw, split.test, 0, split.test.size(), tmp);
  y_std.transform(tmp, y_test);

  auto model = model::make_surrogate(dataset.grid, config, seed);
  nn::AdamSettings adam_settings;
  adam_settings.learning_rate = settings.learning_rate;
  nn::Adam adam(adam_settings);

  TrainResult result;
  result.best_val_mse = kInf;
  result.final_val_mse = kInf;
  result.test_mse = kInf;
  std::vector<std::pair<std::string, Matrix>> best_params =
      model::snapshot_params(model->params());

  std::vector<std::int64_t> order(n_subset);
  std::iota(order.begin(), order.end(), 0);
  Matrix xb, yb, pred, dpred;

  const auto started = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= settings.max_epochs && !result.diverged;
       ++epoch) {
    const auto epoch_started = std::chrono::steady_clock::now();
    // Stream `epoch` keeps shuffles decoupled from the stream-0 weight init.
    Rng rng(seed, static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    double epoch_sq = 0.0;
    std::int64_t epoch_elems = 0;
    for (std::int64_t first = 0; first < n_subset;
         first += settings.batch_size) {
      const std::int64_t count =
          std::min<std::int64_t>(settings.batch_size, n_subset - first);
      gather_rows(x_train, order, first, count, xb);
      gather_rows(y_train, order, first, count, yb);

      model->forward(xb, pred);
      const double batch_mse = nn::mse_forward(pred, yb);
      if (!std::isfinite(batch_mse)) {
        result.diverged = true;
        break;
      }
      epoch_sq += batch_mse * static_cast<double>(pred.size());
      epoch_elems += static_cast<std::int64_t>(pred.size());

      model->params().zero_grads();
      nn::mse_backward(pred, yb, dpred);
      model->backward(dpred);
      adam.step(model->params());
    }
    if (result.diverged) break;

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = epoch_sq / static_cast<double>(epoch_elems);
    stats.val_mse = evaluate_mse(*model, x_val, y_val, settings.eval_batch);
    stats.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - epoch_started)
                        .count();
    if (!std::isfinite(stats.val_mse)) {
      result.diverged = true;
      break;
    }
    result.history.push_back(stats);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(stats);

    if (stats.val_mse < result.best_val_mse) {
      result.best_val_mse = stats.val_mse;
      result.best_epoch = epoch;
      best_params = model::snapshot_params(model->params());
    }
  }
  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  result.final_val_mse =
      (result.diverged || result.history.empty())
          ? kInf
          : result.history.back().val_mse;

  // Test error is reported for the best-validation parameters, and only for
  // runs that did not diverge.
  if (result.best_epoch > 0) {
    for (const auto& [name, value] : best_params)
      model->params().get(name).value = value;
    if (!result.diverged)
      result.test_mse =
          evaluate_mse(*model, x_test, y_test, settings.eval_batch);
  }

  model::Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.grid = dataset.grid;
  ckpt.x_standardizer = x_std;
  ckpt.y_standardizer = y_std;
  ckpt.init_seed = seed;
  ckpt.dataset_fingerprint = dataset.fingerprint();
  ckpt.params = std::move(best_params);
  ckpt.training_meta =
      json{{"settings", settings.to_json()},
           {"seed", seed},
           {"n_samples", dataset.n_samples},
           {"training_subset_size", n_subset},
           {"epochs_run", result.epochs_run},
           {"best_epoch", result.best_epoch},
           {"best_val_mse", finite_or_null(result.best_val_mse)},
           {"final_val_mse", finite_or_null(result.final_val_mse)},
           {"test_mse", finite_or_null(result.test_mse)},
           {"diverged", result.diverged},
           {"train_seconds", result.train_seconds}};
  return result;
}

}  // namespace loadflow::train
