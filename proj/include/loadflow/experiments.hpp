// Study harness: hyperparameter sweep, ranking, boxplot aggregation,
// inference benchmark, and loss-curve export.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loadflow/dataset.hpp"
#include "loadflow/models.hpp"
#include "loadflow/training.hpp"

namespace loadflow::experiments {

// The hyperparameter grid swept by run_sweep.
struct SweepGrid {
  std::vector<std::int64_t> training_sizes;
  std::vector<int> batch_sizes;
  std::vector<double> learning_rates;
  std::vector<model::Architecture> architectures;
  std::vector<std::uint64_t> seeds;

  std::size_t n_cells() const {
    return training_sizes.size() * batch_sizes.size() *
           learning_rates.size() * architectures.size() * seeds.size();
  }
  nlohmann::json to_json() const;
};

SweepGrid sweep_grid_from_json(const nlohmann::json& doc);
void validate(const SweepGrid& grid);

// Desk-scale default: training sizes capped at 50,000 and three seeds per
// cell.  The full grid extends the sizes to 100,000 and 500,000, which needs
// a dataset of ~715k cases and hours of compute.
SweepGrid desk_scale_grid();
SweepGrid full_grid();

// Outcome of a single sweep cell.
struct RunRecord {
  std::string id;
  model::Architecture architecture = model::Architecture::kMlp;
  std::int64_t training_size = 0;
  int batch_size = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  std::string status;       // "ok" | "diverged" | "skipped"
  std::string skip_reason;  // set when status == "skipped"
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  double final_val_mse = 0.0;
  double test_mse = 0.0;  // +inf (absent in JSON) unless status == "ok"
  double train_seconds = 0.0;
  std::vector<train::EpochStats> history;
  std::string dataset_fingerprint;
  std::string checkpoint_path;  // relative to the sweep directory, or empty

  bool ok() const { return status == "ok"; }
  bool diverged() const { return status == "diverged"; }
  bool skipped() const { return status == "skipped"; }

  nlohmann::json to_json() const;
};

RunRecord run_record_from_json(const nlohmann::json& doc);

// Deterministic cell identifier used for result files and resumability.
std::string cell_id(model::Architecture arch, std::int64_t training_size,
                    int batch_size, double learning_rate, std::uint64_t seed);

struct SweepOptions {
  train::SplitSpec split;
  int max_epochs = 50;
  int eval_batch = 4096;
  bool keep_checkpoints = false;
  int workers = 1;  // cells trained concurrently
  // Called under a lock as each cell finishes (progress reporting).
  std::function<void(const RunRecord&)> on_record;
};

// Trains every cell of the grid on `dataset`, persisting one JSON record per
// cell under out_dir/runs (and checkpoints under out_dir/checkpoints when
// requested).  Cells whose record already exists with a matching dataset
// fingerprint are skipped, so an interrupted sweep resumes where it stopped.
// Cells whose training size exceeds the train split are recorded as skipped.
// Returns records for all cells in deterministic grid order.
std::vector<RunRecord> run_sweep(const datagen::Dataset& dataset,
                                 const SweepGrid& grid,
                                 const std::filesystem::path& out_dir,
                                 const SweepOptions& options = {});

// Loads previously persisted records from out_dir/runs, sorted by id.
std::vector<RunRecord> load_run_records(const std::filesystem::path& out_dir);

// Per-architecture leaderboard: successful runs ascending by final
// validation MSE; ties break by test MSE, then lexicographically by
// (learning rate, batch size, training size, seed).
struct RankedTable {
  model::Architecture architecture = model::Architecture::kMlp;
  std::vector<RunRecord> rows;
  std::int64_t n_excluded = 0;  // diverged or skipped runs not ranked
};

std::vector<RankedTable> rank_runs(const std::vector<RunRecord>& records,
                                   std::size_t top_k);

// Linear-interpolation quantile of `values` (q in [0, 1]).
double quantile(std::vector<double> values, double q);

// Marginal test-MSE distribution for one hyperparameter value within one
// architecture.  Diverged runs are excluded from the statistics but counted.
struct BoxGroup {
  model::Architecture architecture = model::Architecture::kMlp;
  std::string hyperparameter;  // "training_size" | "batch_size" | "learning_rate"
  double value = 0.0;
  std::int64_t n = 0;  // successful runs entering the statistics
  std::int64_t n_diverged = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;

  nlohmann::json to_json() const;
};

std::vector<BoxGroup> aggregate_boxplots(const std::vector<RunRecord>& records);

// Wall-clock timings per method and sample count (medians over repetitions).
struct MethodTiming {
  std::string method;
  std::vector<std::int64_t> counts;
  std::vector<double> seconds;
  std::vector<double> seconds_per_sample;
};

struct BenchReport {
  std::vector<MethodTiming> methods;
  int repetitions = 0;

  nlohmann::json to_json() const;
};

// Times surrogate inference (standardize + forward + de-standardize) for
// each checkpoint and full Newton-Raphson solves on the same freshly sampled
// injection sets.  Each (method, count) timing is the median over
// `repetitions` runs after one discarded warm-up pass; the solver is
// parallelized across samples with `solver_workers` threads.
BenchReport benchmark_inference(const std::vector<model::Checkpoint>& models,
                                const grid::GridCase& grid,
                                const pf::SolverSettings& solver,
                                const std::vector<std::int64_t>& sample_counts,
                                int repetitions = 5, std::uint64_t seed = 1,
                                int solver_workers = 0);

// Writes one loss-curve CSV per run (epoch, train MSE, val MSE, seconds)
// plus an index.json naming every file and the best run per architecture.
void export_curves(const std::vector<RunRecord>& records,
                   const std::filesystem::path& out_dir);

}  // namespace loadflow::experiments
