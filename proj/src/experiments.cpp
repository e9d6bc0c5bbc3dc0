#include "loadflow/experiments.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <tuple>

#include "loadflow/binio.hpp"
#include "loadflow/parallel.hpp"

namespace loadflow::experiments {

using model::Architecture;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::array<Architecture, 3> kAllArchitectures = {
    Architecture::kMlp, Architecture::kGnn1, Architecture::kGnn2};

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double num_or_inf(const json& v) {
  if (v.is_null()) return kInf;
  return v.get<double>();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return std::string(buf);
}

json history_to_json(const std::vector<train::EpochStats>& history) {
  json arr = json::array();
  for (const train::EpochStats& e : history)
    arr.push_back(json{{"epoch", e.epoch},
                       {"train_mse", e.train_mse},
                       {"val_mse", e.val_mse},
                       {"seconds", e.seconds}});
  return arr;
}

std::vector<train::EpochStats> history_from_json(const json& arr) {
  std::vector<train::EpochStats> history;
  for (const json& e : arr) {
    train::EpochStats stats;
    stats.epoch = e.at("epoch").get<int>();
    stats.train_mse = e.at("train_mse").get<double>();
    stats.val_mse = e.at("val_mse").get<double>();
    stats.seconds = e.at("seconds").get<double>();
    history.push_back(stats);
  }
  return history;
}

}  // namespace

json SweepGrid::to_json() const {
  json archs = json::array();
  for (Architecture a : architectures) archs.push_back(model::to_string(a));
  return json{{"training_sizes", training_sizes},
              {"batch_sizes", batch_sizes},
              {"learning_rates", learning_rates},
              {"architectures", std::move(archs)},
              {"seeds", seeds}};
}

SweepGrid sweep_grid_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("sweep grid must be an object");
  SweepGrid grid;
  for (const auto& [key, value] : doc.items()) {
    if (key == "training_sizes") {
      grid.training_sizes = value.get<std::vector<std::int64_t>>();
    } else if (key == "batch_sizes") {
      grid.batch_sizes = value.get<std::vector<int>>();
    } else if (key == "learning_rates") {
      grid.learning_rates = value.get<std::vector<double>>();
    } else if (key == "architectures") {
      grid.architectures.clear();
      for (const json& name : value)
        grid.architectures.push_back(
            model::architecture_from_string(name.get<std::string>()));
    } else if (key == "seeds") {
      grid.seeds = value.get<std::vector<std::uint64_t>>();
    } else {
      throw ParseError("unknown key \"" + key + "\" in sweep grid");
    }
  }
  validate(grid);
  return grid;
}

void validate(const SweepGrid& grid) {
  if (grid.training_sizes.empty() || grid.batch_sizes.empty() ||
      grid.learning_rates.empty() || grid.architectures.empty() ||
      grid.seeds.empty())
    throw ValidationError("sweep grid has an empty axis");
  for (std::int64_t s : grid.training_sizes)
    if (s <= 0) throw ValidationError("training sizes must be positive");
  for (int b : grid.batch_sizes)
    if (b <= 0) throw ValidationError("batch sizes must be positive");
  for (double lr : grid.learning_rates)
    if (!(lr > 0) || !std::isfinite(lr))
      throw ValidationError("learning rates must be positive");
}

SweepGrid desk_scale_grid() {
  SweepGrid grid;
  grid.training_sizes = {500, 1000, 5000, 10000, 50000};
  grid.batch_sizes = {16, 32, 64, 128};
  grid.learning_rates = {1e-4, 1e-3, 1e-2, 1e-1};
  grid.architectures = {Architecture::kMlp, Architecture::kGnn1,
                        Architecture::kGnn2};
  grid.seeds = {1, 2, 3};
  return grid;
}

SweepGrid full_grid() {
  SweepGrid grid = desk_scale_grid();
  grid.training_sizes.push_back(100000);
  grid.training_sizes.push_back(500000);
  return grid;
}

std::string cell_id(Architecture arch, std::int64_t training_size,
                    int batch_size, double learning_rate,
                    std::uint64_t seed) {
  return model::to_string(arch) + "-n" + std::to_string(training_size) +
         "-bs" + std::to_string(batch_size) + "-lr" +
         format_double(learning_rate) + "-seed" + std::to_string(seed);
}

json RunRecord::to_json() const {
  json doc{{"id", id},
           {"architecture", model::to_string(architecture)},
           {"training_size", training_size},
           {"batch_size", batch_size},
           {"learning_rate", learning_rate},
           {"seed", seed},
           {"status", status},
           {"epochs_run", epochs_run},
           {"best_epoch", best_epoch},
           {"best_val_mse", finite_or_null(best_val_mse)},
           {"final_val_mse", finite_or_null(final_val_mse)},
           {"test_mse", finite_or_null(test_mse)},
           {"train_seconds", train_seconds},
           {"history", history_to_json(history)},
           {"dataset_fingerprint", dataset_fingerprint},
           {"checkpoint_path", checkpoint_path}};
  if (!skip_reason.empty()) doc["skip_reason"] = skip_reason;
  return doc;
}

RunRecord run_record_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("run record must be an object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    static const std::set<std::string> kKnown = {
        "id",          "architecture",   "training_size", "batch_size",
        "learning_rate", "seed",         "status",        "skip_reason",
        "epochs_run",  "best_epoch",     "best_val_mse",  "final_val_mse",
        "test_mse",    "train_seconds",  "history",       "dataset_fingerprint",
        "checkpoint_path"};
    if (!kKnown.count(key))
      throw ParseError("unknown key \"" + key + "\" in run record");
  }
  RunRecord rec;
  rec.id = doc.at("id").get<std::string>();
  rec.architecture =
      model::architecture_from_string(doc.at("architecture").get<std::string>());
  rec.training_size = doc.at("training_size").get<std::int64_t>();
  rec.batch_size = doc.at("batch_size").get<int>();
  rec.learning_rate = doc.at("learning_rate").get<double>();
  rec.seed = doc.at("seed").get<std::uint64_t>();
  rec.status = doc.at("status").get<std::string>();
  if (rec.status != "ok" && rec.status != "diverged" && rec.status != "skipped")
    throw ParseError("invalid run record status: \"" + rec.status + "\"");
  if (doc.contains("skip_reason"))
    rec.skip_reason = doc.at("skip_reason").get<std::string>();
  rec.epochs_run = doc.at("epochs_run").get<int>();
  rec.best_epoch = doc.at("best_epoch").get<int>();
  rec.best_val_mse = num_or_inf(doc.at("best_val_mse"));
  rec.final_val_mse = num_or_inf(doc.at("final_val_mse"));
  rec.test_mse = num_or_inf(doc.at("test_mse"));
  rec.train_seconds = doc.at("train_seconds").get<double>();
  rec.history = history_from_json(doc.at("history"));
  rec.dataset_fingerprint = doc.at("dataset_fingerprint").get<std::string>();
  rec.checkpoint_path = doc.at("checkpoint_path").get<std::string>();
  return rec;
}

std::vector<RunRecord> run_sweep(const datagen::Dataset& dataset,
                                 const SweepGrid& grid,
                                 const std::filesystem::path& out_dir,
                                 const SweepOptions& options) {
  validate(grid);
  const std::string fingerprint = dataset.fingerprint();
  const train::SplitIndices split =
      train::split_dataset(dataset.n_samples, options.split);
  const auto available = static_cast<std::int64_t>(split.train.size());
  const std::int64_t smallest = *std::min_element(
      grid.training_sizes.begin(), grid.training_sizes.end());
  if (smallest > available)
    throw ValidationError(
        "dataset too small for the smallest sweep cell: train split has " +
        std::to_string(available) + " samples, smallest cell needs " +
        std::to_string(smallest));

  std::filesystem::create_directories(out_dir / "runs");
  if (options.keep_checkpoints)
    std::filesystem::create_directories(out_dir / "checkpoints");

  struct Cell {
    Architecture arch;
    std::int64_t size;
    int bs;
    double lr;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  cells.reserve(grid.n_cells());
  for (Architecture arch : grid.architectures)
    for (std::int64_t size : grid.training_sizes)
      for (int bs : grid.batch_sizes)
        for (double lr : grid.learning_rates)
          for (std::uint64_t seed : grid.seeds)
            cells.push_back({arch, size, bs, lr, seed});

  std::vector<RunRecord> records(cells.size());
  std::mutex io_mutex;

  parallel_for(static_cast<std::int64_t>(cells.size()), [&](std::int64_t i) {
    const Cell& cell = cells[i];
    const std::string id =
        cell_id(cell.arch, cell.size, cell.bs, cell.lr, cell.seed);
    const std::filesystem::path record_path = out_dir / "runs" / (id + ".json");

    {
      std::lock_guard<std::mutex> lock(io_mutex);
      if (std::filesystem::exists(record_path)) {
        try {
          const auto bytes = read_file(record_path);
          RunRecord existing =
              run_record_from_json(json::parse(bytes.begin(), bytes.end()));
          if (existing.dataset_fingerprint == fingerprint) {
            records[i] = std::move(existing);
            if (options.on_record) options.on_record(records[i]);
            return;
          }
        } catch (const Error&) {
          // Unreadable or stale record: recompute below.
        } catch (const json::exception&) {
        }
      }
    }

    RunRecord rec;
    rec.id = id;
    rec.architecture = cell.arch;
    rec.training_size = cell.size;
    rec.batch_size = cell.bs;
    rec.learning_rate = cell.lr;
    rec.seed = cell.seed;
    rec.dataset_fingerprint = fingerprint;
    rec.best_val_mse = kInf;
    rec.final_val_mse = kInf;
    rec.test_mse = kInf;

    if (cell.size > available) {
      rec.status = "skipped";
      rec.skip_reason = "training size " + std::to_string(cell.size) +
                        " exceeds available training data (" +
                        std::to_string(available) + ")";
    } else {
      model::ModelConfig config;
      config.architecture = cell.arch;
      train::TrainingSettings settings;
      settings.learning_rate = cell.lr;
      settings.batch_size = cell.bs;
      settings.max_epochs = options.max_epochs;
      settings.training_subset_size = cell.size;
      settings.split = options.split;
      settings.eval_batch = options.eval_batch;

      const train::TrainResult result =
          train::train_surrogate(dataset, config, settings, cell.seed);
      rec.status = result.diverged ? "diverged" : "ok";
      rec.epochs_run = result.epochs_run;
      rec.best_epoch = result.best_epoch;
      rec.best_val_mse = result.best_val_mse;
      rec.final_val_mse = result.final_val_mse;
      rec.test_mse = result.test_mse;
      rec.train_seconds = result.train_seconds;
      rec.history = result.history;
      if (options.keep_checkpoints) {
        const std::string rel = "checkpoints/" + id + ".ckpt";
        model::write_checkpoint(result.checkpoint, out_dir / rel);
        rec.checkpoint_path = rel;
      }
    }

    {
      std::lock_guard<std::mutex> lock(io_mutex);
      const std::string text = rec.to_json().dump(2);
      std::vector<std::uint8_t> bytes(text.begin(), text.end());
      write_file_atomic(record_path, bytes);
      records[i] = std::move(rec);
      if (options.on_record) options.on_record(records[i]);
    }
  }, options.workers);

  return records;
}

std::vector<RunRecord> load_run_records(const std::filesystem::path& out_dir) {
  const std::filesystem::path runs_dir = out_dir / "runs";
  if (!std::filesystem::is_directory(runs_dir))
    throw IoError("no runs directory under " + out_dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(runs_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());

  std::vector<RunRecord> records;
  records.reserve(paths.size());
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    try {
      records.push_back(
          run_record_from_json(json::parse(bytes.begin(), bytes.end())));
    } catch (const json::exception& e) {
      throw IoError("invalid run record " + path.string() + ": " + e.what());
    }
  }
  return records;
}

std::vector<RankedTable> rank_runs(const std::vector<RunRecord>& records,
                                   std::size_t top_k) {
  std::vector<RankedTable> tables;
  for (Architecture arch : kAllArchitectures) {
    RankedTable table;
    table.architecture = arch;
    for (const RunRecord& rec : records) {
      if (rec.architecture != arch) continue;
      if (rec.ok())
        table.rows.push_back(rec);
      else
        ++table.n_excluded;
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const RunRecord& a, const RunRecord& b) {
                return std::tie(a.final_val_mse, a.test_mse, a.learning_rate,
                                a.batch_size, a.training_size, a.seed) <
                       std::tie(b.final_val_mse, b.test_mse, b.learning_rate,
                                b.batch_size, b.training_size, b.seed);
              });
    if (table.rows.size() > top_k) table.rows.resize(top_k);
    tables.push_back(std::move(table));
  }
  return tables;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of empty data");
  if (!(q >= 0.0) || !(q <= 1.0))
    throw ValidationError("quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

json BoxGroup::to_json() const {
  return json{{"architecture", model::to_string(architecture)},
              {"hyperparameter", hyperparameter},
              {"value", value},
              {"n", n},
              {"n_diverged", n_diverged},
              {"min", finite_or_null(min)},
              {"q1", finite_or_null(q1)},
              {"median", finite_or_null(median)},
              {"q3", finite_or_null(q3)},
              {"max", finite_or_null(max)}};
}

std::vector<BoxGroup> aggregate_boxplots(const std::vector<RunRecord>& records) {
  struct GroupData {
    std::vector<double> tests;
    std::int64_t n_diverged = 0;
  };
  std::vector<BoxGroup> groups;
  const std::array<std::string, 3> kAxes = {"training_size", "batch_size",
                                            "learning_rate"};
  for (Architecture arch : kAllArchitectures) {
    for (const std::string& axis : kAxes) {
      std::map<double, GroupData> by_value;
      for (const RunRecord& rec : records) {
        if (rec.architecture != arch || rec.skipped()) continue;
        double value = 0.0;
        if (axis == "training_size") value = static_cast<double>(rec.training_size);
        else if (axis == "batch_size") value = static_cast<double>(rec.batch_size);
        else value = rec.learning_rate;
        GroupData& data = by_value[value];
        if (rec.diverged())
          ++data.n_diverged;
        else
          data.tests.push_back(rec.test_mse);
      }
      for (const auto& [value, data] : by_value) {
        BoxGroup g;
        g.architecture = arch;
        g.hyperparameter = axis;
        g.value = value;
        g.n = static_cast<std::int64_t>(data.tests.size());
        g.n_diverged = data.n_diverged;
        if (g.n > 0) {
          g.min = quantile(data.tests, 0.0);
          g.q1 = quantile(data.tests, 0.25);
          g.median = quantile(data.tests, 0.5);
          g.q3 = quantile(data.tests, 0.75);
          g.max = quantile(data.tests, 1.0);
        } else {
          g.min = g.q1 = g.median = g.q3 = g.max =
              std::numeric_limits<double>::quiet_NaN();
        }
        groups.push_back(std::move(g));
      }
    }
  }
  return groups;
}

json BenchReport::to_json() const {
  json methods_json = json::array();
  for (const MethodTiming& m : methods)
    methods_json.push_back(json{{"method", m.method},
                                {"counts", m.counts},
                                {"seconds", m.seconds},
                                {"seconds_per_sample", m.seconds_per_sample}});
  return json{{"repetitions", repetitions}, {"methods", std::move(methods_json)}};
}

BenchReport benchmark_inference(const std::vector<model::Checkpoint>& models,
                                const grid::GridCase& grid,
                                const pf::SolverSettings& solver,
                                const std::vector<std::int64_t>& sample_counts,
                                int repetitions, std::uint64_t seed,
                                int solver_workers) {
  if (sample_counts.empty())
    throw ValidationError("benchmark needs at least one sample count");
  for (std::int64_t c : sample_counts)
    if (c <= 0) throw ValidationError("benchmark sample counts must be positive");
  if (repetitions < 5)
    throw ValidationError("benchmark needs at least 5 repetitions");
  grid::validate(grid);
  const std::string grid_fp = grid.fingerprint();
  for (const model::Checkpoint& ckpt : models)
    if (ckpt.grid.fingerprint() != grid_fp)
      throw ValidationError("checkpoint was trained on a different grid");

  std::vector<std::int64_t> counts = sample_counts;
  std::sort(counts.begin(), counts.end());
  const std::int64_t max_count = counts.back();

  // Fresh injection sets, redrawn until solvable so the solver timing is not
  // polluted by non-convergent throws.
  std::vector<pf::InjectionSet> injections(max_count);
  const datagen::SamplingRanges ranges;
  parallel_for(max_count, [&](std::int64_t i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    for (int attempt = 0;; ++attempt) {
      pf::InjectionSet inj = datagen::sample_injections(rng, grid, ranges);
      try {
        pf::solve(grid, inj, solver);
        injections[i] = std::move(inj);
        return;
      } catch (const pf::NonConvergenceError&) {
      } catch (const pf::SingularJacobianError&) {
      }
      if (attempt >= 1000)
        throw Error("benchmark injection sampling keeps failing to converge");
    }
  }, solver_workers);

  nn::Matrix x_raw(static_cast<int>(max_count), model::feature_width(grid));
  for (std::int64_t i = 0; i < max_count; ++i)
    model::encode_features(grid, injections[i], x_raw,
                           static_cast<int>(i));

  using Clock = std::chrono::steady_clock;
  constexpr int kChunk = 1024;
  BenchReport report;
  report.repetitions = repetitions;

  for (const model::Checkpoint& ckpt : models) {
    auto surrogate = model::surrogate_from_checkpoint(ckpt);
    MethodTiming timing;
    timing.method = model::to_string(ckpt.config.architecture);
    nn::Matrix x_prefix, z, xb, pred, out;
    for (std::int64_t count : counts) {
      x_prefix = nn::Matrix(static_cast<int>(count), x_raw.cols());
      std::memcpy(x_prefix.data(), x_raw.data(),
                  sizeof(double) * static_cast<std::size_t>(count) * x_raw.cols());
      auto run_once = [&] {
        ckpt.x_standardizer.transform(x_prefix, z);
        for (std::int64_t first = 0; first < count; first += kChunk) {
          const auto rows =
              static_cast<int>(std::min<std::int64_t>(kChunk, count - first));
          if (xb.rows() != rows || xb.cols() != z.cols())
            xb = nn::Matrix(rows, z.cols());
          std::memcpy(xb.data(),
                      z.data() + static_cast<std::size_t>(first) * z.cols(),
                      sizeof(double) * rows * z.cols());
          surrogate->forward(xb, pred);
          ckpt.y_standardizer.inverse_transform(pred, out);
        }
      };
      run_once();  // warm-up, discarded
      std::vector<double> times;
      times.reserve(repetitions);
      for (int rep = 0; rep < repetitions; ++rep) {
        const auto t0 = Clock::now();
        run_once();
        times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
      }
      const double median = quantile(times, 0.5);
      timing.counts.push_back(count);
      timing.seconds.push_back(median);
      timing.seconds_per_sample.push_back(median / static_cast<double>(count));
    }
    report.methods.push_back(std::move(timing));
  }

  MethodTiming nr;
  nr.method = "newton_raphson";
  for (std::int64_t count : counts) {
    auto run_once = [&] {
      parallel_for(count, [&](std::int64_t i) {
        pf::solve(grid, injections[i], solver);
      }, solver_workers);
    };
    run_once();  // warm-up, discarded
    std::vector<double> times;
    times.reserve(repetitions);
    for (int rep = 0; rep < repetitions; ++rep) {
      const auto t0 = Clock::now();
      run_once();
      times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    const double median = quantile(times, 0.5);
    nr.counts.push_back(count);
    nr.seconds.push_back(median);
    nr.seconds_per_sample.push_back(median / static_cast<double>(count));
  }
  report.methods.push_back(std::move(nr));
  return report;
}

void export_curves(const std::vector<RunRecord>& records,
                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  json runs_index = json::array();
  for (const RunRecord& rec : records) {
    if (rec.skipped()) continue;
    const std::string filename = rec.id + ".csv";
    std::ofstream out(out_dir / filename, std::ios::trunc);
    if (!out)
      throw IoError("cannot open file for writing: " +
                    (out_dir / filename).string());
    out << "epoch,train_mse,val_mse,seconds\n";
    char buf[32];
    for (const train::EpochStats& e : rec.history) {
      out << e.epoch;
      std::snprintf(buf, sizeof buf, "%.17g", e.train_mse);
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.17g", e.val_mse);
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.17g", e.seconds);
      out << ',' << buf << '\n';
    }
    if (!out) throw IoError("write failed: " + (out_dir / filename).string());
    runs_index.push_back(json{{"id", rec.id},
                              {"file", filename},
                              {"architecture", model::to_string(rec.architecture)},
                              {"status", rec.status}});
  }

  json best = json::object();
  for (const RankedTable& table : rank_runs(records, 1))
    best[model::to_string(table.architecture)] =
        table.rows.empty() ? json(nullptr) : json(table.rows.front().id);

  const json index{{"runs", std::move(runs_index)}, {"best_runs", std::move(best)}};
  const std::string text = index.dump(2);
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  write_file_atomic(out_dir / "index.json", bytes);
}

}  // namespace loadflow::experiments
