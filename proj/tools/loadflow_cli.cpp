// Command line front end: solve, generate, train, predict, sweep, report,
// bench.  Structured results go to stdout (JSON) or to files; progress goes
// to stderr.
#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "loadflow/dataset.hpp"
#include "loadflow/errors.hpp"
#include "loadflow/experiments.hpp"
#include "loadflow/grid.hpp"
#include "loadflow/models.hpp"
#include "loadflow/powerflow.hpp"
#include "loadflow/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw loadflow::IoError("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw loadflow::ParseError(path.string() + ": " + e.what());
  }
  return doc;
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw loadflow::IoError("cannot open " + path.string());
  out << text;
  if (!out) throw loadflow::IoError("short write to " + path.string());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_solve(const std::string& case_path, const std::string& inj_path,
              double tolerance, int max_iterations) {
  auto grid = loadflow::grid::load_grid_case(case_path);
  auto injections = loadflow::pf::make_base_injections(grid);
  if (!inj_path.empty())
    injections =
        loadflow::pf::injections_from_json(grid, load_json_file(inj_path));
  loadflow::pf::SolverSettings settings;
  settings.tolerance = tolerance;
  settings.max_iterations = max_iterations;
  auto solution = loadflow::pf::solve(grid, injections, settings);
  std::cout << solution.to_json(grid).dump(2) << "\n";
  return 0;
}

int cmd_generate(const std::string& case_path, std::int64_t n,
                 std::uint64_t seed, const std::string& out_path,
                 const std::string& ranges_path, bool csv, int workers) {
  auto grid = loadflow::grid::load_grid_case(case_path);
  loadflow::datagen::SamplingRanges ranges;
  if (!ranges_path.empty())
    ranges =
        loadflow::datagen::sampling_ranges_from_json(load_json_file(ranges_path));
  auto dataset =
      loadflow::datagen::generate_dataset(grid, n, seed, ranges, {}, workers);
  loadflow::datagen::write_dataset(dataset, out_path);
  if (csv)
    loadflow::datagen::export_csv(dataset,
                                  fs::path(out_path).replace_extension(".csv"));
  json summary{{"samples", dataset.n_samples},
               {"columns", dataset.n_cols()},
               {"discarded", dataset.discarded},
               {"fingerprint", dataset.fingerprint()},
               {"file", out_path}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_train(const std::string& arch_name, const std::string& data_path,
              double lr, int bs, std::int64_t subset, std::uint64_t seed,
              int epochs, const std::string& out_path,
              const std::string& curve_path) {
  auto dataset = loadflow::datagen::read_dataset(data_path);
  loadflow::model::ModelConfig config;
  config.architecture = loadflow::model::architecture_from_string(arch_name);
  loadflow::train::TrainingSettings settings;
  settings.learning_rate = lr;
  settings.batch_size = bs;
  settings.training_subset_size = subset;
  settings.max_epochs = epochs;

  std::string curves = "epoch,train_mse,val_mse,seconds\n";
  auto result = loadflow::train::train_surrogate(
      dataset, config, settings, seed,
      [&](const loadflow::train::EpochStats& e) {
        curves += std::to_string(e.epoch) + "," + format_double(e.train_mse) +
                  "," + format_double(e.val_mse) + "," +
                  format_double(e.seconds) + "\n";
        std::fprintf(stderr, "epoch %3d  train %.6f  val %.6f  (%.2fs)\n",
                     e.epoch, e.train_mse, e.val_mse, e.seconds);
      });

  if (!out_path.empty())
    loadflow::model::write_checkpoint(result.checkpoint, out_path);
  if (!curve_path.empty()) write_text_file(curve_path, curves);

  json summary{{"architecture", arch_name},
               {"epochs_run", result.epochs_run},
               {"best_epoch", result.best_epoch},
               {"diverged", result.diverged},
               {"train_seconds", result.train_seconds}};
  summary["best_val_mse"] =
      std::isfinite(result.best_val_mse) ? json(result.best_val_mse) : json();
  summary["final_val_mse"] =
      std::isfinite(result.final_val_mse) ? json(result.final_val_mse) : json();
  summary["test_mse"] =
      result.diverged ? json() : json(result.test_mse);
  if (!out_path.empty()) summary["checkpoint"] = out_path;
  std::cout << summary.dump(2) << "\n";
  return result.diverged ? 1 : 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::string& out_path) {
  auto ckpt = loadflow::model::read_checkpoint(ckpt_path);
  auto dataset = loadflow::datagen::read_dataset(data_path);
  if (dataset.grid.fingerprint() != ckpt.grid.fingerprint())
    throw loadflow::ValidationError(
        "dataset grid does not match the checkpoint grid");
  auto model = loadflow::model::surrogate_from_checkpoint(ckpt);

  loadflow::nn::Matrix x, y;
  loadflow::model::encode_dataset(dataset, x, y);
  ckpt.x_standardizer.transform(x, x);

  const int width = loadflow::model::target_width(dataset.grid);
  std::string csv;
  {
    // Header mirrors the per-bus target layout.
    std::vector<std::string> names(width);
    for (int i = 0; i < dataset.grid.n_buses(); ++i) {
      const auto& bus = dataset.grid.buses[static_cast<std::size_t>(i)];
      const std::string tag = "b" + std::to_string(bus.id) + ".";
      const char* fields[3] = {nullptr, nullptr, nullptr};
      switch (bus.type) {
        case loadflow::grid::BusType::kSlack:
          fields[0] = "p_mw", fields[1] = "q_mvar", fields[2] = "v_mag_pu";
          break;
        case loadflow::grid::BusType::kPv:
          fields[0] = "q_mvar", fields[1] = "v_real_pu", fields[2] = "v_imag_pu";
          break;
        case loadflow::grid::BusType::kPq:
          fields[0] = "v_mag_pu", fields[1] = "v_real_pu", fields[2] = "v_imag_pu";
          break;
      }
      for (int k = 0; k < 3; ++k)
        names[static_cast<std::size_t>(3 * i + k)] = tag + fields[k];
    }
    for (int c = 0; c < width; ++c) csv += (c ? "," : "") + names[c];
    csv += "\n";
  }

  loadflow::nn::Matrix pred;
  const int chunk = 4096;
  for (std::int64_t row = 0; row < dataset.n_samples; row += chunk) {
    const int b =
        static_cast<int>(std::min<std::int64_t>(chunk, dataset.n_samples - row));
    loadflow::nn::Matrix xb(b, x.cols());
    std::copy(x.data() + row * x.cols(), x.data() + (row + b) * x.cols(),
              xb.data());
    model->forward(xb, pred);
    ckpt.y_standardizer.inverse_transform(pred, pred);
    for (int r = 0; r < b; ++r) {
      for (int c = 0; c < width; ++c)
        csv += (c ? "," : "") + format_double(pred.at(r, c));
      csv += "\n";
    }
  }
  if (out_path.empty())
    std::cout << csv;
  else
    write_text_file(out_path, csv);
  return 0;
}

int cmd_sweep(const std::string& data_path, const std::string& grid_path,
              const std::string& out_dir, bool full, int epochs, int workers,
              bool keep_checkpoints) {
  auto dataset = loadflow::datagen::read_dataset(data_path);
  loadflow::experiments::SweepGrid grid =
      full ? loadflow::experiments::full_grid()
           : loadflow::experiments::desk_scale_grid();
  if (!grid_path.empty())
    grid = loadflow::experiments::sweep_grid_from_json(load_json_file(grid_path));
  loadflow::experiments::SweepOptions options;
  options.max_epochs = epochs;
  options.workers = workers;
  options.keep_checkpoints = keep_checkpoints;
  std::size_t done = 0;
  const std::size_t total = grid.n_cells();
  options.on_record = [&](const loadflow::experiments::RunRecord& r) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s  %s\n", done, total, r.id.c_str(),
                 r.status.c_str());
  };
  auto records = loadflow::experiments::run_sweep(dataset, grid, out_dir, options);
  std::int64_t ok = 0, diverged = 0, skipped = 0;
  for (const auto& r : records) {
    ok += r.ok();
    diverged += r.diverged();
    skipped += r.skipped();
  }
  json summary{{"cells", records.size()},
               {"ok", ok},
               {"diverged", diverged},
               {"skipped", skipped},
               {"out_dir", out_dir}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

std::string boxplots_csv(const std::vector<loadflow::experiments::BoxGroup>& groups) {
  std::string csv =
      "architecture,hyperparameter,value,n,n_diverged,min,q1,median,q3,max\n";
  for (const auto& g : groups) {
    csv += loadflow::model::to_string(g.architecture) + "," + g.hyperparameter +
           "," + format_double(g.value) + "," + std::to_string(g.n) + "," +
           std::to_string(g.n_diverged);
    for (double v : {g.min, g.q1, g.median, g.q3, g.max})
      csv += "," + (g.n > 0 ? format_double(v) : std::string());
    csv += "\n";
  }
  return csv;
}

int cmd_report(const std::string& runs_dir, bool ranking, bool boxplots,
               bool curves, std::size_t top_k, const std::string& out_dir) {
  auto records = loadflow::experiments::load_run_records(runs_dir);
  if (records.empty())
    throw loadflow::ValidationError("no run records under " + runs_dir);
  const fs::path out = out_dir.empty() ? fs::path(runs_dir) : fs::path(out_dir);
  json summary{{"runs", records.size()}};

  if (ranking) {
    auto tables = loadflow::experiments::rank_runs(records, top_k);
    std::string csv =
        "architecture,rank,final_val_mse,test_mse,training_size,batch_size,"
        "learning_rate,seed,epochs_run,best_epoch\n";
    for (const auto& table : tables) {
      int rank = 0;
      for (const auto& r : table.rows) {
        csv += loadflow::model::to_string(table.architecture) + "," +
               std::to_string(++rank) + "," + format_double(r.final_val_mse) +
               "," + format_double(r.test_mse) + "," +
               std::to_string(r.training_size) + "," +
               std::to_string(r.batch_size) + "," +
               format_double(r.learning_rate) + "," + std::to_string(r.seed) +
               "," + std::to_string(r.epochs_run) + "," +
               std::to_string(r.best_epoch) + "\n";
      }
    }
    write_text_file(out / "ranking.csv", csv);
    summary["ranking"] = (out / "ranking.csv").string();
  }
  if (boxplots) {
    auto groups = loadflow::experiments::aggregate_boxplots(records);
    write_text_file(out / "boxplots.csv", boxplots_csv(groups));
    summary["boxplots"] = (out / "boxplots.csv").string();
  }
  if (curves) {
    loadflow::experiments::export_curves(records, out / "curves");
    summary["curves"] = (out / "curves").string();
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_bench(const std::string& case_path, const std::string& ckpts_dir,
              const std::string& counts_arg, int repetitions,
              std::uint64_t seed, const std::string& out_path) {
  auto grid = loadflow::grid::load_grid_case(case_path);

  std::vector<loadflow::model::Checkpoint> models;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(ckpts_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ckpt")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files)
    models.push_back(loadflow::model::read_checkpoint(file));
  if (models.empty())
    throw loadflow::ValidationError("no .ckpt files under " + ckpts_dir);

  std::vector<std::int64_t> counts;
  {
    std::stringstream ss(counts_arg);
    std::string token;
    while (std::getline(ss, token, ','))
      if (!token.empty()) counts.push_back(std::stoll(token));
  }

  auto report = loadflow::experiments::benchmark_inference(
      models, grid, {}, counts, repetitions, seed);
  const std::string text = report.to_json().dump(2) + "\n";
  if (!out_path.empty()) write_text_file(out_path, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC load-flow solver and neural surrogate toolkit"};
  app.require_subcommand(1);

  // solve
  std::string case_path, inj_path;
  double tolerance = 1e-8;
  int max_iterations = 50;
  auto* solve = app.add_subcommand("solve", "Solve one load-flow case");
  solve->add_option("--case", case_path, "Grid case file")->required();
  solve->add_option("--inj", inj_path, "Injections JSON file");
  solve->add_option("--tolerance", tolerance, "Convergence tolerance (p.u.)");
  solve->add_option("--max-iterations", max_iterations, "Newton iteration cap");

  // generate
  std::string gen_case, gen_out, gen_ranges;
  std::int64_t gen_n = 0;
  std::uint64_t gen_seed = 0;
  bool gen_csv = false;
  int gen_workers = 0;
  auto* generate =
      app.add_subcommand("generate", "Sample and solve a dataset");
  generate->add_option("--case", gen_case, "Grid case file")->required();
  generate->add_option("--n", gen_n, "Number of samples")->required();
  generate->add_option("--seed", gen_seed, "Sampling seed")->required();
  generate->add_option("--out", gen_out, "Output dataset file")->required();
  generate->add_option("--ranges", gen_ranges, "Sampling ranges JSON file");
  generate->add_flag("--csv", gen_csv, "Also export a CSV copy");
  generate->add_option("--workers", gen_workers,
                       "Worker threads (0 = hardware)");

  // train
  std::string tr_arch, tr_data, tr_out, tr_curves;
  double tr_lr = 1e-3;
  int tr_bs = 32, tr_epochs = 50;
  std::int64_t tr_subset = 0;
  std::uint64_t tr_seed = 0;
  auto* train = app.add_subcommand("train", "Train one surrogate");
  train->add_option("--arch", tr_arch, "mlp | gnn1 | gnn2")->required();
  train->add_option("--data", tr_data, "Dataset file")->required();
  train->add_option("--lr", tr_lr, "Learning rate");
  train->add_option("--bs", tr_bs, "Batch size");
  train->add_option("--subset", tr_subset,
                    "Training subset size (0 = full train split)");
  train->add_option("--seed", tr_seed, "Init/shuffle seed");
  train->add_option("--epochs", tr_epochs, "Epoch cap");
  train->add_option("--out", tr_out, "Checkpoint output path");
  train->add_option("--curves", tr_curves, "Epoch-curve CSV output path");

  // predict
  std::string pr_ckpt, pr_data, pr_out;
  auto* predict =
      app.add_subcommand("predict", "Run a trained surrogate over a dataset");
  predict->add_option("--ckpt", pr_ckpt, "Checkpoint file")->required();
  predict->add_option("--data", pr_data, "Dataset file")->required();
  predict->add_option("--out", pr_out, "Prediction CSV path (default stdout)");

  // sweep
  std::string sw_data, sw_grid, sw_out;
  bool sw_full = false, sw_keep = false;
  int sw_epochs = 50, sw_workers = 1;
  auto* sweep = app.add_subcommand("sweep", "Run the hyperparameter sweep");
  sweep->add_option("--data", sw_data, "Dataset file")->required();
  sweep->add_option("--out", sw_out, "Output directory")->required();
  sweep->add_option("--grid", sw_grid, "Sweep grid JSON file");
  sweep->add_flag("--full", sw_full, "Use the full-scale grid");
  sweep->add_option("--epochs", sw_epochs, "Epoch cap per run");
  sweep->add_option("--workers", sw_workers, "Cells trained concurrently");
  sweep->add_flag("--keep-checkpoints", sw_keep, "Persist run checkpoints");

  // report
  std::string rp_runs, rp_out;
  bool rp_ranking = false, rp_boxplots = false, rp_curves = false;
  std::size_t rp_top = 10;
  auto* report = app.add_subcommand("report", "Summarize sweep results");
  report->add_option("--runs", rp_runs, "Sweep output directory")->required();
  report->add_flag("--ranking", rp_ranking, "Write the per-architecture ranking");
  report->add_flag("--boxplots", rp_boxplots, "Write boxplot statistics");
  report->add_flag("--curves", rp_curves, "Write per-run loss curves");
  report->add_option("--top", rp_top, "Rows per architecture in the ranking");
  report->add_option("--out", rp_out, "Report directory (default: runs dir)");

  // bench
  std::string bn_case, bn_ckpts, bn_out;
  std::string bn_counts = "10,100,1000,10000";
  int bn_reps = 5;
  std::uint64_t bn_seed = 1;
  auto* bench =
      app.add_subcommand("bench", "Time surrogate inference vs the solver");
  bench->add_option("--case", bn_case, "Grid case file")->required();
  bench->add_option("--ckpts", bn_ckpts, "Directory of .ckpt files")->required();
  bench->add_option("--counts", bn_counts, "Comma-separated sample counts");
  bench->add_option("--reps", bn_reps, "Repetitions per timing (median)");
  bench->add_option("--seed", bn_seed, "Injection sampling seed");
  bench->add_option("--out", bn_out, "Report JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return cmd_solve(case_path, inj_path, tolerance, max_iterations);
    if (generate->parsed())
      return cmd_generate(gen_case, gen_n, gen_seed, gen_out, gen_ranges,
                          gen_csv, gen_workers);
    if (train->parsed())
      return cmd_train(tr_arch, tr_data, tr_lr, tr_bs, tr_subset, tr_seed,
                       tr_epochs, tr_out, tr_curves);
    if (predict->parsed()) return cmd_predict(pr_ckpt, pr_data, pr_out);
    if (sweep->parsed())
      return cmd_sweep(sw_data, sw_grid, sw_out, sw_full, sw_epochs,
                       sw_workers, sw_keep);
    if (report->parsed())
      return cmd_report(rp_runs, rp_ranking, rp_boxplots, rp_curves, rp_top,
                        rp_out);
    if (bench->parsed())
      return cmd_bench(bn_case, bn_ckpts, bn_counts, bn_reps, bn_seed, bn_out);
  } catch (const loadflow::pf::NonConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
