// Acceptance gate: nine go/no-go checks spanning the solver, the dataset
// pipeline, the three surrogate architectures, the training protocol, and
// the study harness.  Each criterion prints exactly one PASS/FAIL line on
// stdout; progress chatter goes to stderr.  Heavy shared state (the study
// dataset and its 36-run sweep) is cached under a temp directory, so an
// interrupted invocation resumes instead of retraining.
//
// Usage: loadflow_acceptance [criterion numbers...]
//   (no arguments runs all nine)
// Environment: LOADFLOW_ACCEPT_FULL=1 additionally runs the 500,000-case
// GNN1 training inside criterion 6 (roughly half an hour of extra compute).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "loadflow/dataset.hpp"
#include "loadflow/errors.hpp"
#include "loadflow/experiments.hpp"
#include "loadflow/grid.hpp"
#include "loadflow/models.hpp"
#include "loadflow/nn.hpp"
#include "loadflow/powerflow.hpp"
#include "loadflow/rng.hpp"
#include "loadflow/training.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

using loadflow::Rng;
using loadflow::datagen::Dataset;
using loadflow::experiments::RunRecord;
using loadflow::grid::BusType;
using loadflow::grid::GridCase;
using loadflow::model::Architecture;
using loadflow::nn::Matrix;

namespace {

// ---------------------------------------------------------------------------
// Small utilities

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

GridCase five_bus() {
  return loadflow::grid::load_grid_case(LOADFLOW_SOURCE_DIR
                                        "/data/ieee5_modified.case");
}

Matrix random_features(Rng& rng, int rows, int cols) {
  Matrix x(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) x.at(r, c) = rng.uniform_real(-1.0, 1.0);
  return x;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

// Median over a small value set (the study uses three seeds per cell).
double median(std::vector<double> values) {
  return loadflow::experiments::quantile(std::move(values), 0.5);
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared study state for criteria 5, 6, and 7.
//
// One dataset (72,000 cases: the 70% train split holds 50,400 rows, enough
// for the largest 50,000-row training subset) and one sweep over
//   sizes {500, 5000, 50000} x bs 32 x 3 seeds
//   mlp, gnn1 at lr 1e-3; gnn2 at lr 1e-3 and 1e-4
// = 36 runs, each capped at the protocol's 50 epochs with best-val
// checkpointing.  Records and checkpoints persist under the cache root, so
// rerunning the binary resumes completed cells by dataset fingerprint.

constexpr std::int64_t kStudySamples = 72000;
constexpr std::uint64_t kStudySeed = 101;
constexpr std::int64_t kStudySizes[] = {500, 5000, 50000};

struct Ctx {
  bool full_flag = false;
  fs::path root;
  GridCase grid5;

  std::optional<Dataset> study_ds;
  std::vector<RunRecord> study_runs;

  const Dataset& study_dataset() {
    if (!study_ds) study_ds = cached_dataset("desk", kStudySamples, kStudySeed);
    return *study_ds;
  }

  Dataset cached_dataset(const std::string& tag, std::int64_t n,
                         std::uint64_t seed) {
    const fs::path path =
        root / (tag + "-" + std::to_string(n) + "-seed" + std::to_string(seed) +
                ".lfds");
    if (fs::exists(path)) {
      try {
        Dataset ds = loadflow::datagen::read_dataset(path);
        if (ds.n_samples == n && ds.seed == seed) {
          std::fprintf(stderr, "  [study] reusing dataset %s\n",
                       path.string().c_str());
          return ds;
        }
      } catch (const loadflow::Error&) {
        // Corrupt or stale cache: fall through and regenerate.
      }
    }
    std::fprintf(stderr, "  [study] generating %lld cases (seed %llu)...\n",
                 static_cast<long long>(n),
                 static_cast<unsigned long long>(seed));
    Dataset ds = loadflow::datagen::generate_dataset(grid5, n, seed);
    loadflow::datagen::write_dataset(ds, path);
    return ds;
  }

  const std::vector<RunRecord>& runs() {
    if (!study_runs.empty()) return study_runs;
    const Dataset& ds = study_dataset();

    loadflow::experiments::SweepOptions options;
    options.keep_checkpoints = true;  // criterion 7 benchmarks the winners
    options.workers = 1;
    options.on_record = [](const RunRecord& rec) {
      std::fprintf(stderr, "  [sweep] %-34s %-8s final_val=%s (%.1f s)\n",
                   rec.id.c_str(), rec.status.c_str(),
                   fmt("%.3e", rec.final_val_mse).c_str(), rec.train_seconds);
    };

    loadflow::experiments::SweepGrid main_grid;
    main_grid.training_sizes.assign(std::begin(kStudySizes),
                                    std::end(kStudySizes));
    main_grid.batch_sizes = {32};
    main_grid.learning_rates = {1e-3};
    main_grid.architectures = {Architecture::kMlp, Architecture::kGnn1};
    main_grid.seeds = {1, 2, 3};

    loadflow::experiments::SweepGrid gnn2_grid = main_grid;
    gnn2_grid.learning_rates = {1e-3, 1e-4};
    gnn2_grid.architectures = {Architecture::kGnn2};

    const fs::path sweep_dir = root / "sweep";
    study_runs = loadflow::experiments::run_sweep(ds, main_grid, sweep_dir,
                                                  options);
    auto more = loadflow::experiments::run_sweep(ds, gnn2_grid, sweep_dir,
                                                 options);
    study_runs.insert(study_runs.end(), std::make_move_iterator(more.begin()),
                      std::make_move_iterator(more.end()));
    return study_runs;
  }

  // The run a practitioner would deploy for (arch, size, seed): the ok run
  // with the lowest final validation MSE across the swept learning rates
  // (only gnn2 has more than one).  Null when every candidate failed.
  const RunRecord* pick(Architecture arch, std::int64_t size,
                        std::uint64_t seed) {
    const RunRecord* best = nullptr;
    for (const RunRecord& rec : runs()) {
      if (rec.architecture != arch || rec.training_size != size ||
          rec.seed != seed || !rec.ok())
        continue;
      if (!best || rec.final_val_mse < best->final_val_mse ||
          (rec.final_val_mse == best->final_val_mse &&
           rec.learning_rate < best->learning_rate))
        best = &rec;
    }
    return best;
  }

  // Per-seed test MSEs of the picked runs; nullopt when a seed has no
  // successful run (which the calling criterion reports as a failure).
  std::optional<std::vector<double>> test_mses(Architecture arch,
                                               std::int64_t size) {
    std::vector<double> out;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const RunRecord* rec = pick(arch, size, seed);
      if (!rec) return std::nullopt;
      out.push_back(rec->test_mse);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Criterion 1: every sample of a fresh 10,000-case dataset re-validates at
// max mismatch <= 1e-8 p.u., and active power balances (generation = load +
// network losses, losses >= 0) to 1e-8 p.u., all inside one minute.

// Series I^2 R losses summed over branches, computed longhand from the
// solved voltages (shunt charging is purely susceptive, so it carries no
// active power).
double branch_losses_pu(const GridCase& grid,
                        const loadflow::pf::PowerFlowSolution& sol) {
  double total = 0.0;
  for (const auto& br : grid.branches) {
    const int f = grid.index_of(br.from_bus);
    const int t = grid.index_of(br.to_bus);
    const std::complex<double> vf(sol.v_real[f], sol.v_imag[f]);
    const std::complex<double> vt(sol.v_real[t], sol.v_imag[t]);
    const std::complex<double> series = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> current = (vf - vt) * series;
    total += std::norm(current) * br.r;
  }
  return total;
}

Outcome criterion_solver_correctness(Ctx& ctx) {
  const auto t0 = Clock::now();
  const Dataset ds =
      loadflow::datagen::generate_dataset(ctx.grid5, 10000, 424242);

  double worst_mismatch = 0.0;
  double worst_balance = 0.0;
  double min_losses = std::numeric_limits<double>::infinity();
  for (std::int64_t row = 0; row < ds.n_samples; ++row) {
    const auto inj = ds.injections_at(row);
    const auto sol = ds.solution_at(row);
    std::vector<std::complex<double>> v(sol.v_real.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = {sol.v_real[i], sol.v_imag[i]};
    worst_mismatch = std::max(
        worst_mismatch,
        loadflow::pf::compute_mismatch(ds.grid, inj, v).max_abs());

    double net_pu = 0.0;  // sum of net injections = what the network absorbs
    for (double p_mw : sol.p_mw) net_pu += p_mw / ds.grid.s_base_mva;
    const double losses = branch_losses_pu(ds.grid, sol);
    worst_balance = std::max(worst_balance, std::abs(net_pu - losses));
    min_losses = std::min(min_losses, losses);
  }
  const double elapsed = seconds_since(t0);

  const bool pass = worst_mismatch <= 1e-8 && worst_balance <= 1e-8 &&
                    min_losses >= 0.0 && elapsed < 60.0;
  return {pass, "10000 cases: max re-validated mismatch " +
                    fmt("%.2e", worst_mismatch) +
                    " p.u. (<= 1e-8), max |gen - load - losses| " +
                    fmt("%.2e", worst_balance) + " p.u. (<= 1e-8), min losses " +
                    fmt("%.2e", min_losses) + " p.u. (>= 0), " +
                    fmt("%.1f", elapsed) + " s (< 60)"};
}

// ---------------------------------------------------------------------------
// Criterion 2: Newton-Raphson voltages match the independent Gauss-Seidel
// fixed point to 1e-7 p.u. on 100 random 2-4 bus cases.

Outcome criterion_oracle_equivalence(Ctx&) {
  Rng rng(909, 0);
  loadflow::pf::SolverSettings settings;
  settings.tolerance = 1e-10;
  settings.max_iterations = 60;

  int solved = 0, attempts = 0;
  double worst = 0.0;
  while (solved < 100) {
    if (++attempts > 300)
      return {false, "only " + std::to_string(solved) +
                         " of 100 cases solvable in 300 attempts"};
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 2));
    const GridCase grid = testsupport::random_grid(rng, n);
    const auto inj = testsupport::random_injections(rng, grid);

    loadflow::pf::PowerFlowSolution sol;
    try {
      sol = loadflow::pf::solve(grid, inj, settings);
    } catch (const loadflow::pf::NonConvergenceError&) {
      continue;  // infeasible draw; does not count toward the 100
    }
    const auto gs = testsupport::gauss_seidel_solve(grid, inj, 1e-12);
    if (!gs.converged)
      return {false, "Gauss-Seidel oracle failed to converge on a case "
                     "Newton-Raphson solved (" +
                         grid.name + ")"};
    for (int i = 0; i < grid.n_buses(); ++i) {
      worst = std::max(worst, std::abs(sol.v_real[i] - gs.v[i].real()));
      worst = std::max(worst, std::abs(sol.v_imag[i] - gs.v[i].imag()));
    }
    ++solved;
  }
  return {worst <= 1e-7, "100 random 2-4 bus cases: max |V_NR - V_GS| " +
                             fmt("%.2e", worst) + " p.u. (<= 1e-7)"};
}

// ---------------------------------------------------------------------------
// Criterion 3: analytic gradients of all three architectures (MLP 10-64-15;
// GNNs at d=8, K=2 on the 5-bus case) match central finite differences to
// relative error < 1e-5 on every parameter, over 21 random instances.

Outcome criterion_gradient_exactness(Ctx& ctx) {
  double worst = 0.0;
  int instances = 0;
  const Architecture archs[] = {Architecture::kMlp, Architecture::kGnn1,
                                Architecture::kGnn2};
  for (int a = 0; a < 3; ++a) {
    loadflow::model::ModelConfig config;
    config.architecture = archs[a];
    config.hidden_width = 64;
    config.embedding_dim = 8;
    config.propagation_steps = 2;
    for (int i = 0; i < 7; ++i) {
      const auto model = loadflow::model::make_surrogate(
          ctx.grid5, config, 1000 + static_cast<std::uint64_t>(a) * 100 + i);
      Rng rng(271828, static_cast<std::uint64_t>(a) * 100 + i);
      const Matrix x = random_features(rng, 4, 10);
      const Matrix target = random_features(rng, 4, 15);
      worst = std::max(worst, testsupport::max_gradient_error(*model, x, target));
      ++instances;
    }
  }
  return {worst < 1e-5, std::to_string(instances) +
                            " instances across mlp/gnn1/gnn2: worst relative "
                            "gradient error " +
                            fmt("%.2e", worst) + " (< 1e-5)"};
}

// ---------------------------------------------------------------------------
// Criterion 4: architecture invariants.
//   (a) zero propagation weights make message passing the identity for any
//       round count (predictions independent of K);
//   (b) the degree-normalized adjacency has unit row sums;
//   (c) same-type buses with identical features and symmetric positions get
//       identical embeddings, observed through the shared per-type decoder
//       of GNN2 as identical per-bus output blocks.

GridCase star_grid() {
  GridCase grid;
  grid.name = "star-4";
  grid.s_base_mva = 100.0;
  for (int i = 1; i <= 4; ++i) {
    loadflow::grid::BusSpec bus;
    bus.id = i;
    bus.type = i == 1 ? BusType::kSlack : BusType::kPq;
    bus.v_set = 1.02;
    grid.buses.push_back(bus);
  }
  for (int leaf = 2; leaf <= 4; ++leaf) {
    loadflow::grid::BranchSpec br;
    br.from_bus = 1;
    br.to_bus = leaf;
    br.r = 0.01;
    br.x = 0.1;
    grid.branches.push_back(br);
  }
  loadflow::grid::validate(grid);
  return grid;
}

Outcome criterion_architecture_invariants(Ctx& ctx) {
  // (a) K-independence under W = 0, for both GNN decoders.
  Rng rng(8888, 0);
  const Matrix x5 = random_features(rng, 3, 10);
  double worst_identity = 0.0;
  for (Architecture arch : {Architecture::kGnn1, Architecture::kGnn2}) {
    Matrix reference;
    for (int k : {1, 2, 5, 9}) {
      loadflow::model::ModelConfig config;
      config.architecture = arch;
      config.embedding_dim = 8;
      config.propagation_steps = k;
      const auto model = loadflow::model::make_surrogate(ctx.grid5, config, 77);
      model->params().get("prop.w").value.fill(0.0);
      Matrix pred;
      model->forward(x5, pred);
      if (k == 1)
        reference = pred;
      else
        worst_identity = std::max(worst_identity, max_abs_diff(pred, reference));
    }
  }

  // (b) Unit row sums of the normalized adjacency, on the 5-bus case and a
  // spread of random connected topologies.
  double worst_row = 0.0;
  Rng grid_rng(4242, 0);
  std::vector<GridCase> grids = {ctx.grid5, star_grid()};
  for (int i = 0; i < 10; ++i)
    grids.push_back(testsupport::random_grid(
        grid_rng, 2 + static_cast<int>(grid_rng.uniform_int(0, 4))));
  for (const GridCase& grid : grids) {
    const auto norm = loadflow::grid::normalize_adjacency(
        loadflow::grid::build_adjacency(loadflow::grid::build_admittance(grid)));
    for (int i = 0; i < norm.n; ++i) {
      double row = 0.0;
      for (int j = 0; j < norm.n; ++j) row += norm.at(i, j);
      worst_row = std::max(worst_row, std::abs(row - 1.0));
    }
  }

  // (c) Star case: three PQ leaves with equal loads and identical lines.
  // Their GNN2 output blocks must match pairwise -- with W = 0 (pure
  // embeddings through the shared decoder) and with the full propagation.
  const GridCase star = star_grid();
  auto inj = loadflow::pf::make_base_injections(star);
  for (int leaf = 1; leaf <= 3; ++leaf) {
    inj.buses[leaf].p_load_mw = 30.0;
    inj.buses[leaf].q_load_mvar = 10.0;
  }
  Matrix xs(1, loadflow::model::feature_width(star));
  loadflow::model::encode_features(star, inj, xs, 0);

  double worst_block = 0.0;
  for (bool zero_w : {false, true}) {
    loadflow::model::ModelConfig config;
    config.architecture = Architecture::kGnn2;
    config.embedding_dim = 8;
    config.propagation_steps = 3;
    const auto model = loadflow::model::make_surrogate(star, config, 5);
    if (zero_w) model->params().get("prop.w").value.fill(0.0);
    Matrix pred;
    model->forward(xs, pred);
    for (int leaf = 2; leaf <= 3; ++leaf)  // compare bus indices 2,3 to 1
      for (int c = 0; c < 3; ++c)
        worst_block = std::max(
            worst_block,
            std::abs(pred.at(0, 3 * leaf + c) - pred.at(0, 3 * 1 + c)));
  }

  const bool pass =
      worst_identity <= 1e-15 && worst_row <= 1e-12 && worst_block <= 1e-14;
  return {pass, "W=0 identity across K in {1,2,5,9}: max deviation " +
                    fmt("%.1e", worst_identity) +
                    " (<= 1e-15); adjacency row sums off by " +
                    fmt("%.1e", worst_row) +
                    " (<= 1e-12); symmetric-leaf GNN2 blocks differ by " +
                    fmt("%.1e", worst_block) + " (<= 1e-14)"};
}

// ---------------------------------------------------------------------------
// Criterion 5: median test MSE strictly decreases over training sizes
// 500 -> 5000 -> 50000 for every architecture (3 seeds, bs 32, lr 1e-3;
// gnn2 additionally swept at 1e-4 with the validation split choosing).

Outcome criterion_sample_efficiency(Ctx& ctx) {
  bool pass = true;
  std::string detail;
  for (Architecture arch :
       {Architecture::kMlp, Architecture::kGnn1, Architecture::kGnn2}) {
    std::vector<double> medians;
    for (std::int64_t size : kStudySizes) {
      const auto mses = ctx.test_mses(arch, size);
      if (!mses) {
        return {false, "no successful " + loadflow::model::to_string(arch) +
                           " run at size " + std::to_string(size) +
                           " for every seed"};
      }
      medians.push_back(median(*mses));
    }
    const bool monotone = medians[0] > medians[1] && medians[1] > medians[2];
    pass = pass && monotone;
    if (!detail.empty()) detail += "; ";
    detail += loadflow::model::to_string(arch) + " " + fmt("%.2e", medians[0]) +
              " > " + fmt("%.2e", medians[1]) + " > " + fmt("%.2e", medians[2]) +
              (monotone ? "" : " NOT MONOTONE");
  }
  return {pass, "median test MSE over sizes 500/5000/50000: " + detail};
}

// ---------------------------------------------------------------------------
// Criterion 6: at 50,000 training cases every architecture reaches median
// test MSE <= 1e-3; with LOADFLOW_ACCEPT_FULL=1, a 500,000-case GNN1 run
// must reach test MSE <= 1e-4.

Outcome criterion_desk_accuracy(Ctx& ctx) {
  bool pass = true;
  std::string detail = "median test MSE at 50000: ";
  for (Architecture arch :
       {Architecture::kMlp, Architecture::kGnn1, Architecture::kGnn2}) {
    const auto mses = ctx.test_mses(arch, 50000);
    if (!mses) {
      return {false, "no successful " + loadflow::model::to_string(arch) +
                         " run at size 50000 for every seed"};
    }
    const double m = median(*mses);
    pass = pass && m <= 1e-3;
    detail += loadflow::model::to_string(arch) + " " + fmt("%.2e", m) +
              (m <= 1e-3 ? "" : " ABOVE 1e-3") + " ";
  }
  detail += "(bar 1e-3)";

  if (!ctx.full_flag) {
    std::printf("NOTE  criterion 6 full-grid check skipped: set "
                "LOADFLOW_ACCEPT_FULL=1 to train GNN1 on 500000 cases "
                "(bar 1e-4)\n");
    return {pass, detail};
  }

  // Full-grid leg: a 715,000-case dataset gives a 500,500-row train split.
  const Dataset full = ctx.cached_dataset("full", 715000, 202);
  loadflow::experiments::SweepGrid grid;
  grid.training_sizes = {500000};
  grid.batch_sizes = {32};
  grid.learning_rates = {1e-3};
  grid.architectures = {Architecture::kGnn1};
  grid.seeds = {1};
  loadflow::experiments::SweepOptions options;
  options.workers = 1;
  options.on_record = [](const RunRecord& rec) {
    std::fprintf(stderr, "  [full] %s %s test=%s (%.1f s)\n", rec.id.c_str(),
                 rec.status.c_str(), fmt("%.3e", rec.test_mse).c_str(),
                 rec.train_seconds);
  };
  const auto records = loadflow::experiments::run_sweep(
      full, grid, ctx.root / "sweep-full", options);
  const RunRecord& rec = records.at(0);
  const bool full_ok = rec.ok() && rec.test_mse <= 1e-4;
  pass = pass && full_ok;
  detail += "; full 500000-case gnn1 test MSE " +
            (rec.ok() ? fmt("%.2e", rec.test_mse) : rec.status) +
            " (bar 1e-4)";
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// Criterion 7: inference benchmark at 10,000 samples.  Median timings must
// order time(MLP) < time(GNN1) and time(GNN2) < time(N-R), with the MLP
// speedup over Newton-Raphson exceeding 20x.  One core, the solver runs
// sequentially, surrogates run batched -- both sides single-threaded.

Outcome criterion_inference_benchmark(Ctx& ctx) {
  std::vector<loadflow::model::Checkpoint> checkpoints;
  for (Architecture arch :
       {Architecture::kMlp, Architecture::kGnn1, Architecture::kGnn2}) {
    const RunRecord* best = nullptr;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const RunRecord* rec = ctx.pick(arch, 50000, seed);
      if (rec && (!best || rec->final_val_mse < best->final_val_mse))
        best = rec;
    }
    if (!best || best->checkpoint_path.empty())
      return {false, "no checkpoint available for " +
                         loadflow::model::to_string(arch) + " at size 50000"};
    checkpoints.push_back(loadflow::model::read_checkpoint(
        ctx.root / "sweep" / best->checkpoint_path));
  }

  const auto report = loadflow::experiments::benchmark_inference(
      checkpoints, ctx.grid5, loadflow::pf::SolverSettings{}, {10000},
      /*repetitions=*/5, /*seed=*/7, /*solver_workers=*/1);

  std::map<std::string, double> secs;
  for (const auto& m : report.methods) secs[m.method] = m.seconds.at(0);
  const double mlp = secs.at("mlp");
  const double gnn1 = secs.at("gnn1");
  const double gnn2 = secs.at("gnn2");
  const double nr = secs.at("newton_raphson");
  const double speedup = nr / mlp;

  const bool order_mlp = mlp < gnn1;
  const bool order_gnn2 = gnn2 < nr;
  const bool floor = speedup > 20.0;
  return {order_mlp && order_gnn2 && floor,
          "10000 samples, median seconds: mlp " + fmt("%.4f", mlp) + ", gnn1 " +
              fmt("%.4f", gnn1) + ", gnn2 " + fmt("%.4f", gnn2) +
              ", newton_raphson " + fmt("%.4f", nr) + "; mlp<gnn1 " +
              (order_mlp ? "ok" : "VIOLATED") + ", gnn2<nr " +
              (order_gnn2 ? "ok" : "VIOLATED") + ", nr/mlp " +
              fmt("%.1f", speedup) + "x (> 20 required" +
              (floor ? "" : ", VIOLATED") + ")"};
}

// ---------------------------------------------------------------------------
// Criterion 8: generate -> split -> train twice with the same seeds gives a
// bit-identical dataset and identical epoch records (wall-clock timing
// fields excluded, everything numeric compared exactly).

Outcome criterion_determinism(Ctx& ctx) {
  const Dataset a = loadflow::datagen::generate_dataset(ctx.grid5, 2000, 77);
  const Dataset b = loadflow::datagen::generate_dataset(ctx.grid5, 2000, 77);
  const auto bytes_a = loadflow::datagen::serialize_dataset(a);
  const auto bytes_b = loadflow::datagen::serialize_dataset(b);
  if (bytes_a != bytes_b)
    return {false, "serialized datasets differ between identical runs"};

  loadflow::train::SplitSpec spec;
  spec.shuffle_seed = 3;
  const auto split_a = loadflow::train::split_dataset(a.n_samples, spec);
  const auto split_b = loadflow::train::split_dataset(b.n_samples, spec);
  if (split_a.train != split_b.train || split_a.val != split_b.val ||
      split_a.test != split_b.test)
    return {false, "split indices differ between identical runs"};

  // One dense and one graph architecture, each trained twice.
  int epochs_checked = 0;
  for (Architecture arch : {Architecture::kMlp, Architecture::kGnn1}) {
    loadflow::model::ModelConfig config;
    config.architecture = arch;
    config.embedding_dim = 8;
    config.propagation_steps = 2;
    loadflow::train::TrainingSettings settings;
    settings.max_epochs = 8;
    settings.split = spec;
    const auto r1 = loadflow::train::train_surrogate(a, config, settings, 5);
    const auto r2 = loadflow::train::train_surrogate(b, config, settings, 5);
    if (r1.history.size() != r2.history.size())
      return {false, loadflow::model::to_string(arch) +
                         ": epoch counts differ between identical runs"};
    for (std::size_t e = 0; e < r1.history.size(); ++e) {
      const auto& s1 = r1.history[e];
      const auto& s2 = r2.history[e];
      if (s1.epoch != s2.epoch || s1.train_mse != s2.train_mse ||
          s1.val_mse != s2.val_mse)
        return {false, loadflow::model::to_string(arch) + ": epoch " +
                           std::to_string(e + 1) +
                           " records differ between identical runs"};
      ++epochs_checked;
    }
    if (r1.best_epoch != r2.best_epoch || r1.test_mse != r2.test_mse)
      return {false, loadflow::model::to_string(arch) +
                         ": best epoch or test MSE differ between runs"};
  }
  return {true, "dataset bytes identical (" + std::to_string(bytes_a.size()) +
                    " bytes), splits identical, " +
                    std::to_string(epochs_checked) +
                    " epoch records identical across mlp and gnn1 reruns"};
}

// ---------------------------------------------------------------------------
// Criterion 9: rank_runs reproduces the reference per-architecture ordering
// on nine recorded study runs (rank by final validation MSE).

Outcome criterion_ranking_fidelity(Ctx&) {
  struct Row {
    Architecture arch;
    double lr;
    int bs;
    double val, test;
  };
  // Nine reference runs at 500,000 cases, three per architecture, in
  // expected order (best first).
  const std::vector<Row> rows = {
      {Architecture::kMlp, 1e-3, 32, 1.14e-5, 1.14e-5},
      {Architecture::kMlp, 1e-3, 16, 1.18e-5, 1.18e-5},
      {Architecture::kMlp, 1e-3, 64, 2.00e-5, 2.01e-5},
      {Architecture::kGnn1, 1e-3, 32, 5.66e-6, 5.65e-6},
      {Architecture::kGnn1, 1e-3, 16, 6.49e-6, 6.51e-6},
      {Architecture::kGnn1, 1e-4, 32, 7.36e-6, 7.36e-6},
      {Architecture::kGnn2, 1e-4, 32, 8.55e-6, 8.51e-6},
      {Architecture::kGnn2, 1e-4, 16, 9.17e-6, 9.15e-6},
      {Architecture::kGnn2, 1e-3, 16, 1.28e-5, 1.28e-5},
  };

  std::vector<RunRecord> records;
  for (const Row& row : rows) {
    RunRecord rec;
    rec.architecture = row.arch;
    rec.training_size = 500000;
    rec.batch_size = row.bs;
    rec.learning_rate = row.lr;
    rec.seed = 1;
    rec.id = loadflow::experiments::cell_id(row.arch, rec.training_size,
                                            row.bs, row.lr, rec.seed);
    rec.status = "ok";
    rec.epochs_run = 50;
    rec.best_epoch = 50;
    rec.best_val_mse = row.val;
    rec.final_val_mse = row.val;
    rec.test_mse = row.test;
    records.push_back(std::move(rec));
  }
  // Shuffle so the ranking cannot trivially echo insertion order.
  Rng rng(13, 0);
  rng.shuffle(records);

  const auto tables = loadflow::experiments::rank_runs(records, rows.size());
  if (tables.size() != 3) return {false, "expected three architecture tables"};
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto& table = tables[t];
    std::vector<Row> expected;
    for (const Row& row : rows)
      if (row.arch == table.architecture) expected.push_back(row);
    if (table.rows.size() != expected.size())
      return {false, loadflow::model::to_string(table.architecture) +
                         " table has wrong row count"};
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto& got = table.rows[i];
      const auto& want = expected[i];
      if (got.learning_rate != want.lr || got.batch_size != want.bs ||
          got.final_val_mse != want.val)
        return {false, loadflow::model::to_string(table.architecture) +
                           " run " + std::to_string(i + 1) +
                           " out of reference order"};
      if (i > 0 && !(table.rows[i - 1].final_val_mse < got.final_val_mse))
        return {false, loadflow::model::to_string(table.architecture) +
                           " table not strictly ascending in validation MSE"};
    }
  }
  return {true, "nine reference study runs rank exactly in the expected "
                "per-architecture order (run 1 < run 2 < run 3)"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* title;
    std::function<Outcome(Ctx&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"solver correctness", criterion_solver_correctness},
      {"solver oracle equivalence", criterion_oracle_equivalence},
      {"gradient exactness", criterion_gradient_exactness},
      {"architecture invariants", criterion_architecture_invariants},
      {"sample-efficiency trend", criterion_sample_efficiency},
      {"desk-scale accuracy", criterion_desk_accuracy},
      {"inference benchmark ordering", criterion_inference_benchmark},
      {"determinism", criterion_determinism},
      {"ranking fidelity", criterion_ranking_fidelity},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s' (valid: 1..%zu)\n", argv[i],
                   criteria.size());
      return 2;
    }
    selected.push_back(k);
  }
  if (selected.empty())
    for (std::size_t k = 1; k <= criteria.size(); ++k)
      selected.push_back(static_cast<int>(k));

  Ctx ctx;
  const char* full_env = std::getenv("LOADFLOW_ACCEPT_FULL");
  ctx.full_flag = full_env != nullptr && std::string(full_env) != "0" &&
                  std::string(full_env) != "";
  ctx.root = fs::temp_directory_path() / "loadflow-acceptance";
  fs::create_directories(ctx.root);
  ctx.grid5 = five_bus();
  std::fprintf(stderr, "acceptance cache: %s\n", ctx.root.string().c_str());

  int failures = 0;
  for (int k : selected) {
    const auto& criterion = criteria[static_cast<std::size_t>(k - 1)];
    const auto t0 = Clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run(ctx);
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%d/%zu] %s  %s: %s (%.1f s)\n", k, criteria.size(),
                outcome.pass ? "PASS" : "FAIL", criterion.title,
                outcome.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  std::printf("acceptance summary: %zu of %zu criteria passed\n",
              selected.size() - failures, selected.size());
  return failures == 0 ? 0 : 1;
}
