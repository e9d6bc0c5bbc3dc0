// Load-flow dataset generation and binary/CSV serialization.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "loadflow/grid.hpp"
#include "loadflow/powerflow.hpp"
#include "loadflow/rng.hpp"

namespace loadflow::datagen {

// Integer sampling bounds (inclusive) for the randomized injections, in MW /
// MVAr.  PV buses draw active generation; PQ buses draw active and reactive
// load.  The slack bus is never sampled.
struct SamplingRanges {
  std::int64_t pv_p_min = 0;
  std::int64_t pv_p_max = 199;
  std::int64_t pq_p_min = 0;
  std::int64_t pq_p_max = 99;
  std::int64_t pq_q_min = 0;
  std::int64_t pq_q_max = 99;

  nlohmann::json to_json() const;
};

SamplingRanges sampling_ranges_from_json(const nlohmann::json& doc);
void validate(const SamplingRanges& ranges);

// Column names for a grid: sampled inputs per bus (2 each), solved outputs
// per bus (5 each), then solver metadata.  This order is the on-disk layout.
std::vector<std::string> dataset_columns(const grid::GridCase& grid);

// An in-memory dataset, stored column-major to match the file format.
struct Dataset {
  grid::GridCase grid;
  std::uint64_t seed = 0;
  SamplingRanges ranges;
  pf::SolverSettings solver;
  std::string rng_algorithm = kRngAlgorithm;
  // Non-convergent draws discarded (and resampled) during generation.
  std::int64_t discarded = 0;

  std::vector<std::string> columns;
  std::int64_t n_samples = 0;
  std::vector<double> data;  // data[col * n_samples + row]

  int n_cols() const { return static_cast<int>(columns.size()); }
  double at(std::int64_t row, int col) const {
    return data[static_cast<std::size_t>(col) * n_samples + row];
  }
  double& at(std::int64_t row, int col) {
    return data[static_cast<std::size_t>(col) * n_samples + row];
  }
  int col_index(const std::string& name) const;  // throws on unknown name

  // Reassembles one row into structured form.
  pf::InjectionSet injections_at(std::int64_t row) const;
  pf::PowerFlowSolution solution_at(std::int64_t row) const;

  // Provenance id over (grid, seed, size, ranges, solver, rng); used to tie
  // checkpoints and sweep results back to the dataset that produced them.
  std::string fingerprint() const;
};

// Draws one injection set.  Per bus in grid order: PV buses consume one
// integer draw (p_gen), PQ buses two (p_load then q_load); slack none.
pf::InjectionSet sample_injections(Rng& rng, const grid::GridCase& grid,
                                   const SamplingRanges& ranges);

// Generates n solved samples.  Sample i is drawn from Rng(seed, i), so the
// result is identical for any worker count; non-convergent draws are
// discarded and redrawn from the same stream.  Throws Error once discards
// exceed the number of requested samples (discard rate above 50%).
Dataset generate_dataset(const grid::GridCase& grid, std::int64_t n,
                         std::uint64_t seed,
                         const SamplingRanges& ranges = {},
                         const pf::SolverSettings& solver = {},
                         int workers = 0);

std::vector<std::uint8_t> serialize_dataset(const Dataset& dataset);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

void export_csv(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace loadflow::datagen
