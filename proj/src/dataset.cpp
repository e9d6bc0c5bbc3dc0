#include "loadflow/dataset.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "loadflow/binio.hpp"
#include "loadflow/parallel.hpp"

namespace loadflow::datagen {

using grid::BusType;
using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'L', 'F', 'D', 'S'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

json SamplingRanges::to_json() const {
  return json{{"pv_p_min", pv_p_min}, {"pv_p_max", pv_p_max},
              {"pq_p_min", pq_p_min}, {"pq_p_max", pq_p_max},
              {"pq_q_min", pq_q_min}, {"pq_q_max", pq_q_max}};
}

SamplingRanges sampling_ranges_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("sampling ranges must be an object");
  SamplingRanges ranges;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number_integer())
      throw ParseError("sampling range \"" + key + "\" must be an integer");
    const auto num = value.get<std::int64_t>();
    if (key == "pv_p_min") ranges.pv_p_min = num;
    else if (key == "pv_p_max") ranges.pv_p_max = num;
    else if (key == "pq_p_min") ranges.pq_p_min = num;
    else if (key == "pq_p_max") ranges.pq_p_max = num;
    else if (key == "pq_q_min") ranges.pq_q_min = num;
    else if (key == "pq_q_max") ranges.pq_q_max = num;
    else throw ParseError("unknown key \"" + key + "\" in sampling ranges");
  }
  validate(ranges);
  return ranges;
}

void validate(const SamplingRanges& ranges) {
  if (ranges.pv_p_min > ranges.pv_p_max)
    throw ValidationError("pv_p_min must not exceed pv_p_max");
  if (ranges.pq_p_min > ranges.pq_p_max)
    throw ValidationError("pq_p_min must not exceed pq_p_max");
  if (ranges.pq_q_min > ranges.pq_q_max)
    throw ValidationError("pq_q_min must not exceed pq_q_max");
}

std::vector<std::string> dataset_columns(const grid::GridCase& grid) {
  std::vector<std::string> cols;
  for (const grid::BusSpec& bus : grid.buses) {
    const std::string prefix = "in.b" + std::to_string(bus.id) + ".";
    switch (bus.type) {
      case BusType::kSlack:
        cols.push_back(prefix + "v_set_pu");
        cols.push_back(prefix + "angle_set_rad");
        break;
      case BusType::kPv:
        cols.push_back(prefix + "p_gen_mw");
        cols.push_back(prefix + "v_set_pu");
        break;
      case BusType::kPq:
        cols.push_back(prefix + "p_load_mw");
        cols.push_back(prefix + "q_load_mvar");
        break;
    }
  }
  for (const grid::BusSpec& bus : grid.buses) {
    const std::string prefix = "out.b" + std::to_string(bus.id) + ".";
    cols.push_back(prefix + "v_real_pu");
    cols.push_back(prefix + "v_imag_pu");
    cols.push_back(prefix + "v_mag_pu");
    cols.push_back(prefix + "p_mw");
    cols.push_back(prefix + "q_mvar");
  }
  cols.push_back("meta.iterations");
  cols.push_back("meta.max_mismatch_pu");
  return cols;
}

int Dataset::col_index(const std::string& name) const {
  for (int i = 0; i < n_cols(); ++i)
    if (columns[i] == name) return i;
  throw ValidationError("unknown dataset column: " + name);
}

pf::InjectionSet Dataset::injections_at(std::int64_t row) const {
  pf::InjectionSet set = pf::make_base_injections(grid);
  int col = 0;
  for (int b = 0; b < grid.n_buses(); ++b) {
    pf::BusInjection& inj = set.buses[b];
    switch (inj.kind) {
      case BusType::kSlack:
        inj.v_set = at(row, col++);
        inj.angle_set = at(row, col++);
        break;
      case BusType::kPv:
        inj.p_gen_mw = at(row, col++);
        inj.v_set = at(row, col++);
        break;
      case BusType::kPq:
        inj.p_load_mw = at(row, col++);
        inj.q_load_mvar = at(row, col++);
        break;
    }
  }
  return set;
}

pf::PowerFlowSolution Dataset::solution_at(std::int64_t row) const {
  const int n = grid.n_buses();
  pf::PowerFlowSolution sol;
  sol.v_real.resize(n);
  sol.v_imag.resize(n);
  sol.v_mag.resize(n);
  sol.p_mw.resize(n);
  sol.q_mvar.resize(n);
  int col = 2 * n;  // outputs start after the per-bus input columns
  for (int b = 0; b < n; ++b) {
    sol.v_real[b] = at(row, col++);
    sol.v_imag[b] = at(row, col++);
    sol.v_mag[b] = at(row, col++);
    sol.p_mw[b] = at(row, col++);
    sol.q_mvar[b] = at(row, col++);
  }
  sol.iterations = static_cast<int>(at(row, col++));
  sol.max_mismatch_pu = at(row, col++);
  return sol;
}

std::string Dataset::fingerprint() const {
  const json id{{"grid", grid.fingerprint()},
                {"seed", seed},
                {"n_samples", n_samples},
                {"ranges", ranges.to_json()},
                {"solver", solver.to_json()},
                {"rng", rng_algorithm}};
  const std::string text = id.dump();
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_bytes(text.data(), text.size()));
  return std::string(buf);
}

pf::InjectionSet sample_injections(Rng& rng, const grid::GridCase& grid,
                                   const SamplingRanges& ranges) {
  pf::InjectionSet set = pf::make_base_injections(grid);
  for (pf::BusInjection& inj : set.buses) {
    switch (inj.kind) {
      case BusType::kSlack:
        break;
      case BusType::kPv:
        inj.p_gen_mw = static_cast<double>(
            rng.uniform_int(ranges.pv_p_min, ranges.pv_p_max));
        break;
      case BusType::kPq:
        inj.p_load_mw = static_cast<double>(
            rng.uniform_int(ranges.pq_p_min, ranges.pq_p_max));
        inj.q_load_mvar = static_cast<double>(
            rng.uniform_int(ranges.pq_q_min, ranges.pq_q_max));
        break;
    }
  }
  return set;
}

Dataset generate_dataset(const grid::GridCase& grid, std::int64_t n,
                         std::uint64_t seed, const SamplingRanges& ranges,
                         const pf::SolverSettings& solver, int workers) {
  grid::validate(grid);
  validate(ranges);
  if (n <= 0) throw ValidationError("sample count must be positive");

  Dataset ds;
  ds.grid = grid;
  ds.seed = seed;
  ds.ranges = ranges;
  ds.solver = solver;
  ds.columns = dataset_columns(grid);
  ds.n_samples = n;
  ds.data.assign(static_cast<std::size_t>(ds.n_cols()) * n, 0.0);

  const int n_bus = grid.n_buses();
  std::atomic<std::int64_t> discarded{0};

  parallel_for(n, [&](std::int64_t row) {
    Rng rng(seed, static_cast<std::uint64_t>(row));
    pf::InjectionSet inj;
    pf::PowerFlowSolution sol;
    for (;;) {
      inj = sample_injections(rng, grid, ranges);
      try {
        sol = pf::solve(grid, inj, solver);
        break;
      } catch (const pf::NonConvergenceError&) {
      } catch (const pf::SingularJacobianError&) {
      }
      // Redraw from the same per-sample stream; abort once more than half of
      // all draws so far have failed.
      if (discarded.fetch_add(1) + 1 > n)
        throw Error(
            "dataset generation aborted: more than half of the sampled load "
            "flows failed to converge");
    }

    int col = 0;
    for (int b = 0; b < n_bus; ++b) {
      const pf::BusInjection& bus = inj.buses[b];
      switch (bus.kind) {
        case BusType::kSlack:
          ds.at(row, col++) = bus.v_set;
          ds.at(row, col++) = bus.angle_set;
          break;
        case BusType::kPv:
          ds.at(row, col++) = bus.p_gen_mw;
          ds.at(row, col++) = bus.v_set;
          break;
        case BusType::kPq:
          ds.at(row, col++) = bus.p_load_mw;
          ds.at(row, col++) = bus.q_load_mvar;
          break;
      }
    }
    for (int b = 0; b < n_bus; ++b) {
      ds.at(row, col++) = sol.v_real[b];
      ds.at(row, col++) = sol.v_imag[b];
      ds.at(row, col++) = sol.v_mag[b];
      ds.at(row, col++) = sol.p_mw[b];
      ds.at(row, col++) = sol.q_mvar[b];
    }
    ds.at(row, col++) = static_cast<double>(sol.iterations);
    ds.at(row, col++) = sol.max_mismatch_pu;
  }, workers);

  ds.discarded = discarded.load();
  return ds;
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  const json header{{"grid", ds.grid.to_json()},
                    {"seed", ds.seed},
                    {"rng", ds.rng_algorithm},
                    {"ranges", ds.ranges.to_json()},
                    {"solver", ds.solver.to_json()},
                    {"discarded", ds.discarded},
                    {"columns", ds.columns}};
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> bytes;
  bytes.reserve(64 + header_text.size() + ds.data.size() * 8);
  ByteWriter w(bytes);
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.u64(header_text.size());
  w.str(header_text);
  w.u64(static_cast<std::uint64_t>(ds.n_samples));
  w.u64(static_cast<std::uint64_t>(ds.n_cols()));
  for (double v : ds.data) w.f64(v);
  w.u32(crc32_bytes(bytes.data(), bytes.size()));
  return bytes;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(ds));
}

Dataset read_dataset(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() < 4 + 4 + 8 + 8 + 8 + 4)
    throw IoError("dataset file too short: " + path.string());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("not a dataset file (bad magic): " + path.string());

  const std::uint32_t stored_crc =
      crc32_bytes(bytes.data(), bytes.size() - 4);
  ByteReader tail(bytes.data() + bytes.size() - 4, 4);
  if (tail.u32() != stored_crc)
    throw IoError("dataset file is corrupt (CRC mismatch): " + path.string());

  ByteReader r(bytes.data(), bytes.size() - 4);
  r.bytes(4);  // magic
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw IoError("unsupported dataset format version " +
                  std::to_string(version));

  const std::uint64_t header_len = r.u64();
  if (header_len > r.remaining())
    throw IoError("dataset header extends past end of file");
  json header;
  try {
    header = json::parse(r.str(header_len));
  } catch (const json::parse_error& e) {
    throw IoError(std::string("invalid dataset header JSON: ") + e.what());
  }

  Dataset ds;
  for (const auto& [key, value] : header.items()) {
    (void)value;
    if (key != "grid" && key != "seed" && key != "rng" && key != "ranges" &&
        key != "solver" && key != "discarded" && key != "columns")
      throw IoError("unknown key \"" + key + "\" in dataset header");
  }
  ds.grid = grid::grid_case_from_json(header.at("grid"));
  ds.seed = header.at("seed").get<std::uint64_t>();
  ds.rng_algorithm = header.at("rng").get<std::string>();
  ds.ranges = sampling_ranges_from_json(header.at("ranges"));
  ds.solver = pf::solver_settings_from_json(header.at("solver"));
  ds.discarded = header.at("discarded").get<std::int64_t>();
  ds.columns = header.at("columns").get<std::vector<std::string>>();
  if (ds.columns != dataset_columns(ds.grid))
    throw IoError("dataset column layout does not match its grid");

  ds.n_samples = static_cast<std::int64_t>(r.u64());
  const std::uint64_t n_cols = r.u64();
  if (n_cols != ds.columns.size())
    throw IoError("dataset column count does not match header");
  const std::uint64_t n_values = n_cols * static_cast<std::uint64_t>(ds.n_samples);
  if (r.remaining() != n_values * 8)
    throw IoError("dataset payload size mismatch");
  ds.data.resize(n_values);
  for (std::uint64_t i = 0; i < n_values; ++i) ds.data[i] = r.f64();
  return ds;
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  for (int c = 0; c < ds.n_cols(); ++c) {
    if (c) out << ',';
    out << ds.columns[c];
  }
  out << '\n';
  char buf[32];
  for (std::int64_t row = 0; row < ds.n_samples; ++row) {
    for (int c = 0; c < ds.n_cols(); ++c) {
      if (c) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", ds.at(row, c));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace loadflow::datagen
