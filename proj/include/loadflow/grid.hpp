// Grid case model: bus/branch data, admittance matrix, adjacency matrix.
#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "loadflow/errors.hpp"

namespace loadflow::grid {

enum class BusType { kSlack, kPv, kPq };

std::string to_string(BusType type);
BusType bus_type_from_string(const std::string& name);

struct BusSpec {
  int id = 0;
  BusType type = BusType::kPq;
  // Voltage magnitude setpoint in p.u. (slack and PV buses only).
  double v_set = 1.0;
  // Voltage angle setpoint in radians (slack bus only).
  double angle_set = 0.0;
};

struct BranchSpec {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;        // series resistance, p.u.
  double x = 0.0;        // series reactance, p.u.
  double b_shunt = 0.0;  // total line charging susceptance, p.u.
};

// A parsed, validated grid case.  Buses are kept in ascending id order,
// which fixes the row/column order of every matrix and feature vector
// derived from it.
struct GridCase {
  std::string name;
  double s_base_mva = 100.0;
  std::vector<BusSpec> buses;
  std::vector<BranchSpec> branches;

  int n_buses() const { return static_cast<int>(buses.size()); }
  // Position of a bus id in `buses`; throws ValidationError for unknown ids.
  int index_of(int bus_id) const;
  int slack_index() const;

  nlohmann::json to_json() const;
  // CRC-32 hex digest of the canonical JSON form; identifies a case in
  // dataset and checkpoint headers.
  std::string fingerprint() const;
};

// Parsing rejects unknown keys so typos fail loudly instead of being ignored.
GridCase grid_case_from_json(const nlohmann::json& doc);
GridCase load_grid_case(const std::filesystem::path& path);

// Semantic checks: contiguous 1..N ids, exactly one slack bus, a connected
// graph, branch endpoints exist and differ, r >= 0, (r, x) != (0, 0),
// b_shunt >= 0, positive setpoints.  Throws ValidationError.  Called by the
// parsers.
void validate(const GridCase& grid);

// Dense bus admittance matrix (row-major n x n, complex entries).
struct AdmittanceMatrix {
  int n = 0;
  std::vector<std::complex<double>> y;

  const std::complex<double>& at(int i, int j) const { return y[i * n + j]; }
  std::complex<double>& at(int i, int j) { return y[i * n + j]; }
  double g(int i, int j) const { return at(i, j).real(); }
  double b(int i, int j) const { return at(i, j).imag(); }
};

AdmittanceMatrix build_admittance(const GridCase& grid);

// Dense adjacency matrix derived from the admittance sparsity pattern:
// a[i][j] = 1 when |Y_ij| > threshold for i != j, zero diagonal.
struct AdjacencyMatrix {
  int n = 0;
  std::vector<double> a;
  bool normalized = false;

  double at(int i, int j) const { return a[i * n + j]; }
};

inline constexpr double kAdjacencyThreshold = 1e-12;

AdjacencyMatrix build_adjacency(const AdmittanceMatrix& y);

// Row-normalizes by vertex degree (D^-1 A).  Throws ValidationError when a
// row has no neighbors (isolated bus) or the input is already normalized.
AdjacencyMatrix normalize_adjacency(const AdjacencyMatrix& adj);

}  // namespace loadflow::grid
