#include "loadflow/grid.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "loadflow/binio.hpp"

namespace loadflow {

std::uint32_t crc32_bytes(const void* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, static_cast<const Bytef*>(data),
                static_cast<uInt>(size));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

const std::uint8_t* ByteReader::bytes(std::size_t size) {
  if (size > size_ - pos_) throw IoError("unexpected end of buffer");
  const std::uint8_t* p = data_ + pos_;
  pos_ += size;
  return p;
}

std::uint32_t ByteReader::u32() {
  const std::uint8_t* p = bytes(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  const std::uint8_t* p = bytes(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double ByteReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string ByteReader::str(std::size_t size) {
  const std::uint8_t* p = bytes(size);
  return std::string(reinterpret_cast<const char*>(p), size);
}

}  // namespace loadflow

namespace loadflow::grid {

using nlohmann::json;

std::string to_string(BusType type) {
  switch (type) {
    case BusType::kSlack: return "slack";
    case BusType::kPv: return "pv";
    case BusType::kPq: return "pq";
  }
  throw Error("invalid bus type value");
}

BusType bus_type_from_string(const std::string& name) {
  if (name == "slack") return BusType::kSlack;
  if (name == "pv") return BusType::kPv;
  if (name == "pq") return BusType::kPq;
  throw ParseError("unknown bus type: \"" + name + "\"");
}

int GridCase::index_of(int bus_id) const {
  for (int i = 0; i < n_buses(); ++i)
    if (buses[i].id == bus_id) return i;
  throw ValidationError("unknown bus id: " + std::to_string(bus_id));
}

int GridCase::slack_index() const {
  for (int i = 0; i < n_buses(); ++i)
    if (buses[i].type == BusType::kSlack) return i;
  throw ValidationError("grid has no slack bus");
}

json GridCase::to_json() const {
  json buses_json = json::array();
  for (const BusSpec& bus : buses) {
    json b{{"id", bus.id}, {"type", to_string(bus.type)}};
    if (bus.type != BusType::kPq) b["v_set"] = bus.v_set;
    if (bus.type == BusType::kSlack) b["angle_set"] = bus.angle_set;
    buses_json.push_back(std::move(b));
  }
  json branches_json = json::array();
  for (const BranchSpec& br : branches) {
    branches_json.push_back(json{{"from", br.from_bus},
                                 {"to", br.to_bus},
                                 {"r", br.r},
                                 {"x", br.x},
                                 {"b_shunt", br.b_shunt}});
  }
  json doc{{"s_base_mva", s_base_mva},
           {"buses", std::move(buses_json)},
           {"branches", std::move(branches_json)}};
  if (!name.empty()) doc["name"] = name;
  return doc;
}

std::string GridCase::fingerprint() const {
  const std::string text = to_json().dump();
  const std::uint32_t crc = crc32_bytes(text.data(), text.size());
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return std::string(buf);
}

namespace {

// Throws ParseError when `obj` holds keys outside `allowed`.
void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ParseError("unknown key \"" + key + "\" in " + where);
  }
}

double require_number(const json& obj, const std::string& key,
                      const std::string& where) {
  if (!obj.contains(key))
    throw ParseError("missing key \"" + key + "\" in " + where);
  if (!obj[key].is_number())
    throw ParseError("key \"" + key + "\" in " + where + " must be a number");
  return obj[key].get<double>();
}

int require_int(const json& obj, const std::string& key,
                const std::string& where) {
  if (!obj.contains(key))
    throw ParseError("missing key \"" + key + "\" in " + where);
  if (!obj[key].is_number_integer())
    throw ParseError("key \"" + key + "\" in " + where +
                     " must be an integer");
  return obj[key].get<int>();
}

BusSpec parse_bus(const json& obj, int position) {
  const std::string where = "buses[" + std::to_string(position) + "]";
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  reject_unknown_keys(obj, {"id", "type", "v_set", "angle_set"}, where);

  BusSpec bus;
  bus.id = require_int(obj, "id", where);
  if (!obj.contains("type") || !obj["type"].is_string())
    throw ParseError("missing or non-string \"type\" in " + where);
  bus.type = bus_type_from_string(obj["type"].get<std::string>());

  if (obj.contains("v_set")) {
    if (bus.type == BusType::kPq)
      throw ParseError("\"v_set\" is only valid for slack and pv buses (" +
                       where + ")");
    bus.v_set = require_number(obj, "v_set", where);
  }
  if (obj.contains("angle_set")) {
    if (bus.type != BusType::kSlack)
      throw ParseError("\"angle_set\" is only valid for the slack bus (" +
                       where + ")");
    bus.angle_set = require_number(obj, "angle_set", where);
  }
  return bus;
}

BranchSpec parse_branch(const json& obj, int position) {
  const std::string where = "branches[" + std::to_string(position) + "]";
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  reject_unknown_keys(obj, {"from", "to", "r", "x", "b_shunt"}, where);

  BranchSpec br;
  br.from_bus = require_int(obj, "from", where);
  br.to_bus = require_int(obj, "to", where);
  br.r = require_number(obj, "r", where);
  br.x = require_number(obj, "x", where);
  br.b_shunt =
      obj.contains("b_shunt") ? require_number(obj, "b_shunt", where) : 0.0;
  return br;
}

}  // namespace

GridCase grid_case_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("grid case must be a JSON object");
  reject_unknown_keys(doc, {"name", "s_base_mva", "buses", "branches"},
                      "grid case");

  GridCase grid;
  if (doc.contains("name")) {
    if (!doc["name"].is_string())
      throw ParseError("\"name\" must be a string");
    grid.name = doc["name"].get<std::string>();
  }
  grid.s_base_mva = require_number(doc, "s_base_mva", "grid case");

  if (!doc.contains("buses") || !doc["buses"].is_array())
    throw ParseError("missing or non-array \"buses\" in grid case");
  int position = 0;
  for (const json& bus : doc["buses"]) grid.buses.push_back(parse_bus(bus, position++));

  if (!doc.contains("branches") || !doc["branches"].is_array())
    throw ParseError("missing or non-array \"branches\" in grid case");
  position = 0;
  for (const json& br : doc["branches"])
    grid.branches.push_back(parse_branch(br, position++));

  // Buses may appear in any order in the file; ids fix the canonical order.
  std::sort(grid.buses.begin(), grid.buses.end(),
            [](const BusSpec& a, const BusSpec& b) { return a.id < b.id; });

  validate(grid);
  return grid;
}

GridCase load_grid_case(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return grid_case_from_json(doc);
}

void validate(const GridCase& grid) {
  const int n = grid.n_buses();
  if (n == 0) throw ValidationError("grid has no buses");
  if (!(grid.s_base_mva > 0))
    throw ValidationError("s_base_mva must be positive");

  int slack_count = 0;
  for (int i = 0; i < n; ++i) {
    const BusSpec& bus = grid.buses[i];
    if (bus.id != i + 1)
      throw ValidationError("bus ids must be contiguous 1.." +
                            std::to_string(n));
    if (bus.type == BusType::kSlack) ++slack_count;
    if (bus.type != BusType::kPq && !(bus.v_set > 0))
      throw ValidationError("v_set must be positive on bus " +
                            std::to_string(bus.id));
  }
  if (slack_count != 1)
    throw ValidationError("grid must have exactly one slack bus, found " +
                          std::to_string(slack_count));
  if (n < 2) throw ValidationError("grid needs at least one non-slack bus");

  for (std::size_t k = 0; k < grid.branches.size(); ++k) {
    const BranchSpec& br = grid.branches[k];
    const std::string where = "branch " + std::to_string(k);
    if (br.from_bus < 1 || br.from_bus > n || br.to_bus < 1 || br.to_bus > n)
      throw ValidationError(where + " references an unknown bus id");
    if (br.from_bus == br.to_bus)
      throw ValidationError(where + " connects a bus to itself");
    if (br.r < 0) throw ValidationError(where + ": r must be >= 0");
    if (br.r == 0 && br.x == 0)
      throw ValidationError(where + ": r and x cannot both be zero");
    if (br.b_shunt < 0) throw ValidationError(where + ": b_shunt must be >= 0");
  }

  // The branch graph must connect every bus (breadth-first reachability).
  if (n > 1) {
    std::vector<std::vector<int>> neighbors(n);
    for (const BranchSpec& br : grid.branches) {
      neighbors[br.from_bus - 1].push_back(br.to_bus - 1);
      neighbors[br.to_bus - 1].push_back(br.from_bus - 1);
    }
    std::vector<bool> seen(n, false);
    std::vector<int> queue{0};
    seen[0] = true;
    while (!queue.empty()) {
      const int i = queue.back();
      queue.pop_back();
      for (int j : neighbors[i])
        if (!seen[j]) {
          seen[j] = true;
          queue.push_back(j);
        }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[i])
        throw ValidationError("grid is not connected: bus " +
                              std::to_string(grid.buses[i].id) +
                              " is unreachable from bus 1");
  }
}

AdmittanceMatrix build_admittance(const GridCase& grid) {
  const int n = grid.n_buses();
  AdmittanceMatrix y;
  y.n = n;
  y.y.assign(static_cast<std::size_t>(n) * n, {0.0, 0.0});

  for (const BranchSpec& br : grid.branches) {
    const int i = grid.index_of(br.from_bus);
    const int j = grid.index_of(br.to_bus);
    const std::complex<double> z(br.r, br.x);
    const std::complex<double> y_series = 1.0 / z;
    // Half the line charging susceptance at each end (pi model).
    const std::complex<double> y_shunt(0.0, br.b_shunt / 2.0);
    y.at(i, i) += y_series + y_shunt;
    y.at(j, j) += y_series + y_shunt;
    y.at(i, j) -= y_series;
    y.at(j, i) -= y_series;
  }
  return y;
}

AdjacencyMatrix build_adjacency(const AdmittanceMatrix& y) {
  AdjacencyMatrix adj;
  adj.n = y.n;
  adj.a.assign(static_cast<std::size_t>(y.n) * y.n, 0.0);
  for (int i = 0; i < y.n; ++i)
    for (int j = 0; j < y.n; ++j)
      if (i != j && std::abs(y.at(i, j)) > kAdjacencyThreshold)
        adj.a[i * y.n + j] = 1.0;
  return adj;
}

AdjacencyMatrix normalize_adjacency(const AdjacencyMatrix& adj) {
  if (adj.normalized)
    throw ValidationError("adjacency matrix is already normalized");
  AdjacencyMatrix out = adj;
  out.normalized = true;
  for (int i = 0; i < adj.n; ++i) {
    double degree = 0.0;
    for (int j = 0; j < adj.n; ++j) degree += adj.at(i, j);
    if (degree == 0.0)
      throw ValidationError("cannot normalize adjacency: bus at index " +
                            std::to_string(i) + " is isolated");
    for (int j = 0; j < adj.n; ++j) out.a[i * adj.n + j] = adj.at(i, j) / degree;
  }
  return out;
}

}  // namespace loadflow::grid
