#include "loadflow/powerflow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>

namespace loadflow::pf {

using grid::BusType;
using nlohmann::json;

json SolverSettings::to_json() const {
  return json{{"tolerance", tolerance},
              {"max_iterations", max_iterations},
              {"flat_start", flat_start}};
}

SolverSettings solver_settings_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("solver settings must be an object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "tolerance" && key != "max_iterations" && key != "flat_start")
      throw ParseError("unknown key \"" + key + "\" in solver settings");
  }
  SolverSettings settings;
  if (doc.contains("tolerance")) settings.tolerance = doc["tolerance"].get<double>();
  if (doc.contains("max_iterations"))
    settings.max_iterations = doc["max_iterations"].get<int>();
  if (doc.contains("flat_start")) settings.flat_start = doc["flat_start"].get<bool>();
  if (!(settings.tolerance > 0))
    throw ValidationError("solver tolerance must be positive");
  if (settings.max_iterations <= 0)
    throw ValidationError("max_iterations must be positive");
  return settings;
}

NonConvergenceError::NonConvergenceError(double mismatch, int iters)
    : Error("load flow did not converge: max mismatch " +
            std::to_string(mismatch) + " p.u. after " + std::to_string(iters) +
            " iterations"),
      last_mismatch_pu(mismatch),
      iterations(iters) {}

SingularJacobianError::SingularJacobianError(int iter)
    : Error("singular Jacobian at iteration " + std::to_string(iter)),
      iteration(iter) {}

InjectionSet make_base_injections(const grid::GridCase& grid) {
  InjectionSet set;
  set.buses.reserve(grid.buses.size());
  for (const grid::BusSpec& bus : grid.buses) {
    BusInjection inj;
    inj.kind = bus.type;
    inj.v_set = bus.v_set;
    inj.angle_set = bus.angle_set;
    set.buses.push_back(inj);
  }
  return set;
}

namespace {

void check_injections(const grid::GridCase& grid, const InjectionSet& inj) {
  if (inj.buses.size() != grid.buses.size())
    throw ValidationError("injection set has " +
                          std::to_string(inj.buses.size()) + " buses, grid has " +
                          std::to_string(grid.buses.size()));
  for (std::size_t i = 0; i < inj.buses.size(); ++i) {
    if (inj.buses[i].kind != grid.buses[i].type)
      throw ValidationError("injection kind mismatch at bus " +
                            std::to_string(grid.buses[i].id));
    if (inj.buses[i].kind != BusType::kPq && !(inj.buses[i].v_set > 0))
      throw ValidationError("v_set must be positive at bus " +
                            std::to_string(grid.buses[i].id));
  }
}

// Per-unit real power target at PV/PQ buses (net injection convention:
// generation positive, load negative).
double p_spec_pu(const BusInjection& inj, double s_base) {
  if (inj.kind == BusType::kPv) return inj.p_gen_mw / s_base;
  return -inj.p_load_mw / s_base;
}

double q_spec_pu(const BusInjection& inj, double s_base) {
  return -inj.q_load_mvar / s_base;
}

// P_calc + j Q_calc = diag(V) conj(Y V) in p.u.
void calc_injections(const grid::AdmittanceMatrix& y,
                     const std::vector<std::complex<double>>& v,
                     std::vector<double>& p_calc, std::vector<double>& q_calc) {
  const int n = y.n;
  p_calc.assign(n, 0.0);
  q_calc.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::complex<double> current{0.0, 0.0};
    for (int j = 0; j < n; ++j) current += y.at(i, j) * v[j];
    const std::complex<double> s = v[i] * std::conj(current);
    p_calc[i] = s.real();
    q_calc[i] = s.imag();
  }
}

MismatchResult mismatch_from_calc(const grid::GridCase& grid,
                                  const InjectionSet& inj,
                                  const std::vector<double>& p_calc,
                                  const std::vector<double>& q_calc) {
  const int n = grid.n_buses();
  MismatchResult result;
  result.dp_pu.assign(n, 0.0);
  result.dq_pu.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const BusInjection& b = inj.buses[i];
    if (b.kind == BusType::kSlack) continue;
    result.dp_pu[i] = p_spec_pu(b, grid.s_base_mva) - p_calc[i];
    if (b.kind == BusType::kPq)
      result.dq_pu[i] = q_spec_pu(b, grid.s_base_mva) - q_calc[i];
  }
  return result;
}

}  // namespace

double MismatchResult::max_abs() const {
  double m = 0.0;
  for (double v : dp_pu) m = std::max(m, std::abs(v));
  for (double v : dq_pu) m = std::max(m, std::abs(v));
  return m;
}

MismatchResult compute_mismatch(const grid::GridCase& grid,
                                const InjectionSet& injections,
                                const std::vector<std::complex<double>>& v) {
  check_injections(grid, injections);
  if (v.size() != static_cast<std::size_t>(grid.n_buses()))
    throw ValidationError("voltage vector length does not match bus count");
  const grid::AdmittanceMatrix y = build_admittance(grid);
  std::vector<double> p_calc, q_calc;
  calc_injections(y, v, p_calc, q_calc);
  return mismatch_from_calc(grid, injections, p_calc, q_calc);
}

PowerFlowSolution solve(const grid::GridCase& grid,
                        const InjectionSet& injections,
                        const SolverSettings& settings,
                        const PowerFlowSolution* warm_start) {
  check_injections(grid, injections);
  if (!(settings.tolerance > 0))
    throw ValidationError("solver tolerance must be positive");
  if (settings.max_iterations <= 0)
    throw ValidationError("max_iterations must be positive");

  const int n = grid.n_buses();
  const grid::AdmittanceMatrix y = build_admittance(grid);

  // State in polar form; slack angle and slack/PV magnitudes stay pinned.
  std::vector<double> vm(n, 1.0), th(n, 0.0);
  const bool use_warm = !settings.flat_start && warm_start != nullptr &&
                        warm_start->v_mag.size() == static_cast<std::size_t>(n);
  for (int i = 0; i < n; ++i) {
    const BusInjection& b = injections.buses[i];
    if (use_warm) {
      vm[i] = warm_start->v_mag[i];
      th[i] = std::atan2(warm_start->v_imag[i], warm_start->v_real[i]);
    }
    if (b.kind != BusType::kPq) vm[i] = b.v_set;
    if (b.kind == BusType::kSlack) th[i] = b.angle_set;
  }

  // Unknown ordering: angles at non-slack buses, then magnitudes at PQ buses.
  std::vector<int> ang_pos(n, -1), mag_pos(n, -1);
  int n_unknowns = 0;
  for (int i = 0; i < n; ++i)
    if (injections.buses[i].kind != BusType::kSlack) ang_pos[i] = n_unknowns++;
  for (int i = 0; i < n; ++i)
    if (injections.buses[i].kind == BusType::kPq) mag_pos[i] = n_unknowns++;

  std::vector<std::complex<double>> v(n);
  std::vector<double> p_calc, q_calc;
  int iterations = 0;
  double max_mismatch = 0.0;

  auto refresh = [&] {
    for (int i = 0; i < n; ++i)
      v[i] = std::polar(vm[i], th[i]);
    calc_injections(y, v, p_calc, q_calc);
  };

  refresh();
  MismatchResult mismatch = mismatch_from_calc(grid, injections, p_calc, q_calc);
  max_mismatch = mismatch.max_abs();

  while (max_mismatch > settings.tolerance) {
    if (iterations >= settings.max_iterations)
      throw NonConvergenceError(max_mismatch, iterations);

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_unknowns, n_unknowns);
    Eigen::VectorXd rhs(n_unknowns);
    for (int i = 0; i < n; ++i) {
      if (ang_pos[i] >= 0) rhs(ang_pos[i]) = mismatch.dp_pu[i];
      if (mag_pos[i] >= 0) rhs(mag_pos[i]) = mismatch.dq_pu[i];
    }

    for (int i = 0; i < n; ++i) {
      const int pi = ang_pos[i];
      const int qi = mag_pos[i];
      if (pi < 0 && qi < 0) continue;
      for (int j = 0; j < n; ++j) {
        const int aj = ang_pos[j];
        const int mj = mag_pos[j];
        if (aj < 0 && mj < 0) continue;
        if (i == j) {
          const double vi2 = vm[i] * vm[i];
          if (pi >= 0 && aj >= 0)
            jac(pi, aj) = -q_calc[i] - y.b(i, i) * vi2;
          if (pi >= 0 && mj >= 0)
            jac(pi, mj) = p_calc[i] / vm[i] + y.g(i, i) * vm[i];
          if (qi >= 0 && aj >= 0) jac(qi, aj) = p_calc[i] - y.g(i, i) * vi2;
          if (qi >= 0 && mj >= 0)
            jac(qi, mj) = q_calc[i] / vm[i] - y.b(i, i) * vm[i];
        } else {
          // t = V_i conj(V_j) carries vm_i vm_j (cos, sin) of the angle gap.
          const std::complex<double> t = v[i] * std::conj(v[j]);
          const double gc_bs = y.g(i, j) * t.real() + y.b(i, j) * t.imag();
          const double gs_bc = y.g(i, j) * t.imag() - y.b(i, j) * t.real();
          if (pi >= 0 && aj >= 0) jac(pi, aj) = gs_bc;
          if (pi >= 0 && mj >= 0) jac(pi, mj) = gc_bs / vm[j];
          if (qi >= 0 && aj >= 0) jac(qi, aj) = -gc_bs;
          if (qi >= 0 && mj >= 0) jac(qi, mj) = gs_bc / vm[j];
        }
      }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw SingularJacobianError(iterations);
    const Eigen::VectorXd dx = lu.solve(rhs);

    for (int i = 0; i < n; ++i) {
      if (ang_pos[i] >= 0) th[i] += dx(ang_pos[i]);
      if (mag_pos[i] >= 0) vm[i] += dx(mag_pos[i]);
    }
    ++iterations;

    for (int i = 0; i < n; ++i)
      if (!std::isfinite(vm[i]) || !std::isfinite(th[i]) || vm[i] < 1e-6)
        throw NonConvergenceError(max_mismatch, iterations);

    refresh();
    mismatch = mismatch_from_calc(grid, injections, p_calc, q_calc);
    max_mismatch = mismatch.max_abs();
    if (!std::isfinite(max_mismatch))
      throw NonConvergenceError(max_mismatch, iterations);
  }

  PowerFlowSolution sol;
  sol.v_real.resize(n);
  sol.v_imag.resize(n);
  sol.v_mag.resize(n);
  sol.p_mw.resize(n);
  sol.q_mvar.resize(n);
  for (int i = 0; i < n; ++i) {
    sol.v_real[i] = v[i].real();
    sol.v_imag[i] = v[i].imag();
    sol.v_mag[i] = vm[i];
    sol.p_mw[i] = p_calc[i] * grid.s_base_mva;
    sol.q_mvar[i] = q_calc[i] * grid.s_base_mva;
  }
  sol.iterations = iterations;
  sol.max_mismatch_pu = max_mismatch;
  return sol;
}

json PowerFlowSolution::to_json(const grid::GridCase& grid) const {
  json buses = json::array();
  double losses = 0.0;
  for (int i = 0; i < grid.n_buses(); ++i) {
    buses.push_back(json{{"id", grid.buses[i].id},
                         {"type", grid::to_string(grid.buses[i].type)},
                         {"v_mag_pu", v_mag[i]},
                         {"v_angle_rad", std::atan2(v_imag[i], v_real[i])},
                         {"v_real_pu", v_real[i]},
                         {"v_imag_pu", v_imag[i]},
                         {"p_mw", p_mw[i]},
                         {"q_mvar", q_mvar[i]}});
    losses += p_mw[i];
  }
  return json{{"buses", std::move(buses)},
              {"iterations", iterations},
              {"max_mismatch_pu", max_mismatch_pu},
              {"total_losses_mw", losses}};
}

InjectionSet injections_from_json(const grid::GridCase& grid,
                                  const json& doc) {
  if (!doc.is_object()) throw ParseError("injections must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "injections")
      throw ParseError("unknown key \"" + key + "\" in injections document");
  }
  if (!doc.contains("injections") || !doc["injections"].is_array())
    throw ParseError("missing or non-array \"injections\"");

  InjectionSet set = make_base_injections(grid);
  std::set<int> seen;
  for (const json& entry : doc["injections"]) {
    if (!entry.is_object() || !entry.contains("bus") ||
        !entry["bus"].is_number_integer())
      throw ParseError("each injection needs an integer \"bus\" key");
    const int bus_id = entry["bus"].get<int>();
    const int index = grid.index_of(bus_id);
    if (!seen.insert(bus_id).second)
      throw ParseError("duplicate injection for bus " + std::to_string(bus_id));

    BusInjection& inj = set.buses[index];
    const std::string where = "injection for bus " + std::to_string(bus_id);
    for (const auto& [key, value] : entry.items()) {
      if (key == "bus") continue;
      if (!value.is_number())
        throw ParseError("key \"" + key + "\" in " + where +
                         " must be a number");
      const double num = value.get<double>();
      if (inj.kind == BusType::kSlack && key == "v_set") inj.v_set = num;
      else if (inj.kind == BusType::kSlack && key == "angle_set") inj.angle_set = num;
      else if (inj.kind == BusType::kPv && key == "p_gen_mw") inj.p_gen_mw = num;
      else if (inj.kind == BusType::kPv && key == "v_set") inj.v_set = num;
      else if (inj.kind == BusType::kPq && key == "p_load_mw") inj.p_load_mw = num;
      else if (inj.kind == BusType::kPq && key == "q_load_mvar") inj.q_load_mvar = num;
      else
        throw ParseError("unknown key \"" + key + "\" in " + where + " (" +
                         grid::to_string(inj.kind) + " bus)");
    }
  }
  return set;
}

json injections_to_json(const grid::GridCase& grid,
                        const InjectionSet& injections) {
  check_injections(grid, injections);
  json entries = json::array();
  for (int i = 0; i < grid.n_buses(); ++i) {
    const BusInjection& inj = injections.buses[i];
    json entry{{"bus", grid.buses[i].id}};
    switch (inj.kind) {
      case BusType::kSlack:
        entry["v_set"] = inj.v_set;
        entry["angle_set"] = inj.angle_set;
        break;
      case BusType::kPv:
        entry["p_gen_mw"] = inj.p_gen_mw;
        entry["v_set"] = inj.v_set;
        break;
      case BusType::kPq:
        entry["p_load_mw"] = inj.p_load_mw;
        entry["q_load_mvar"] = inj.q_load_mvar;
        break;
    }
    entries.push_back(std::move(entry));
  }
  return json{{"injections", std::move(entries)}};
}

}  // namespace loadflow::pf
