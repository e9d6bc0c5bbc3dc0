// Newton-Raphson AC load-flow solver in polar form.
#pragma once

#include <complex>
#include <vector>

#include "json.hpp"
#include "loadflow/errors.hpp"
#include "loadflow/grid.hpp"

namespace loadflow::pf {

struct SolverSettings {
  double tolerance = 1e-8;  // max |mismatch| in p.u. at convergence
  int max_iterations = 50;
  // Start from |V| = 1, angle = 0 (setpoints where fixed).  When false and a
  // warm start is passed to solve(), iteration begins from that solution.
  bool flat_start = true;

  nlohmann::json to_json() const;
};

SolverSettings solver_settings_from_json(const nlohmann::json& doc);

// Boundary conditions for one bus.  Which fields are read depends on `kind`:
//   slack: v_set, angle_set
//   pv:    p_gen_mw, v_set
//   pq:    p_load_mw, q_load_mvar
struct BusInjection {
  grid::BusType kind = grid::BusType::kPq;
  double p_gen_mw = 0.0;
  double v_set = 1.0;
  double angle_set = 0.0;
  double p_load_mw = 0.0;
  double q_load_mvar = 0.0;
};

struct InjectionSet {
  std::vector<BusInjection> buses;  // one per bus, in grid bus order
};

// Zero-load, zero-generation injections with setpoints copied from the grid.
InjectionSet make_base_injections(const grid::GridCase& grid);

// Parses {"injections": [{"bus": <id>, ...}, ...]}; entries are optional per
// bus and merge over make_base_injections.  Unknown keys are rejected.
InjectionSet injections_from_json(const grid::GridCase& grid,
                                  const nlohmann::json& doc);
nlohmann::json injections_to_json(const grid::GridCase& grid,
                                  const InjectionSet& injections);

// A converged solution.  Vectors are in grid bus order; p_mw/q_mvar are net
// injected powers (generation minus load) at the solved voltages.
struct PowerFlowSolution {
  std::vector<double> v_real;  // p.u.
  std::vector<double> v_imag;  // p.u.
  std::vector<double> v_mag;   // p.u.
  std::vector<double> p_mw;
  std::vector<double> q_mvar;
  int iterations = 0;
  double max_mismatch_pu = 0.0;

  nlohmann::json to_json(const grid::GridCase& grid) const;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(double mismatch, int iterations);
  double last_mismatch_pu;
  int iterations;
};

class SingularJacobianError : public Error {
 public:
  explicit SingularJacobianError(int iteration);
  int iteration;
};

// Power mismatch of the constrained quantities at candidate voltages `v`
// (complex, p.u., grid bus order): dp holds P_spec - P_calc at PV and PQ
// buses, dq holds Q_spec - Q_calc at PQ buses; unconstrained entries are 0.
struct MismatchResult {
  std::vector<double> dp_pu;
  std::vector<double> dq_pu;

  double max_abs() const;
};

MismatchResult compute_mismatch(const grid::GridCase& grid,
                                const InjectionSet& injections,
                                const std::vector<std::complex<double>>& v);

// Solves the load-flow problem.  Throws NonConvergenceError when the
// mismatch still exceeds the tolerance after max_iterations Newton updates
// or the voltage iterate degenerates, SingularJacobianError when the
// Jacobian cannot be factorized.
PowerFlowSolution solve(const grid::GridCase& grid,
                        const InjectionSet& injections,
                        const SolverSettings& settings = {},
                        const PowerFlowSolution* warm_start = nullptr);

}  // namespace loadflow::pf
