#pragma once

#include <string>
#include <vector>

#include "txlab/check.hpp"
#include "txlab/duality_lab.hpp"

namespace txlab {

/// Geometric perturbation of (x, y, U, P):
/// x_n = x(1 + rate^n a), y_n = y(1 + rate^n b), γ_n = γ(1 + rate^n κ),
/// θ_n = rate^n θ with one tilt component per interior node (tree.interior() order).
struct PerturbationSchedule {
  double x = 1.0;
  double y = 1.0;
  UtilitySpec base;
  double a = 0.2;
  double b = 0.2;
  double kappa = 0.5;
  double rate = 0.5;
  Eigen::VectorXd theta;  ///< empty means no tilt
  int N = 10;

  double x_n(int n) const;
  double y_n(int n) const;
  UtilitySpec utility_n(int n) const;
  Eigen::VectorXd theta_n(int n) const;
  void validate(const ScenarioTree& tree) const;
};

/// Tilted measure P_n and its density process with respect to P.
struct MeasureTilt {
  Process density;                   ///< Z̃ = E[dP_n/dP | F_t], a P-martingale with Z̃(root) = 1
  Eigen::VectorXd terminal_density;  ///< at tree.leaves()
  ScenarioTree tree;                 ///< same structure, tilted weights
  double tv = 0.0;                   ///< ½ Σ_leaves |P_n − P|
};

/// Children of each interior node are re-weighted by exp(θ s_j), s_j running
/// linearly from +1 (first child) to −1 (last child), then renormalised.
/// Throws TiltTooLargeError when a weight underflows.
MeasureTilt tilt_measure(const ScenarioTree& tree, const Eigen::VectorXd& theta);

/// E[|a − b| ∧ 1] at the leaves under the tree's measure.
double l0_distance(const ScenarioTree& tree, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct StabilityOptions {
  SolverOptions solver;
  int threads = 1;
};

struct StabilityRow {
  int n = 0;
  double x = 0.0, y = 0.0, gamma = 0.0;
  double u = 0.0, v = 0.0, du = 0.0, dv = 0.0;
  double err_u = 0.0, err_v = 0.0, err_du = 0.0, err_dv = 0.0;
  double d_primal = 0.0;  ///< d(ĝ_n, ĝ)
  double d_dual = 0.0;    ///< d(ĥ_n, ĥ)
  double tv = 0.0;
};

/// Per-step geometric decay factors from a log-linear least-squares fit;
/// NaN when fewer than two rows carry a positive error.
struct DecayRates {
  double u = 0.0, v = 0.0, du = 0.0, dv = 0.0, primal = 0.0, dual = 0.0, tv = 0.0;
};

struct StabilityReport {
  double u = 0.0, v = 0.0, du = 0.0, dv = 0.0;  ///< unperturbed
  std::vector<StabilityRow> rows;
  DecayRates rates;
  std::vector<Check> checks;

  bool pass() const { return all_pass(checks); }
};

/// Solves primal and dual for every step of the schedule on the tilted tree.
/// For N >= 10 checks last-row errors <= 0.1 × first-row errors and that TV
/// halves per step within 10%.
StabilityReport run_static(const Market& market, const PerturbationSchedule& schedule,
                           const StabilityOptions& opts = {});

std::string stability_csv(const StabilityReport& report);

enum class MeasureDirection {
  to_base,    ///< deflator under P_n → deflator under P (multiply by Z̃)
  to_tilted,  ///< deflator under P → deflator under P_n (divide by Z̃)
};

Deflator deflator_measure_change(const Deflator& d, const MeasureTilt& tilt, MeasureDirection direction);
PriceSystem price_system_measure_change(const PriceSystem& z, const MeasureTilt& tilt, MeasureDirection direction);

struct UizReport {
  double sup = 0.0;
  int argmax = 0;
  bool finite = true;
};

/// sup_n E[Z̃_n V_n⁺(y Z⁰_T / Z̃_n)] over the schedule.
UizReport uiz_diagnostic(const Market& market, const PerturbationSchedule& schedule, const Process& z0, double y);

struct DynamicRow {
  int n = 0;
  double terminal_deviation = 0.0;  ///< d(Ỹ^{n,0}_T, ĥ)
  double cesaro_deviation = 0.0;    ///< d(C_n⁰_T, ĥ)
  double cauchy = 0.0;              ///< max node-wise |C_n − C_{n−1}| relative to y
};

struct DynamicReport {
  std::vector<DynamicRow> rows;  ///< every step
  Deflator limit;                ///< C_N
  Deflator base;                 ///< Ŷ(y; V, P)
  double v = 0.0;                ///< v(y)
  double v_limit = 0.0;          ///< E[V(C_N⁰_T)]
  double value_deviation = 0.0;  ///< relative, see value_scale
  double cauchy_tail = 0.0;      ///< max_{N/2 <= m < N} node-wise |C_N − C_m| / y
  DeflatorReport deflator;
  std::vector<Deflator> mapped;   ///< Ỹ for each distinct perturbed instance
  std::vector<int> step_instance;  ///< step n − 1 → index into mapped
  int distinct_solves = 0;
  std::vector<Check> checks;

  bool pass() const { return all_pass(checks); }
};

struct DynamicOptions {
  SolverOptions solver;
  int threads = 1;
  double deflator_tol = 1e-8;
  double value_tol = 1e-4;
  double terminal_ratio = 0.1;
};

/// Dual solves under every P_n mapped back to P, with Cesàro averages
/// C_n = (1/n) Σ_{k<=n} Ỹᵏ. Identical perturbed instances are solved once.
DynamicReport run_dynamic(const Market& market, const PerturbationSchedule& schedule, const DynamicOptions& opts = {});

struct ShadowStabilityReport {
  ShadowPrice limit;                    ///< C_N¹ / C_N⁰
  ShadowReport shadow;                  ///< verify_shadow for the limit, at x = −v′(y)
  std::vector<double> deviation;        ///< max node-wise |Ŝⁿ − Ŝ| / S per step
  int spread_violations = 0;            ///< over every distinct Ŝⁿ and Ŝ
  std::vector<Check> checks;

  bool pass() const { return all_pass(checks); }
};

ShadowStabilityReport shadow_stability(const Market& market, const PerturbationSchedule& schedule,
                                       const DynamicOptions& opts = {}, double tol = 1e-4);

}  // namespace txlab
