#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "txlab/check.hpp"

namespace txlab {

/// Monte Carlo rendering of a frictional market with two distinct dual
/// optimisers under log utility.
///
/// ln N moves on a lattice: steps of h = ln(2(1−λ))/m above level 0 and of
/// h_d = ln(1 + M̂)/m_d below it, where M̂ = 1/(2(1−λ)), so that both the upper
/// barrier 2(1−λ) and the level N = 1/(1 + M̂) (where P̂ = 1) are hit exactly.
struct CxConfig {
  double lambda = 0.1;
  double delta = 0.05;
  int m = 40;
  int depth = 1'000'000;  ///< step cap, absorbed like the lower barrier
  double eps_low = 1e-3;
  std::int64_t paths = 100'000;
  std::uint64_t seed = 1;
  int threads = 1;
  int dump_paths = 0;        ///< number of leading paths written to the path dump
  int dump_stride = 1;
  int dump_max_rows = 100'000;

  void validate() const;
};

enum class Absorption { upper, lower, cap };
const char* to_string(Absorption a);

/// Lattice of ln N levels, indexed from −lower_index (ε_low) to m (barrier).
struct CxLattice {
  double h = 0.0;     ///< step above level 0
  double h_d = 0.0;   ///< step below level 0
  int m = 0;          ///< level of the upper barrier
  int m_d = 0;        ///< level −m_d is where P̂ = 1
  int lower = 0;      ///< level −lower is the first with N <= ε_low
  double p_up = 0.0, p_zero = 0.0, p_down = 0.0;  ///< up-probabilities above, at and below 0
  double m_hat = 0.0;  ///< M̂ = 1/(2(1−λ))

  static CxLattice build(const CxConfig& cfg);
  double n(int level) const;
  double up_probability(int level) const;
};

/// Largest relative one-step drift over the lattice levels strictly between
/// the barriers, of Ẑ⁰ = 1/N and of Ž⁰ = M̂ + f(Ẑ⁰ − M̂) for f = 1 ± δ.
struct LatticeDrift {
  double z_hat = 0.0;
  double z_check = 0.0;
  double coin = 0.0;  ///< |E[f] − 1|
};

LatticeDrift lattice_drift(const CxLattice& lat, double delta);

/// Up-probability of a ±h step that keeps 1/N a martingale: (e^h − 1)/(e^h − e^{−h}).
double martingale_up_probability(double h_up, double h_down);

/// Running count / mean / M2, merged in a fixed order.
struct Moments {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const Moments& o);
  double variance() const { return n > 1 ? m2 / double(n - 1) : 0.0; }
  double se() const;
};

struct PathRecord {
  int steps = 0;  ///< absorption step
  Absorption side = Absorption::cap;
  int sigma = -1;  ///< first step with P̂ >= 1, −1 if never
  double f = 1.0;  ///< coin drawn at σ
  double s_hat_T = 0.0, z_hat_T = 0.0, z_check_T = 0.0, s_T = 0.0;
};

struct PathDumpRow {
  std::int64_t path = 0;
  int step = 0;
  double t = 0.0, s_hat = 0.0, z_hat = 0.0, p_hat = 0.0, f = 1.0, p_check = 0.0, z_check = 0.0, s_check = 0.0,
         lo = 0.0, hi = 0.0, s = 0.0;
};

/// Path-wise counts and extremes gathered during the walk.
struct CxAccumulators {
  std::int64_t upper = 0, lower = 0, cap = 0, sigma_hits = 0, deviating = 0;
  std::int64_t ratio_violations = 0, order_violations = 0, spread_violations = 0;
  double worst_ratio_excess = 0.0;  ///< max relative excess of Š/Ŝ outside its band
  double s0_error = 0.0;            ///< max |S_0 − 1|
  double upper_s_hat_error = 0.0;   ///< max |Ŝ_T − 2(1−λ)| / 2(1−λ) on upper paths
  double upper_h_error = 0.0;       ///< max |Ẑ⁰_T − M̂| and |Ž⁰_T − M̂|, relative, on upper paths
  double upper_s1_error = 0.0;      ///< max |S_1 − 2| / 2 on upper paths
  Moments z_hat_T, z_check_T, log_wealth_upper;
  Moments z_mass_upper, z_mass_lower, z_mass_cap;  ///< Ẑ⁰_T 1_{side} per path
  std::vector<Moments> z_hat_at, z_check_at;       ///< at the checkpoints

  void merge(const CxAccumulators& o);
};

struct CxEnsemble {
  CxConfig config;
  CxLattice lattice;
  std::vector<int> checkpoints;
  std::vector<PathRecord> paths;
  CxAccumulators acc;
  std::vector<PathDumpRow> dump;
  std::vector<std::string> warnings;
};

/// Runs every path once, evaluating Ŝ, Ẑ⁰, P̂, the coin f at σ, P̌, Ž⁰, Š and
/// the market (m, M, S) at every step on the clock t = step/depth.
CxEnsemble simulate_hat(const CxConfig& cfg);

struct PotentialReport {
  double m_hat = 0.0;
  double p_hat0 = 0.0;
  double p_hat0_exact = 0.0;  ///< (1−2λ)/(2(1−λ))
  double sigma_probability = 0.0;
  double sigma_se = 0.0;
};

PotentialReport decompose_potential(const CxEnsemble& ens);

struct PerturbReport {
  std::int64_t ratio_violations = 0;
  double worst_ratio_excess = 0.0;
  double coin_mean = 0.0;  ///< E[f 1_{σ<∞}]
  double coin_se = 0.0;
  std::vector<double> z_check_mean;  ///< E[Ž⁰] at the checkpoints
  std::vector<double> z_check_se;
};

/// Throws ConstructionError when Š/Ŝ leaves [(1+δ)⁻¹, (1−δ)⁻¹].
PerturbReport perturb(const CxEnsemble& ens);

struct MarketReport {
  std::int64_t order_violations = 0;  ///< steps with m >= M
  std::int64_t spread_violations = 0;
  double s0_error = 0.0;
  double upper_s1_error = 0.0;
};

/// Throws ConfigError when m >= M somewhere.
MarketReport build_market(const CxEnsemble& ens);

struct CxReport {
  PotentialReport potential;
  PerturbReport perturbation;
  MarketReport market;
  double upper_fraction = 0.0;
  double lower_fraction = 0.0;
  double cap_fraction = 0.0;
  double deviation_fraction = 0.0;
  double deviation_se = 0.0;
  double h_hat = 0.0;  ///< 1/(2(1−λ))
  double upper_h_error = 0.0;
  double upper_s_hat_error = 0.0;
  double first_order_residual = 0.0;  ///< |U'(ĝ) − y Ẑ⁰_T|, |U'(ĝ) − y Ž⁰_T| on upper paths, relative
  double log_utility_error = 0.0;     ///< |E[ln ĝ | upper] − ln x − ln 2(1−λ)|
  double z_hat_T_mean = 0.0, z_hat_T_se = 0.0;
  double z_mass_upper = 0.0, z_mass_lower = 0.0, z_mass_cap = 0.0;
  std::vector<int> checkpoints;
  std::vector<double> z_hat_mean, z_hat_se;  ///< E[Ẑ⁰] at the checkpoints
  LatticeDrift drift;
  std::vector<Check> checks;
  std::vector<std::string> warnings;

  bool pass() const { return all_pass(checks); }
};

CxReport verify_nonuniqueness(const CxEnsemble& ens, double x = 1.0);

/// name,value,se rows for every scalar statistic of the report.
std::string counterexample_csv(const CxReport& report);
std::string path_dump_csv(const CxEnsemble& ens);

}  // namespace txlab
