#include "txlab/stability.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "parallel.hpp"
#include "txlab/error.hpp"

namespace txlab {

namespace {

double step(double rate, int n) { return std::pow(rate, n); }

// Least-squares slope of log(err) against n, returned as exp(slope).
double fit_rate(const std::vector<StabilityRow>& rows, double StabilityRow::*field) {
  double sn = 0, sl = 0, snn = 0, snl = 0;
  int k = 0;
  for (const auto& r : rows) {
    const double e = r.*field;
    if (!(e > 0.0) || !std::isfinite(e)) continue;
    const double l = std::log(e);
    sn += r.n;
    sl += l;
    snn += double(r.n) * r.n;
    snl += r.n * l;
    ++k;
  }
  if (k < 2) return std::numeric_limits<double>::quiet_NaN();
  const double slope = (k * snl - sn * sl) / (k * snn - sn * sn);
  return std::exp(slope);
}

double dual_scale(double v, double y, double dv) { return std::max(std::abs(v), std::abs(y * dv)); }

// A perturbed instance is identified by its exact inputs; consecutive equal
// instances share one solve.
struct Instance {
  double y;
  UtilitySpec u;
  Eigen::VectorXd theta;
  Eigen::VectorXd weights;  ///< tilted conditional probabilities

  bool same(const Instance& o) const { return y == o.y && u == o.u && weights == o.weights; }
};

}  // namespace

double PerturbationSchedule::x_n(int n) const { return x * (1.0 + step(rate, n) * a); }
double PerturbationSchedule::y_n(int n) const { return y * (1.0 + step(rate, n) * b); }

UtilitySpec PerturbationSchedule::utility_n(int n) const {
  return perturbed_family(base, n, PerturbationConfig{kappa, rate});
}

Eigen::VectorXd PerturbationSchedule::theta_n(int n) const { return step(rate, n) * theta; }

void PerturbationSchedule::validate(const ScenarioTree& tree) const {
  if (!(x > 0.0) || !(y > 0.0)) throw ConfigError("schedule needs x > 0 and y > 0");
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("schedule rate must lie in (0, 1)");
  if (N < 1) throw ConfigError("schedule length N must be positive");
  if (a <= -1.0 || b <= -1.0) throw ConfigError("schedule needs a > -1 and b > -1");
  if (theta.size() != 0 && theta.size() != static_cast<Eigen::Index>(tree.interior().size())) {
    throw ConfigError("theta needs one component per interior node");
  }
  if (kappa <= -1.0) throw ConfigError("schedule needs kappa > -1");
}

MeasureTilt tilt_measure(const ScenarioTree& tree, const Eigen::VectorXd& theta) {
  const auto interior = tree.interior();
  if (theta.size() != 0 && theta.size() != static_cast<Eigen::Index>(interior.size())) {
    throw StructuralError("theta needs one component per interior node");
  }
  Eigen::VectorXd p = tree.conditional_probs();
  for (std::size_t k = 0; k < interior.size() && theta.size(); ++k) {
    const auto ch = tree.children(interior[k]);
    const int m = static_cast<int>(ch.size());
    std::vector<double> f(m, 1.0);
    bool identity = true;
    for (int j = 0; j < m; ++j) {
      const double s = m == 1 ? 0.0 : 1.0 - 2.0 * j / (m - 1);
      f[j] = std::exp(theta[k] * s);
      identity = identity && f[j] == 1.0;
    }
    if (identity) continue;
    double total = 0.0;
    for (int j = 0; j < m; ++j) total += p[ch[j]] * f[j];
    for (int j = 0; j < m; ++j) {
      const double w = p[ch[j]] * f[j] / total;
      if (!std::isfinite(w) || !(w > 1e-12 * p[ch[j]])) {
        throw TiltTooLargeError("tilt drives a transition weight to zero at node " + std::to_string(ch[j]));
      }
      p[ch[j]] = w;
    }
  }
  MeasureTilt t{Process(), Eigen::VectorXd(), tree.with_conditional_probs(p), 0.0};
  t.density = t.tree.probs().cwiseQuotient(tree.probs());
  const auto leaves = tree.leaves();
  t.terminal_density.resize(static_cast<Eigen::Index>(leaves.size()));
  for (std::size_t j = 0; j < leaves.size(); ++j) {
    t.terminal_density[j] = t.density[leaves[j]];
    t.tv += 0.5 * std::abs(t.tree.prob(leaves[j]) - tree.prob(leaves[j]));
  }
  return t;
}

double l0_distance(const ScenarioTree& tree, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const auto leaves = tree.leaves();
  if (a.size() != b.size() || a.size() != static_cast<Eigen::Index>(leaves.size())) {
    throw StructuralError("l0_distance needs one value per leaf");
  }
  double d = 0.0;
  for (std::size_t j = 0; j < leaves.size(); ++j) d += tree.prob(leaves[j]) * std::min(std::abs(a[j] - b[j]), 1.0);
  return d;
}

StabilityReport run_static(const Market& market, const PerturbationSchedule& schedule, const StabilityOptions& opts) {
  const auto& tree = market.tree();
  schedule.validate(tree);
  StabilityReport rep;
  const auto p0 = solve_primal(market, schedule.base, schedule.x, opts.solver);
  const auto d0 = solve_dual(market, schedule.base, schedule.y, opts.solver);
  rep.u = p0.value;
  rep.du = p0.marginal;
  rep.v = d0.value;
  rep.dv = d0.marginal;
  const double su = value_scale(rep.u, schedule.x, rep.du);
  const double sv = dual_scale(rep.v, schedule.y, rep.dv);

  rep.rows.resize(schedule.N);
  detail::parallel_for(schedule.N, opts.threads, [&](int i) {
    const int n = i + 1;
    StabilityRow& r = rep.rows[i];
    r.n = n;
    r.x = schedule.x_n(n);
    r.y = schedule.y_n(n);
    const UtilitySpec un = schedule.utility_n(n);
    r.gamma = un.gamma;
    const MeasureTilt tilt = tilt_measure(tree, schedule.theta_n(n));
    const Market mn = market.with_tree(tilt.tree);
    const auto pn = solve_primal(mn, un, r.x, opts.solver);
    const auto dn = solve_dual(mn, un, r.y, opts.solver);
    r.u = pn.value;
    r.du = pn.marginal;
    r.v = dn.value;
    r.dv = dn.marginal;
    r.err_u = std::abs(r.u - rep.u) / su;
    r.err_v = std::abs(r.v - rep.v) / sv;
    r.err_du = std::abs(r.du - rep.du) / std::abs(rep.du);
    r.err_dv = std::abs(r.dv - rep.dv) / std::abs(rep.dv);
    r.d_primal = l0_distance(tree, pn.terminal_wealth, p0.terminal_wealth);
    r.d_dual = l0_distance(tree, dn.terminal_density, d0.terminal_density);
    r.tv = tilt.tv;
  });

  auto& R = rep.rates;
  R.u = fit_rate(rep.rows, &StabilityRow::err_u);
  R.v = fit_rate(rep.rows, &StabilityRow::err_v);
  R.du = fit_rate(rep.rows, &StabilityRow::err_du);
  R.dv = fit_rate(rep.rows, &StabilityRow::err_dv);
  R.primal = fit_rate(rep.rows, &StabilityRow::d_primal);
  R.dual = fit_rate(rep.rows, &StabilityRow::d_dual);
  R.tv = fit_rate(rep.rows, &StabilityRow::tv);

  if (schedule.N >= 10) {
    const auto& first = rep.rows.front();
    const auto& last = rep.rows.back();
    auto decay = [&](const char* name, double StabilityRow::*f) {
      const double lim = 0.1 * (first.*f);
      rep.checks.push_back(make_check(std::string("decay_") + name, last.*f, lim));
    };
    decay("u", &StabilityRow::err_u);
    decay("v", &StabilityRow::err_v);
    decay("du", &StabilityRow::err_du);
    decay("dv", &StabilityRow::err_dv);
    decay("primal_optimizer", &StabilityRow::d_primal);
    decay("dual_optimizer", &StabilityRow::d_dual);
    // |ratio / rate − 1| per step
    double worst = 0.0;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      const double prev = rep.rows[i - 1].tv, cur = rep.rows[i].tv;
      if (prev == 0.0 && cur == 0.0) continue;
      const double ratio = prev > 0.0 ? cur / prev : std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::abs(ratio / schedule.rate - 1.0));
    }
    rep.checks.push_back(make_check("tv_halving", worst, 0.1));
  }
  return rep;
}

std::string stability_csv(const StabilityReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n,x,y,gamma,u,v,du,dv,err_u,err_v,err_du,err_dv,d_primal,d_dual,tv\n";
  for (const auto& r : report.rows) {
    os << r.n << ',' << r.x << ',' << r.y << ',' << r.gamma << ',' << r.u << ',' << r.v << ',' << r.du << ','
       << r.dv << ',' << r.err_u << ',' << r.err_v << ',' << r.err_du << ',' << r.err_dv << ',' << r.d_primal
       << ',' << r.d_dual << ',' << r.tv << '\n';
  }
  return os.str();
}

Deflator deflator_measure_change(const Deflator& d, const MeasureTilt& tilt, MeasureDirection direction) {
  if (d.y0.size() != tilt.density.size() || d.y1.size() != tilt.density.size()) {
    throw StructuralError("deflator size does not match tilt");
  }
  if (direction == MeasureDirection::to_base) {
    return {d.y0.cwiseProduct(tilt.density), d.y1.cwiseProduct(tilt.density)};
  }
  if (!(tilt.density.minCoeff() > 0.0)) throw NumericError("density vanishes; cannot divide");
  return {d.y0.cwiseQuotient(tilt.density), d.y1.cwiseQuotient(tilt.density)};
}

PriceSystem price_system_measure_change(const PriceSystem& z, const MeasureTilt& tilt, MeasureDirection direction) {
  const Deflator d = deflator_measure_change(Deflator{z.z0, z.z1}, tilt, direction);
  return {d.y0, d.y1};
}

UizReport uiz_diagnostic(const Market& market, const PerturbationSchedule& schedule, const Process& z0, double y) {
  const auto& tree = market.tree();
  schedule.validate(tree);
  if (z0.size() != tree.size()) throw StructuralError("z0 size does not match tree");
  if (!(y > 0.0)) throw DomainError("y must be positive");
  UizReport r;
  const auto leaves = tree.leaves();
  for (int n = 1; n <= schedule.N; ++n) {
    const MeasureTilt tilt = tilt_measure(tree, schedule.theta_n(n));
    const UtilitySpec un = schedule.utility_n(n);
    double e = 0.0;
    for (std::size_t j = 0; j < leaves.size(); ++j) {
      const double zt = tilt.terminal_density[j];
      e += tree.prob(leaves[j]) * zt * std::max(conjugate(un, y * z0[leaves[j]] / zt), 0.0);
    }
    if (n == 1 || e > r.sup) {
      r.sup = e;
      r.argmax = n;
    }
  }
  r.finite = std::isfinite(r.sup);
  return r;
}

DynamicReport run_dynamic(const Market& market, const PerturbationSchedule& schedule, const DynamicOptions& opts) {
  const auto& tree = market.tree();
  schedule.validate(tree);
  const int N = schedule.N;
  DynamicReport rep;
  const auto d0 = solve_dual(market, schedule.base, schedule.y, opts.solver);
  rep.base = d0.deflator();
  rep.v = d0.value;

  // Distinct instances, in schedule order.
  std::vector<Instance> inst;
  std::vector<int> which(N);
  for (int n = 1; n <= N; ++n) {
    Instance cur{schedule.y_n(n), schedule.utility_n(n), schedule.theta_n(n), {}};
    cur.weights = tilt_measure(tree, cur.theta).tree.conditional_probs();
    if (inst.empty() || !inst.back().same(cur)) inst.push_back(std::move(cur));
    which[n - 1] = static_cast<int>(inst.size()) - 1;
  }
  rep.distinct_solves = static_cast<int>(inst.size());
  auto& solved = rep.mapped;
  solved.resize(inst.size());
  detail::parallel_for(static_cast<int>(inst.size()), opts.threads, [&](int k) {
    const MeasureTilt tilt = tilt_measure(tree, inst[k].theta);
    const auto dn = solve_dual(market.with_tree(tilt.tree), inst[k].u, inst[k].y, opts.solver);
    solved[k] = deflator_measure_change(dn.deflator(), tilt, MeasureDirection::to_base);
  });

  const auto leaves = tree.leaves();
  auto terminal = [&](const Process& y0) {
    Eigen::VectorXd t(static_cast<Eigen::Index>(leaves.size()));
    for (std::size_t j = 0; j < leaves.size(); ++j) t[j] = y0[leaves[j]];
    return t;
  };
  const Eigen::VectorXd h = d0.terminal_density;
  const double y = schedule.y;

  Deflator sum{Process::Zero(tree.size()), Process::Zero(tree.size())};
  Deflator prev = sum;
  std::vector<Deflator> tail;
  rep.rows.resize(N);
  for (int n = 1; n <= N; ++n) {
    const Deflator& yn = solved[which[n - 1]];
    sum.y0 += yn.y0;
    sum.y1 += yn.y1;
    const Deflator c{sum.y0 / n, sum.y1 / n};
    DynamicRow& r = rep.rows[n - 1];
    r.n = n;
    r.terminal_deviation = l0_distance(tree, terminal(yn.y0), h);
    r.cesaro_deviation = l0_distance(tree, terminal(c.y0), h);
    if (n > 1) {
      r.cauchy = std::max((c.y0 - prev.y0).lpNorm<Eigen::Infinity>(), (c.y1 - prev.y1).lpNorm<Eigen::Infinity>()) / y;
    }
    if (2 * n >= N && n < N) tail.push_back(c);
    prev = c;
  }
  rep.limit = prev;
  rep.step_instance = std::move(which);
  for (const auto& c : tail) {
    rep.cauchy_tail = std::max({rep.cauchy_tail, (rep.limit.y0 - c.y0).lpNorm<Eigen::Infinity>() / y,
                                (rep.limit.y1 - c.y1).lpNorm<Eigen::Infinity>() / y});
  }

  rep.deflator = is_deflator(market, rep.limit, opts.deflator_tol);
  for (std::size_t j = 0; j < leaves.size(); ++j) {
    rep.v_limit += tree.prob(leaves[j]) * conjugate(schedule.base, rep.limit.y0[leaves[j]]);
  }
  rep.value_deviation = std::abs(rep.v_limit - rep.v) / dual_scale(rep.v, y, d0.marginal);

  const double worst_def = std::max({rep.deflator.supermartingale_violation, rep.deflator.spread_violation,
                                     rep.deflator.portfolio_violation,
                                     rep.deflator.nonnegative ? 0.0 : std::numeric_limits<double>::infinity()});
  rep.checks.push_back(make_check("limit_is_deflator", worst_def, opts.deflator_tol));
  rep.checks.push_back(make_check("limit_dual_value", rep.value_deviation, opts.value_tol));
  rep.checks.push_back(make_check("limit_terminal_deviation", rep.rows.back().cesaro_deviation,
                                  std::max(opts.terminal_ratio * rep.rows.front().terminal_deviation, 1e-12)));
  return rep;
}

ShadowStabilityReport shadow_stability(const Market& market, const PerturbationSchedule& schedule,
                                       const DynamicOptions& opts, double tol) {
  const DynamicReport dyn = run_dynamic(market, schedule, opts);
  const auto& S = market.price();
  ShadowStabilityReport rep;

  auto violation = [&](const Process& ratio) {
    int count = 0;
    for (int v = 0; v < S.size(); ++v) {
      if ((market.bid(v) - ratio[v]) / S[v] > 1e-9 || (ratio[v] - S[v]) / S[v] > 1e-9) ++count;
    }
    return count;
  };

  rep.limit.ratio = dyn.limit.y1.cwiseQuotient(dyn.limit.y0);
  rep.limit.y = schedule.y;
  rep.limit.source = "cesaro";
  rep.spread_violations = violation(rep.limit.ratio);
  std::vector<double> dev;
  for (const auto& m : dyn.mapped) {
    const Process sn = m.y1.cwiseQuotient(m.y0);
    rep.spread_violations += violation(sn);
    dev.push_back((sn - rep.limit.ratio).cwiseQuotient(S).lpNorm<Eigen::Infinity>());
  }
  rep.deviation.reserve(dyn.step_instance.size());
  for (int k : dyn.step_instance) rep.deviation.push_back(dev[k]);
  // The limit prices the frictionless problem at x = −v′(y).
  const auto d0 = solve_dual(market, schedule.base, schedule.y, opts.solver);
  const double x = -d0.marginal;
  rep.shadow = verify_shadow(market, schedule.base, x, rep.limit, tol, tol, opts.solver);
  rep.checks = rep.shadow.checks;
  rep.checks.push_back(make_check("spread_containment", rep.spread_violations, 0.0));
  return rep;
}

}  // namespace txlab
