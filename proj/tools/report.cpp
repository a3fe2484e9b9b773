#include "report.hpp"

#include <iomanip>
#include <sstream>

namespace txcli {

using txlab::io::to_json;

json to_json(const txlab::SolverDiagnostics& d) {
  return {{"iterations", d.iterations}, {"final_barrier", d.final_barrier}, {"kkt_residual", d.kkt_residual}};
}

json to_json(const txlab::PrimalSolution& s) {
  return {{"value", s.value},
          {"marginal", s.marginal},
          {"terminal_wealth", to_json(s.terminal_wealth)},
          {"diagnostics", to_json(s.diagnostics)}};
}

json to_json(const txlab::DualSolution& s) {
  return {{"y", s.y},
          {"value", s.value},
          {"marginal", s.marginal},
          {"terminal_density", to_json(s.terminal_density)},
          {"z0", to_json(s.price_system.z0)},
          {"z1", to_json(s.price_system.z1)},
          {"diagnostics", to_json(s.diagnostics)}};
}

json to_json(const txlab::CpsReport& r) {
  return {{"feasible", r.feasible},
          {"martingale_residual", r.martingale_residual},
          {"spread_violation", r.spread_violation},
          {"root_violation", r.root_violation},
          {"positive", r.positive}};
}

json to_json(const txlab::DeflatorReport& r) {
  return {{"deflator", r.deflator},
          {"supermartingale_violation", r.supermartingale_violation},
          {"spread_violation", r.spread_violation},
          {"portfolio_violation", r.portfolio_violation},
          {"nonnegative", r.nonnegative}};
}

json to_json(const txlab::AdmissibilityReport& r) {
  return {{"admissible", r.admissible},
          {"worst_node", r.worst_node},
          {"worst_value", r.worst_value},
          {"max_terminal_stock", r.max_terminal_stock}};
}

json to_json(const txlab::DualityReport& r) {
  return {{"x", r.x},
          {"y_star", r.y_star},
          {"u", r.u},
          {"v", r.v},
          {"gap", r.gap},
          {"conjugate",
           {{"u", r.conjugate.u},
            {"y_star", r.conjugate.y_star},
            {"y_best", r.conjugate.y_best},
            {"min_dual", r.conjugate.min_dual},
            {"gap", r.conjugate.gap}}},
          {"first_order_max", r.first_order.size() ? r.first_order.maxCoeff() : 0.0},
          {"inverse_first_order_max", r.inverse_first_order.size() ? r.inverse_first_order.maxCoeff() : 0.0},
          {"complementarity", r.complementarity},
          {"product_martingale", r.product_martingale},
          {"primal", to_json(r.primal)},
          {"dual", to_json(r.dual)}};
}

json to_json(const txlab::ShadowReport& r) {
  return {{"value_frictional", r.value_frictional},
          {"value_shadow", r.value_shadow},
          {"value_deviation", r.value_deviation},
          {"wealth_deviation", r.wealth_deviation},
          {"spread_violation", r.spread_violation}};
}

json to_json(const txlab::StabilityReport& r) {
  json rows = json::array();
  for (const auto& w : r.rows) {
    rows.push_back({{"n", w.n},         {"x", w.x},         {"y", w.y},         {"gamma", w.gamma},
                    {"err_u", w.err_u}, {"err_v", w.err_v}, {"err_du", w.err_du}, {"err_dv", w.err_dv},
                    {"d_primal", w.d_primal}, {"d_dual", w.d_dual}, {"tv", w.tv}});
  }
  return {{"u", r.u},
          {"v", r.v},
          {"du", r.du},
          {"dv", r.dv},
          {"rates",
           {{"u", r.rates.u},
            {"v", r.rates.v},
            {"du", r.rates.du},
            {"dv", r.rates.dv},
            {"primal", r.rates.primal},
            {"dual", r.rates.dual},
            {"tv", r.rates.tv}}},
          {"rows", std::move(rows)}};
}

json to_json(const txlab::DynamicReport& r) {
  const auto& last = r.rows.back();
  return {{"v", r.v},
          {"v_limit", r.v_limit},
          {"value_deviation", r.value_deviation},
          {"cauchy_tail", r.cauchy_tail},
          {"first_terminal_deviation", r.rows.front().terminal_deviation},
          {"limit_terminal_deviation", last.cesaro_deviation},
          {"distinct_solves", r.distinct_solves},
          {"deflator", to_json(r.deflator)},
          {"limit_z0", to_json(r.limit.y0)},
          {"limit_z1", to_json(r.limit.y1)}};
}

json to_json(const txlab::ShadowStabilityReport& r) {
  double worst = 0.0;
  for (double d : r.deviation) worst = std::max(worst, d);
  return {{"limit_ratio", to_json(r.limit.ratio)},
          {"shadow", to_json(r.shadow)},
          {"max_step_deviation", worst},
          {"last_step_deviation", r.deviation.empty() ? 0.0 : r.deviation.back()},
          {"spread_violations", r.spread_violations}};
}

json to_json(const txlab::CxReport& r) {
  json cps = json::array();
  for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
    cps.push_back({{"step", r.checkpoints[i]},
                   {"z_hat_mean", r.z_hat_mean[i]},
                   {"z_hat_se", r.z_hat_se[i]},
                   {"z_check_mean", r.perturbation.z_check_mean[i]},
                   {"z_check_se", r.perturbation.z_check_se[i]}});
  }
  return {{"m_hat", r.potential.m_hat},
          {"p_hat0", r.potential.p_hat0},
          {"p_hat0_exact", r.potential.p_hat0_exact},
          {"sigma_probability", r.potential.sigma_probability},
          {"sigma_se", r.potential.sigma_se},
          {"coin_mean", r.perturbation.coin_mean},
          {"deviation_fraction", r.deviation_fraction},
          {"deviation_se", r.deviation_se},
          {"upper_fraction", r.upper_fraction},
          {"lower_fraction", r.lower_fraction},
          {"cap_fraction", r.cap_fraction},
          {"h_hat", r.h_hat},
          {"upper_h_error", r.upper_h_error},
          {"upper_s_hat_error", r.upper_s_hat_error},
          {"s0_error", r.market.s0_error},
          {"upper_s1_error", r.market.upper_s1_error},
          {"ratio_violations", r.perturbation.ratio_violations},
          {"spread_violations", r.market.spread_violations},
          {"order_violations", r.market.order_violations},
          {"first_order_residual", r.first_order_residual},
          {"log_utility_error", r.log_utility_error},
          {"z_hat_T_mean", r.z_hat_T_mean},
          {"z_hat_T_se", r.z_hat_T_se},
          {"z_mass_upper", r.z_mass_upper},
          {"z_mass_lower", r.z_mass_lower},
          {"z_mass_cap", r.z_mass_cap},
          {"drift", {{"z_hat", r.drift.z_hat}, {"z_check", r.drift.z_check}, {"coin", r.drift.coin}}},
          {"checkpoints", std::move(cps)}};
}

namespace {

std::ostringstream csv_stream() {
  std::ostringstream os;
  os << std::setprecision(17);
  return os;
}

void node_prefix(std::ostream& os, const txlab::Market& m, int n) {
  const auto& t = m.tree();
  os << n << ',' << t.time(n) << ',' << t.parent(n) << ',' << t.prob(n) << ',' << m.ask(n) << ',' << m.bid(n);
}

}  // namespace

std::string primal_csv(const txlab::Market& market, const txlab::PrimalSolution& s) {
  auto os = csv_stream();
  os << "node,t,parent,prob,ask,bid,buy,sell,bond,stock,liquidation\n";
  const txlab::Process liq = txlab::liquidation_value(market, s.holdings);
  for (int n = 0; n < market.tree().size(); ++n) {
    node_prefix(os, market, n);
    os << ',' << s.strategy.buy[n] << ',' << s.strategy.sell[n] << ',' << s.holdings.bond[n] << ','
       << s.holdings.stock[n] << ',' << liq[n] << '\n';
  }
  return os.str();
}

std::string dual_csv(const txlab::Market& market, const txlab::DualSolution& s) {
  auto os = csv_stream();
  os << "node,t,parent,prob,ask,bid,z0,z1,ratio\n";
  const auto& z = s.price_system;
  for (int n = 0; n < market.tree().size(); ++n) {
    node_prefix(os, market, n);
    os << ',' << z.z0[n] << ',' << z.z1[n] << ',' << z.z1[n] / z.z0[n] << '\n';
  }
  return os.str();
}

std::string duality_csv(const txlab::Market& market, const txlab::UtilitySpec& u, const txlab::DualityReport& r) {
  auto os = csv_stream();
  os << "leaf,node,prob,g,h,marginal_utility,first_order\n";
  const auto leaves = market.tree().leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const int n = leaves[k];
    const double g = r.primal.terminal_wealth[k];
    os << k << ',' << n << ',' << market.tree().prob(n) << ',' << g << ',' << r.dual.terminal_density[k] << ','
       << txlab::marginal_utility(u, g) << ',' << r.first_order[k] << '\n';
  }
  return os.str();
}

std::string shadow_csv(const txlab::Market& market, const txlab::ShadowPrice& sp) {
  auto os = csv_stream();
  os << "node,t,bid,shadow,ask\n";
  for (int n = 0; n < market.tree().size(); ++n) {
    os << n << ',' << market.tree().time(n) << ',' << market.bid(n) << ',' << sp.ratio[n] << ',' << market.ask(n)
       << '\n';
  }
  return os.str();
}

std::string dynamic_csv(const txlab::DynamicReport& r) {
  auto os = csv_stream();
  os << "n,terminal_deviation,cesaro_deviation,cauchy,instance\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& w = r.rows[i];
    os << w.n << ',' << w.terminal_deviation << ',' << w.cesaro_deviation << ',' << w.cauchy << ','
       << r.step_instance[i] << '\n';
  }
  return os.str();
}

}  // namespace txcli
