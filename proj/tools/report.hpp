#pragma once

#include <string>

#include "txlab/counterexample.hpp"
#include "txlab/duality_lab.hpp"
#include "txlab/io.hpp"
#include "txlab/stability.hpp"

namespace txcli {

using txlab::io::json;

json to_json(const txlab::SolverDiagnostics& d);
json to_json(const txlab::PrimalSolution& s);
json to_json(const txlab::DualSolution& s);
json to_json(const txlab::CpsReport& r);
json to_json(const txlab::DeflatorReport& r);
json to_json(const txlab::AdmissibilityReport& r);
json to_json(const txlab::DualityReport& r);
json to_json(const txlab::ShadowReport& r);
json to_json(const txlab::StabilityReport& r);
json to_json(const txlab::DynamicReport& r);
json to_json(const txlab::ShadowStabilityReport& r);
json to_json(const txlab::CxReport& r);

/// node,t,parent,prob,ask,bid,buy,sell,bond,stock,liquidation
std::string primal_csv(const txlab::Market& market, const txlab::PrimalSolution& s);
/// node,t,parent,prob,ask,bid,z0,z1,ratio
std::string dual_csv(const txlab::Market& market, const txlab::DualSolution& s);
/// leaf,node,prob,g,h,marginal_utility,first_order
std::string duality_csv(const txlab::Market& market, const txlab::UtilitySpec& u, const txlab::DualityReport& r);
/// node,t,bid,shadow,ask
std::string shadow_csv(const txlab::Market& market, const txlab::ShadowPrice& sp);
/// n,terminal_deviation,cesaro_deviation,cauchy,instance
std::string dynamic_csv(const txlab::DynamicReport& r);

}  // namespace txcli
