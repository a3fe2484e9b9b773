#include "txlab/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "txlab/error.hpp"

namespace txlab {

UtilitySpec UtilitySpec::log_utility() { return {}; }

UtilitySpec UtilitySpec::crra(double gamma, double offset) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("CRRA risk aversion must be positive");
  if (gamma == 1.0) throw DomainError("CRRA with gamma = 1 is the log utility");
  return {UtilityFamily::crra, gamma, offset};
}

UtilitySpec UtilitySpec::parse(std::string_view text) {
  if (text == "log") return log_utility();
  constexpr std::string_view prefix = "crra:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string rest(text.substr(prefix.size()));
    std::size_t used = 0;
    double g = 0.0;
    try {
      g = std::stod(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rest.size()) throw DomainError("cannot parse utility '" + std::string(text) + "'");
    return crra(g);
  }
  throw DomainError("unknown utility '" + std::string(text) + "' (expected log or crra:<gamma>)");
}

std::string UtilitySpec::to_string() const {
  if (family == UtilityFamily::log && offset == 0.0) return "log";
  std::ostringstream os;
  os.precision(17);
  if (family == UtilityFamily::log) {
    os << "log+" << offset;
  } else {
    os << "crra:" << gamma;
    if (normalized) os << "-normalized";
    if (offset != 0.0) os << "+" << offset;
  }
  return os.str();
}

double evaluate(const UtilitySpec& u, UtilityMap which, double arg) {
  if (!(arg > 0.0)) throw DomainError("utility maps are defined on (0, inf)");
  switch (which) {
    case UtilityMap::U: return utility(u, arg);
    case UtilityMap::dU: return marginal_utility(u, arg);
    case UtilityMap::V: return conjugate(u, arg);
    case UtilityMap::dV: return conjugate_derivative(u, arg);
    case UtilityMap::I: return inverse_marginal(u, arg);
  }
  return 0.0;
}

double fenchel_check(const UtilitySpec& u, std::span<const double> xs, std::span<const double> ys) {
  double worst = -std::numeric_limits<double>::infinity();
  for (double x : xs) {
    const double ux = evaluate(u, UtilityMap::U, x);
    for (double y : ys) worst = std::max(worst, ux - evaluate(u, UtilityMap::V, y) - x * y);
  }
  return worst;
}

UtilitySpec perturbed_family(const UtilitySpec& base, int n, const PerturbationConfig& cfg) {
  if (n < 0) throw DomainError("perturbation index must be non-negative");
  const double g = base.gamma * (1.0 + std::pow(cfg.rate, n) * cfg.kappa);
  if (g == base.gamma) return base;
  if (base.family == UtilityFamily::log) {
    UtilitySpec u = UtilitySpec::crra(g, base.offset);
    u.normalized = true;
    return u;
  }
  return UtilitySpec::crra(g, base.offset);
}

}  // namespace txlab
