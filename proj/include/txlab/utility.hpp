#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

namespace txlab {

enum class UtilityFamily { log, crra };

/// Log or CRRA utility on (0, ∞), optionally shifted by a constant.
///
/// CRRA(γ): U(x) = x^{1−γ}/(1−γ) + offset, or (x^{1−γ} − 1)/(1−γ) + offset when
/// normalised (evaluated without cancellation as γ → 1). Both families satisfy the Inada
/// conditions and have asymptotic elasticity below one (0 for log, 1−γ for
/// CRRA), so no numerical verification of those is needed.
struct UtilitySpec {
  UtilityFamily family = UtilityFamily::log;
  double gamma = 1.0;
  double offset = 0.0;
  bool normalized = false;

  static UtilitySpec log_utility();
  static UtilitySpec crra(double gamma, double offset = 0.0);
  /// "log" or "crra:<gamma>".
  static UtilitySpec parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const UtilitySpec&) const = default;
};

enum class UtilityMap { U, dU, V, dV, I };

template <class Scalar>
Scalar utility(const UtilitySpec& u, Scalar x) {
  using std::log, std::pow;
  if (u.family == UtilityFamily::log) return log(x) + Scalar(u.offset);
  using std::expm1;
  const Scalar e = Scalar(1) - Scalar(u.gamma);
  if (u.normalized) return expm1(e * log(x)) / e + Scalar(u.offset);
  return pow(x, e) / e + Scalar(u.offset);
}

template <class Scalar>
Scalar marginal_utility(const UtilitySpec& u, Scalar x) {
  using std::pow;
  if (u.family == UtilityFamily::log) return Scalar(1) / x;
  return pow(x, -Scalar(u.gamma));
}

template <class Scalar>
Scalar utility_curvature(const UtilitySpec& u, Scalar x) {
  using std::pow;
  if (u.family == UtilityFamily::log) return -Scalar(1) / (x * x);
  return -Scalar(u.gamma) * pow(x, -Scalar(u.gamma) - Scalar(1));
}

/// I = (U')^{-1}.
template <class Scalar>
Scalar inverse_marginal(const UtilitySpec& u, Scalar y) {
  using std::pow;
  if (u.family == UtilityFamily::log) return Scalar(1) / y;
  return pow(y, -Scalar(1) / Scalar(u.gamma));
}

/// V(y) = sup_x {U(x) − xy}.
template <class Scalar>
Scalar conjugate(const UtilitySpec& u, Scalar y) {
  using std::log, std::pow;
  if (u.family == UtilityFamily::log) return -log(y) - Scalar(1) + Scalar(u.offset);
  using std::expm1;
  const Scalar g = Scalar(u.gamma);
  if (u.normalized) return g * expm1((g - Scalar(1)) / g * log(y)) / (Scalar(1) - g) - Scalar(1) + Scalar(u.offset);
  return g / (Scalar(1) - g) * pow(y, (g - Scalar(1)) / g) + Scalar(u.offset);
}

/// V' = −I.
template <class Scalar>
Scalar conjugate_derivative(const UtilitySpec& u, Scalar y) {
  return -inverse_marginal(u, y);
}

template <class Scalar>
Scalar conjugate_curvature(const UtilitySpec& u, Scalar y) {
  using std::pow;
  if (u.family == UtilityFamily::log) return Scalar(1) / (y * y);
  const Scalar g = Scalar(u.gamma);
  return pow(y, -Scalar(1) / g - Scalar(1)) / g;
}

/// Checked scalar evaluation; throws DomainError for arg <= 0.
double evaluate(const UtilitySpec& u, UtilityMap which, double arg);

/// max over the grid of U(x) − V(y) − xy; never positive for a conjugate pair.
double fenchel_check(const UtilitySpec& u, std::span<const double> xs, std::span<const double> ys);

struct PerturbationConfig {
  double kappa = 0.5;
  double rate = 0.5;
};

/// n-th element of the γ-parametric perturbation γ_n = γ(1 + rate^n κ).
///
/// A log base (γ = 1) is perturbed into normalised CRRA, which converges to
/// log pointwise.
UtilitySpec perturbed_family(const UtilitySpec& base, int n, const PerturbationConfig& cfg = {});

}  // namespace txlab
