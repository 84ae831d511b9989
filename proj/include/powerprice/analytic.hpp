#pragma once

#include <cmath>
#include <numbers>
#include <sstream>

#include "powerprice/errors.hpp"
#include "powerprice/term_model.hpp"

namespace powerprice {

/// Phi(x) through erfc, accurate in both tails.
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inputs of E[e^{c W1 + d W2} 1{a W1 + b W2 >= k}] for unit normals with correlation rho.
struct BivariateSpec {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double k = 0.0;
  double rho = 0.0;
};

/// Closed form
///   e^{(c^2 + d^2 + 2 rho c d)/2} N((ac + bd + rho(ad + bc) - k) / sqrt(a^2 + b^2 + 2 rho a b)).
/// The exponential tilt by (c, d) shifts the mean of a W1 + b W2 by ac + bd + rho(ad + bc).
inline double truncated_bivariate_expectation(const BivariateSpec& s) {
  if (!(s.rho >= -1.0 && s.rho <= 1.0)) throw DomainError("truncated_bivariate_expectation: |rho| > 1");
  const double dir = s.a * s.a + s.b * s.b + 2.0 * s.rho * s.a * s.b;
  if (!(dir > 0.0)) throw DomainError("truncated_bivariate_expectation: degenerate direction");
  const double tilt = 0.5 * (s.c * s.c + s.d * s.d + 2.0 * s.rho * s.c * s.d);
  const double shift = s.a * s.c + s.b * s.d + s.rho * (s.a * s.d + s.b * s.c);
  return std::exp(tilt) * std_normal_cdf((shift - s.k) / std::sqrt(dir));
}

/// Zero-coupon bond P(t,T) = exp(-G + var_x / 2).
inline double bond_price(const MarketModel& model, double t, double T, double r_t,
                         const QuadratureOptions& quad = {}) {
  if (t > T) {
    std::ostringstream os;
    os << "bond_price: t = " << t << " after maturity " << T;
    throw DomainError(os.str());
  }
  detail::check_window(model, t, T, "bond_price");
  if (t == T) return 1.0;
  const VarianceBundle b = variance_bundle(model, t, T, r_t, quad);
  return std::exp(-b.G + 0.5 * b.var_x);
}

}  // namespace powerprice
