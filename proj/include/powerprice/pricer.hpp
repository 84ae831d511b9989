#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string_view>

#include "powerprice/analytic.hpp"
#include "powerprice/errors.hpp"
#include "powerprice/term_model.hpp"

namespace powerprice {

enum class PayoffVariant {
  PowerStrike,  // (S^n - K^n)^+ / (K^n - S^n)^+
  PlainStrike,  // (S^n - K)^+   / (K - S^n)^+
};

enum class OptionSide { Call, Put };

enum class PricingMethod {
  MartingaleMethod,  // discount under Q
  ForwardMeasure,    // T-forward measure with the zero-coupon bond as numeraire
};

// Which market assumption the caller is pricing under. Both lead to the same
// integrals, so this only selects the theorem label reported with the price.
enum class MarketAssumption {
  CorrelatedUnderQ,          // rate and asset Brownian motions correlated under Q
  CorrelatedUnderRealWorld,  // correlated under P, mapped to Q by Girsanov
};

struct OptionSpec {
  double n = 1.0;
  double strike = 0.0;
  double maturity = 0.0;
  PayoffVariant variant = PayoffVariant::PowerStrike;
  OptionSide side = OptionSide::Call;
};

/// Closed-form price with its decomposition.
///
/// forward_a / forward_b are the asset and strike legs before the N(.) factors;
/// for a call price = term_a - term_b with term_a = forward_a N(d1) and
/// term_b = forward_b N(d2); for a put term_a = forward_a N(-d1) and
/// term_b = forward_b N(-d2) with price = term_b - term_a.
struct PriceResult {
  double price = 0.0;
  double term_a = 0.0;
  double term_b = 0.0;
  double forward_a = 0.0;
  double forward_b = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  VarianceBundle bundle;
  int theorem = 0;
};

inline constexpr double kDegenerateTotalVar = 1e-14;

/// Theorem number (1-8) for a method/variant/assumption triple.
inline int theorem_label(PricingMethod method, PayoffVariant variant, MarketAssumption assumption) {
  int base = (method == PricingMethod::MartingaleMethod) ? 1 : 5;
  if (assumption == MarketAssumption::CorrelatedUnderRealWorld) base += 2;
  return base + (variant == PayoffVariant::PlainStrike ? 1 : 0);
}

inline void validate_option(const OptionSpec& spec) {
  if (!(spec.n > 0.0) || !std::isfinite(spec.n)) throw DomainError("option: power n must be > 0");
  if (!(spec.strike > 0.0) || !std::isfinite(spec.strike))
    throw DomainError("option: strike must be > 0");
  if (!(spec.maturity > 0.0)) throw DomainError("option: maturity must be > 0");
}

/// Payoff at expiry for terminal asset value s.
inline double payoff(const OptionSpec& spec, double s) {
  const double sn = std::pow(s, spec.n);
  const double k =
      spec.variant == PayoffVariant::PowerStrike ? std::pow(spec.strike, spec.n) : spec.strike;
  return spec.side == OptionSide::Call ? std::max(sn - k, 0.0) : std::max(k - sn, 0.0);
}

namespace detail {

struct Legs {
  double forward_a;
  double forward_b;
  double log_moneyness;  // numerator of d2, before dividing by sqrt(total_var)
};

inline Legs martingale_legs(const VarianceBundle& b, double n, double log_s, double log_k_eff,
                            double log_k_pay) {
  const double sx = std::sqrt(b.var_x), sy = std::sqrt(b.var_y);
  const double cxy = b.rho_eff * sx * sy;
  const double expo_a = n * log_s + (n - 1.0) * b.G - n * b.int_q +
                        0.5 * (n - 1.0) * (n - 1.0) * b.var_x + 0.5 * n * (n - 1.0) * b.var_y +
                        n * (n - 1.0) * cxy;
  const double expo_b = log_k_pay - b.G + 0.5 * b.var_x;
  const double num_d2 = log_s - log_k_eff + b.G - b.int_q - (b.var_x + 0.5 * b.var_y + cxy);
  return {std::exp(expo_a), std::exp(expo_b), num_d2};
}

inline Legs forward_legs(const VarianceBundle& b, double bond, double n, double log_s,
                         double log_k_eff, double log_k_pay) {
  const double sx = std::sqrt(b.var_x), sy = std::sqrt(b.var_y);
  const double cxy = b.rho_eff * sx * sy;
  const double log_p = std::log(bond);
  const double expo_a = n * log_s - (n - 1.0) * log_p + 0.5 * n * (n - 1.0) * b.var_x +
                        0.5 * n * (n - 1.0) * b.var_y + n * (n - 1.0) * cxy - n * b.int_q;
  const double num_d2 = log_s - log_k_eff - log_p - b.int_q - 0.5 * b.var_y - 0.5 * b.var_x - cxy;
  return {std::exp(expo_a), bond * std::exp(log_k_pay), num_d2};
}

}  // namespace detail

/// European power option price at time t given r_t and S_t.
inline PriceResult price_option(const MarketModel& model, const OptionSpec& spec,
                                PricingMethod method, double t, double r_t, double s_t,
                                MarketAssumption assumption = MarketAssumption::CorrelatedUnderQ,
                                const QuadratureOptions& quad = {}) {
  validate_option(spec);
  if (!(s_t > 0.0) || !std::isfinite(s_t)) throw DomainError("price_option: S_t must be > 0");
  if (!(t < spec.maturity)) {
    std::ostringstream os;
    os << "price_option: valuation time " << t << " not before maturity " << spec.maturity;
    throw DomainError(os.str());
  }
  if (!std::isfinite(r_t)) throw DomainError("price_option: r_t must be finite");

  PriceResult out;
  out.theorem = theorem_label(method, spec.variant, assumption);
  out.bundle = variance_bundle(model, t, spec.maturity, r_t, quad);
  const VarianceBundle& b = out.bundle;

  const double n = spec.n;
  const double log_s = std::log(s_t);
  const double log_k = std::log(spec.strike);
  const bool power = spec.variant == PayoffVariant::PowerStrike;
  // Exercise boundary on S and the log of the strike actually paid.
  const double log_k_eff = power ? log_k : log_k / n;
  const double log_k_pay = power ? n * log_k : log_k;

  const detail::Legs legs =
      method == PricingMethod::MartingaleMethod
          ? detail::martingale_legs(b, n, log_s, log_k_eff, log_k_pay)
          : detail::forward_legs(b, bond_price(model, t, spec.maturity, r_t, quad), n, log_s,
                                 log_k_eff, log_k_pay);
  out.forward_a = legs.forward_a;
  out.forward_b = legs.forward_b;
  const bool call = spec.side == OptionSide::Call;

  if (b.total_var < kDegenerateTotalVar) {
    const double inf = std::numeric_limits<double>::infinity();
    const bool in_money = legs.forward_a > legs.forward_b;
    out.d1 = out.d2 = in_money ? inf : -inf;
    const double intrinsic = std::max(call ? legs.forward_a - legs.forward_b
                                           : legs.forward_b - legs.forward_a,
                                      0.0);
    const bool exercised = call ? in_money : legs.forward_b > legs.forward_a;
    out.term_a = exercised ? legs.forward_a : 0.0;
    out.term_b = exercised ? legs.forward_b : 0.0;
    out.price = intrinsic;
    return out;
  }

  const double sd = std::sqrt(b.total_var);
  out.d2 = legs.log_moneyness / sd;
  out.d1 = out.d2 + n * sd;

  if (call) {
    out.term_a = legs.forward_a * std_normal_cdf(out.d1);
#ifdef POWERPRICE_FAULT_INJECTION
    // Negative-control build: wrong exercise probability on the strike leg.
    out.term_b = legs.forward_b * std_normal_cdf(out.d1);
#else
    out.term_b = legs.forward_b * std_normal_cdf(out.d2);
#endif
    out.price = out.term_a - out.term_b;
  } else {
    out.term_a = legs.forward_a * std_normal_cdf(-out.d1);
    out.term_b = legs.forward_b * std_normal_cdf(-out.d2);
    out.price = out.term_b - out.term_a;
  }

  if (out.price < 0.0) {
    const double slack = 1e-12 * std::max({1.0, std::abs(out.term_a), std::abs(out.term_b)});
    if (out.price < -slack) {
      std::ostringstream os;
      os << "price_option: negative price " << out.price;
      throw NumericFailure(os.str());
    }
    out.price = 0.0;
  }
  return out;
}

/// (call - put) - (forward_a - forward_b) for independently priced call and put.
inline double parity_residual(const MarketModel& model, const OptionSpec& spec,
                              PricingMethod method, double t, double r_t, double s_t,
                              MarketAssumption assumption = MarketAssumption::CorrelatedUnderQ) {
  OptionSpec c = spec, p = spec;
  c.side = OptionSide::Call;
  p.side = OptionSide::Put;
  const PriceResult call = price_option(model, c, method, t, r_t, s_t, assumption);
  const PriceResult put = price_option(model, p, method, t, r_t, s_t, assumption);
  return (call.price - put.price) - (call.forward_a - call.forward_b);
}

/// Magnitude against which a parity residual is judged.
inline double parity_scale(const PriceResult& r) {
  return std::max({1.0, std::abs(r.forward_a), std::abs(r.forward_b)});
}

/// price(MartingaleMethod) - price(ForwardMeasure).
inline double cross_method_gap(const MarketModel& model, const OptionSpec& spec, double t,
                               double r_t, double s_t,
                               MarketAssumption assumption = MarketAssumption::CorrelatedUnderQ) {
  const double a = price_option(model, spec, PricingMethod::MartingaleMethod, t, r_t, s_t, assumption).price;
  const double b = price_option(model, spec, PricingMethod::ForwardMeasure, t, r_t, s_t, assumption).price;
  return a - b;
}

inline std::string_view to_string(PayoffVariant v) {
  return v == PayoffVariant::PowerStrike ? "power_strike" : "plain_strike";
}
inline std::string_view to_string(OptionSide s) { return s == OptionSide::Call ? "call" : "put"; }
inline std::string_view to_string(PricingMethod m) {
  return m == PricingMethod::MartingaleMethod ? "martingale" : "forward";
}

}  // namespace powerprice
