#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "powerprice/errors.hpp"

namespace powerprice {

/// Strictly increasing knots starting at 0. Segment i is [knots[i], knots[i+1]).
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw DomainError("TimeGrid: need at least 2 knots");
    if (knots_.front() != 0.0) throw DomainError("TimeGrid: first knot must be 0");
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (!(knots_[i] > knots_[i - 1]) || !std::isfinite(knots_[i])) {
        std::ostringstream os;
        os << "TimeGrid: knots must be finite and strictly increasing (index " << i << ")";
        throw DomainError(os.str());
      }
    }
  }

  /// Uniform grid with `segments` equal pieces over [0, horizon].
  static TimeGrid uniform(double horizon, std::size_t segments) {
    if (segments == 0) throw DomainError("TimeGrid: zero segments");
    std::vector<double> k(segments + 1);
    for (std::size_t i = 0; i <= segments; ++i)
      k[i] = horizon * static_cast<double>(i) / static_cast<double>(segments);
    k.back() = horizon;
    return TimeGrid(std::move(k));
  }

  std::span<const double> knots() const { return knots_; }
  std::size_t segment_count() const { return knots_.size() - 1; }
  double horizon() const { return knots_.back(); }

  /// Index of the segment containing t; the horizon maps to the last segment.
  std::size_t segment_index(double t) const {
    if (!(t >= 0.0 && t <= horizon())) {
      std::ostringstream os;
      os << "time " << t << " outside [0, " << horizon() << "]";
      throw DomainError(os.str());
    }
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    auto idx = static_cast<std::size_t>(it - knots_.begin());
    return std::min(idx - 1, segment_count() - 1);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> knots_;
};

/// Piecewise-constant function on a TimeGrid.
class PiecewiseFn {
 public:
  PiecewiseFn(TimeGrid grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.segment_count()) {
      std::ostringstream os;
      os << "PiecewiseFn: " << values_.size() << " values for " << grid_.segment_count()
         << " segments";
      throw DomainError(os.str());
    }
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("PiecewiseFn: non-finite value");
  }

  static PiecewiseFn constant(const TimeGrid& grid, double value) {
    return PiecewiseFn(grid, std::vector<double>(grid.segment_count(), value));
  }

  double operator()(double t) const { return values_[grid_.segment_index(t)]; }
  double segment_value(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const TimeGrid& grid() const { return grid_; }

  friend bool operator==(const PiecewiseFn&, const PiecewiseFn&) = default;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

/// Scalar inputs for a model whose coefficients do not vary in time.
struct ConstantCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double sigma_r = 0.0;
  double mu = 0.0;
  double q = 0.0;
  double sigma_s = 0.0;
  double rho = 0.0;
  double c = 0.0;
};

/// Time-dependent coefficients of the extended Vasicek short rate
///   dr = (beta_t - alpha_t r) dt + sigma_r(t) dZ
/// and the exponential Ornstein-Uhlenbeck asset
///   dS = (mu(t) - q(t) - c ln S) S dt + sigma_s(t) S dB,   d<B,Z> = rho_t dt.
/// Immutable after construction.
class MarketModel {
 public:
  MarketModel(PiecewiseFn alpha, PiecewiseFn beta, PiecewiseFn sigma_r, PiecewiseFn mu,
              PiecewiseFn q, PiecewiseFn sigma_s, PiecewiseFn rho, double c)
      : alpha_(std::move(alpha)),
        beta_(std::move(beta)),
        sigma_r_(std::move(sigma_r)),
        mu_(std::move(mu)),
        q_(std::move(q)),
        sigma_s_(std::move(sigma_s)),
        rho_(std::move(rho)),
        c_(c) {
    const TimeGrid& g = alpha_.grid();
    for (const PiecewiseFn* f : {&beta_, &sigma_r_, &mu_, &q_, &sigma_s_, &rho_})
      if (!(f->grid() == g)) throw DomainError("MarketModel: coefficients must share one grid");
    check_all(sigma_r_, "sigma_r", [](double v) { return v >= 0.0; }, "must be >= 0");
    check_all(sigma_s_, "sigma_s", [](double v) { return v >= 0.0; }, "must be >= 0");
    check_all(q_, "q", [](double v) { return v >= 0.0; }, "must be >= 0");
    check_all(rho_, "rho", [](double v) { return v >= -1.0 && v <= 1.0; }, "must lie in [-1, 1]");
    if (!std::isfinite(c_)) throw DomainError("MarketModel: c must be finite");
  }

  static MarketModel constant(double horizon, const ConstantCoefficients& k) {
    return piecewise_constant(TimeGrid::uniform(horizon, 1), k);
  }

  /// Every coefficient constant on the given grid.
  static MarketModel piecewise_constant(const TimeGrid& grid, const ConstantCoefficients& k) {
    auto f = [&](double v) { return PiecewiseFn::constant(grid, v); };
    return MarketModel(f(k.alpha), f(k.beta), f(k.sigma_r), f(k.mu), f(k.q), f(k.sigma_s),
                       f(k.rho), k.c);
  }

  const TimeGrid& grid() const { return alpha_.grid(); }
  double horizon() const { return grid().horizon(); }
  const PiecewiseFn& alpha() const { return alpha_; }
  const PiecewiseFn& beta() const { return beta_; }
  const PiecewiseFn& sigma_r() const { return sigma_r_; }
  const PiecewiseFn& mu() const { return mu_; }
  const PiecewiseFn& q() const { return q_; }
  const PiecewiseFn& sigma_s() const { return sigma_s_; }
  const PiecewiseFn& rho() const { return rho_; }
  double c() const { return c_; }

  /// Same model with rho replaced by -rho everywhere.
  MarketModel with_negated_rho() const {
    std::vector<double> neg(rho_.values().begin(), rho_.values().end());
    for (double& v : neg) v = -v;
    return MarketModel(alpha_, beta_, sigma_r_, mu_, q_, sigma_s_, PiecewiseFn(grid(), neg), c_);
  }

  friend bool operator==(const MarketModel&, const MarketModel&) = default;

 private:
  template <class Pred>
  static void check_all(const PiecewiseFn& f, const char* name, Pred ok, const char* msg) {
    for (std::size_t i = 0; i < f.values().size(); ++i) {
      if (!ok(f.values()[i])) {
        std::ostringstream os;
        os << "MarketModel: " << name << "[" << i << "] = " << f.values()[i] << " " << msg;
        throw DomainError(os.str());
      }
    }
  }

  PiecewiseFn alpha_, beta_, sigma_r_, mu_, q_, sigma_s_, rho_;
  double c_;
};

/// Deterministic integrals over [t, T] consumed by every pricing formula.
struct VarianceBundle {
  double G = 0.0;          // r_t m(t,T) + int beta_s m(s,T) ds
  double int_q = 0.0;      // int q(s) ds
  double var_x = 0.0;      // int sigma_r^2(u) m^2(u,T) du
  double var_y = 0.0;      // int sigma_s^2(u) du
  double rho_eff = 0.0;    // cov(X, Y) / (sigma_X sigma_Y), 0 when degenerate
  double total_var = 0.0;  // var_x + var_y + 2 rho_eff sigma_X sigma_Y
  double m = 0.0;          // m(t, T)
};

struct QuadratureOptions {
  int panels_per_segment = 1;  // Gauss-Legendre(8) panels per model segment
};

namespace detail {

// (1 - e^{-z}) / z
inline double phi1(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  return -std::expm1(-z) / z;
}

// (z - 1 + e^{-z}) / z^2
inline double phi2(double z) {
  if (std::abs(z) < 1e-3) {
    return 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0 + z * z * z * z / 720.0;
  }
  return (z + std::expm1(-z)) / (z * z);
}

inline constexpr std::array<double, 8> kGl8Nodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGl8Weights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// A piece of [t, T] on which every coefficient is constant.
struct Piece {
  double lo;
  double hi;
  std::size_t segment;
};

inline std::vector<Piece> pieces(const TimeGrid& grid, double lo, double hi) {
  std::vector<Piece> out;
  if (!(hi > lo)) return out;
  auto k = grid.knots();
  for (std::size_t i = grid.segment_index(lo); i < grid.segment_count(); ++i) {
    double a = std::max(lo, k[i]);
    double b = std::min(hi, k[i + 1]);
    if (b > a) out.push_back({a, b, i});
    if (k[i + 1] >= hi) break;
  }
  return out;
}

inline void check_window(const MarketModel& model, double lo, double hi, const char* op) {
  if (!(lo >= 0.0 && hi <= model.horizon() && lo <= hi)) {
    std::ostringstream os;
    os << op << ": need 0 <= " << lo << " <= " << hi << " <= " << model.horizon();
    throw DomainError(os.str());
  }
}

}  // namespace detail

/// lambda(t) = int_0^t alpha_s ds, exact for piecewise-constant alpha.
inline double lambda_integral(const MarketModel& model, double t) {
  detail::check_window(model, 0.0, t, "lambda_integral");
  double sum = 0.0;
  for (const auto& p : detail::pieces(model.grid(), 0.0, t))
    sum += model.alpha().segment_value(p.segment) * (p.hi - p.lo);
  return sum;
}

/// m(u,v) = int_u^v exp(lambda(u) - lambda(s)) ds, using the exact per-segment antiderivative.
inline double m_factor(const MarketModel& model, double u, double v) {
  detail::check_window(model, u, v, "m_factor");
  double m = 0.0;
  double h = 1.0;  // H(u, start of current piece)
  for (const auto& p : detail::pieces(model.grid(), u, v)) {
    const double dt = p.hi - p.lo;
    const double a = model.alpha().segment_value(p.segment);
    m += h * dt * detail::phi1(a * dt);
    h *= std::exp(-a * dt);
  }
  return m;
}

/// All deterministic quantities over [t, T] for a short rate r_t observed at t.
///
/// Walks the pieces backwards from T. On a piece [lo, hi] with alpha = a,
///   m(u,T) = (hi-u) phi1(a(hi-u)) + e^{-a(hi-u)} m(hi,T),
/// so G's beta-integral is closed form; the m and m^2 weighted integrals for
/// var_x and the X/Y covariance use Gauss-Legendre(8) per panel.
inline VarianceBundle variance_bundle(const MarketModel& model, double t, double T, double r_t,
                                      const QuadratureOptions& quad = {}) {
  if (!(t < T)) {
    std::ostringstream os;
    os << "variance_bundle: need t < T (t = " << t << ", T = " << T << ")";
    throw DomainError(os.str());
  }
  detail::check_window(model, t, T, "variance_bundle");
  if (quad.panels_per_segment < 1) throw DomainError("variance_bundle: panels_per_segment < 1");

  const auto ps = detail::pieces(model.grid(), t, T);
  double m_end = 0.0;  // m(hi, T) for the current piece
  double beta_int = 0.0, var_x = 0.0, var_y = 0.0, cov = 0.0, int_q = 0.0;

  for (auto it = ps.rbegin(); it != ps.rend(); ++it) {
    const std::size_t s = it->segment;
    const double a = model.alpha().segment_value(s);
    const double sr = model.sigma_r().segment_value(s);
    const double ss = model.sigma_s().segment_value(s);
    const double rho = model.rho().segment_value(s);
    const double dt = it->hi - it->lo;

    const double m_int = dt * dt * detail::phi2(a * dt) + m_end * dt * detail::phi1(a * dt);
    beta_int += model.beta().segment_value(s) * m_int;

    // m(u,T) with x = hi - u
    auto m_at = [&](double x) { return x * detail::phi1(a * x) + std::exp(-a * x) * m_end; };
    double m_sq = 0.0, m_lin = 0.0;
    const double panel = dt / quad.panels_per_segment;
    for (int k = 0; k < quad.panels_per_segment; ++k) {
      const double x0 = k * panel;
      const double half = 0.5 * panel;
      for (std::size_t j = 0; j < 8; ++j) {
        const double x = x0 + half * (1.0 + detail::kGl8Nodes[j]);
        const double mv = m_at(x);
        m_sq += detail::kGl8Weights[j] * half * mv * mv;
        m_lin += detail::kGl8Weights[j] * half * mv;
      }
    }
    var_x += sr * sr * m_sq;
    cov += rho * sr * ss * m_lin;
    var_y += ss * ss * dt;
    int_q += model.q().segment_value(s) * dt;

    m_end = dt * detail::phi1(a * dt) + std::exp(-a * dt) * m_end;
  }

  VarianceBundle b;
  b.m = m_end;
  b.G = r_t * m_end + beta_int;
  b.int_q = int_q;
  b.var_x = var_x;
  b.var_y = var_y;
  const double sx = std::sqrt(var_x);
  const double sy = std::sqrt(var_y);
  b.rho_eff = (sx * sy > 0.0) ? std::clamp(cov / (sx * sy), -1.0, 1.0) : 0.0;
  b.total_var = std::max(0.0, var_x + var_y + 2.0 * b.rho_eff * sx * sy);
  return b;
}

}  // namespace powerprice
