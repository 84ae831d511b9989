#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "powerprice/term_model.hpp"

using namespace powerprice;
using Catch::Approx;

namespace {

MarketModel two_segment_alpha() {
  ConstantCoefficients k;
  auto model = MarketModel::piecewise_constant(TimeGrid({0.0, 1.0, 2.0}), k);
  const auto& g = model.grid();
  return MarketModel(PiecewiseFn(g, {0.1, 0.3}), model.beta(), model.sigma_r(), model.mu(),
                     model.q(), model.sigma_s(), model.rho(), 0.0);
}

// Three uneven segments, every coefficient varying. Knots on multiples of 2e-6.
MarketModel rich_model() {
  const TimeGrid g({0.0, 0.5, 1.3, 2.0});
  return MarketModel(PiecewiseFn(g, {0.2, 0.05, 0.4}), PiecewiseFn(g, {0.004, 0.01, 0.002}),
                     PiecewiseFn(g, {0.01, 0.02, 0.015}), PiecewiseFn(g, {0.05, 0.06, 0.07}),
                     PiecewiseFn(g, {0.01, 0.0, 0.02}), PiecewiseFn(g, {0.2, 0.3, 0.25}),
                     PiecewiseFn(g, {0.3, -0.5, 0.7}), 0.01);
}

}  // namespace

TEST_CASE("TimeGrid rejects malformed knots") {
  CHECK_THROWS_AS(TimeGrid({0.0}), DomainError);
  CHECK_THROWS_AS(TimeGrid({0.5, 1.0}), DomainError);
  CHECK_THROWS_AS(TimeGrid({0.0, 1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(TimeGrid({0.0, 2.0, 1.0}), DomainError);
}

TEST_CASE("PiecewiseFn evaluation is total with right-open segments") {
  const TimeGrid g({0.0, 1.0, 2.0});
  const PiecewiseFn f(g, {3.0, 7.0});
  CHECK(f(0.0) == 3.0);
  CHECK(f(0.999) == 3.0);
  CHECK(f(1.0) == 7.0);
  CHECK(f(2.0) == 7.0);
  CHECK_THROWS_AS(f(2.5), DomainError);
  CHECK_THROWS_AS(f(-0.1), DomainError);
  CHECK_THROWS_AS(PiecewiseFn(g, {1.0}), DomainError);
}

TEST_CASE("MarketModel enforces coefficient ranges and a shared grid") {
  ConstantCoefficients k;
  k.rho = 1.2;
  CHECK_THROWS_AS(MarketModel::constant(1.0, k), DomainError);
  k.rho = 0.0;
  k.sigma_s = -0.1;
  CHECK_THROWS_AS(MarketModel::constant(1.0, k), DomainError);
  k.sigma_s = 0.2;
  k.q = -0.01;
  CHECK_THROWS_AS(MarketModel::constant(1.0, k), DomainError);

  const auto m = MarketModel::constant(1.0, {});
  const PiecewiseFn other = PiecewiseFn::constant(TimeGrid({0.0, 0.5, 1.0}), 0.1);
  CHECK_THROWS_AS(MarketModel(other, m.beta(), m.sigma_r(), m.mu(), m.q(), m.sigma_s(), m.rho(), 0.0),
                  DomainError);
}

TEST_CASE("lambda_integral examples") {
  CHECK(lambda_integral(MarketModel::constant(10.0, {}), 5.0) == 0.0);
  ConstantCoefficients k;
  k.alpha = 0.1;
  CHECK(lambda_integral(MarketModel::constant(10.0, k), 4.0) == Approx(0.4).epsilon(1e-15));

  const auto model = two_segment_alpha();
  const double oracle = oracle::riemann_lambda(model, 1.5, 1500000);  // knot at 1 on the fine grid
  CHECK(oracle == Approx(0.25).epsilon(1e-10));
  CHECK(lambda_integral(model, 1.5) == Approx(oracle).epsilon(1e-10));
  CHECK(lambda_integral(model, 1.5) == Approx(0.25).epsilon(1e-15));

  CHECK_THROWS_AS(lambda_integral(model, 2.5), DomainError);
  CHECK_THROWS_AS(lambda_integral(model, -1.0), DomainError);
}

TEST_CASE("lambda_integral is additive") {
  const auto model = rich_model();
  for (double t1 : {0.0, 0.3, 0.5, 1.0}) {
    for (double t2 : {1.3, 1.7, 2.0}) {
      double direct = 0.0;
      for (const auto& p : detail::pieces(model.grid(), t1, t2))
        direct += model.alpha().segment_value(p.segment) * (p.hi - p.lo);
      CHECK(std::abs(direct - (lambda_integral(model, t2) - lambda_integral(model, t1))) <= 1e-14);
    }
  }
}

TEST_CASE("m_factor examples") {
  CHECK(m_factor(MarketModel::constant(5.0, {}), 0.0, 2.0) == Approx(2.0).epsilon(1e-15));

  ConstantCoefficients k;
  k.alpha = 0.5;
  CHECK(m_factor(MarketModel::constant(5.0, k), 0.0, 2.0) ==
        Approx(1.2642411176571153).epsilon(1e-14));

  // Frozen from a 30-digit adaptive quadrature of exp(-lambda(s)) over [0, 2].
  const auto model = two_segment_alpha();
  const double oracle = oracle::riemann_m(model, 0.0, 2.0);
  CHECK(oracle == Approx(1.7333503929748052).epsilon(1e-10));
  CHECK(m_factor(model, 0.0, 2.0) == Approx(1.7333503929748052).epsilon(1e-14));

  CHECK_THROWS_AS(m_factor(model, 1.5, 1.0), DomainError);
}

TEST_CASE("m_factor vanishes on empty intervals and grows with v") {
  const auto model = rich_model();
  for (double u : {0.0, 0.5, 0.77, 2.0}) CHECK(m_factor(model, u, u) == 0.0);
  double prev = 0.0;
  for (int i = 1; i <= 200; ++i) {
    const double v = 0.3 + 1.7 * i / 200.0;
    const double m = m_factor(model, 0.3, v);
    CHECK(m >= prev);
    prev = m;
  }
}

TEST_CASE("variance_bundle closed-form cases") {
  SECTION("zero rate volatility") {
    ConstantCoefficients k;
    k.sigma_s = 0.2;
    k.rho = 0.5;
    const auto b = variance_bundle(MarketModel::constant(2.0, k), 0.5, 1.5, 0.03);
    CHECK(b.var_x == 0.0);
    CHECK(b.var_y == Approx(0.04).epsilon(1e-14));
    CHECK(b.rho_eff == 0.0);
    CHECK(b.total_var == Approx(0.04).epsilon(1e-14));
  }
  SECTION("alpha = beta = 0 gives polynomial integrals") {
    ConstantCoefficients k;
    k.sigma_r = 0.02;
    k.sigma_s = 0.3;
    k.rho = -0.4;
    const double tau = 1.7;
    const auto b = variance_bundle(MarketModel::constant(3.0, k), 0.3, 0.3 + tau, 0.04);
    CHECK(b.var_x == Approx(0.02 * 0.02 * tau * tau * tau / 3.0).epsilon(1e-13));
    CHECK(b.G == Approx(0.04 * tau).epsilon(1e-14));
    CHECK(b.rho_eff == Approx(-0.4 * std::sqrt(3.0) / 2.0).epsilon(1e-13));
  }
  SECTION("errors") {
    const auto model = MarketModel::constant(2.0, {});
    CHECK_THROWS_AS(variance_bundle(model, 1.0, 1.0, 0.0), DomainError);
    CHECK_THROWS_AS(variance_bundle(model, 1.5, 1.0, 0.0), DomainError);
    CHECK_THROWS_AS(variance_bundle(model, 0.0, 2.5, 0.0), DomainError);
  }
}

TEST_CASE("variance_bundle matches the fine-grid Riemann oracle", "[oracle]") {
  const auto model = rich_model();
  for (auto [t, T] : {std::pair{0.0, 2.0}, std::pair{0.5, 1.3}, std::pair{0.2, 1.9}}) {
    // Knots must land on the fine grid: choose step counts accordingly.
    const std::size_t steps = static_cast<std::size_t>(std::llround((T - t) / 1e-6 / 2.0)) * 2;
    const auto got = variance_bundle(model, t, T, 0.035);
    const auto ref = oracle::riemann_bundle(model, t, T, 0.035, steps);
    INFO("window [" << t << ", " << T << "]");
    CHECK(got.G == Approx(ref.G).epsilon(1e-8));
    CHECK(got.int_q == Approx(ref.int_q).epsilon(1e-8));
    CHECK(got.var_x == Approx(ref.var_x).epsilon(1e-8));
    CHECK(got.var_y == Approx(ref.var_y).epsilon(1e-8));
    CHECK(got.rho_eff == Approx(ref.rho_eff).epsilon(1e-8));
    CHECK(got.total_var == Approx(ref.total_var).epsilon(1e-8));
  }
}

TEST_CASE("variance_bundle invariants over random models") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto d = oracle::random_draw(rng);
    const auto b = variance_bundle(d.model, 0.0, d.tau, d.r0);
    REQUIRE(b.var_x >= 0.0);
    REQUIRE(b.var_y >= 0.0);
    REQUIRE(b.total_var >= 0.0);
    if (b.var_x * b.var_y > 0) {
      REQUIRE(b.rho_eff >= -1.0);
      REQUIRE(b.rho_eff <= 1.0);
    }
    REQUIRE(b.total_var == b.var_x + b.var_y + 2.0 * b.rho_eff * std::sqrt(b.var_x) * std::sqrt(b.var_y));

    const auto neg = variance_bundle(d.model.with_negated_rho(), 0.0, d.tau, d.r0);
    REQUIRE(neg.rho_eff == -b.rho_eff);
    REQUIRE(neg.var_x == b.var_x);
    REQUIRE(neg.var_y == b.var_y);
  }
}

TEST_CASE("quadrature refinement does not move the bundle") {
  ConstantCoefficients k{0.5, 0.01, 0.3, 0.0, 0.0, 0.2, 0.6, 0.0};
  const auto model = MarketModel::constant(5.0, k);
  const auto coarse = variance_bundle(model, 0.0, 5.0, 0.02);
  const auto fine = variance_bundle(model, 0.0, 5.0, 0.02, {16});
  CHECK(coarse.var_x == Approx(fine.var_x).epsilon(1e-10));
  CHECK(coarse.rho_eff == Approx(fine.rho_eff).epsilon(1e-10));
}
