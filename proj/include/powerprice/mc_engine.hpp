#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <system_error>
#include <thread>
#include <vector>

#include "powerprice/errors.hpp"
#include "powerprice/philox.hpp"
#include "powerprice/pricer.hpp"
#include "powerprice/term_model.hpp"

namespace powerprice {

enum class Scheme {
  LogEuler,  // Euler-Maruyama on ln S and r
  StrongRK,  // derivative-free strong order-1.0 Runge-Kutta on S, Euler on r (additive noise)
};

struct SimConfig {
  std::size_t n_paths = 1;
  std::size_t n_steps = 1;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::LogEuler;
  bool record_paths = false;  // keep full S and r trajectories, not only terminal values
  unsigned threads = 1;
};

/// Simulated joint (S, r) paths over [t, T].
///
/// Terminal values and per-path accumulators are always present. Full
/// trajectories are stored row-major (path, step) only when recorded.
struct PathSet {
  std::vector<double> times;
  std::size_t n_paths = 0;
  std::vector<double> s_terminal;
  std::vector<double> r_terminal;
  std::vector<double> int_r;        // trapezoid integral of r over [t, T]
  std::vector<double> asset_noise;  // int sigma_s dB
  std::vector<double> s_paths;
  std::vector<double> r_paths;
  std::optional<std::vector<double>> weights;  // Radon-Nikodym dQ/dP, real-world runs only

  std::size_t n_steps() const { return times.empty() ? 0 : times.size() - 1; }
  bool recorded() const { return !s_paths.empty(); }
  double s(std::size_t path, std::size_t step) const { return s_paths[path * times.size() + step]; }
  double r(std::size_t path, std::size_t step) const { return r_paths[path * times.size() + step]; }
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// Sample mean with standard error sd / sqrt(n).
inline McEstimate estimate(std::span<const double> samples) {
  if (samples.empty()) throw DomainError("estimate: no samples");
  const auto n = samples.size();
  const double dn = static_cast<double>(n);
  // Shifted sums: identical samples give a standard error of exactly zero.
  const double shift = samples.front();
  double sum = 0.0, sum_sq = 0.0;
  for (double v : samples) {
    sum += v - shift;
    sum_sq += (v - shift) * (v - shift);
  }
  const double ss = std::max(0.0, sum_sq - sum * sum / dn);
  const double var = n > 1 ? ss / (dn - 1.0) : 0.0;
  return {shift + sum / dn, std::sqrt(var / dn), n};
}

namespace detail {

enum class Regime { RiskNeutral, RealWorld };

struct StepCoefficients {
  double alpha, beta, sigma_r, mu, q, sigma_s, rho, rho_perp;
};

struct SimContext {
  const MarketModel& model;
  double r0;
  double s0;
  double dt;
  std::vector<StepCoefficients> coeffs;  // frozen at each step's left end
  Regime regime;
  SimConfig cfg;
};

inline void check_sim_inputs(const MarketModel& model, double t, double T, double s_t,
                             const SimConfig& cfg) {
  if (cfg.n_paths < 1 || cfg.n_steps < 1) throw DomainError("SimConfig: n_paths and n_steps must be >= 1");
  if (cfg.n_steps > 0xFFFFFFFFull) throw DomainError("SimConfig: n_steps exceeds counter range");
  if (!(t >= 0.0 && t < T && T <= model.horizon())) {
    std::ostringstream os;
    os << "simulate: need 0 <= t < T <= " << model.horizon() << " (t = " << t << ", T = " << T << ")";
    throw DomainError(os.str());
  }
  if (!(s_t > 0.0)) throw DomainError("simulate: s_t must be > 0");
}

inline void simulate_range(const SimContext& ctx, PathSet& out, std::size_t begin, std::size_t end) {
  const std::size_t steps = ctx.cfg.n_steps;
  const std::size_t stride = steps + 1;
  const double dt = ctx.dt;
  const double sqdt = std::sqrt(dt);
  const double c = ctx.model.c();
  const bool rk = ctx.cfg.scheme == Scheme::StrongRK;
  const bool real_world = ctx.regime == Regime::RealWorld;
  const bool record = ctx.cfg.record_paths;

  for (std::size_t p = begin; p < end; ++p) {
    const PathStream stream(ctx.cfg.seed, p);
    double r = ctx.r0;
    double x = std::log(ctx.s0);
    double s = ctx.s0;
    double int_r = 0.0, noise = 0.0, log_w = 0.0;
    if (record) {
      out.s_paths[p * stride] = s;
      out.r_paths[p * stride] = r;
    }
    for (std::size_t i = 0; i < steps; ++i) {
      const StepCoefficients& k = ctx.coeffs[i];
      const auto [z1, z2] = stream.normal_pair(static_cast<std::uint32_t>(i));
      const double dB = sqdt * z1;
      const double dB_perp = sqdt * z2;

      // Asset drift of ln S (before the -sigma^2/2 correction), frozen at the step start.
      const double log_drift = real_world ? k.mu - k.q - c * x : r - k.q;
      if (real_world) {
        const double theta1 = (k.mu - c * x - r) / k.sigma_s;
        const double theta2 = -k.rho * theta1 / k.rho_perp;
        log_w += -theta1 * dB - theta2 * dB_perp - 0.5 * (theta1 * theta1 + theta2 * theta2) * dt;
      }

      const double r_next =
          r + (k.beta - k.alpha * r) * dt + k.sigma_r * (k.rho * dB + k.rho_perp * dB_perp);

      if (rk) {
        const double a = log_drift * s;
        const double b = k.sigma_s * s;
        const double support = s + a * dt + b * sqdt;
        s = s + a * dt + b * dB + (k.sigma_s * support - b) * (dB * dB - dt) / (2.0 * sqdt);
        if (!(s > 0.0)) {
          std::ostringstream os;
          os << "StrongRK produced a nonpositive asset value on path " << p << " step " << i
             << "; reduce the step size";
          throw NumericFailure(os.str());
        }
        x = std::log(s);
      } else {
        x += (log_drift - 0.5 * k.sigma_s * k.sigma_s) * dt + k.sigma_s * dB;
        s = std::exp(x);
      }

      int_r += 0.5 * (r + r_next) * dt;
      noise += k.sigma_s * dB;
      r = r_next;
      if (record) {
        out.s_paths[p * stride + i + 1] = s;
        out.r_paths[p * stride + i + 1] = r;
      }
    }
    out.s_terminal[p] = s;
    out.r_terminal[p] = r;
    out.int_r[p] = int_r;
    out.asset_noise[p] = noise;
    if (out.weights) (*out.weights)[p] = std::exp(log_w);
  }
}

inline PathSet run_simulation(const MarketModel& model, double t, double T, double r_t, double s_t,
                              const SimConfig& cfg, Regime regime) {
  SimContext ctx{model, r_t, s_t, (T - t) / static_cast<double>(cfg.n_steps), {}, regime, cfg};

  PathSet out;
  out.n_paths = cfg.n_paths;
  out.times.resize(cfg.n_steps + 1);
  for (std::size_t i = 0; i <= cfg.n_steps; ++i)
    out.times[i] = t + (T - t) * static_cast<double>(i) / static_cast<double>(cfg.n_steps);
  out.times.back() = T;

  ctx.coeffs.reserve(cfg.n_steps);
  for (std::size_t i = 0; i < cfg.n_steps; ++i) {
    const std::size_t seg = model.grid().segment_index(out.times[i]);
    const double rho = model.rho().segment_value(seg);
    ctx.coeffs.push_back({model.alpha().segment_value(seg), model.beta().segment_value(seg),
                          model.sigma_r().segment_value(seg), model.mu().segment_value(seg),
                          model.q().segment_value(seg), model.sigma_s().segment_value(seg), rho,
                          std::sqrt(std::max(0.0, 1.0 - rho * rho))});
  }

  out.s_terminal.resize(cfg.n_paths);
  out.r_terminal.resize(cfg.n_paths);
  out.int_r.resize(cfg.n_paths);
  out.asset_noise.resize(cfg.n_paths);
  if (cfg.record_paths) {
    out.s_paths.resize(cfg.n_paths * (cfg.n_steps + 1));
    out.r_paths.resize(cfg.n_paths * (cfg.n_steps + 1));
  }
  if (regime == Regime::RealWorld) out.weights.emplace(cfg.n_paths, 1.0);

  const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, cfg.n_paths);
  if (workers == 1) {
    simulate_range(ctx, out, 0, cfg.n_paths);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cfg.n_paths + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(cfg.n_paths, b + chunk);
      pool.emplace_back([&, w, b, e] {
        try {
          simulate_range(ctx, out, b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace detail

/// Paths under Q: dS = (r - q) S dt + sigma_s S dB^Q,
/// dr = (beta - alpha r) dt + sigma_r (rho dB^Q + sqrt(1 - rho^2) dB^perp).
/// Path p is a function of (seed, p) only, so output does not depend on cfg.threads.
inline PathSet simulate_q(const MarketModel& model, double t, double T, double r_t, double s_t,
                          const SimConfig& cfg) {
  detail::check_sim_inputs(model, t, T, s_t, cfg);
  return detail::run_simulation(model, t, T, r_t, s_t, cfg, detail::Regime::RiskNeutral);
}

/// Paths under the real-world drift (mu - q - c ln S) with per-path weights
///   exp(-int theta1 dB - int theta2 dB^perp - 1/2 int (theta1^2 + theta2^2) dt),
///   theta1 = (mu - c ln S - r) / sigma_s,  theta2 = -rho theta1 / sqrt(1 - rho^2).
/// The rate drift is unchanged by the measure change since rho theta1 + sqrt(1-rho^2) theta2 = 0.
inline PathSet simulate_realworld_weighted(const MarketModel& model, double t, double T, double r_t,
                                           double s_t, const SimConfig& cfg) {
  detail::check_sim_inputs(model, t, T, s_t, cfg);
  for (std::size_t i = 0; i < model.grid().segment_count(); ++i) {
    if (std::abs(model.rho().segment_value(i)) > 1.0 - 1e-9)
      throw UnsupportedConfiguration(
          "simulate_realworld_weighted: |rho| = 1 is not supported; use simulate_q");
    if (!(model.sigma_s().segment_value(i) > 0.0))
      throw DomainError("simulate_realworld_weighted: sigma_s must be > 0 on the whole grid");
  }
  return detail::run_simulation(model, t, T, r_t, s_t, cfg, detail::Regime::RealWorld);
}

/// Monte Carlo value of weight * exp(-int r) * payoff(S_T).
inline McEstimate mc_price(const PathSet& paths, const OptionSpec& spec) {
  if (paths.n_paths == 0) throw DomainError("mc_price: empty path set");
  validate_option(spec);
  std::vector<double> v(paths.n_paths);
  for (std::size_t p = 0; p < paths.n_paths; ++p) {
    const double w = paths.weights ? (*paths.weights)[p] : 1.0;
    v[p] = w * std::exp(-paths.int_r[p]) * payoff(spec, paths.s_terminal[p]);
  }
  return estimate(v);
}

/// CSV: header `time,path_0,...`, then one row per time with S for each path.
inline void export_paths(const PathSet& paths, const std::filesystem::path& destination) {
  if (!paths.recorded()) throw DomainError("export_paths: path set has no recorded trajectories");
  std::error_code ec;
  if (destination.has_parent_path()) {
    std::filesystem::create_directories(destination.parent_path(), ec);
    if (ec) throw IoError("export_paths: cannot create " + destination.parent_path().string() + ": " + ec.message());
  }
  std::ofstream os(destination);
  if (!os) throw IoError("export_paths: cannot open " + destination.string() + " for writing");
  os << std::setprecision(17) << "time";
  for (std::size_t p = 0; p < paths.n_paths; ++p) os << ",path_" << p;
  os << '\n';
  for (std::size_t i = 0; i < paths.times.size(); ++i) {
    os << paths.times[i];
    for (std::size_t p = 0; p < paths.n_paths; ++p) os << ',' << paths.s(p, i);
    os << '\n';
  }
  os.flush();
  if (!os) throw IoError("export_paths: write failed for " + destination.string());
}

}  // namespace powerprice
