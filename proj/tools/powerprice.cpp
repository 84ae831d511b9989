// powerprice: closed-form and Monte Carlo pricing of European power options
// under an extended Vasicek short rate and an exponential OU asset.
//
// Exit codes: 0 success, 1 validation-suite failure, 2 parse/semantic error,
// 3 numeric domain error, 4 I/O error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "powerprice/powerprice.hpp"

namespace {

using powerprice::MarketSpecDocument;
using powerprice::PricingMethod;
using nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kValidationFailed = 1, kBadSpec = 2, kNumeric = 3, kIo = 4 };

constexpr double kParityTolerance = 1e-12;
constexpr double kZLimit = 3.0;
constexpr double kWeightZLimit = 5.0;

// Rows of (label, value) printed with 9 significant digits, or as JSON with full precision.
class Report {
 public:
  void add(const std::string& key, double v) { rows_.push_back({key, v}); }
  void add(const std::string& key, const std::string& s) { text_.push_back({key, s}); }

  void print_text(std::ostream& os) const {
    for (const auto& [k, s] : text_) os << std::left << std::setw(22) << k << s << '\n';
    os << std::setprecision(9);
    for (const auto& [k, v] : rows_) os << std::left << std::setw(22) << k << v << '\n';
  }

  ordered_json to_json() const {
    ordered_json j = ordered_json::object();
    for (const auto& [k, s] : text_) j[k] = s;
    for (const auto& [k, v] : rows_) {
      if (std::isfinite(v)) j[k] = v;
      else j[k] = std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    }
    return j;
  }

 private:
  std::vector<std::pair<std::string, double>> rows_;
  std::vector<std::pair<std::string, std::string>> text_;
};

void emit(const Report& r, bool json) {
  if (json) std::cout << r.to_json().dump(2) << '\n';
  else r.print_text(std::cout);
}

void add_bundle(Report& r, const powerprice::VarianceBundle& b) {
  r.add("G", b.G);
  r.add("int_q", b.int_q);
  r.add("var_x", b.var_x);
  r.add("var_y", b.var_y);
  r.add("rho_eff", b.rho_eff);
  r.add("total_var", b.total_var);
  r.add("m", b.m);
}

void add_price(Report& r, const std::string& prefix, const powerprice::PriceResult& p) {
  r.add(prefix + "theorem", static_cast<double>(p.theorem));
  r.add(prefix + "price", p.price);
  r.add(prefix + "term_a", p.term_a);
  r.add(prefix + "term_b", p.term_b);
  r.add(prefix + "d1", p.d1);
  r.add(prefix + "d2", p.d2);
}

// z-score of an estimate against a reference; a zero standard error counts as
// agreement only when the difference is at rounding level.
double z_score(const powerprice::McEstimate& e, double reference) {
  const double diff = e.mean - reference;
  if (e.std_error > 0.0) return diff / e.std_error;
  if (std::abs(diff) <= 1e-9 * std::max(1.0, std::abs(reference))) return 0.0;
  return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

struct CommonOptions {
  std::string spec_file;
  bool json = false;
  bool dump_spec = false;
};

int cmd_price(const MarketSpecDocument& doc, const std::string& method, bool json) {
  const auto& s = doc.state;
  Report r;
  r.add("method", method);
  auto run = [&](PricingMethod m) {
    return powerprice::price_option(doc.model, doc.option, m, s.t, s.r_t, s.s_t, doc.assumption);
  };
  std::optional<powerprice::PriceResult> mart, fwd;
  if (method != "forward") mart = run(PricingMethod::MartingaleMethod);
  if (method != "martingale") fwd = run(PricingMethod::ForwardMeasure);

  const auto& primary = mart ? *mart : *fwd;
  if (method == "both") {
    add_price(r, "martingale.", *mart);
    add_price(r, "forward.", *fwd);
    const double gap = mart->price - fwd->price;
    const double denom = std::max(std::abs(mart->price), 1e-12 * powerprice::parity_scale(*mart));
    r.add("gap", gap);
    r.add("gap_relative", gap / denom);
  } else {
    add_price(r, "", primary);
  }
  if (fwd) r.add("bond_price", powerprice::bond_price(doc.model, s.t, s.T, s.r_t));
  add_bundle(r, primary.bundle);
  emit(r, json);
  return kOk;
}

int cmd_bond(const MarketSpecDocument& doc, bool json) {
  const auto& s = doc.state;
  Report r;
  r.add("bond_price", powerprice::bond_price(doc.model, s.t, s.T, s.r_t));
  if (s.t < s.T) {
    const auto b = powerprice::variance_bundle(doc.model, s.t, s.T, s.r_t);
    r.add("G", b.G);
    r.add("var_x", b.var_x);
    r.add("m", b.m);
  } else {
    r.add("G", 0.0);
    r.add("var_x", 0.0);
    r.add("m", 0.0);
  }
  emit(r, json);
  return kOk;
}

struct ValidateOptions {
  std::optional<std::size_t> paths, steps;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool bond = false;
  bool real_world = false;
};

int cmd_validate(const MarketSpecDocument& doc, const ValidateOptions& o, bool json) {
  const auto& s = doc.state;
  powerprice::SimConfig cfg = doc.sim.value_or(powerprice::SimConfig{200000, 512, 42});
  if (o.paths) cfg.n_paths = *o.paths;
  if (o.steps) cfg.n_steps = *o.steps;
  if (o.seed) cfg.seed = *o.seed;
  cfg.threads = o.threads;

  bool ok = true;
  Report r;
  r.add("measure", o.real_world ? "real_world" : "q");
  r.add("paths", static_cast<double>(cfg.n_paths));
  r.add("steps", static_cast<double>(cfg.n_steps));

  const auto closed = powerprice::price_option(doc.model, doc.option, PricingMethod::MartingaleMethod,
                                               s.t, s.r_t, s.s_t, doc.assumption);
  const auto paths = o.real_world
                         ? powerprice::simulate_realworld_weighted(doc.model, s.t, s.T, s.r_t, s.s_t, cfg)
                         : powerprice::simulate_q(doc.model, s.t, s.T, s.r_t, s.s_t, cfg);
  const auto est = powerprice::mc_price(paths, doc.option);
  const double z = z_score(est, closed.price);
  ok = ok && std::abs(z) <= kZLimit;
  r.add("closed_form", closed.price);
  r.add("mc_estimate", est.mean);
  r.add("mc_std_error", est.std_error);
  r.add("z_score", z);

  for (PricingMethod m : {PricingMethod::MartingaleMethod, PricingMethod::ForwardMeasure}) {
    const double res = powerprice::parity_residual(doc.model, doc.option, m, s.t, s.r_t, s.s_t, doc.assumption);
    const auto pr = powerprice::price_option(doc.model, doc.option, m, s.t, s.r_t, s.s_t, doc.assumption);
    const double rel = res / powerprice::parity_scale(pr);
    ok = ok && std::abs(rel) <= kParityTolerance;
    const std::string name(powerprice::to_string(m));
    r.add("parity_residual." + name, res);
    r.add("parity_relative." + name, rel);
  }

  if (o.real_world) {
    const auto w = powerprice::estimate(*paths.weights);
    const double wz = z_score(w, 1.0);
    ok = ok && std::abs(wz) <= kWeightZLimit;
    r.add("weight_mean", w.mean);
    r.add("weight_std_error", w.std_error);
    r.add("weight_z_score", wz);
  }

  if (o.bond) {
    std::vector<double> disc(paths.n_paths);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
      const double w = paths.weights ? (*paths.weights)[p] : 1.0;
      disc[p] = w * std::exp(-paths.int_r[p]);
    }
    const auto be = powerprice::estimate(disc);
    const double bond = powerprice::bond_price(doc.model, s.t, s.T, s.r_t);
    const double bz = z_score(be, bond);
    ok = ok && std::abs(bz) <= kZLimit;
    r.add("bond_closed_form", bond);
    r.add("bond_mc_estimate", be.mean);
    r.add("bond_mc_std_error", be.std_error);
    r.add("bond_z_score", bz);
  }

  r.add("status", ok ? "pass" : "fail");
  emit(r, json);
  return ok ? kOk : kValidationFailed;
}

struct SimulateOptions {
  std::string out_dir;
  bool figure1 = false;
  bool real_world = false;
  std::size_t paths = 1;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  double horizon = 100.0;
};

int cmd_simulate_figure1(const SimulateOptions& o) {
  // GBM (c = 0) against exp-OU (c = 0.01): mu = 0.005, q = 0, sigma = 0.006, S(0) = 1,
  // increments with variance 0.01, i.e. dt = 0.01. Both runs share the seed, hence the increments.
  powerprice::SimConfig cfg;
  cfg.n_paths = o.paths;
  cfg.n_steps = o.steps.value_or(static_cast<std::size_t>(std::llround(o.horizon / 0.01)));
  cfg.seed = o.seed.value_or(1);
  cfg.scheme = powerprice::Scheme::StrongRK;
  cfg.record_paths = true;

  const std::filesystem::path dir(o.out_dir);
  for (const auto& [name, c] : {std::pair{"gbm.csv", 0.0}, std::pair{"expou.csv", 0.01}}) {
    powerprice::ConstantCoefficients k;
    k.mu = 0.005;
    k.sigma_s = 0.006;
    k.c = c;
    const auto model = powerprice::MarketModel::constant(o.horizon, k);
    const auto paths = powerprice::simulate_realworld_weighted(model, 0.0, o.horizon, 0.0, 1.0, cfg);
    const auto file = dir / name;
    powerprice::export_paths(paths, file);
    std::cout << file.string() << '\n';
  }
  return kOk;
}

int cmd_simulate(const MarketSpecDocument& doc, const SimulateOptions& o) {
  const auto& s = doc.state;
  powerprice::SimConfig cfg = doc.sim.value_or(powerprice::SimConfig{1, 512, 42});
  cfg.n_paths = o.paths;
  if (o.steps) cfg.n_steps = *o.steps;
  if (o.seed) cfg.seed = *o.seed;
  cfg.record_paths = true;
  const auto paths = o.real_world
                         ? powerprice::simulate_realworld_weighted(doc.model, s.t, s.T, s.r_t, s.s_t, cfg)
                         : powerprice::simulate_q(doc.model, s.t, s.T, s.r_t, s.s_t, cfg);
  const auto file = std::filesystem::path(o.out_dir) / "paths.csv";
  powerprice::export_paths(paths, file);
  std::cout << file.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"European power option pricing under extended Vasicek rates and exp-OU assets"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string method = "martingale";
  ValidateOptions vopt;
  SimulateOptions sopt;

  auto add_common = [&](CLI::App* sub, bool spec_required) {
    auto* opt = sub->add_option("spec", common.spec_file, "market specification document (YAML/JSON)");
    if (spec_required) opt->required();
    sub->add_flag("--json", common.json, "machine-readable output");
    sub->add_flag("--dump-spec", common.dump_spec, "print the normalized spec document and exit");
  };

  auto* price = app.add_subcommand("price", "closed-form price");
  add_common(price, true);
  price->add_option("--method", method, "martingale | forward | both")
      ->check(CLI::IsMember({"martingale", "forward", "both"}));

  auto* bond = app.add_subcommand("bond", "zero-coupon bond price");
  add_common(bond, true);

  auto* validate = app.add_subcommand("validate", "Monte Carlo and parity checks against the closed form");
  add_common(validate, true);
  validate->add_option("--paths", vopt.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
  validate->add_option("--steps", vopt.steps, "time steps")->check(CLI::PositiveNumber);
  validate->add_option("--seed", vopt.seed, "RNG seed");
  validate->add_option("--threads", vopt.threads, "worker threads")->check(CLI::PositiveNumber);
  validate->add_flag("--bond", vopt.bond, "also check the bond price against MC discount factors");
  validate->add_flag("--real-world", vopt.real_world, "simulate under P with Girsanov weights");

  auto* simulate = app.add_subcommand("simulate", "export simulated asset paths as CSV");
  add_common(simulate, false);
  simulate->add_option("--out", sopt.out_dir, "output directory")->required();
  simulate->add_flag("--figure1", sopt.figure1, "GBM vs exp-OU comparison (writes gbm.csv, expou.csv)");
  simulate->add_flag("--real-world", sopt.real_world, "simulate under the real-world drift");
  simulate->add_option("--paths", sopt.paths, "number of paths")->check(CLI::PositiveNumber);
  simulate->add_option("--steps", sopt.steps, "time steps")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sopt.seed, "RNG seed");
  simulate->add_option("--horizon", sopt.horizon, "--figure1 horizon in years")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadSpec;
  }

  try {
    if (simulate->parsed() && sopt.figure1) return cmd_simulate_figure1(sopt);
    if (common.spec_file.empty()) {
      std::cerr << "error: a spec file is required\n";
      return kBadSpec;
    }
    const MarketSpecDocument doc = powerprice::load_market_spec(common.spec_file);
    if (common.dump_spec) {
      std::cout << powerprice::dump_market_spec(doc);
      return kOk;
    }
    if (price->parsed()) return cmd_price(doc, method, common.json);
    if (bond->parsed()) return cmd_bond(doc, common.json);
    if (validate->parsed()) return cmd_validate(doc, vopt, common.json);
    return cmd_simulate(doc, sopt);
  } catch (const powerprice::SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return kBadSpec;
  } catch (const powerprice::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const powerprice::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kNumeric;
  } catch (const powerprice::UnsupportedConfiguration& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return kNumeric;
  } catch (const powerprice::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  }
}
