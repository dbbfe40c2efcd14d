#pragma once

// Experiment specs (flat JSON), the per-mode pipelines that turn them into
// result rows, a small worker pool, and slope summaries.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qlaser/csv.hpp"
#include "qlaser/error.hpp"
#include "qlaser/exact_oracle.hpp"
#include "qlaser/fisher.hpp"
#include "qlaser/fit.hpp"
#include "qlaser/langevin.hpp"
#include "qlaser/meanfield.hpp"
#include "qlaser/model.hpp"
#include "qlaser/observables.hpp"
#include "qlaser/quantum_oracle.hpp"
#include "qlaser/xy_sampler.hpp"

namespace qlaser {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kThreadsEnv = "QLASER_THREADS";

enum class Mode { meanfield, sample, langevin, exact, qfi_scaling, quantum_oracle, kt_2d };

inline Mode parse_mode(const std::string& s) {
  static const std::map<std::string, Mode> m{{"meanfield", Mode::meanfield},     {"sample", Mode::sample},
                                             {"langevin", Mode::langevin},       {"exact", Mode::exact},
                                             {"qfi-scaling", Mode::qfi_scaling}, {"quantum-oracle", Mode::quantum_oracle},
                                             {"kt-2d", Mode::kt_2d}};
  auto it = m.find(s);
  if (it == m.end()) throw InvalidArgument("unknown mode '" + s + "'");
  return it->second;
}

struct ExperimentSpec {
  std::string mode_name;
  Mode mode = Mode::exact;
  // model
  double g = 1.0, kappa = 0.1, gamma = 10.0, t_hop = 0.0, kappa_tilde = 1.0, epsilon_abs = 0.0, phi = 0.0;
  CouplingSign coupling_sign = CouplingSign::ferro;
  DrivePattern drive_pattern = DrivePattern::uniform;
  std::size_t dim = 1;
  bool periodic = true;
  std::optional<double> n0_override;
  std::optional<double> K_bond;
  std::optional<double> h_field;
  // sweep
  std::vector<std::size_t> N_list;
  std::vector<std::uint64_t> seeds{1};
  std::size_t replicates = 1;
  std::optional<std::string> output;
  // sampler
  std::size_t sweeps = 100000, burn_in_sweeps = 10000, measure_every = 1, n_batches = 50, chains = 1;
  double proposal_width = 1.0;
  bool global_rotation = false;
  StartState start = StartState::cold;
  // langevin / meanfield / quantum
  std::optional<double> dt;
  std::size_t n_steps = 1000000, burn_in_steps = 100000;
  std::string langevin_kind = "angular";
  double t_end = 1000.0;
  std::optional<std::string> sweep_rate;
  double sweep_lo = 0.0, sweep_hi = 0.0;
  std::size_t n_max = 10;
  double tolerance = 1e-8, t_max = 5000.0;
  // fisher
  double delta_fraction = 0.2, delta_phi = 0.1;
  std::size_t max_halvings = 4;
  bool fisher_phase = false;
  // kt
  std::size_t fit_d_min = 2, fit_d_max = 8;

  bool scaling_mode() const { return mode == Mode::exact || mode == Mode::qfi_scaling; }

  std::vector<std::uint64_t> seed_list(std::uint64_t offset) const {
    std::vector<std::uint64_t> out;
    for (auto s : seeds)
      for (std::size_t r = 0; r < replicates; ++r) out.push_back(s + offset + r);
    return out;
  }

  void validate() const {
    require(!N_list.empty(), "N_list must not be empty");
    for (auto n : N_list) require(n >= 1, "N_list entries must be positive");
    if (scaling_mode()) {
      require(N_list.size() >= 3, "scaling modes need at least 3 values in N_list");
      for (std::size_t i = 1; i < N_list.size(); ++i)
        require(N_list[i] > N_list[i - 1], "N_list must be strictly increasing for scaling modes");
    }
    if (mode == Mode::kt_2d) require(dim == 2, "kt-2d needs dim = 2");
    if (mode == Mode::quantum_oracle)
      for (auto n : N_list) require(n == 1 || n == 2, "quantum-oracle supports N = 1 or 2");
    else if (mode != Mode::exact)
      for (auto n : N_list) require(n >= 2, "lattice modes need N >= 2");
    require(dim >= 1 && dim <= 3, "dim must be 1, 2 or 3");
    require(!seeds.empty() && replicates >= 1, "need at least one seed");
    require(langevin_kind == "angular" || langevin_kind == "full", "langevin_kind must be 'angular' or 'full'");
    require(fit_d_min >= 1 && fit_d_max > fit_d_min, "need 1 <= fit_d_min < fit_d_max");
    if (K_bond) require(std::isfinite(*K_bond) && *K_bond >= 0.0, "K_bond must be non-negative");
    if (h_field) require(std::isfinite(*h_field), "h_field must be finite");
    if (sweep_rate) require(sweep_hi > sweep_lo && sweep_lo > 0.0, "threshold sweep needs 0 < sweep_lo < sweep_hi");
    model(2).validate();
  }

  LatticeSpec lattice(std::size_t n) const {
    std::vector<std::size_t> lens(dim, n);
    return LatticeSpec(lens, periodic);
  }

  ModelParams model(std::size_t n) const {
    ModelParams p;
    p.g = g;
    p.kappa = kappa;
    p.gamma = gamma;
    p.t_hop = t_hop;
    p.kappa_tilde = kappa_tilde;
    p.epsilon_abs = epsilon_abs;
    p.phi = phi;
    p.lattice = n >= 2 ? lattice(n) : LatticeSpec::chain(2);
    p.coupling_sign = coupling_sign;
    p.drive_pattern = drive_pattern;
    return p;
  }

  static ExperimentSpec from_json(const nlohmann::json& j);
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> k{
      "mode", "g", "kappa", "gamma", "t_hop", "kappa_tilde", "epsilon_abs", "phi", "coupling_sign", "drive_pattern",
      "dim", "periodic", "n0_override", "K_bond", "h_field", "N_list", "seeds", "seed", "replicates", "output",
      "sweeps", "burn_in_sweeps", "measure_every", "n_batches", "chains", "proposal_width", "global_rotation", "start",
      "dt", "n_steps", "burn_in_steps", "langevin_kind", "t_end", "sweep_rate", "sweep_lo", "sweep_hi", "n_max",
      "tolerance", "t_max", "delta_fraction", "delta_phi", "max_halvings", "fisher_phase", "fit_d_min", "fit_d_max"};
  return k;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void read(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("experiment spec must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!detail::known_keys().count(it.key())) throw InvalidArgument("unknown key '" + it.key() + "'");
  if (!j.contains("mode")) throw InvalidArgument("missing key 'mode'");
  ExperimentSpec s;
  try {
    s.mode_name = j.at("mode").get<std::string>();
    s.mode = parse_mode(s.mode_name);
    detail::read(j, "g", s.g);
    detail::read(j, "kappa", s.kappa);
    detail::read(j, "gamma", s.gamma);
    detail::read(j, "t_hop", s.t_hop);
    detail::read(j, "kappa_tilde", s.kappa_tilde);
    detail::read(j, "epsilon_abs", s.epsilon_abs);
    detail::read(j, "phi", s.phi);
    if (j.contains("coupling_sign")) {
      const auto v = j.at("coupling_sign").get<std::string>();
      require(v == "ferro" || v == "antiferro", "coupling_sign must be 'ferro' or 'antiferro'");
      s.coupling_sign = v == "ferro" ? CouplingSign::ferro : CouplingSign::antiferro;
    }
    if (j.contains("drive_pattern")) {
      const auto v = j.at("drive_pattern").get<std::string>();
      require(v == "uniform" || v == "staggered", "drive_pattern must be 'uniform' or 'staggered'");
      s.drive_pattern = v == "staggered" ? DrivePattern::staggered : DrivePattern::uniform;
    }
    detail::read(j, "dim", s.dim);
    detail::read(j, "periodic", s.periodic);
    detail::read(j, "n0_override", s.n0_override);
    detail::read(j, "K_bond", s.K_bond);
    detail::read(j, "h_field", s.h_field);
    detail::read(j, "N_list", s.N_list);
    if (j.contains("seed") && j.contains("seeds")) throw InvalidArgument("give either 'seed' or 'seeds'");
    if (j.contains("seed")) s.seeds = {j.at("seed").get<std::uint64_t>()};
    detail::read(j, "seeds", s.seeds);
    detail::read(j, "replicates", s.replicates);
    detail::read(j, "output", s.output);
    detail::read(j, "sweeps", s.sweeps);
    detail::read(j, "burn_in_sweeps", s.burn_in_sweeps);
    detail::read(j, "measure_every", s.measure_every);
    detail::read(j, "n_batches", s.n_batches);
    detail::read(j, "chains", s.chains);
    detail::read(j, "proposal_width", s.proposal_width);
    detail::read(j, "global_rotation", s.global_rotation);
    if (j.contains("start")) {
      const auto v = j.at("start").get<std::string>();
      require(v == "cold" || v == "hot", "start must be 'cold' or 'hot'");
      s.start = v == "hot" ? StartState::hot : StartState::cold;
    }
    detail::read(j, "dt", s.dt);
    detail::read(j, "n_steps", s.n_steps);
    detail::read(j, "burn_in_steps", s.burn_in_steps);
    detail::read(j, "langevin_kind", s.langevin_kind);
    detail::read(j, "t_end", s.t_end);
    detail::read(j, "sweep_rate", s.sweep_rate);
    detail::read(j, "sweep_lo", s.sweep_lo);
    detail::read(j, "sweep_hi", s.sweep_hi);
    detail::read(j, "n_max", s.n_max);
    detail::read(j, "tolerance", s.tolerance);
    detail::read(j, "t_max", s.t_max);
    detail::read(j, "delta_fraction", s.delta_fraction);
    detail::read(j, "delta_phi", s.delta_phi);
    detail::read(j, "max_halvings", s.max_halvings);
    detail::read(j, "fisher_phase", s.fisher_phase);
    detail::read(j, "fit_d_min", s.fit_d_min);
    detail::read(j, "fit_d_max", s.fit_d_max);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline ExperimentSpec parse_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("spec is not valid JSON: ") + e.what());
  }
  return ExperimentSpec::from_json(j);
}

// Coefficients and the effective sampler weights for one lattice size.
struct PointContext {
  ModelParams params;
  DerivedCoeffs coeffs;
  double K = 0.0;
  double h = 0.0;
  double r0 = 1.0;
};

inline PointContext make_context(const ExperimentSpec& s, std::size_t n) {
  PointContext c;
  c.params = s.model(n);
  c.coeffs = derive_coeffs(c.params, s.n0_override);
  c.K = s.K_bond.value_or(c.coeffs.K_bond);
  c.coeffs.K_bond = c.K;
  c.h = s.h_field.value_or(c.coeffs.h_field());
  c.r0 = c.coeffs.n0 > 0.0 ? std::sqrt(c.coeffs.n0) : 1.0;
  return c;
}

inline double metric_cell(std::size_t n, double K) {
  const auto m = finite_size_metric(n, K);
  return std::isfinite(m.value) ? m.value : -1.0;
}

class RowBuilder {
 public:
  RowBuilder(const ExperimentSpec& s, std::size_t n, const PointContext& c, std::uint64_t seed)
      : base_{s.mode_name, n, c.K, c.h, c.params.epsilon_abs, c.params.phi, "", 0, 0, 0, 0, 0, seed, 0} {}

  RowBuilder& metric(double m) {
    base_.finite_size_metric = m;
    return *this;
  }

  void add(const std::string& obs, double value, double se = 0.0, double tp = 0.0, double te = 0.0) {
    ExperimentRow r = base_;
    r.observable = obs;
    r.value = value;
    r.std_error = se;
    r.theory_paper = tp;
    r.theory_errorprop = te;
    for (double v : {r.value, r.std_error, r.theory_paper, r.theory_errorprop})
      if (!std::isfinite(v)) throw NumericalFailure("non-finite value in row '" + obs + "'");
    rows_.push_back(std::move(r));
  }

  void add(const std::string& obs, const Estimate& e, double tp = 0.0, double te = 0.0) { add(obs, e.mean, e.se, tp, te); }

  std::vector<ExperimentRow> take() { return std::move(rows_); }

 private:
  ExperimentRow base_;
  std::vector<ExperimentRow> rows_;
};

namespace detail {

inline SamplerConfig sampler_config(const ExperimentSpec& s, const PointContext& c, std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.K_bond = c.K;
  cfg.h_field = c.h;
  cfg.phi = s.phi;
  cfg.sign = s.coupling_sign;
  cfg.pattern = s.drive_pattern;
  cfg.proposal_width = s.proposal_width;
  cfg.sweeps = s.sweeps;
  cfg.burn_in_sweeps = s.burn_in_sweeps;
  cfg.seed = seed;
  cfg.measure_every = s.measure_every;
  cfg.n_batches = s.n_batches;
  cfg.global_rotation = s.global_rotation;
  cfg.start = s.start;
  return cfg;
}

// G(d) of the 1D ring at coupling K: exact for ferro, sublattice-signed for antiferro.
inline double ring_correlation_theory(const ExperimentSpec& s, std::size_t n, double K, std::size_t d) {
  if (s.dim != 1 || !s.periodic) return 0.0;
  const double g = correlation_exact({n, K, 0}, d);
  if (s.coupling_sign == CouplingSign::antiferro) {
    if (n % 2 == 1) return 0.0;
    return d % 2 == 1 ? -g : g;
  }
  return g;
}

// Two-channel approximation: G(d) ~ (rho^d + rho^{N-d}) / (1 + 2 rho^N), rho = I1/I0.
inline double two_channel_sum(std::size_t n, double K) {
  const double rho = K > 0.0 ? bessel_i_ratios(1, K)[1] : 0.0;
  const double rn = std::pow(rho, static_cast<double>(n));
  double s = 0.0;
  for (std::size_t d = 0; d < n; ++d)
    s += d == 0 ? 1.0 : (std::pow(rho, static_cast<double>(d)) + std::pow(rho, static_cast<double>(n - d))) / (1.0 + 2.0 * rn);
  return s;
}

inline void add_angular_rows(RowBuilder& rb, const ExperimentSpec& s, const PointContext& c, std::size_t n,
                             const SampleStats& st) {
  const auto o = estimate_observables(st, c.r0);
  const std::size_t nsites = st.layout.n_sites;
  const auto q = predict_quadratures_and_qfi(c.coeffs, nsites, 0.0);
  const bool ring = s.dim == 1;
  const double p_leading = ring ? 4.0 * c.coeffs.n0 * (c.h / (2.0 * c.r0)) * double(nsites) * double(nsites) : 0.0;
  const double p_general = ring ? 2.0 * c.coeffs.n0 * (c.h / (2.0 * c.r0)) * double(nsites) * q.sum_G : 0.0;
  rb.add("P_sum", o.P_sum, p_leading, p_general);
  rb.add("X_sum", o.X_sum);
  rb.add("P_pair_sum", o.P_pair_sum);
  rb.add("X_pair_sum", o.X_pair_sum);
  rb.add("P_variance", o.P_variance);
  rb.add("X_variance", o.X_variance);
  rb.add("sin_mean", o.sin_mean);
  rb.add("cos_mean", o.cos_mean);
  const std::size_t half = n / 2;
  for (std::size_t d = 1; d <= half && d < o.correlations.G.size(); ++d) {
    const double th = ring_correlation_theory(s, n, c.K, d);
    rb.add("G_" + std::to_string(d), o.correlations.G[d], th, th);
  }
  rb.add("xi_fit", std::isfinite(o.correlations.xi_fit) ? o.correlations.xi_fit : -1.0, 0.0,
         correlation_length(c.K), correlation_length(c.K));
}

inline std::vector<ExperimentRow> run_meanfield(const ExperimentSpec& s, std::size_t n) {
  const auto c = make_context(s, n);
  RowBuilder rb(s, n, c, 0);
  const auto& p = c.params;
  const double dt = s.dt.value_or(kMeanFieldStabilityGuard / fastest_rate(p) / 2.0);
  const auto tr = integrate_maxwell_bloch(p, lasing_seed(p), dt, s.t_end);
  const auto& fin = tr.final_state();
  double dmean = 0.0;
  for (double d : fin.D) dmean += d;
  dmean /= static_cast<double>(fin.size());
  // Fixed point of the integrated equations for a homogeneous field.
  const double sgn = p.coupling_sign == CouplingSign::ferro ? -1.0 : 1.0;
  const double hop = p.t_hop * p.t_hop / p.kappa_tilde;
  const double c_eff = p.kappa + hop + sgn * hop * 2.0 * static_cast<double>(p.lattice.dim());
  const double ode_fixed = std::max(0.0, p.gamma * p.gamma / (2.0 * p.g * p.g) * (p.g * p.g / (p.gamma * c_eff) - 1.0));
  rb.add("intensity_per_site", fin.mean_intensity(), 0.0, steady_boson_number(p), ode_fixed);
  rb.add("inversion", dmean, 0.0, std::min(1.0, c_eff * p.gamma / (p.g * p.g)), 0.0);
  if (s.sweep_rate) {
    static const std::map<std::string, SweepRate> rates{{"g", SweepRate::g},
                                                        {"kappa", SweepRate::kappa},
                                                        {"gamma", SweepRate::gamma},
                                                        {"t_hop", SweepRate::t_hop},
                                                        {"kappa_tilde", SweepRate::kappa_tilde}};
    auto it = rates.find(*s.sweep_rate);
    if (it == rates.end()) throw InvalidArgument("unknown sweep_rate '" + *s.sweep_rate + "'");
    ModelParams base = p;
    base.epsilon_abs = 0.0;
    const double crit = detect_threshold(base, it->second, s.sweep_lo, s.sweep_hi);
    // closed-form C~_p = 1 point by bisection on the formula
    auto cpt = [&](double v) {
      ModelParams q = base;
      rate_ref(q, it->second) = v;
      const double cp = q.g * q.g / (q.kappa * q.gamma);
      const double tk = q.t_hop / q.kappa;
      return cp / (1.0 + 3.0 * tk * tk) - 1.0;
    };
    double a = s.sweep_lo, b = s.sweep_hi, formula = 0.0;
    if ((cpt(a) > 0) != (cpt(b) > 0)) {
      const bool sa = cpt(a) > 0;
      for (int k = 0; k < 200; ++k) {
        const double m = 0.5 * (a + b);
        ((cpt(m) > 0) == sa ? a : b) = m;
      }
      formula = 0.5 * (a + b);
    }
    rb.add("threshold_" + *s.sweep_rate, crit, 0.0, formula, 0.0);
  }
  return rb.take();
}

inline std::vector<ExperimentRow> run_exact(const ExperimentSpec& s, std::size_t n) {
  const auto c = make_context(s, n);
  RowBuilder rb(s, n, c, 0);
  rb.metric(metric_cell(n, c.K));
  const double sg = correlation_sum(n, c.K);
  const double approx = two_channel_sum(n, c.K);
  const double nn = static_cast<double>(n);
  rb.add("sum_G", sg, 0.0, nn, approx);
  rb.add("N_sum_G", nn * sg, 0.0, nn * nn, nn * approx);
  const double xi = correlation_length(c.K);
  rb.add("xi", xi, 0.0, xi, xi);
  return rb.take();
}

inline std::vector<ExperimentRow> run_sample(const ExperimentSpec& s, std::size_t n, std::uint64_t seed) {
  const auto c = make_context(s, n);
  RowBuilder rb(s, n, c, seed);
  rb.metric(metric_cell(c.params.lattice.size(), c.K));
  const auto cfg = sampler_config(s, c, seed);
  const auto st = run_chains(c.params.lattice, cfg, s.chains, 1);
  add_angular_rows(rb, s, c, n, st);
  rb.add("acceptance", st.acceptance);
  return rb.take();
}

inline std::vector<ExperimentRow> run_langevin(const ExperimentSpec& s, std::size_t n, std::uint64_t seed) {
  auto c = make_context(s, n);
  require(c.coeffs.n0 > 0.0, "langevin mode needs n0 > 0 (above threshold or n0_override)");
  RowBuilder rb(s, n, c, seed);
  rb.metric(metric_cell(c.params.lattice.size(), c.K));
  LangevinModel model(c.params, c.coeffs);
  LangevinParams lp;
  lp.dt = s.dt.value_or(1e-2);
  lp.n_steps = s.n_steps;
  lp.burn_in_steps = s.burn_in_steps;
  lp.seed = seed;
  lp.measure_every = s.measure_every;
  lp.n_batches = s.n_batches;
  // the angular law uses the model's own weights
  c.K = model.angular_target().K_bond;
  c.h = model.angular_target().h_field;
  if (s.langevin_kind == "angular") {
    Engine rng = make_engine(seed, 1);
    AngularConfig init{initial_angles(model.angular_target(), s.start, rng)};
    const auto st = run_stationary(std::move(init), model, lp);
    add_angular_rows(rb, s, c, n, st);
  } else {
    FieldConfig init;
    for (std::size_t j = 0; j < c.params.lattice.size(); ++j) init.alpha.push_back(std::polar(c.r0, c.params.site_phase(j) - std::numbers::pi / 2));
    const auto st = run_stationary(std::move(init), model, lp);
    add_angular_rows(rb, s, c, n, st);
    rb.add("r_mean", st.acc.estimate(st.layout.r_mean()), c.r0, c.r0);
    rb.add("r2_mean", st.acc.estimate(st.layout.r2_mean()), c.coeffs.n0, c.coeffs.n0);
    rb.add("P_full_sum", st.acc.estimate(st.layout.p_full()));
    rb.add("X_full_sum", st.acc.estimate(st.layout.x_full()));
  }
  return rb.take();
}

inline std::vector<ExperimentRow> run_qfi(const ExperimentSpec& s, std::size_t n, std::uint64_t seed) {
  const auto c = make_context(s, n);
  require(c.params.epsilon_abs > 0.0, "qfi-scaling needs epsilon_abs > 0");
  require(c.coeffs.n0 > 0.0, "qfi-scaling needs n0 > 0 (above threshold or n0_override)");
  RowBuilder rb(s, n, c, seed);
  const std::size_t nsites = c.params.lattice.size();
  rb.metric(metric_cell(nsites, c.K));
  const auto cfg = sampler_config(s, c, seed);
  const double h_per_eps = c.h / c.params.epsilon_abs;
  FisherOptions fo;
  fo.delta_fraction = s.delta_fraction;
  fo.delta_phi = s.delta_phi;
  fo.max_halvings = s.max_halvings;
  const auto pred = predict_quadratures_and_qfi(c.coeffs, nsites, 0.0);
  auto amp_runner = [&](double e) {
    SamplerConfig k = cfg;
    k.h_field = h_per_eps * e;
    return run_chains(c.params.lattice, k, s.chains, 1);
  };
  const auto fa = estimate_qfi_amplitude(amp_runner, c.params.epsilon_abs, c.r0, fo);
  rb.add("F_amplitude", fa.value, fa.std_error, pred.F_amplitude_leading, pred.F_amplitude_errorprop);
  rb.add("dP_deps", fa.derivative, 0.0, 2.0 * c.coeffs.n0 * double(nsites) * pred.sum_G / c.coeffs.A);
  rb.add("P_variance", fa.variance);
  rb.add("fd_delta_amplitude", fa.delta);
  if (s.fisher_phase) {
    auto phase_runner = [&](double off) {
      SamplerConfig k = cfg;
      k.phi = s.phi + off;
      return run_chains(c.params.lattice, k, s.chains, 1);
    };
    const auto fp = estimate_qfi_phase(phase_runner, c.r0, fo);
    rb.add("F_phase", fp.value, fp.std_error, pred.F_phase_leading, pred.F_phase_errorprop);
    rb.add("fd_delta_phase", fp.delta);
  }
  return rb.take();
}

inline std::vector<ExperimentRow> run_quantum(const ExperimentSpec& s, std::size_t n) {
  const auto c = make_context(s, n);
  RowBuilder rb(s, n, c, 0);
  QuantumParams qp = QuantumParams::from(c.params);
  qp.n_sites = n;
  const TruncatedHilbert hs{n, s.n_max};
  const auto L = build_generator(qp, hs);
  SteadyResult st = hs.dims() <= kDirectSolveMaxDim
                        ? steady_state_direct(L)
                        : evolve_to_steady(L, vacuum_state(hs), s.dt.value_or(0.01), s.tolerance, s.t_max);
  const auto ex = expectations(st.rho, L);
  const double sgn = qp.sign == CouplingSign::ferro ? -1.0 : 1.0;
  const double hop = n == 2 ? qp.t_hop * qp.t_hop / qp.kappa_tilde : 0.0;
  const double c_eff = qp.kappa + hop + sgn * hop;
  const double ode_fixed = std::max(0.0, qp.gamma * qp.gamma / (2.0 * qp.g * qp.g) * (qp.g * qp.g / (qp.gamma * c_eff) - 1.0));
  for (std::size_t j = 0; j < ex.sites.size(); ++j) {
    const auto tag = "_site" + std::to_string(j);
    rb.add("n" + tag, ex.sites[j].n, 0.0, steady_boson_number(c.params), ode_fixed);
    rb.add("P" + tag, ex.sites[j].P);
    rb.add("X" + tag, ex.sites[j].X);
    rb.add("sz" + tag, ex.sites[j].sz);
  }
  rb.add("tail_population", tail_population(st.rho, hs), 0.0, kCutoffTail, kCutoffTail);
  rb.add("residual_l1", st.residual);
  const auto dg = diagnose(st.rho);
  rb.add("min_eigenvalue", dg.min_eigenvalue);
  return rb.take();
}

struct PowerLawComparison {
  LineFit power;        // ln G vs ln d
  LineFit exponential;  // ln G vs d
  double aic_power = 0.0;
  double aic_exp = 0.0;
  double eta() const { return -power.slope; }
  double xi() const { return exponential.slope < 0.0 ? -1.0 / exponential.slope : -1.0; }
};

// Weighted fits of ln G(d) over [d_min, d_max]; both models carry two parameters.
inline PowerLawComparison compare_decay(const std::vector<Estimate>& G, std::size_t d_min, std::size_t d_max) {
  std::vector<double> ld, d, lg, sg;
  for (std::size_t k = d_min; k <= d_max && k < G.size(); ++k) {
    if (!(G[k].mean > 0.0)) break;
    ld.push_back(std::log(double(k)));
    d.push_back(double(k));
    lg.push_back(std::log(G[k].mean));
    sg.push_back(std::max(G[k].se / G[k].mean, 1e-12));
  }
  if (d.size() < 3) throw NumericalFailure("too few positive correlation points for the decay fit");
  PowerLawComparison c;
  c.power = fit_line(ld, lg, sg);
  c.exponential = fit_line(d, lg, sg);
  c.aic_power = aic(c.power.chi2, 2);
  c.aic_exp = aic(c.exponential.chi2, 2);
  return c;
}

inline std::vector<ExperimentRow> run_kt(const ExperimentSpec& s, std::size_t n, std::uint64_t seed) {
  const auto c = make_context(s, n);
  RowBuilder rb(s, n, c, seed);
  const auto kt = kt_predictions(c.coeffs, c.params.lattice, n);
  rb.metric(kt.size_metric);
  const auto cfg = sampler_config(s, c, seed);
  const auto st = run_chains(c.params.lattice, cfg, s.chains, 1);
  const auto o = estimate_observables(st, c.r0);
  for (std::size_t d = 1; d <= n / 2 && d < o.correlations.G.size(); ++d)
    rb.add("G_" + std::to_string(d), o.correlations.G[d]);
  const auto cmp = compare_decay(o.correlations.G, s.fit_d_min, s.fit_d_max);
  rb.add("eta_fit", cmp.eta(), cmp.power.slope_se, kt.eta, kt.eta_bond_spin_wave);
  rb.add("xi_exp_fit", cmp.xi(), 0.0);
  rb.add("aic_power", cmp.aic_power);
  rb.add("aic_exp", cmp.aic_exp);
  rb.add("n0_varsigma", kt.n0_varsigma, 0.0, kKtCritical, kKtCritical);
  rb.add("beta_eff_varsigma", kt.beta_eff_varsigma, 0.0, kKtCritical, kKtCritical);
  rb.add("acceptance", st.acceptance);
  return rb.take();
}

}  // namespace detail

struct Task {
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::function<std::vector<ExperimentRow>()> fn;
};

inline std::vector<Task> plan_tasks(const ExperimentSpec& s, std::uint64_t seed_offset) {
  std::vector<Task> tasks;
  const auto seeds = s.seed_list(seed_offset);
  for (auto n : s.N_list) {
    switch (s.mode) {
      case Mode::meanfield: tasks.push_back({n, 0, [&s, n] { return detail::run_meanfield(s, n); }}); break;
      case Mode::exact: tasks.push_back({n, 0, [&s, n] { return detail::run_exact(s, n); }}); break;
      case Mode::quantum_oracle: tasks.push_back({n, 0, [&s, n] { return detail::run_quantum(s, n); }}); break;
      case Mode::sample:
        for (auto sd : seeds) tasks.push_back({n, sd, [&s, n, sd] { return detail::run_sample(s, n, sd); }});
        break;
      case Mode::langevin:
        for (auto sd : seeds) tasks.push_back({n, sd, [&s, n, sd] { return detail::run_langevin(s, n, sd); }});
        break;
      case Mode::qfi_scaling:
        for (auto sd : seeds) tasks.push_back({n, sd, [&s, n, sd] { return detail::run_qfi(s, n, sd); }});
        break;
      case Mode::kt_2d:
        for (auto sd : seeds) tasks.push_back({n, sd, [&s, n, sd] { return detail::run_kt(s, n, sd); }});
        break;
    }
  }
  return tasks;
}

// Log-log slope per (observable, seed) over N for the scaling observables.
inline std::vector<ExperimentRow> summarize(const ExperimentSpec& s, const std::vector<ExperimentRow>& rows) {
  std::vector<std::string> targets;
  if (s.mode == Mode::exact) targets = {"N_sum_G"};
  if (s.mode == Mode::qfi_scaling) targets = {"F_amplitude", "F_phase"};
  std::vector<ExperimentRow> out;
  for (const auto& obs : targets) {
    std::map<std::uint64_t, std::vector<const ExperimentRow*>> by_seed;
    for (const auto& r : rows)
      if (r.observable == obs) by_seed[r.seed].push_back(&r);
    for (const auto& [seed, rs] : by_seed) {
      if (rs.size() < 3) continue;
      std::vector<double> N, v, se;
      for (auto* r : rs) {
        N.push_back(double(r->N));
        v.push_back(r->value);
        se.push_back(r->std_error);
      }
      ExperimentRow base = *rs.back();
      base.N = 0;
      base.seed = seed;
      base.wall_time = 0.0;
      base.theory_paper = base.finite_size_metric >= 0.0 && base.finite_size_metric <= kLongRangeThreshold ? 2.0 : 1.0;
      base.theory_errorprop = base.theory_paper;
      base.finite_size_metric = 0.0;
      try {
        const auto f = fit_loglog_slope(N, v, se);
        base.observable = "slope_" + obs;
        base.value = f.slope;
        base.std_error = f.slope_se;
        out.push_back(base);
        base.observable = "slope_ci_low_" + obs;
        base.value = f.ci_low;
        base.std_error = 0.0;
        out.push_back(base);
        base.observable = "slope_ci_high_" + obs;
        base.value = f.ci_high;
        out.push_back(base);
      } catch (const InvalidArgument&) {
        // non-positive estimates: no slope to report
      }
    }
  }
  return out;
}

struct RunOutcome {
  std::vector<ExperimentRow> rows;     // completed tasks, in plan order
  std::vector<ExperimentRow> summary;  // only when every task succeeded
  int exit_code = 0;
  std::string message;
};

inline std::size_t resolve_threads(std::optional<std::size_t> cli) {
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (...) {
    }
    throw InvalidArgument(std::string(kThreadsEnv) + " must be a positive integer");
  }
  if (cli) {
    require(*cli >= 1, "--threads must be positive");
    return *cli;
  }
  return 1;
}

inline RunOutcome run_experiment(const ExperimentSpec& s, std::size_t threads = 1, std::uint64_t seed_offset = 0) {
  auto tasks = plan_tasks(s, seed_offset);
  std::vector<std::optional<std::vector<ExperimentRow>>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        auto rows = tasks[i].fn();
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (auto& r : rows) r.wall_time = wall;
        results[i] = std::move(rows);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tasks.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  RunOutcome out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (results[i]) out.rows.insert(out.rows.end(), results[i]->begin(), results[i]->end());
    if (errors[i] && out.exit_code == 0) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const InvalidArgument& e) {
        out.exit_code = 2;
        out.message = e.what();
      } catch (const std::exception& e) {
        out.exit_code = 3;
        out.message = e.what();
      }
      out.message = "N=" + std::to_string(tasks[i].N) + " seed=" + std::to_string(tasks[i].seed) + ": " + out.message;
    }
  }
  if (out.exit_code == 0) out.summary = summarize(s, out.rows);
  return out;
}

inline void write_provenance(CsvWriter& w, const std::string& spec_text, const ExperimentSpec& s,
                             std::uint64_t seed_offset) {
  w.comment(std::string("qlaser simulate ") + kVersion);
  w.comment("spec_fnv1a64 " + hex64(fnv1a64(spec_text)));
  w.comment("mode " + s.mode_name);
  w.comment("seed_offset " + std::to_string(seed_offset));
}

}  // namespace qlaser
