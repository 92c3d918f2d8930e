#include "pamlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pamlab/error.hpp"
#include "pamlab/numerics.hpp"
#include "pamlab/pam_solver.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/scale_functions.hpp"
#include "pamlab/variational.hpp"
#include "pamlab/walk_mc.hpp"

namespace pamlab {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* kSubstitution =
    "t -> infinity limits are not reachable at desk scale; acceptance is property-based "
    "(positivity, reference band, monotone trend, intermittency ordering) on finite t";

const std::vector<std::pair<Experiment, const char*>>& names() {
  static const std::vector<std::pair<Experiment, const char*>> v{
      {Experiment::Classify, "classify"},       {Experiment::Scales, "scales"},
      {Experiment::Moments, "moments"},         {Experiment::Quenched, "quenched"},
      {Experiment::Variational, "variational"}, {Experiment::Selfint, "selfint"},
      {Experiment::HeuristicProfile, "heuristic_profile"}};
  return v;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

double get_positive(const json& j, const char* key) {
  require(j.at(key).is_number(), std::string(key) + " must be a number");
  const double v = j.at(key).get<double>();
  require(v > 0.0 && std::isfinite(v), std::string(key) + " must be positive and finite");
  return v;
}

int get_int(const json& j, const char* key, int lo, int hi) {
  require(j.at(key).is_number_integer(), std::string(key) + " must be an integer");
  const auto v = j.at(key).get<std::int64_t>();
  require(v >= lo && v <= hi, std::string(key) + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

std::vector<double> get_positive_list(const json& j, const char* key) {
  require(j.at(key).is_array() && !j.at(key).empty(), std::string(key) + " must be a nonempty array");
  std::vector<double> out;
  for (const auto& x : j.at(key)) {
    require(x.is_number(), std::string(key) + " entries must be numbers");
    const double v = x.get<double>();
    require(v > 0.0 && std::isfinite(v), std::string(key) + " entries must be positive and finite");
    out.push_back(v);
  }
  return out;
}

VariationalConfig parse_variational(const json& j) {
  require(j.is_object(), "variational must be an object");
  static const std::vector<std::string> keys{"problem", "rho",    "delta",  "gamma",
                                             "grid",    "L",      "h",      "radius", "write_minimizer", "max_iter"};
  for (const auto& [k, v] : j.items()) {
    require(std::find(keys.begin(), keys.end(), k) != keys.end(), "unknown variational key '" + k + "'");
  }
  VariationalConfig v;
  if (j.contains("problem")) {
    require(j.at("problem").is_string(), "variational.problem must be a string");
    v.problem = j.at("problem").get<std::string>();
    require(v.problem == "chi" || v.problem == "chi_tilde" || v.problem == "chi_discrete" || v.problem == "chi_gamma",
            "variational.problem must be chi, chi_tilde, chi_discrete or chi_gamma");
  }
  if (j.contains("rho")) v.rho = get_positive(j, "rho");
  if (j.contains("delta")) v.delta = get_positive(j, "delta");
  if (j.contains("gamma")) {
    require(j.at("gamma").is_number(), "variational.gamma must be a number");
    v.gamma = j.at("gamma").get<double>();
    require(v.gamma >= 0.0 && v.gamma < 1.0, "variational.gamma must lie in [0, 1)");
  }
  if (j.contains("grid")) {
    require(j.at("grid").is_string(), "variational.grid must be a string");
    v.grid = j.at("grid").get<std::string>();
    require(v.grid == "auto" || v.grid == "cartesian" || v.grid == "radial",
            "variational.grid must be auto, cartesian or radial");
  }
  if (j.contains("L")) v.L = get_positive(j, "L");
  if (j.contains("h")) v.h = get_positive(j, "h");
  require((v.L == 0.0) == (v.h == 0.0), "variational.L and variational.h go together");
  if (j.contains("radius")) v.radius = get_int(j, "radius", 1, 2000);
  if (j.contains("max_iter")) v.max_iter = get_int(j, "max_iter", 1, 10'000'000);
  if (j.contains("write_minimizer")) {
    require(j.at("write_minimizer").is_boolean(), "variational.write_minimizer must be a boolean");
    v.write_minimizer = j.at("write_minimizer").get<bool>();
  }
  return v;
}

// ---------------------------------------------------------------- helpers

ClassificationReport classify_for(const ExperimentConfig& cfg) {
  return classify(*cfg.model, cfg.classify_t_max, cfg.classify_points);
}

ScalePair scales_for(const ExperimentConfig& cfg, const ClassificationReport& report) {
  if (report.outcome == "degenerate") return make_scale_pair(make_kappa(cumulant_function(*cfg.model), 1.0), cfg.d, true);
  return make_scale_pair(*cfg.model, report, cfg.d);
}

ExperimentResult base_result(const ExperimentConfig& cfg) {
  ExperimentResult r;
  r.metadata["config"] = cfg.raw;
  r.metadata["experiment"] = experiment_name(cfg.experiment);
  r.metadata["version"] = PAMLAB_VERSION;
  r.metadata["seed"] = std::to_string(cfg.seed);
  return r;
}

void record_report(ExperimentResult& r, const ClassificationReport& report) {
  r.metadata["classification"] = to_json(report);
}

bool has_label(const ClassificationReport& r, ClassLabel l) { return r.label && *r.label == l; }

int replicas_or(const ExperimentConfig& cfg, int fallback) { return cfg.replicas > 0 ? cfg.replicas : fallback; }

double mean_of(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

double se_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return kNaN;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Runs body(i) for i < n in parallel and rethrows the first failure.
template <class F>
void parallel_for(std::int64_t n, F&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(pamlab_experiment_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::string experiment_name(Experiment e) {
  for (const auto& [k, n] : names()) {
    if (k == e) return n;
  }
  return "unknown";
}

Experiment experiment_from_name(const std::string& name) {
  for (const auto& [k, n] : names()) {
    if (name == n) return k;
  }
  throw ValidationError("unknown experiment '" + name + "'");
}

ExperimentConfig parse_config(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  static const std::vector<std::string> keys{
      "experiment", "model",    "d",          "t_grid",      "replicas",       "seed",
      "output_dir", "p_values", "radius",     "seeds",       "radius_cap",     "classify_t_max",
      "classify_points", "quantile", "q_values", "variational"};
  for (const auto& [k, v] : j.items()) {
    require(std::find(keys.begin(), keys.end(), k) != keys.end(), "unknown config key '" + k + "'");
  }
  ExperimentConfig cfg;
  cfg.raw = j;
  require(j.contains("experiment") && j.at("experiment").is_string(), "config needs a string 'experiment'");
  cfg.experiment = experiment_from_name(j.at("experiment").get<std::string>());

  const bool needs_model = cfg.experiment != Experiment::Variational && cfg.experiment != Experiment::Selfint;
  if (j.contains("model")) {
    cfg.model_spec = j.at("model");
    cfg.model = model_from_json(cfg.model_spec);
  }
  require(!needs_model || cfg.model.has_value(), "experiment '" + experiment_name(cfg.experiment) + "' needs a model");

  if (j.contains("d")) cfg.d = get_int(j, "d", 1, 3);
  if (j.contains("t_grid")) cfg.t_grid = get_positive_list(j, "t_grid");
  const bool needs_t = cfg.experiment == Experiment::Scales || cfg.experiment == Experiment::Moments ||
                       cfg.experiment == Experiment::Quenched || cfg.experiment == Experiment::Selfint ||
                       cfg.experiment == Experiment::HeuristicProfile;
  require(!needs_t || !cfg.t_grid.empty(), "experiment '" + experiment_name(cfg.experiment) + "' needs t_grid");
  if (cfg.experiment == Experiment::Quenched) {
    for (double t : cfg.t_grid) require(t > 1.0, "quenched t_grid entries must exceed 1");
  }
  if (j.contains("replicas")) cfg.replicas = get_int(j, "replicas", 1, 100'000'000);
  if (j.contains("seed")) {
    require(j.at("seed").is_number_unsigned() || (j.at("seed").is_number_integer() && j.at("seed").get<std::int64_t>() >= 0),
            "seed must be a nonnegative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    require(j.at("output_dir").is_string() && !j.at("output_dir").get<std::string>().empty(),
            "output_dir must be a nonempty string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("p_values")) cfg.p_values = get_positive_list(j, "p_values");
  if (j.contains("radius")) cfg.radius = get_int(j, "radius", 0, 100'000);
  if (j.contains("seeds")) cfg.seeds = get_int(j, "seeds", 1, 10'000);
  if (j.contains("radius_cap")) cfg.radius_cap = get_int(j, "radius_cap", 1, 100'000);
  if (j.contains("classify_t_max")) {
    cfg.classify_t_max = get_positive(j, "classify_t_max");
    require(cfg.classify_t_max >= 1e6, "classify_t_max must be at least 1e6 (four decades above 1e2)");
  }
  if (j.contains("classify_points")) cfg.classify_points = get_int(j, "classify_points", 10, 10'000);
  if (j.contains("quantile")) {
    cfg.quantile = get_positive(j, "quantile");
    require(cfg.quantile < 1.0, "quantile must lie in (0, 1)");
  }
  if (j.contains("q_values")) {
    cfg.q_values = get_positive_list(j, "q_values");
    for (double q : cfg.q_values) require(q >= 1.0, "q_values entries must be at least 1");
  }
  if (j.contains("variational")) cfg.variational = parse_variational(j.at("variational"));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::logic_error("table row width mismatch in " + name);
  rows.push_back(std::move(row));
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::string fmt(std::int64_t x) { return std::to_string(x); }

// ---------------------------------------------------------------- classify

ExperimentResult run_classify(const ExperimentConfig& cfg) {
  ExperimentResult r = base_result(cfg);
  const ClassificationReport report = classify_for(cfg);
  record_report(r, report);
  r.scalars["outcome"] = report.outcome;
  r.scalars["label"] = report.label ? label_name(*report.label) : "none";
  r.scalars["gamma"] = report.gamma;
  r.scalars["gamma_class"] = report.gamma_class;
  r.scalars["rho"] = report.rho;
  r.scalars["kappa_star"] = std::isinf(report.kappa_star) ? json("inf") : json(report.kappa_star);

  const HFunction H = cumulant_function(*cfg.model);
  const HFunction kappa = make_kappa(H, report.gamma_class);
  Table cum{"cumulant", {"t", "H", "kappa"}, {}};
  for (double t : report.t_grid) cum.add({fmt(t), fmt(H(t)), fmt(kappa(t))});
  r.series.push_back(std::move(cum));

  if (!report.rho_by_t.empty()) {
    Table rho{"rho_by_t", {"t", "rho"}, {}};
    const std::size_t off = report.t_grid.size() - report.rho_by_t.size();
    for (std::size_t i = 0; i < report.rho_by_t.size(); ++i) rho.add({fmt(report.t_grid[off + i]), fmt(report.rho_by_t[i])});
    r.series.push_back(std::move(rho));
  }
  return r;
}

// ---------------------------------------------------------------- scales

ExperimentResult run_scales(const ExperimentConfig& cfg) {
  ExperimentResult r = base_result(cfg);
  const ClassificationReport report = classify_for(cfg);
  record_report(r, report);
  require(report.outcome == "classified", "scales needs a classified model (outcome: " + report.outcome + ")");
  const ScalePair sp = scales_for(cfg, report);
  const HFunction H = cumulant_function(*cfg.model);

  Table tab{"scales", {"t", "alpha", "alpha_residual", "beta", "beta_residual", "leading_term"}, {}};
  std::vector<double> ts, as;
  double worst_alpha = 0.0, worst_beta = 0.0;
  int undefined = 0;
  for (double t : cfg.t_grid) {
    double a = kNaN, ares = kNaN, b = kNaN, bres = kNaN, lead = kNaN;
    try {
      if (sp.alpha_constant) {
        a = 1.0;
        ares = 0.0;
      } else {
        const ScaleSolve s = solve_alpha(sp.kappa, cfg.d, t);
        a = s.value;
        ares = s.residual;
      }
      lead = leading_term(H, sp.alpha, cfg.d, 1.0, t);
      worst_alpha = std::max(worst_alpha, std::abs(ares));
      if (t > std::exp(1.0)) {
        ts.push_back(t);
        as.push_back(a);
      }
    } catch (const NumericalError&) {
      ++undefined;
    }
    if (t > 1.0) {
      try {
        const ScaleSolve s = solve_beta(sp.alpha, cfg.d, t);
        b = s.value;
        bres = s.residual;
        worst_beta = std::max(worst_beta, std::abs(bres));
      } catch (const NumericalError&) {
        ++undefined;
      }
    }
    tab.add({fmt(t), fmt(a), fmt(ares), fmt(b), fmt(bres), fmt(lead)});
  }
  r.series.push_back(std::move(tab));
  const double g = report.gamma_class;
  r.scalars["alpha_index_predicted"] = (1.0 - g) / (cfg.d + 2.0 - cfg.d * g);
  r.scalars["alpha_index"] = ts.size() >= 4 ? fit_regular_variation(ts, as).index : kNaN;
  r.scalars["max_alpha_residual"] = worst_alpha;
  r.scalars["max_beta_residual"] = worst_beta;
  r.scalars["undefined_points"] = undefined;
  r.scalars["alpha_constant"] = sp.alpha_constant;
  return r;
}

// ---------------------------------------------------------------- moments

ExperimentResult run_moments(const ExperimentConfig& cfg) {
  ExperimentResult r = base_result(cfg);
  r.metadata["acceptance_substitution"] = kSubstitution;
  const ClassificationReport report = classify_for(cfg);
  record_report(r, report);
  const bool de = has_label(report, ClassLabel::DoubleExponential);
  const bool ab = has_label(report, ClassLabel::AlmostBounded);
  require(de || ab || report.outcome == "degenerate",
          "moments needs a DoubleExponential or AlmostBounded model (got " +
              (report.label ? label_name(*report.label) : report.outcome) + ")");
  const ScalePair sp = scales_for(cfg, report);
  const int n = replicas_or(cfg, 100'000);
  const int R = cfg.radius > 0 ? cfg.radius : 10;

  // Reference constant of the centered quantity.
  double reference = kNaN;
  std::string reference_name = "none";
  if (de) {
    const double ks = report.kappa_star;
    const double chid = chi_discrete(ks, cfg.d, static_cast<int>(std::ceil(6.0 / std::sqrt(ks))) + 5).value;
    reference = (chid + 0.5 * ks * cfg.d * std::log(ks)) / ks;
    reference_name = "chi_discrete(kappa*) scaled";
  } else if (ab) {
    reference = chi_closed_form(report.rho, cfg.d);
    reference_name = "chi(rho)";
  }
  r.scalars["reference"] = reference;
  r.scalars["reference_kind"] = reference_name;

  Table tab{"moments",
            {"p", "t", "pt", "log_moment", "log_moment_se", "rate", "leading_term", "alpha", "centered", "centered_se",
             "ess", "flagged", "reference"},
            {}};
  std::vector<std::vector<MomentEstimate>> est(cfg.p_values.size());
  std::uint64_t cell = 0;
  for (std::size_t pi = 0; pi < cfg.p_values.size(); ++pi) {
    for (double t : cfg.t_grid) {
      const MomentEstimate e =
          moment_estimator(*cfg.model, sp.alpha, cfg.d, cfg.p_values[pi], t, R, n, derive_seed(cfg.seed, cell++));
      est[pi].push_back(e);
      tab.add({fmt(e.p), fmt(t), fmt(e.p * t), fmt(e.moment.log_estimate), fmt(e.moment.log_se), fmt(e.rate),
               fmt(e.leading), fmt(e.alpha), fmt(e.centered), fmt(e.centered_se), fmt(e.moment.ess),
               fmt(std::int64_t{e.flagged}), fmt(reference)});
    }
  }
  r.series.push_back(std::move(tab));

  // Intermittency: (1/q) log<U^q> - (1/p) log<U^p> for every p < q.
  Table inter{"intermittency", {"t", "p", "q", "log_ratio", "log_ratio_se", "flagged"}, {}};
  for (std::size_t a = 0; a < cfg.p_values.size(); ++a) {
    for (std::size_t b = 0; b < cfg.p_values.size(); ++b) {
      if (!(cfg.p_values[a] < cfg.p_values[b])) continue;
      for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
        const auto& ep = est[a][k];
        const auto& eq = est[b][k];
        const double lr = eq.moment.log_estimate / eq.p - ep.moment.log_estimate / ep.p;
        const double se = std::hypot(eq.moment.log_se / eq.p, ep.moment.log_se / ep.p);
        inter.add({fmt(cfg.t_grid[k]), fmt(ep.p), fmt(eq.p), fmt(lr), fmt(se),
                   fmt(std::int64_t{ep.flagged || eq.flagged})});
      }
    }
  }
  if (!inter.rows.empty()) r.series.push_back(std::move(inter));

  // Summary over usable cells (finite centered value, not flagged).
  json per_p = json::array();
  for (std::size_t pi = 0; pi < cfg.p_values.size(); ++pi) {
    std::vector<double> vals;
    int flagged = 0, undefined = 0;
    for (const auto& e : est[pi]) {
      if (!std::isfinite(e.centered)) {
        ++undefined;
      } else if (e.flagged) {
        ++flagged;
      } else {
        vals.push_back(e.centered);
      }
    }
    int steps = 0, toward = 0;
    bool positive = true, within3 = true;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      positive = positive && vals[i] > 0.0;
      if (std::isfinite(reference)) within3 = within3 && vals[i] > reference / 3.0 && vals[i] < 3.0 * reference;
      if (i > 0 && std::isfinite(reference)) {
        ++steps;
        if (std::abs(vals[i] - reference) < std::abs(vals[i - 1] - reference)) ++toward;
      }
    }
    per_p.push_back({{"p", cfg.p_values[pi]},
                     {"usable_cells", vals.size()},
                     {"flagged_cells", flagged},
                     {"undefined_alpha_cells", undefined},
                     {"all_positive", positive},
                     {"within_factor_3", std::isfinite(reference) ? json(within3) : json(nullptr)},
                     {"trend_fraction", steps > 0 ? json(static_cast<double>(toward) / steps) : json(nullptr)}});
  }
  r.scalars["per_p"] = per_p;
  return r;
}

// ---------------------------------------------------------------- quenched

ExperimentResult run_quenched(const ExperimentConfig& cfg) {
  ExperimentResult r = base_result(cfg);
  r.metadata["acceptance_substitution"] = kSubstitution;
  require(cfg.model->kind == ModelKind::Constant || std::isfinite(cfg.model->essinf),
          "quenched needs a potential bounded below (essinf = -inf given)");
  const ClassificationReport report = classify_for(cfg);
  record_report(r, report);
  require(report.outcome == "classified" || report.outcome == "degenerate",
          "quenched needs a classified model (outcome: " + report.outcome + ")");
  const ScalePair sp = scales_for(cfg, report);

  QuenchedSetup setup;
  setup.d = cfg.d;
  setup.t_grid = cfg.t_grid;
  for (int s = 0; s < cfg.seeds; ++s) setup.seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
  setup.radius_cap = cfg.radius_cap;
  const bool ab = has_label(report, ClassLabel::AlmostBounded);
  setup.chi_tilde = ab ? chi_tilde_closed_form(report.rho, cfg.d) : kNaN;
  r.scalars["chi_tilde"] = setup.chi_tilde;
  const auto rows = quenched_rate_series(*cfg.model, sp, setup);

  Table tab{"quenched", {"seed", "t", "rate", "prediction_term1", "prediction_term2", "prediction", "box_radius", "capped"}, {}};
  int capped = 0;
  for (const auto& row : rows) {
    capped += row.capped;
    tab.add({std::to_string(row.seed), fmt(row.t), fmt(row.rate + cfg.model->offset), fmt(row.prediction_term1),
             fmt(row.prediction_term2), fmt(row.prediction_term1 - row.prediction_term2), fmt(std::int64_t{row.box_radius}),
             fmt(std::int64_t{row.capped})});
  }
  r.series.push_back(std::move(tab));
  r.scalars["capped_rows"] = capped;
  r.scalars["rows"] = rows.size();
  return r;
}

// ---------------------------------------------------------------- variational

ExperimentResult run_variational(const ExperimentConfig& cfg) {
  ExperimentResult r = base_result(cfg);
  const VariationalConfig& v = cfg.variational;
  const int d = cfg.d;
  json params{{"d", d}};
  double closed = kNaN;
  VariationalSolution sol;
  FlowOptions opts;
  opts.max_iter = v.max_iter;
  const auto grid_for = [&](double rho) {
    GridKind kind = d == 1 ? GridKind::Cartesian : GridKind::Radial;
    if (v.grid == "cartesian") kind = GridKind::Cartesian;
    if (v.grid == "radial") kind = GridKind::Radial;
    if (v.L > 0.0) return kind == GridKind::Radial ? Grid::radial(d, v.L, v.h) : Grid::cartesian(d, v.L, v.h);
    return default_grid(rho, d, kind);
  };
  if (v.problem == "chi") {
    params["rho"] = v.rho;
    sol = chi_numeric(v.rho, grid_for(v.rho), opts);
    closed = chi_closed_form(v.rho, d);
    r.scalars["minimizer_sup_distance"] = sup_distance(sol.minimizer, gaussian_g(sol.minimizer.grid, v.rho));
  } else if (v.problem == "chi_tilde") {
    params["rho"] = v.rho;
    const Grid g = grid_for(v.rho);
    const ChiTildeCertificate c = chi_tilde(v.rho, g);
    closed = c.value;
    sol.value = c.minus_lambda;
    sol.minimizer = parabola_psi(g, v.rho);
    for (double& x : sol.minimizer.values) x -= v.rho * std::log(v.rho);
    sol.converged = true;
    r.scalars["certificate_L"] = c.L;
  } else if (v.problem == "chi_discrete") {
    params["delta"] = v.delta;
    const int radius = v.radius > 0 ? v.radius : static_cast<int>(std::ceil(6.0 / std::sqrt(v.delta))) + 5;
    params["radius"] = radius;
    sol = chi_discrete(v.delta, d, radius, opts);
    closed = chi_discrete_asymptote(v.delta, d);
    r.scalars["upper_bound_2d"] = 2.0 * d;
  } else {
    params["rho"] = v.rho;
    params["gamma"] = v.gamma;
    GridKind kind = v.gamma == 0.0 ? GridKind::Radial : (d == 1 ? GridKind::Cartesian : GridKind::Radial);
    if (v.grid == "cartesian") kind = GridKind::Cartesian;
    if (v.grid == "radial") kind = GridKind::Radial;
    const Grid g = v.L > 0.0 ? (kind == GridKind::Radial ? Grid::radial(d, v.L, v.h) : Grid::cartesian(d, v.L, v.h))
                             : default_grid(v.rho, d, kind);
    sol = chi_gamma(v.rho, v.gamma, g, opts);
    closed = v.gamma == 0.0 ? chi_gamma_zero_continuum(v.rho, d) : chi_gamma_gaussian(v.rho, v.gamma, d);
    r.scalars["chi_rho"] = chi_closed_form(v.rho, d);
  }
  r.scalars["problem"] = v.problem;
  r.scalars["params"] = params;
  r.scalars["value"] = sol.value;
  r.scalars["closed_form"] = closed;
  r.scalars["gap"] = sol.value - closed;
  r.scalars["iterations"] = sol.iterations;
  r.scalars["gradient_norm"] = sol.gradient_norm;
  r.metadata["grid"] = {{"kind", sol.minimizer.grid.kind == GridKind::Radial ? "radial" : "cartesian"},
                        {"d", sol.minimizer.grid.d},
                        {"h", sol.minimizer.grid.h},
                        {"n", sol.minimizer.grid.n}};
  if (v.write_minimizer) {
    Table tab{"minimizer", {}, {}};
    std::ostringstream os;
    write_csv(os, sol.minimizer, v.problem == "chi_tilde" ? "psi" : "g");
    std::istringstream is(os.str());
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string c;
      while (std::getline(ls, c, ',')) cells.push_back(c);
      if (header) {
        tab.columns = cells;
        header = false;
      } else {
        tab.add(std::move(cells));
      }
    }
    r.series.push_back(std::move(tab));
  }
  return r;
}

// ---------------------------------------------------------------- selfint

ExperimentResult run_selfint(const ExperimentConfig& cfg) {
  ExperimentResult r = base_result(cfg);
  const int n = replicas_or(cfg, 100'000);
  Table tab{"selfint",
            {"t", "q", "mean_lq", "lq_se", "exact_second_moment", "mc_second_moment", "se", "z", "truncation_radius"},
            {}};
  double worst_z = 0.0;
  std::uint64_t cell = 0;
  for (double t : cfg.t_grid) {
    const std::uint64_t s = derive_seed(cfg.seed, cell++);
    const std::size_t nq = cfg.q_values.size();
    std::vector<double> sq(static_cast<std::size_t>(n)), norms(static_cast<std::size_t>(n) * nq);
    parallel_for(n, [&](std::int64_t i) {
      const LocalTimes lt = simulate_walk(t, cfg.d, derive_seed(s, static_cast<std::uint64_t>(i)));
      sq[static_cast<std::size_t>(i)] = sum_of_squares(lt);
      for (std::size_t k = 0; k < nq; ++k) norms[k * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = lq_norm(lt, cfg.q_values[k]);
    });
    const double m = mean_of(sq), se = se_of(sq, m);
    const SecondMoment exact = self_intersection_second_moment(t, cfg.d);
    const double z = (m - exact.value) / se;
    worst_z = std::max(worst_z, std::abs(z));
    for (std::size_t k = 0; k < nq; ++k) {
      const std::vector<double> v(norms.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(n)),
                                  norms.begin() + static_cast<std::ptrdiff_t>((k + 1) * static_cast<std::size_t>(n)));
      const double nm = mean_of(v);
      tab.add({fmt(t), fmt(cfg.q_values[k]), fmt(nm), fmt(se_of(v, nm)), fmt(exact.value), fmt(m), fmt(se), fmt(z),
               fmt(std::int64_t{exact.truncation_radius})});
    }
  }
  r.series.push_back(std::move(tab));
  r.scalars["max_abs_z"] = worst_z;
  r.scalars["replicas"] = n;
  return r;
}

// ---------------------------------------------------------------- heuristic profile

ExperimentResult run_heuristic_profile(const ExperimentConfig& cfg) {
  ExperimentResult r = base_result(cfg);
  r.metadata["acceptance_substitution"] = kSubstitution;
  const ClassificationReport report = classify_for(cfg);
  record_report(r, report);
  require(has_label(report, ClassLabel::AlmostBounded) || report.outcome == "degenerate",
          "heuristic_profile needs an AlmostBounded model (got " +
              (report.label ? label_name(*report.label) : report.outcome) + ")");
  const ScalePair sp = scales_for(cfg, report);
  const HFunction H = cumulant_function(*cfg.model);
  const double rho = report.outcome == "degenerate" ? 1.0 : report.rho;
  const int n = replicas_or(cfg, 1000);
  const int d = cfg.d;
  const int top = std::max(1, static_cast<int>(std::floor(cfg.quantile * n)));

  Table tab{"heuristic_profile",
            {"t", "alpha", "box_radius", "window", "conditioned", "solution_l2_to_g", "solution_l2_to_g_all",
             "potential_l2_to_psi", "potential_l2_to_psi_all", "potential_flatness", "solution_norm"},
            {}};
  Table prof{"heuristic_profile_shapes", {"t", "x0", "x1", "x2", "g_cond", "g_all", "g_rho", "psi_cond", "psi_all", "psi_rho"}, {}};
  bool insufficient = top < 10;
  std::uint64_t cell = 0;
  for (double t : cfg.t_grid) {
    const double alpha = sp.alpha(t);
    const double s = t * std::pow(alpha, -d);
    const double shift = H(s) / s;
    const int W = std::max(2, static_cast<int>(std::ceil(3.0 * alpha / std::sqrt(rho))));
    const int R = cfg.radius > 0 ? cfg.radius : 2 * W;
    const Box box(d, R), window(d, W);
    const std::size_t m = window.size();
    const std::uint64_t seed_t = derive_seed(cfg.seed, cell++);

    std::vector<double> logU(static_cast<std::size_t>(n));
    std::vector<double> vwin(static_cast<std::size_t>(n) * m), xwin(static_cast<std::size_t>(n) * m);
    std::vector<char> inside(static_cast<std::size_t>(n) * m);
    parallel_for(n, [&](std::int64_t i) {
      const LatticeField xi = sample_field(*cfg.model, box, derive_seed(seed_t, static_cast<std::uint64_t>(i)));
      const PamSolution sol = solve_pam(xi, t, InitialCondition::Delta0);
      logU[static_cast<std::size_t>(i)] = sol.log_total_mass;
      std::size_t arg = 0;
      double norm2 = 0.0;
      for (std::size_t k = 0; k < box.size(); ++k) {
        if (sol.v[k] > sol.v[arg]) arg = k;
        norm2 += sol.v[k] * sol.v[k];
      }
      const Site c = box.site(arg);
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t k = 0; k < m; ++k) {
        const Site z = window.site(k);
        Site y{};
        for (int a = 0; a < d; ++a) y[static_cast<std::size_t>(a)] = c[static_cast<std::size_t>(a)] + z[static_cast<std::size_t>(a)];
        const std::size_t o = static_cast<std::size_t>(i) * m + k;
        if (box.contains(y)) {
          inside[o] = 1;
          vwin[o] = sol.v.at(y) * inv;
          xwin[o] = alpha * alpha * (xi.at(y) - shift);
        }
      }
    });

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return logU[a] > logU[b]; });

    const auto average = [&](std::size_t count, std::vector<double>& g, std::vector<double>& psi) {
      g.assign(m, 0.0);
      psi.assign(m, 0.0);
      std::vector<int> hits(m, 0);
      for (std::size_t q = 0; q < count; ++q) {
        const std::size_t i = order[q];
        for (std::size_t k = 0; k < m; ++k) {
          const std::size_t o = i * m + k;
          if (!inside[o]) continue;
          g[k] += vwin[o];
          psi[k] += xwin[o];
          ++hits[k];
        }
      }
      double n2 = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        g[k] /= static_cast<double>(count);
        psi[k] = hits[k] > 0 ? psi[k] / hits[k] : kNaN;
        n2 += g[k] * g[k];
      }
      // Rescaled profile alpha^{d/2} v(x alpha), unit L^2 norm in x.
      const double scale = std::pow(alpha, 0.5 * d) / std::sqrt(n2);
      for (double& x : g) x *= scale;
    };
    std::vector<double> gc, pc, ga, pa;
    average(static_cast<std::size_t>(top), gc, pc);
    average(static_cast<std::size_t>(n), ga, pa);

    const double amp = std::pow(rho / std::numbers::pi, 0.25 * d);
    const double cpsi = rho + rho * 0.5 * d * std::log(rho / std::numbers::pi);
    const double cell_vol = std::pow(alpha, -d);
    double dgc = 0, dga = 0, dpc = 0, dpa = 0, norm = 0, flat_mean = 0;
    int core = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const Site z = window.site(k);
      double x2 = 0.0;
      for (int a = 0; a < d; ++a) x2 += (z[static_cast<std::size_t>(a)] / alpha) * (z[static_cast<std::size_t>(a)] / alpha);
      const double gr = amp * std::exp(-0.5 * rho * x2);
      const double pr = cpsi - rho * rho * x2;
      dgc += cell_vol * (gc[k] - gr) * (gc[k] - gr);
      dga += cell_vol * (ga[k] - gr) * (ga[k] - gr);
      norm += cell_vol * gc[k] * gc[k];
      if (rho * x2 <= 1.0) {
        dpc += cell_vol * (pc[k] - pr) * (pc[k] - pr);
        dpa += cell_vol * (pa[k] - pr) * (pa[k] - pr);
        flat_mean += pc[k];
        ++core;
      }
      prof.add({fmt(t), fmt(z[0] / alpha), fmt(d > 1 ? z[1] / alpha : 0.0), fmt(d > 2 ? z[2] / alpha : 0.0), fmt(gc[k]),
                fmt(ga[k]), fmt(gr), fmt(pc[k]), fmt(pa[k]), fmt(pr)});
    }
    flat_mean /= core;
    double flat = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const Site z = window.site(k);
      double x2 = 0.0;
      for (int a = 0; a < d; ++a) x2 += (z[static_cast<std::size_t>(a)] / alpha) * (z[static_cast<std::size_t>(a)] / alpha);
      if (rho * x2 <= 1.0) flat += cell_vol * (pc[k] - flat_mean) * (pc[k] - flat_mean);
    }
    tab.add({fmt(t), fmt(alpha), fmt(std::int64_t{R}), fmt(std::int64_t{W}), fmt(std::int64_t{top}), fmt(std::sqrt(dgc)),
             fmt(std::sqrt(dga)), fmt(std::sqrt(dpc)), fmt(std::sqrt(dpa)), fmt(std::sqrt(flat)), fmt(std::sqrt(norm))});
  }
  r.series.push_back(std::move(tab));
  r.series.push_back(std::move(prof));
  r.scalars["conditioned_samples"] = top;
  r.scalars["insufficient_conditioning"] = insufficient;
  r.scalars["rho"] = rho;
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::Classify:
      return run_classify(cfg);
    case Experiment::Scales:
      return run_scales(cfg);
    case Experiment::Moments:
      return run_moments(cfg);
    case Experiment::Quenched:
      return run_quenched(cfg);
    case Experiment::Variational:
      return run_variational(cfg);
    case Experiment::Selfint:
      return run_selfint(cfg);
    case Experiment::HeuristicProfile:
      return run_heuristic_profile(cfg);
  }
  throw ValidationError("unknown experiment");
}

// ---------------------------------------------------------------- emit

std::vector<std::filesystem::path> emit(const ExperimentResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto write_file = [](const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot open " + tmp.string() + " for writing");
      out << content;
      out.flush();
      if (!out) throw Error("write failed for " + tmp.string());
    }
    std::error_code e;
    fs::rename(tmp, path, e);
    if (e) throw Error("cannot move " + tmp.string() + " into place: " + e.message());
  };

  std::vector<fs::path> written;
  fs::remove(dir / "summary.json", ec);
  json files = json::array();
  for (const Table& t : result.series) {
    std::string csv;
    for (std::size_t c = 0; c < t.columns.size(); ++c) csv += (c ? "," : "") + t.columns[c];
    csv += '\n';
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) csv += (c ? "," : "") + row[c];
      csv += '\n';
    }
    const fs::path p = dir / (t.name + ".csv");
    write_file(p, csv);
    written.push_back(p);
    files.push_back(t.name + ".csv");
  }
  json summary{{"scalars", result.scalars}, {"metadata", result.metadata}, {"series", files}};
  const fs::path sp = dir / "summary.json";
  write_file(sp, summary.dump(2) + "\n");
  written.push_back(sp);
  return written;
}

}  // namespace pamlab
