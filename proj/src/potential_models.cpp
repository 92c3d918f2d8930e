#include "pamlab/potential_models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/minima.hpp>

#include "pamlab/error.hpp"
#include "pamlab/kernels.hpp"
#include "pamlab/numerics.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace

PotentialModel PotentialModel::double_exponential(double rho) { return {ModelKind::DoubleExponential, rho}; }
PotentialModel PotentialModel::constant(double c) { return {ModelKind::Constant, c}; }
PotentialModel PotentialModel::tail_power(double a) { return {ModelKind::TailPower, a}; }
PotentialModel PotentialModel::tail_inverse_power(double b) { return {ModelKind::TailInversePower, b}; }
PotentialModel PotentialModel::tail_log(double gamma) { return {ModelKind::TailLog, gamma}; }

PotentialModel PotentialModel::catalog(const std::string& name) {
  if (name == "single_peak") return tail_power(0.5);
  if (name == "double_exponential") return double_exponential(1.0);
  if (name == "almost_bounded") return tail_power(2.0);
  if (name == "bounded_above") return tail_log(0.5);
  if (name == "bounded_inverse_power") return tail_inverse_power(1.0);
  throw ValidationError("unknown catalog model '" + name + "'");
}

void PotentialModel::validate() const {
  if (!std::isfinite(param)) throw ValidationError("model parameter must be finite");
  if (!std::isfinite(offset)) throw ValidationError("model offset must be finite");
  switch (kind) {
    case ModelKind::DoubleExponential:
      if (!(param > 0.0)) throw ValidationError("double_exponential: rho must be positive");
      break;
    case ModelKind::Constant:
      break;
    case ModelKind::TailPower:
      if (!(param > 0.0)) throw ValidationError("tail_power: exponent a must be positive");
      break;
    case ModelKind::TailInversePower:
      if (!(param > 0.0)) throw ValidationError("tail_inverse_power: exponent b must be positive");
      break;
    case ModelKind::TailLog:
      if (!(param > 0.0 && param < 1.0)) throw ValidationError("tail_log: gamma must lie in (0, 1)");
      break;
  }
  if (std::isnan(essinf) || essinf == kInf) throw ValidationError("essinf must be finite or -inf");
  if (kind != ModelKind::Constant && std::isfinite(essinf) && !(essinf < esssup())) {
    throw ValidationError("essinf must lie below esssup");
  }
}

bool PotentialModel::bounded_above() const {
  return kind == ModelKind::Constant || kind == ModelKind::TailInversePower || kind == ModelKind::TailLog;
}

double PotentialModel::esssup() const {
  switch (kind) {
    case ModelKind::Constant:
      return param;
    case ModelKind::TailInversePower:
    case ModelKind::TailLog:
      return 0.0;
    default:
      return kInf;
  }
}

bool PotentialModel::is_tail_family() const {
  return kind == ModelKind::TailPower || kind == ModelKind::TailInversePower || kind == ModelKind::TailLog;
}

double PotentialModel::f(double r) const {
  switch (kind) {
    case ModelKind::DoubleExponential:
      return r / param;
    case ModelKind::TailPower:
      return sgn(r) * std::pow(std::abs(r), param);
    case ModelKind::TailInversePower: {
      if (r >= 0.0) return kInf;
      const double u = -r;
      return std::pow(u, -param) - std::pow(u, param);
    }
    case ModelKind::TailLog:
      if (r >= 0.0) return kInf;
      return -(param / (1.0 - param)) * std::log(-r);
    case ModelKind::Constant:
      break;
  }
  throw ValidationError("constant model has no tail function");
}

double PotentialModel::f_prime(double r) const {
  switch (kind) {
    case ModelKind::DoubleExponential:
      return 1.0 / param;
    case ModelKind::TailPower:
      return param * std::pow(std::abs(r), param - 1.0);
    case ModelKind::TailInversePower: {
      const double u = -r;
      return param * (std::pow(u, -param - 1.0) + std::pow(u, param - 1.0));
    }
    case ModelKind::TailLog:
      return (param / (1.0 - param)) / (-r);
    case ModelKind::Constant:
      break;
  }
  throw ValidationError("constant model has no tail function");
}

double PotentialModel::f_inverse(double y) const {
  switch (kind) {
    case ModelKind::DoubleExponential:
      return param * y;
    case ModelKind::TailPower:
      return sgn(y) * std::pow(std::abs(y), 1.0 / param);
    case ModelKind::TailInversePower: {
      // s - 1/s = y with s = u^{-b}
      const double s = y >= 0.0 ? 0.5 * (y + std::hypot(y, 2.0)) : 2.0 / (std::hypot(y, 2.0) - y);
      return -std::pow(s, -1.0 / param);
    }
    case ModelKind::TailLog:
      return -std::exp(-y * (1.0 - param) / param);
    case ModelKind::Constant:
      return param;
  }
  return param;
}

double PotentialModel::survival(double r) const {
  if (kind == ModelKind::Constant) return r < param ? 1.0 : 0.0;
  if (r < essinf) return 1.0;
  if (r >= esssup()) return 0.0;
  return std::exp(-std::exp(f(r)));
}

double PotentialModel::from_exponential(double e) const {
  if (kind == ModelKind::Constant) return param;
  return std::max(essinf, f_inverse(std::log(e)));
}

// ---------------------------------------------------------------- H

namespace {

// log-integrand of <e^{t xi}> in y = log E, E ~ Exp(1).
struct Phase {
  const PotentialModel& m;
  double t;
  double xi(double y) const { return std::max(m.essinf, m.f_inverse(y)); }
  double operator()(double y) const { return -std::exp(y) + y + t * xi(y); }

  // xi(y0 + d) - xi(y0) without forming y0 + d, whose rounding is
  // amplified by t near the peak.
  double xi_increment(double y0, double d) const {
    const double lo = std::isfinite(m.essinf) ? m.f(m.essinf) : -kInf;
    if (y0 > lo && y0 + d > lo) {
      switch (m.kind) {
        case ModelKind::DoubleExponential:
          return m.param * d;
        case ModelKind::TailPower:
          if (y0 > 0.0 && y0 + d > 0.0) return std::pow(y0, 1.0 / m.param) * std::expm1(std::log1p(d / y0) / m.param);
          break;
        case ModelKind::TailLog: {
          const double c = (1.0 - m.param) / m.param;
          return -std::exp(-c * y0) * std::expm1(-c * d);
        }
        case ModelKind::TailInversePower: {
          // xi = -s^{-1/b} with s - 1/s = y, so s1 - s0 = d / (1 + 1/(s0 s1)).
          const double s0 = 1.0 / std::pow(-m.f_inverse(y0), m.param);
          const double s1 = 1.0 / std::pow(-m.f_inverse(y0 + d), m.param);
          const double ds = d / (1.0 + 1.0 / (s0 * s1));
          return -std::pow(s0, -1.0 / m.param) * std::expm1(-std::log1p(ds / s0) / m.param);
        }
        default:
          break;
      }
    }
    return xi(y0 + d) - xi(y0);
  }

  // d/dy of the phase; xi' = 1/f'(xi) above the essinf kink.
  double derivative(double y) const {
    const double x = m.f_inverse(y);
    const double dxi = x > m.essinf ? 1.0 / m.f_prime(x) : 0.0;
    return -std::exp(y) + 1.0 + t * dxi;
  }

  double increment(double y0, double d) const { return -std::exp(y0) * std::expm1(d) + d + t * xi_increment(y0, d); }
};

double quadrature_H(const PotentialModel& model, double t) {
  const Phase phi{model, t};
  constexpr double kLow = -60.0;
  constexpr double kDrop = 800.0;

  // Coarse scan for the peak, then Brent refinement.
  constexpr double step = 0.25;
  double best_y = kLow;
  double best = phi(kLow);
  double y = kLow;
  double hi = kLow;
  for (;;) {
    y += step;
    const double v = phi(y);
    if (v > best) {
      best = v;
      best_y = y;
    }
    if (y > 2.0 && v < best - kDrop) {
      hi = y;
      break;
    }
    if (y > 1e4) throw NumericalError("cumulant_H: integrand does not decay");
  }
  // The peak is a root of phi' (resolved to full precision, unlike a
  // minimizer of phi); a peak sitting on the essinf kink falls back to Brent.
  const double a = std::max(kLow, best_y - step);
  const double b = std::min(hi, best_y + step);
  double y_star;
  const double da = phi.derivative(a);
  const double db = phi.derivative(b);
  if (std::isfinite(da) && std::isfinite(db) && da > 0.0 && db < 0.0) {
    y_star = find_root([&phi](double x) { return phi.derivative(x); }, a, b);
  } else {
    const auto neg = [&phi](double x) { return -phi(x); };
    y_star = boost::math::tools::brent_find_minima(neg, a, b, 52).first;
  }
  const double peak = phi(y_star);

  std::vector<double> cuts{kLow, hi};
  const double w = std::min(1.0, std::exp(-0.5 * y_star));
  for (double k : {1.0, 3.0, 10.0, 30.0, 100.0}) {
    cuts.push_back(y_star - k * w);
    cuts.push_back(y_star + k * w);
  }
  cuts.push_back(y_star);
  if (std::isfinite(model.essinf)) cuts.push_back(model.f(model.essinf));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double c) { return !(c >= kLow && c <= hi); }), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  // The increment cancels terms of size e^{y*}|d|; their rounding is the
  // noise floor of the integrand, so do not ask for more than that.
  const double rel = std::max(1e-12, 400.0 * std::numeric_limits<double>::epsilon() * std::exp(y_star) * w);
  const auto integrand = [&phi, y_star](double d) { return std::exp(phi.increment(y_star, d)); };
  std::vector<double> pieces;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const auto r = integrate(integrand, cuts[i] - y_star, cuts[i + 1] - y_star, rel, 0.1 * rel * w);
    pieces.push_back(r.value);
    err += r.error;
  }
  const double total = pairwise_sum(pieces);
  if (!(total > 0.0)) {
    std::ostringstream msg;
    msg << "cumulant_H: quadrature lost the integrand at t=" << t << " (error bound " << err << ")";
    throw NumericalError(msg.str());
  }
  return peak + std::log(total);
}

}  // namespace

double cumulant_H(const PotentialModel& model, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("cumulant_H: t must be finite and nonnegative");
  if (t == 0.0) return 0.0;
  if (model.kind == ModelKind::Constant) return model.param * t;
  return quadrature_H(model, t);
}

HFunction cumulant_function(const PotentialModel& model) {
  model.validate();
  if (model.kind == ModelKind::Constant) {
    const double c = model.param;
    return [c](double t) { return c * t; };
  }
  if (model.kind == ModelKind::DoubleExponential && !std::isfinite(model.essinf)) {
    const double rho = model.param;
    return [rho](double t) { return std::lgamma(1.0 + rho * t); };
  }
  return [model](double t) { return cumulant_H(model, t); };
}

HFunction fast_cumulant(const PotentialModel& model, double t_max) {
  model.validate();
  if (model.kind == ModelKind::Constant ||
      (model.kind == ModelKind::DoubleExponential && !std::isfinite(model.essinf))) {
    return cumulant_function(model);
  }
  if (!(t_max > 0.0)) throw ValidationError("fast_cumulant: t_max must be positive");
  constexpr int kNodes = 4097;
  const double h = t_max / (kNodes - 1);
  std::vector<double> values(kNodes);
  for (int i = 0; i < kNodes; ++i) values[static_cast<std::size_t>(i)] = cumulant_H(model, h * i);
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      values.begin(), values.end(), 0.0, h);
  return [spline, t_max, model](double t) {
    if (t <= t_max) return (*spline)(t);
    return cumulant_H(model, t);
  };
}

// ---------------------------------------------------------------- Laplace point

double laplace_point_r(const PotentialModel& model, double t) {
  model.validate();
  if (!(t > 0.0)) throw ValidationError("laplace_point_r: t must be positive");
  const double log_t = std::log(t);
  switch (model.kind) {
    case ModelKind::Constant:
      throw ValidationError("laplace_point_r: constant model has no tail function");
    case ModelKind::DoubleExponential:
      return model.param * std::log(model.param * t);
    default:
      break;
  }
  std::ostringstream trace;
  if (model.kind == ModelKind::TailPower) {
    const double a = model.param;
    const auto g = [&](double r) { return std::log(model.f_prime(r)) + model.f(r) - log_t; };
    double lo = a < 1.0 ? std::pow((1.0 - a) / a, 1.0 / a) : 1e-300;
    double hi = std::max(1.0, 2.0 * lo);
    for (int i = 0; i < 200 && g(hi) <= 0.0; ++i) hi *= 2.0;
    if (!(g(lo) < 0.0) || !(g(hi) > 0.0)) {
      trace << "laplace_point_r: no sign change on r in [" << lo << ", " << hi << "] at t=" << t;
      throw NumericalError(trace.str());
    }
    return find_root(g, lo, hi);
  }
  // Bounded kinds: work in u = -r > 0; g decreases from +inf to -inf.
  const auto g = [&](double u) { return std::log(model.f_prime(-u)) + model.f(-u) - log_t; };
  double lo = 1.0;
  double hi = 1.0;
  for (int i = 0; i < 2000 && g(lo) <= 0.0; ++i) lo *= 0.5;
  for (int i = 0; i < 2000 && g(hi) >= 0.0; ++i) hi *= 2.0;
  if (!(g(lo) > 0.0) || !(g(hi) < 0.0)) {
    trace << "laplace_point_r: no sign change on r in [" << -hi << ", " << -lo << "] at t=" << t;
    throw NumericalError(trace.str());
  }
  return -find_root(g, lo, hi);
}

double cumulant_H_laplace(const PotentialModel& model, double t) {
  const double r = laplace_point_r(model, t);
  return t * r - std::exp(model.f(r));
}

// ---------------------------------------------------------------- sampling

LatticeField sample_field(const PotentialModel& model, const Box& box, std::uint64_t seed, bool require_finite_essinf) {
  model.validate();
  if (require_finite_essinf && model.kind != ModelKind::Constant && !std::isfinite(model.essinf)) {
    throw ValidationError("this experiment requires a potential with finite essinf");
  }
  auto values = kernels::omp::map_indexed(box.size(), [&](std::size_t i) {
    const double u = bits_to_open_unit(derive_seed(seed, i));
    return model.from_exponential(-std::log(u));
  });
  return LatticeField(box, std::move(values));
}

// ---------------------------------------------------------------- JSON

std::string kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::DoubleExponential:
      return "double_exponential";
    case ModelKind::Constant:
      return "constant";
    case ModelKind::TailPower:
      return "tail_power";
    case ModelKind::TailInversePower:
      return "tail_inverse_power";
    case ModelKind::TailLog:
      return "tail_log";
  }
  return "unknown";
}

namespace {

const char* param_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::DoubleExponential:
      return "rho";
    case ModelKind::Constant:
      return "c";
    case ModelKind::TailPower:
      return "a";
    case ModelKind::TailInversePower:
      return "b";
    case ModelKind::TailLog:
      return "gamma";
  }
  return "";
}

}  // namespace

nlohmann::json to_json(const PotentialModel& model) {
  nlohmann::json j;
  j["kind"] = kind_name(model.kind);
  j["params"] = {{param_name(model.kind), model.param}};
  j["essinf"] = std::isfinite(model.essinf) ? nlohmann::json(model.essinf) : nlohmann::json(nullptr);
  j["offset"] = model.offset;
  return j;
}

PotentialModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("model spec must be a JSON object");
  if (j.contains("catalog")) {
    PotentialModel m = PotentialModel::catalog(j.at("catalog").get<std::string>());
    if (j.contains("offset")) m.offset = j.at("offset").get<double>();
    return m;
  }
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ValidationError("model spec needs a string 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  PotentialModel m;
  bool found = false;
  for (ModelKind k : {ModelKind::DoubleExponential, ModelKind::Constant, ModelKind::TailPower,
                      ModelKind::TailInversePower, ModelKind::TailLog}) {
    if (kind_name(k) == kind) {
      m.kind = k;
      found = true;
    }
  }
  if (!found) throw ValidationError("unknown model kind '" + kind + "'");
  const char* pname = param_name(m.kind);
  if (!j.contains("params") || !j.at("params").contains(pname) || !j.at("params").at(pname).is_number()) {
    throw ValidationError(std::string("model '") + kind + "' needs numeric params." + pname);
  }
  m.param = j.at("params").at(pname).get<double>();
  if (j.contains("essinf") && !j.at("essinf").is_null()) {
    if (!j.at("essinf").is_number()) throw ValidationError("essinf must be a number or null");
    m.essinf = j.at("essinf").get<double>();
  }
  if (j.contains("offset")) {
    if (!j.at("offset").is_number()) throw ValidationError("offset must be a number");
    m.offset = j.at("offset").get<double>();
  }
  m.validate();
  return m;
}

}  // namespace pamlab
