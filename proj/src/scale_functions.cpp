#include "pamlab/scale_functions.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "pamlab/error.hpp"
#include "pamlab/numerics.hpp"

namespace pamlab {

namespace {

void check_d(int d) {
  if (d < 1 || d > 3) throw ValidationError("dimension must be 1, 2 or 3");
}

}  // namespace

ScaleSolve solve_alpha(const HFunction& kappa, int d, double t) {
  check_d(d);
  if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("solve_alpha: t must be positive");
  // In x = log(s/t): kappa(s)/s * (t/s)^{2/d} - 1.
  const auto g = [&](double x) {
    const double s = t * std::exp(x);
    return kappa(s) / s * std::exp(-2.0 * x / d) - 1.0;
  };
  std::vector<double> grid;
  for (int i = -24; i <= 24; ++i) grid.push_back(std::log(10.0) * i / 4.0);
  const auto brackets = scan_sign_changes(g, grid);
  if (brackets.empty()) {
    std::ostringstream msg;
    msg << "solve_alpha: no root of kappa(s)/s = (s/t)^(2/d) for s in [1e-6 t, 1e6 t] at t=" << t << "; scan:";
    for (std::size_t i = 0; i < grid.size(); i += 8) msg << " s/t=" << std::exp(grid[i]) << ":" << g(grid[i]);
    throw NumericalError(msg.str());
  }
  ScaleSolve out;
  for (const auto& [lo, hi] : brackets) {
    const double x = lo == hi ? lo : find_root(g, lo, hi);
    out.roots.push_back(t * std::exp(x));
  }
  const double x = std::log(out.roots.back() / t);
  out.value = std::exp(-x / d);
  out.residual = std::abs(g(x));
  return out;
}

double alpha_of_t(const HFunction& kappa, int d, double t) { return solve_alpha(kappa, d, t).value; }

ScaleSolve solve_beta(const ScaleFunction& alpha, int d, double t) {
  check_d(d);
  if (!(t > 1.0) || !std::isfinite(t)) throw ValidationError("solve_beta: t must exceed 1");
  const double target = d * std::log(t);
  // In x = log b: log b - 2 log alpha(b) - log(d log t).
  const auto g = [&](double x) {
    const double a = alpha(std::exp(x));
    return x - 2.0 * std::log(a) - std::log(target);
  };
  // alpha may be undefined at small arguments (kappa not yet positive);
  // such points are stepped over while looking for a bracket.
  const auto g_safe = [&](double x) -> std::optional<double> {
    try {
      return g(x);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };
  const double x0 = std::log(target);
  const double step = std::log(2.0);
  const double limit = std::log(1e6);
  double lo = x0;
  double hi = x0;
  std::optional<double> ghi = g_safe(hi);
  std::optional<double> glo = ghi;
  bool found = false;
  if (ghi && *ghi >= 0.0) {
    while (glo && *glo > 0.0 && lo > x0 - limit) {
      hi = lo;
      glo = g_safe(lo -= step);
    }
    found = glo && *glo <= 0.0;
  } else {
    while (!(ghi && *ghi >= 0.0) && hi < x0 + limit) {
      if (ghi) lo = hi;
      glo = ghi;
      ghi = g_safe(hi += step);
    }
    found = glo && ghi && *ghi >= 0.0;
    if (!found && ghi && *ghi >= 0.0) {
      // The lower end fell where alpha is undefined: walk back from hi in
      // finer steps until g is defined and negative.
      const double fine = step / 32.0;
      for (double x = hi - fine; x > hi - step; x -= fine) {
        const auto gx = g_safe(x);
        if (!gx) break;
        if (*gx <= 0.0) {
          lo = x;
          glo = gx;
          found = true;
          break;
        }
        hi = x;
        ghi = gx;
      }
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "solve_beta: no root of b/alpha(b)^2 = d log t for b in [" << std::exp(lo) << ", " << std::exp(hi)
        << "] at t=" << t << " (alpha undefined or no sign change)";
    throw NumericalError(msg.str());
  }
  const double x = find_root(g, lo, hi);
  ScaleSolve out;
  out.value = std::exp(x);
  out.roots.push_back(out.value);
  const double a = alpha(out.value);
  out.residual = std::abs(out.value / (a * a) - target) / target;
  return out;
}

double beta_of_t(const ScaleFunction& alpha, int d, double t) { return solve_beta(alpha, d, t).value; }

double leading_term(const HFunction& H, const ScaleFunction& alpha, int d, double p, double t) {
  check_d(d);
  if (!(p > 0.0) || !(t > 0.0)) throw ValidationError("leading_term: p and t must be positive");
  const double s = p * t * std::pow(alpha(p * t), -d);
  return H(s) / s;
}

ScalePair make_scale_pair(const HFunction& kappa, int d, bool kappa_star_infinite) {
  check_d(d);
  ScalePair pair;
  pair.d = d;
  pair.kappa = kappa;
  pair.alpha_constant = kappa_star_infinite;
  if (kappa_star_infinite) {
    pair.alpha = [](double) { return 1.0; };
    pair.beta = [d](double t) { return d * std::log(t); };
  } else {
    pair.alpha = [kappa, d](double t) { return alpha_of_t(kappa, d, t); };
    const ScaleFunction a = pair.alpha;
    pair.beta = [a, d](double t) { return beta_of_t(a, d, t); };
  }
  return pair;
}

ScalePair make_scale_pair(const PotentialModel& model, const ClassificationReport& report, int d) {
  if (!report.label) throw ValidationError("scale functions need a classified model (outcome: " + report.outcome + ")");
  const bool single_peak = *report.label == ClassLabel::SinglePeak;
  return make_scale_pair(make_kappa(cumulant_function(model), report.gamma_class), d, single_peak);
}

}  // namespace pamlab
