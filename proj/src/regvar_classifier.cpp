#include "pamlab/regvar_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "pamlab/error.hpp"
#include "pamlab/numerics.hpp"

namespace pamlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kYGrid[] = {0.5, 2.0, 4.0};

double checked(const HFunction& H, double t) {
  const double v = H(t);
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "H is not finite at t=" << t;
    throw NumericalError(msg.str());
  }
  return v;
}

std::vector<double> top_decade(std::span<const double> t_grid) {
  const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  std::vector<double> out;
  for (double t : t_grid) {
    if (t >= t_max / 10.0 * (1.0 - 1e-12)) out.push_back(t);
  }
  return out;
}

// int_0^u H(e^v) dv on nodes u = k*h, extended on demand.
class LogIntegralCache {
 public:
  explicit LogIntegralCache(HFunction H) : H_(std::move(H)) {}

  double integral(double u) {
    const auto k = static_cast<long>(std::floor(u / kStep));
    const double base = node(k);
    return base + cell(k * kStep, u);
  }

 private:
  static constexpr double kStep = 0.25;

  double cell(double a, double b) const {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss<double, 10>::integrate([this](double v) { return H_(std::exp(v)); }, a, b);
  }

  double node(long k) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (k >= 0) {
      while (static_cast<long>(up_.size()) <= k) {
        const long j = static_cast<long>(up_.size());
        up_.push_back(up_.back() + cell((j - 1) * kStep, j * kStep));
      }
      return up_[static_cast<std::size_t>(k)];
    }
    while (static_cast<long>(down_.size()) <= -k) {
      const long j = static_cast<long>(down_.size());
      down_.push_back(down_.back() - cell(-j * kStep, -(j - 1) * kStep));
    }
    return down_[static_cast<std::size_t>(-k)];
  }

  HFunction H_;
  std::mutex mutex_;
  std::vector<double> up_{0.0};
  std::vector<double> down_{0.0};
};

}  // namespace

std::string label_name(ClassLabel label) {
  switch (label) {
    case ClassLabel::SinglePeak:
      return "SinglePeak";
    case ClassLabel::DoubleExponential:
      return "DoubleExponential";
    case ClassLabel::AlmostBounded:
      return "AlmostBounded";
    case ClassLabel::BoundedAbove:
      return "BoundedAbove";
  }
  return "unknown";
}

GammaEstimate estimate_gamma(const HFunction& H, std::span<const double> t_grid) {
  if (t_grid.size() < 8) throw ValidationError("estimate_gamma: need at least 8 grid points");
  const double span = t_grid.back() / t_grid.front();
  if (!(t_grid.front() > std::exp(1.0)) || !(span >= 1e4 * (1.0 - 1e-12))) {
    throw ValidationError("estimate_gamma: grid must start above e and span at least four decades");
  }
  std::vector<double> t(t_grid.begin() + static_cast<std::ptrdiff_t>(t_grid.size() / 2), t_grid.end());
  std::vector<double> f;
  for (double ti : t) {
    const double h = std::abs(checked(H, ti));
    if (!(h > 0.0)) {
      std::ostringstream msg;
      msg << "estimate_gamma: H vanishes at t=" << ti;
      throw NumericalError(msg.str());
    }
    f.push_back(h);
  }
  const auto fit = fit_regular_variation(t, f);
  return {fit.index, fit.log_log_coeff, fit.rms_residual};
}

double hat_H_shape(double gamma, double y) {
  if (std::abs(gamma - 1.0) < 1e-12) return y * std::log(y);
  return (y - std::pow(y, gamma)) / (1.0 - gamma);
}

HFunction make_kappa(const HFunction& H, double gamma) {
  if (std::abs(gamma - 1.0) > 1e-12) {
    return [H](double t) { return std::abs(H(t)); };
  }
  auto cache = std::make_shared<LogIntegralCache>(H);
  return [H, cache](double t) {
    if (!(t > 0.0)) throw ValidationError("kappa: t must be positive");
    return H(t) - cache->integral(std::log(t));
  };
}

double fit_rho_at(const HFunction& H, const HFunction& kappa, double gamma, double t, double* rms) {
  const double k = kappa(t);
  if (!(k > 0.0)) {
    std::ostringstream msg;
    msg << "auxiliary function kappa is not positive at t=" << t << " (kappa=" << k << ")";
    throw NumericalError(msg.str());
  }
  const double ht = checked(H, t);
  double num = 0.0;
  double den = 0.0;
  double data[3];
  double shape[3];
  for (int i = 0; i < 3; ++i) {
    const double y = kYGrid[i];
    data[i] = (checked(H, y * t) - y * ht) / k;
    shape[i] = hat_H_shape(gamma, y);
    num += data[i] * shape[i];
    den += shape[i] * shape[i];
  }
  const double rho = num / den;
  if (rms != nullptr) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (data[i] - rho * shape[i]) * (data[i] - rho * shape[i]);
    *rms = std::sqrt(s / 3.0) / std::max(std::abs(rho), 1e-300);
  }
  return rho;
}

KappaRho estimate_kappa_rho(const HFunction& H, double gamma, std::span<const double> t_grid) {
  KappaRho out;
  out.kappa = make_kappa(H, gamma);
  for (double t : t_grid) {
    const double k = out.kappa(t);
    if (!(k > 0.0)) {
      std::ostringstream msg;
      msg << "auxiliary function kappa is not positive at t=" << t << " (kappa=" << k << ")";
      throw NumericalError(msg.str());
    }
  }
  out.t_used = top_decade(t_grid);
  std::vector<double> inv_log;
  for (double t : out.t_used) {
    double rms = 0.0;
    out.rho_by_t.push_back(fit_rho_at(H, out.kappa, gamma, t, &rms));
    out.rho_rms = std::max(out.rho_rms, rms);
    inv_log.push_back(1.0 / std::log(t));
  }
  if (out.t_used.size() >= 2) {
    out.rho = fit_line(inv_log, out.rho_by_t).intercept;
  } else {
    out.rho = out.rho_by_t.back();
  }
  return out;
}

KappaStarEstimate estimate_kappa_star(const HFunction& kappa, std::span<const double> t_grid) {
  const auto t = top_decade(t_grid);
  if (t.size() < 3) throw ValidationError("estimate_kappa_star: need at least 3 points in the top decade");
  std::vector<double> ratio, log_ratio, log_log, inv_log;
  for (double ti : t) {
    const double k = kappa(ti);
    if (!(k > 0.0)) {
      std::ostringstream msg;
      msg << "auxiliary function kappa is not positive at t=" << ti;
      throw NumericalError(msg.str());
    }
    ratio.push_back(k / ti);
    log_ratio.push_back(std::log(k / ti));
    log_log.push_back(std::log(std::log(ti)));
    inv_log.push_back(1.0 / std::log(ti));
  }
  KappaStarEstimate est;
  const auto slope_fit = fit_line(log_log, log_ratio);
  est.log_log_slope = slope_fit.slope;
  est.rms_residual = slope_fit.rms_residual;
  est.intercept = fit_line(inv_log, ratio).intercept;
  est.decidable = est.rms_residual < 0.02;
  if (std::abs(est.log_log_slope) < 0.25) {
    est.value = est.intercept < 1e-3 ? 0.0 : est.intercept;
  } else {
    est.value = est.log_log_slope < 0.0 ? 0.0 : kInf;
  }
  return est;
}

ClassificationReport classify(const PotentialModel& model, double t_max, int n_grid) {
  model.validate();
  if (!(t_max >= 1e6)) throw ValidationError("classify: t_max must be at least 1e6 (four decades above 1e2)");
  if (n_grid < 8) throw ValidationError("classify: grid needs at least 8 points");
  ClassificationReport report;
  report.t_grid = geometric_grid(1e2, t_max, n_grid);
  if (model.kind == ModelKind::Constant) {
    report.outcome = "degenerate";
    report.note = "constant potential: H is linear and carries no fluctuation scale";
    report.gamma = report.gamma_class = 1.0;
    return report;
  }
  const HFunction H = cumulant_function(model);
  const auto g = estimate_gamma(H, report.t_grid);
  report.gamma = g.gamma;
  report.gamma_rms = g.rms_residual;
  report.gamma_class = std::abs(g.gamma - 1.0) < kGammaOneTolerance ? 1.0 : g.gamma;
  const auto kr = estimate_kappa_rho(H, report.gamma_class, report.t_grid);
  report.rho = kr.rho;
  report.rho_rms = kr.rho_rms;
  report.rho_by_t = kr.rho_by_t;

  if (report.gamma_class < 1.0) {
    report.kappa_star = 0.0;
    report.label = ClassLabel::BoundedAbove;
  } else if (report.gamma_class > 1.0) {
    report.kappa_star = kInf;
    report.label = ClassLabel::SinglePeak;
  } else {
    const auto ks = estimate_kappa_star(kr.kappa, report.t_grid);
    report.kappa_star = ks.value;
    report.kappa_log_log_slope = ks.log_log_slope;
    report.kappa_rms = ks.rms_residual;
    if (!ks.decidable) {
      report.outcome = "undecidable";
      report.note = "kappa(t)/t does not settle on the grid; the limit assumption cannot be decided";
      return report;
    }
    if (std::isinf(ks.value)) {
      report.label = ClassLabel::SinglePeak;
    } else if (ks.value == 0.0) {
      report.label = ClassLabel::AlmostBounded;
    } else {
      report.label = ClassLabel::DoubleExponential;
    }
  }
  report.outcome = "classified";
  return report;
}

nlohmann::json to_json(const ClassificationReport& r) {
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(v > 0 ? "inf" : "nan"); };
  nlohmann::json j;
  j["outcome"] = r.outcome;
  j["class_label"] = r.label ? nlohmann::json(label_name(*r.label)) : nlohmann::json(nullptr);
  j["gamma"] = num(r.gamma);
  j["gamma_class"] = num(r.gamma_class);
  j["rho"] = num(r.rho);
  j["kappa_star"] = num(r.kappa_star);
  j["t_grid"] = r.t_grid;
  j["residuals"] = {{"gamma_rms", r.gamma_rms},
                    {"rho_rms", r.rho_rms},
                    {"kappa_log_log_slope", r.kappa_log_log_slope},
                    {"kappa_rms", r.kappa_rms}};
  j["rho_by_t"] = r.rho_by_t;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

}  // namespace pamlab
