#include "stomem/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stomem/device_model.hpp"
#include "stomem/levenberg_marquardt.hpp"

namespace stomem {

using nlohmann::json;

std::string_view to_string(FitModel model) {
  switch (model) {
    case FitModel::SetDecay: return "SET_DECAY";
    case FitModel::OpticalDecay: return "OPTICAL_DECAY";
    case FitModel::PowerLaw: return "POWER_LAW";
  }
  return "SET_DECAY";
}

json FitResult::to_json() const {
  json p = json::object();
  for (const auto& [k, v] : params) p[k] = v;
  json doc = {{"model", to_string(model)},
              {"params", std::move(p)},
              {"rmse", rmse},
              {"weighted_rmse", weighted_rmse},
              {"r_squared", r_squared},
              {"converged", converged},
              {"iterations", iterations},
              {"n_points", n_points}};
  if (model == FitModel::PowerLaw) doc["outlier_mask"] = outlier_mask;
  return doc;
}

namespace {

double param(const FitResult& fit, const char* key) {
  auto it = fit.params.find(key);
  if (it == fit.params.end()) throw std::invalid_argument(std::string("fit has no parameter ") + key);
  return it->second;
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

struct Samples {
  std::vector<double> s;       // time since origin
  std::vector<double> target;  // what the model must reproduce
  std::vector<double> raw;     // measured conductance, for weighting
  std::vector<double> weight;
};

Samples collect(const Trace& trace, double t0, const Baseline* baseline, Weighting weighting) {
  Samples out;
  for (const auto& row : trace.rows) {
    if (row.t < t0) continue;
    out.s.push_back(row.t - t0);
    out.raw.push_back(row.g);
    out.target.push_back(baseline ? row.g - baseline->at(row.t) : row.g);
  }
  double scale = 0.0;
  for (double g : out.raw) scale = std::max(scale, std::abs(g));
  for (double g : out.raw) {
    if (weighting == Weighting::Uniform || scale == 0.0) {
      out.weight.push_back(1.0);
    } else {
      out.weight.push_back(1.0 / std::max(std::abs(g), 1e-6 * scale));
    }
  }
  return out;
}

void require_span(const Samples& d, std::size_t min_samples, double min_decades, const char* who) {
  if (d.s.size() < min_samples) {
    throw FitError(FitErrorCode::InsufficientData,
                   std::string(who) + ": need at least " + std::to_string(min_samples) +
                       " samples after t0, got " + std::to_string(d.s.size()));
  }
  if (min_decades > 0.0) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double s : d.s) {
      if (s > 0.0) lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    if (!(hi / lo >= std::pow(10.0, min_decades) * (1.0 - 1e-12))) {
      throw FitError(FitErrorCode::InsufficientData,
                     std::string(who) + ": samples must span at least " +
                         std::to_string(static_cast<int>(min_decades)) + " decades of t - t0");
    }
  }
}

// Heuristic start: tail level, initial excess and the time at which the
// excess first halves.
struct Heuristic {
  double tail;
  double excess;
  double half_time;
};

Heuristic heuristic(const Samples& d, bool decays_to_zero) {
  const std::size_t n = d.s.size();
  const std::size_t n_tail = std::max<std::size_t>(3, n / 10);
  double tail = 0.0;
  if (!decays_to_zero) {
    for (std::size_t i = n - n_tail; i < n; ++i) tail += d.target[i];
    tail /= static_cast<double>(n_tail);
  }
  const double excess = d.target.front() - tail;
  double half = d.s.back() / 10.0;
  if (excess > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (d.target[i] - tail <= 0.5 * excess) {
        half = d.s[i];
        break;
      }
    }
  }
  if (!(half > 0.0)) half = d.s.size() > 1 ? std::max(d.s[1], 1e-6) : 1.0;
  return {tail, excess, half};
}

void finish(FitResult& fit, const Samples& d, const std::vector<double>& model, double cost) {
  const std::size_t n = d.s.size();
  double ss_res = 0.0;
  const double mean = std::accumulate(d.target.begin(), d.target.end(), 0.0) / static_cast<double>(n);
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ss_res += (model[i] - d.target[i]) * (model[i] - d.target[i]);
    ss_tot += (d.target[i] - mean) * (d.target[i] - mean);
  }
  fit.n_points = n;
  fit.rmse = std::sqrt(ss_res / static_cast<double>(n));
  fit.weighted_rmse = std::sqrt(2.0 * cost / static_cast<double>(n));
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
}

LmOptions lm_options(const FitOptions& options, const Samples& d) {
  LmOptions lm;
  lm.max_iterations = options.max_iterations;
  double level = 0.0;
  for (std::size_t i = 0; i < d.s.size(); ++i) level += std::abs(d.weight[i] * d.raw[i]);
  level /= static_cast<double>(d.s.size());
  // Residuals at rounding level of the data count as an exact fit.
  lm.cost_tolerance = 0.5 * static_cast<double>(d.s.size()) * std::pow(1e-13 * level, 2);
  return lm;
}

// Trial points where exp() of a transformed parameter over- or underflowed.
bool usable(double dg, double gamma, double tau1, double tau2) {
  return std::isfinite(dg) && std::isfinite(gamma) && tau1 > 0.0 && tau2 > 0.0 && std::isfinite(tau1) &&
         std::isfinite(tau2);
}

void reject(Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
  r.setConstant(std::numeric_limits<double>::infinity());
  if (jac) jac->setZero();
}

// --- SET relaxation ------------------------------------------------------
// u = [g_steady, ln dG, ln gamma, ln tau1, ln tau2, logit beta]

SetDecayParams unpack_set(const Eigen::VectorXd& u) {
  return SetDecayParams{u[0], std::exp(u[1]), std::exp(u[2]), std::exp(u[3]), std::exp(u[4]),
                        logistic(u[5])};
}

Eigen::VectorXd pack_set(const SetDecayParams& p) {
  Eigen::VectorXd u(6);
  const double floor = 1e-12;
  u << p.g_steady, std::log(std::max(p.delta_g, floor)), std::log(std::max(p.gamma, floor)),
      std::log(p.tau1), std::log(p.tau2), logit(std::clamp(p.beta, 1e-6, 1.0 - 1e-6));
  return u;
}

void set_residuals(const Samples& d, const Eigen::VectorXd& u, Eigen::VectorXd& r,
                   Eigen::MatrixXd* jac) {
  const SetDecayParams p = unpack_set(u);
  if (!usable(p.delta_g, p.gamma, p.tau1, p.tau2) || !(p.beta > 0.0) || !std::isfinite(p.g_steady)) {
    reject(r, jac);
    return;
  }
  // d(natural)/d(u) for the log and logistic transforms
  const double chain[6] = {1.0, p.delta_g, p.gamma, p.tau1, p.tau2, p.beta * (1.0 - p.beta)};
  for (std::size_t i = 0; i < d.s.size(); ++i) {
    const double w = d.weight[i];
    const auto row = static_cast<Eigen::Index>(i);
    r[row] = w * (set_decay_value(p, d.s[i], 0.0) - d.target[i]);
    if (jac) {
      const auto g = set_decay_sensitivities(p, d.s[i]);
      for (int k = 0; k < 6; ++k) (*jac)(row, k) = w * g[k] * chain[k];
    }
  }
}

// --- optical relaxation --------------------------------------------------
// u = [ln dG, ln gamma, ln tau1, ln tau2]

OpticalDecayParams unpack_opt(const Eigen::VectorXd& u) {
  return OpticalDecayParams{std::exp(u[0]), std::exp(u[1]), std::exp(u[2]), std::exp(u[3])};
}

Eigen::VectorXd pack_opt(const OpticalDecayParams& p) {
  Eigen::VectorXd u(4);
  const double floor = 1e-12;
  u << std::log(std::max(p.delta_g, floor)), std::log(std::max(p.gamma, floor)), std::log(p.tau1),
      std::log(p.tau2);
  return u;
}

void opt_residuals(const Samples& d, const Eigen::VectorXd& u, Eigen::VectorXd& r,
                   Eigen::MatrixXd* jac) {
  const OpticalDecayParams p = unpack_opt(u);
  if (!usable(p.delta_g, p.gamma, p.tau1, p.tau2)) {
    reject(r, jac);
    return;
  }
  const double chain[4] = {p.delta_g, p.gamma, p.tau1, p.tau2};
  for (std::size_t i = 0; i < d.s.size(); ++i) {
    const double w = d.weight[i];
    const auto row = static_cast<Eigen::Index>(i);
    r[row] = w * (optical_decay_value(p, 0.0, d.s[i], 0.0) - d.target[i]);
    if (jac) {
      const auto g = optical_decay_sensitivities(p, d.s[i]);
      for (int k = 0; k < 4; ++k) (*jac)(row, k) = w * g[k] * chain[k];
    }
  }
}

template <typename Residuals>
LmReport best_of(const std::vector<Eigen::VectorXd>& starts, const Residuals& residuals,
                 Eigen::Index n, const LmOptions& lm) {
  LmReport best;
  bool have = false;
  for (const auto& start : starts) {
    LmReport rep = levenberg_marquardt(residuals, start, n, lm);
    const bool better = !have || (rep.converged && !best.converged) ||
                        (rep.converged == best.converged && rep.cost < best.cost);
    if (better) {
      best = std::move(rep);
      have = true;
    }
  }
  return best;
}

}  // namespace

std::array<double, 6> set_decay_sensitivities(const SetDecayParams& p, double s) {
  const double inv = 1.0 / (p.gamma + 1.0);
  const double e1 = std::exp(-s / p.tau1);
  const double x = std::pow(s / p.tau2, p.beta);
  const double e2 = std::exp(-x);
  const double a = p.delta_g * inv;
  // x * ln(s / tau2) -> 0 as s -> 0
  const double x_log = s > 0.0 ? x * std::log(s / p.tau2) : 0.0;
  return {1.0,
          (p.gamma * e1 + e2) * inv,
          a * (e1 - e2) * inv,
          a * p.gamma * e1 * s / (p.tau1 * p.tau1),
          a * e2 * p.beta * x / p.tau2,
          -a * e2 * x_log};
}

std::array<double, 4> optical_decay_sensitivities(const OpticalDecayParams& p, double s) {
  const double inv = 1.0 / (p.gamma + 1.0);
  const double e1 = std::exp(-s / p.tau1);
  const double e2 = std::exp(-s / p.tau2);
  const double a = p.delta_g * inv;
  return {(p.gamma * e1 + e2) * inv, a * (e1 - e2) * inv, a * p.gamma * e1 * s / (p.tau1 * p.tau1),
          a * e2 * s / (p.tau2 * p.tau2)};
}

SetDecayParams set_params_of(const FitResult& fit) {
  return SetDecayParams{param(fit, "g_steady_nS"), param(fit, "dg_nS"), param(fit, "gamma"),
                        param(fit, "tau1_s"),      param(fit, "tau2_s"), param(fit, "beta")};
}

OpticalDecayParams optical_params_of(const FitResult& fit) {
  return OpticalDecayParams{param(fit, "dg_nS"), param(fit, "gamma"), param(fit, "tau1_s"),
                            param(fit, "tau2_s")};
}

double Baseline::at(double t) const {
  if (!set) return constant;
  return t >= set_t0 ? set_decay_value(*set, t, set_t0) : set->g_steady;
}

FitResult fit_set_decay(const Trace& trace, double t0, std::optional<SetDecayParams> init,
                        const FitOptions& options) {
  const Samples d = collect(trace, t0, nullptr, options.weighting);
  require_span(d, 12, 2.0, "fit_set_decay");

  std::vector<Eigen::VectorXd> starts;
  if (init) {
    init->validate();
    starts.push_back(pack_set(*init));
  } else {
    const Heuristic h = heuristic(d, false);
    const double dg = std::max(h.excess, 1e-6 * std::max(std::abs(h.tail), 1e-3));
    // The documented default start first, then two alternatives that bracket
    // slower and faster stretched tails.
    starts.push_back(pack_set({h.tail, dg, 1.0, h.half_time, 10.0 * h.half_time, 0.5}));
    starts.push_back(pack_set({h.tail, dg, 1.0, h.half_time, 100.0 * h.half_time, 0.3}));
    starts.push_back(pack_set({h.tail, dg, 1.0, h.half_time, 3.0 * h.half_time, 0.8}));
  }
  const auto n = static_cast<Eigen::Index>(d.s.size());
  auto residuals = [&d](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
    set_residuals(d, u, r, j);
  };
  const LmReport rep = best_of(starts, residuals, n, lm_options(options, d));

  const SetDecayParams p = unpack_set(rep.x);
  FitResult fit;
  fit.model = FitModel::SetDecay;
  fit.params = {{"g_steady_nS", p.g_steady}, {"dg_nS", p.delta_g}, {"gamma", p.gamma},
                {"tau1_s", p.tau1},          {"tau2_s", p.tau2},   {"beta", p.beta}};
  fit.iterations = rep.iterations;
  fit.converged = rep.converged && p.g_steady >= 0.0 && std::isfinite(rep.cost);
  std::vector<double> model;
  model.reserve(d.s.size());
  for (double s : d.s) model.push_back(set_decay_value(p, s, 0.0));
  finish(fit, d, model, rep.cost);
  return fit;
}

FitResult fit_optical_decay(const Trace& trace, const Baseline& baseline, double t0,
                            std::optional<OpticalDecayParams> init, const FitOptions& options) {
  const Samples d = collect(trace, t0, &baseline, options.weighting);
  require_span(d, 8, 0.0, "fit_optical_decay");

  std::vector<Eigen::VectorXd> starts;
  if (init) {
    init->validate();
    starts.push_back(pack_opt(*init));
  } else {
    const Heuristic h = heuristic(d, true);
    double level = 0.0;
    for (double g : d.raw) level = std::max(level, std::abs(g));
    const double dg = std::max(h.excess, 1e-6 * std::max(level, 1e-3));
    starts.push_back(pack_opt({dg, 1.0, h.half_time, 10.0 * h.half_time}));
    starts.push_back(pack_opt({dg, 1.0, 0.3 * h.half_time, 3.0 * h.half_time}));
  }
  const auto n = static_cast<Eigen::Index>(d.s.size());
  auto residuals = [&d](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
    opt_residuals(d, u, r, j);
  };
  const LmReport rep = best_of(starts, residuals, n, lm_options(options, d));

  OpticalDecayParams p = unpack_opt(rep.x);
  if (p.tau1 > p.tau2) {
    // Same curve with the components exchanged: weights gamma/(1+gamma) and
    // 1/(1+gamma) swap when gamma -> 1/gamma.
    std::swap(p.tau1, p.tau2);
    p.gamma = 1.0 / p.gamma;
  }
  FitResult fit;
  fit.model = FitModel::OpticalDecay;
  fit.params = {{"dg_nS", p.delta_g}, {"gamma", p.gamma}, {"tau1_s", p.tau1}, {"tau2_s", p.tau2}};
  fit.iterations = rep.iterations;
  fit.converged = rep.converged && std::isfinite(rep.cost);
  std::vector<double> model;
  model.reserve(d.s.size());
  for (double s : d.s) model.push_back(optical_decay_value(p, 0.0, s, 0.0));
  finish(fit, d, model, rep.cost);
  return fit;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
  if (x.size() < 2) throw FitError(FitErrorCode::InsufficientData, "linear_fit: need 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw FitError(FitErrorCode::InsufficientData, "linear_fit: x has no spread");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

LinearFit masked_log_fit(const std::vector<double>& lx, const std::vector<double>& ly,
                         const std::vector<bool>& mask) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    if (mask[i]) continue;
    xs.push_back(lx[i]);
    ys.push_back(ly[i]);
  }
  return linear_fit(xs, ys);
}

// Log residuals below this are rounding noise of exact power-law data.
constexpr double kSigmaFloor = 1e-12;

}  // namespace

FitResult fit_power_law(std::span<const std::pair<double, double>> points,
                        const OutlierPolicy& policy) {
  if (points.size() < 3) {
    throw FitError(FitErrorCode::InsufficientData, "fit_power_law: need at least 3 points");
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) {
      throw FitError(FitErrorCode::NonPositiveValue, "fit_power_law: x and y must be > 0");
    }
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  std::vector<bool> mask(points.size(), false);
  LinearFit line = masked_log_fit(lx, ly, mask);
  int iterations = 0;
  if (policy.kind == OutlierPolicy::Kind::SigmaClip) {
    for (; iterations < policy.max_iterations; ++iterations) {
      std::vector<double> residual(points.size());
      std::vector<double> kept;
      for (std::size_t i = 0; i < points.size(); ++i) {
        residual[i] = ly[i] - (line.intercept + line.slope * lx[i]);
        if (!mask[i]) kept.push_back(residual[i]);
      }
      const double center = median(kept);
      std::vector<double> deviation;
      for (double r : kept) deviation.push_back(std::abs(r - center));
      const double sigma = std::max(1.4826 * median(deviation), kSigmaFloor);
      std::vector<bool> next(points.size());
      std::size_t n_kept = 0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        next[i] = std::abs(residual[i] - center) > policy.threshold * sigma;
        if (!next[i]) ++n_kept;
      }
      if (n_kept < 3 || next == mask) break;
      mask = std::move(next);
      line = masked_log_fit(lx, ly, mask);
    }
  }

  FitResult fit;
  fit.model = FitModel::PowerLaw;
  fit.params = {{"k", line.slope},
                {"ln_prefactor", line.intercept},
                {"prefactor", std::exp(line.intercept)}};
  fit.outlier_mask = mask;
  fit.converged = true;
  fit.iterations = iterations;
  fit.r_squared = line.r_squared;
  double ss = 0.0;
  double ss_log = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (mask[i]) continue;
    const double predicted = std::exp(line.intercept) * std::pow(points[i].first, line.slope);
    ss += (predicted - points[i].second) * (predicted - points[i].second);
    const double e = ly[i] - (line.intercept + line.slope * lx[i]);
    ss_log += e * e;
    ++n;
  }
  fit.n_points = n;
  fit.rmse = std::sqrt(ss / static_cast<double>(n));
  fit.weighted_rmse = std::sqrt(ss_log / static_cast<double>(n));
  return fit;
}

}  // namespace stomem
