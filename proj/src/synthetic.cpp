#include "stomem/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "stomem/device_model.hpp"

namespace stomem {

std::vector<double> log_spaced(double s_min, double s_max, int n) {
  if (!(s_min > 0.0) || !(s_max > s_min) || n < 2) throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double lo = std::log10(s_min);
  const double span = std::log10(s_max) - lo;
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::pow(10.0, lo + span * i / (n - 1));
  out.front() = s_min;
  out.back() = s_max;
  return out;
}

namespace {

TraceRow read_row(double t, double g, double v_read) { return TraceRow{t, g, g * 1e-9 * v_read, v_read, 0.0}; }

}  // namespace

Trace synthetic_set_trace(const SetDecayParams& p, const std::vector<double>& offsets, double t0, double v_read) {
  Trace trace;
  for (double s : offsets) trace.rows.push_back(read_row(t0 + s, set_decay_value(p, t0 + s, t0), v_read));
  return trace;
}

Trace synthetic_optical_trace(const OpticalDecayParams& p, double baseline, const std::vector<double>& offsets,
                              double t0, double v_read) {
  Trace trace;
  for (double s : offsets) {
    trace.rows.push_back(read_row(t0 + s, optical_decay_value(p, baseline, t0 + s, t0), v_read));
  }
  return trace;
}

void add_multiplicative_noise(Trace& trace, double rel, Rng& rng) {
  for (auto& row : trace.rows) {
    row.g *= 1.0 + rel * rng.normal();
    row.current = row.g * 1e-9 * row.v_applied;
  }
}

std::vector<std::pair<double, double>> synthetic_power_law(double k, double prefactor, double x_min, double x_max,
                                                           int n, const std::vector<int>& outliers,
                                                           double outlier_factor) {
  std::vector<std::pair<double, double>> points;
  for (double x : log_spaced(x_min, x_max, n)) points.emplace_back(x, prefactor * std::pow(x, k));
  for (int i : outliers) {
    if (i < 0 || i >= n) throw std::out_of_range("synthetic_power_law: outlier index");
    points[static_cast<std::size_t>(i)].second *= outlier_factor;
  }
  return points;
}

}  // namespace stomem
