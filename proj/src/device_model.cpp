#include "stomem/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stomem/special_functions.hpp"

namespace stomem {

namespace {

// Shared by both relaxation laws. The weights are evaluated as
// (gamma*e1 + e2)/(gamma + 1) so that at s = 0 the ratio is exactly 1.
double relaxation(double amplitude, double gamma, double tau1, double tau2, double beta,
                  double s) {
  const double fast = std::exp(-s / tau1);
  const double slow = beta == 1.0 ? std::exp(-s / tau2) : std::exp(-std::pow(s / tau2, beta));
  return amplitude * ((gamma * fast + slow) / (gamma + 1.0));
}

void require_ordered(double t, double t0) {
  if (!(t >= t0)) throw std::domain_error("decay evaluated before its origin (t < t0)");
}

}  // namespace

double set_decay_value(const SetDecayParams& p, double t, double t0) {
  p.validate();
  require_ordered(t, t0);
  return p.g_steady + relaxation(p.delta_g, p.gamma, p.tau1, p.tau2, p.beta, t - t0);
}

double optical_decay_value(const OpticalDecayParams& p, double baseline, double t, double t0) {
  p.validate();
  require_ordered(t, t0);
  return baseline + relaxation(p.delta_g, p.gamma, p.tau1, p.tau2, 1.0, t - t0);
}

double mean_time_constant(double tau2, double beta) {
  if (!(beta > 0.0) || beta > 1.0) {
    throw std::domain_error("mean_time_constant: beta must lie in (0, 1]");
  }
  if (!(tau2 > 0.0)) throw std::domain_error("mean_time_constant: tau2 must be > 0");
  if (beta == 1.0) return tau2;
  return tau2 / beta * gamma_function(1.0 / beta);
}

void PhotoresponseLaw::validate() const {
  if (!(k_g > 0.0) || !(k_p > 0.0)) {
    throw std::domain_error("PhotoresponseLaw: exponents must be > 0");
  }
  if (!(g_ref > 0.0) || !(p_ref > 0.0) || !(dg_ref > 0.0)) {
    throw std::domain_error("PhotoresponseLaw: reference values must be > 0");
  }
}

double photoresponse(const PhotoresponseLaw& law, double g0, double p_opt) {
  law.validate();
  if (!(g0 >= 0.0)) throw std::domain_error("photoresponse: g0 must be >= 0");
  if (!(p_opt >= 0.0)) throw std::domain_error("photoresponse: p_opt must be >= 0");
  if (g0 == 0.0 || p_opt == 0.0) return 0.0;
  return law.dg_ref * std::pow(g0 / law.g_ref, law.k_g) * std::pow(p_opt / law.p_ref, law.k_p);
}

double DecayKernel::value(double t) const {
  require_ordered(t, t0);
  return relaxation(amplitude, gamma, tau1, tau2, beta, t - t0);
}

DecayKernel DecayKernel::from_set(const SetDecayParams& p, double t0, double amplitude) {
  if (!(amplitude >= 0.0)) throw std::domain_error("SET kernel amplitude must be >= 0");
  return DecayKernel{KernelKind::Set, t0, amplitude, p.gamma, p.tau1, p.tau2, p.beta};
}

DecayKernel DecayKernel::from_optical(const OpticalDecayParams& p, double t0, double amplitude) {
  if (!(amplitude >= 0.0)) throw std::domain_error("optical kernel amplitude must be >= 0");
  return DecayKernel{KernelKind::Optical, t0, amplitude, p.gamma, p.tau1, p.tau2, 1.0};
}

double DeviceState::latest_origin() const {
  double latest = -std::numeric_limits<double>::infinity();
  for (const auto& k : kernels) latest = std::max(latest, k.t0);
  return latest;
}

double conductance_at(const DeviceState& s, double t) {
  double g = s.g_steady;
  for (const auto& k : s.kernels) g += k.value(t);
  return g;
}

void prune_kernels(DeviceState& s, double t, double threshold) {
  if (!(threshold > 0.0)) return;
  std::erase_if(s.kernels, [&](const DecayKernel& k) { return k.value(t) < threshold; });
}

DeviceModel::DeviceModel() : DeviceModel(ParameterTable::builtin()) {}

DeviceModel::DeviceModel(ParameterTable table, PhotoresponseLaw law, DeviceOptions options)
    : table_(std::move(table)), law_(law), options_(options) {
  law_.validate();
  if (options_.prune_threshold < 0.0) {
    throw std::invalid_argument("DeviceOptions: prune threshold must be >= 0");
  }
  if (!(options_.drift_tau > 0.0)) {
    throw std::invalid_argument("DeviceOptions: drift tau must be > 0 (use infinity to disable)");
  }
  if (options_.tabulated_train_length < 1) {
    throw std::invalid_argument("DeviceOptions: tabulated train length must be >= 1");
  }
}

DeviceState DeviceModel::rest_state(double bias, double clock) const {
  DeviceState s;
  s.bias = bias;
  s.g_steady = bias_params(bias).set.g_steady;
  s.clock = clock;
  return s;
}

double DeviceModel::set_amplitude(double bias, int count) const {
  if (count < 1) throw std::domain_error("SET train needs at least one pulse");
  const double dg = bias_params(bias).set.delta_g;
  if (count == options_.tabulated_train_length) return dg;
  return dg * static_cast<double>(count) / static_cast<double>(options_.tabulated_train_length);
}

DeviceState DeviceModel::apply_set_event(DeviceState s, double at,
                                         std::optional<double> amplitude) const {
  if (!(at >= s.clock)) throw std::domain_error("SET event lies in the device's past");
  const SetDecayParams p = bias_params(s.bias).set;
  const double a = amplitude.value_or(p.delta_g);
  prune_kernels(s, at, options_.prune_threshold);
  s.kernels.push_back(DecayKernel::from_set(p, at, a));
  s.clock = at;
  return s;
}

DeviceState DeviceModel::apply_optical_pulse(DeviceState s, double p_opt, double width,
                                             double at) const {
  if (!(at >= s.clock)) throw std::domain_error("optical pulse lies in the device's past");
  if (!(width > 0.0)) throw std::domain_error("optical pulse width must be > 0");
  prune_kernels(s, at, options_.prune_threshold);
  const double g0 = conductance_at(s, at);
  const double dg = photoresponse(law_, g0, p_opt);
  s.kernels.push_back(DecayKernel::from_optical(bias_params(s.bias).opt, at + width, dg));
  s.clock = at + width;
  return s;
}

DeviceState DeviceModel::steady_drift(DeviceState s, double dt) const {
  return steady_drift(std::move(s), dt, options_.drift_tau);
}

DeviceState DeviceModel::steady_drift(DeviceState s, double dt, double drift_tau) const {
  if (!(dt >= 0.0)) throw std::domain_error("steady_drift: dt must be >= 0");
  if (dt == 0.0 || std::isinf(drift_tau)) return s;
  if (!(drift_tau > 0.0)) throw std::domain_error("steady_drift: drift tau must be > 0");
  const double target = bias_params(s.bias).set.g_steady;
  s.g_steady += (target - s.g_steady) * -std::expm1(-dt / drift_tau);
  return s;
}

}  // namespace stomem
