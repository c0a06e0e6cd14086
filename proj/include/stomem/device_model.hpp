#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "stomem/parameter_table.hpp"

// Conductance dynamics of the electro-optical memristor.
//
// Units throughout: conductance in nS, time in s, optical power density in
// mW/cm^2, voltage in V.

namespace stomem {

/// G_steady + dG/(gamma+1) * (gamma*exp(-s/tau1) + exp(-(s/tau2)^beta)),
/// s = t - t0. Throws std::domain_error for t < t0 or invalid parameters.
double set_decay_value(const SetDecayParams& p, double t, double t0);

/// baseline + dG/(gamma+1) * (gamma*exp(-s/tau1) + exp(-s/tau2)).
double optical_decay_value(const OpticalDecayParams& p, double baseline, double t, double t0);

/// Mean relaxation time of a stretched exponential, (tau2/beta) * Gamma(1/beta).
double mean_time_constant(double tau2, double beta);

/// Conductance jump under illumination as a power law in the conductance
/// state and the optical power: dg_ref * (g0/g_ref)^k_g * (p/p_ref)^k_p.
struct PhotoresponseLaw {
  double k_g = 0.50;
  double k_p = 0.52;
  double g_ref = 1.0;
  double p_ref = 65.0;
  double dg_ref = 1.0;

  void validate() const;
};

double photoresponse(const PhotoresponseLaw& law, double g0, double p_opt);

enum class KernelKind { Set, Optical };

/// One relaxation term spawned by a SET or optical event at origin t0.
struct DecayKernel {
  KernelKind kind = KernelKind::Set;
  double t0 = 0.0;
  double amplitude = 0.0;
  double gamma = 0.0;
  double tau1 = 1.0;
  double tau2 = 1.0;
  double beta = 1.0;  // 1 for optical kernels

  /// Kernel contribution at t >= t0; equals `amplitude` exactly at t0.
  double value(double t) const;

  static DecayKernel from_set(const SetDecayParams& p, double t0, double amplitude);
  static DecayKernel from_optical(const OpticalDecayParams& p, double t0, double amplitude);
};

/// A steady level plus additive relaxation kernels. Plain value type.
struct DeviceState {
  double g_steady = 0.0;
  std::vector<DecayKernel> kernels;
  double bias = 0.0;
  double clock = 0.0;

  /// Latest kernel origin, or -inf when no kernel is active.
  double latest_origin() const;
};

/// g_steady + sum of kernel values. Throws std::domain_error when t precedes
/// any kernel's origin.
double conductance_at(const DeviceState& s, double t);

/// Drops kernels whose contribution at t has fallen below `threshold`.
void prune_kernels(DeviceState& s, double t, double threshold);

struct DeviceOptions {
  double prune_threshold = 1e-3;  // nS
  double drift_tau = 100.0;       // s; +inf disables steady_drift
  /// Number of pulses in the SET train characterized by the parameter table.
  int tabulated_train_length = 100;
};

/// Evolves DeviceState values with a parameter table and photoresponse law.
/// Stateless apart from its (immutable) configuration.
class DeviceModel {
 public:
  DeviceModel();
  explicit DeviceModel(ParameterTable table, PhotoresponseLaw law = {}, DeviceOptions options = {});

  const ParameterTable& table() const { return table_; }
  const PhotoresponseLaw& law() const { return law_; }
  const DeviceOptions& options() const { return options_; }

  /// Parameters at `bias`, clamped to the tabulated range.
  BiasParams bias_params(double bias) const { return table_.at(bias); }

  /// A device at rest at `bias`: steady level from the SET relaxation table.
  DeviceState rest_state(double bias, double clock = 0.0) const;

  /// SET amplitude for a train of `count` pulses, scaled linearly from the
  /// tabulated train.
  double set_amplitude(double bias, int count) const;

  /// Appends a SET kernel at `at` (tabulated train amplitude unless given).
  DeviceState apply_set_event(DeviceState s, double at,
                              std::optional<double> amplitude = std::nullopt) const;

  /// Illuminates for `width` starting at `at`. The photoresponse is computed
  /// from the conductance at `at` and appended as an optical kernel anchored
  /// at the pulse end; the new kernel is `kernels.back()`.
  DeviceState apply_optical_pulse(DeviceState s, double p_opt, double width, double at) const;

  /// First-order relaxation of g_steady toward the tabulated steady level at
  /// the device's bias.
  DeviceState steady_drift(DeviceState s, double dt) const;
  DeviceState steady_drift(DeviceState s, double dt, double drift_tau) const;

 private:
  ParameterTable table_;
  PhotoresponseLaw law_;
  DeviceOptions options_;
};

inline constexpr double kNoDrift = std::numeric_limits<double>::infinity();

}  // namespace stomem
