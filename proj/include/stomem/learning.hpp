#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "stomem/device_model.hpp"
#include "stomem/protocol.hpp"
#include "stomem/rng.hpp"

namespace stomem {

/// One synapse of the ideal three-factor rule.
struct SynapseRecord {
  double w = 0.0;
  double z = 0.0;
  double lambda = 1.0;
  double alpha = 0.1;

  void validate() const;
};

/// Pair-based exponential STDP window, delta_t = t_post - t_pre.
struct StdpKernel {
  double a_plus = 1.0;
  double a_minus = -1.0;
  double tau_plus = 0.02;
  double tau_minus = 0.02;

  void validate() const;
};

double stdp_update(const StdpKernel& kernel, double delta_t);

/// z <- lambda * z + h.
double eligibility_step(double z, double lambda, double h);

/// w <- w + alpha * delta * z.
SynapseRecord weight_update(SynapseRecord rec, double delta);

/// A memristor standing in for one synapse: conductance is the eligibility,
/// the bias sets its decay, SET pulses mark coincidences and light delivers
/// the reward.
struct DeviceSynapse {
  DeviceState device;
  PhotoresponseLaw law;
  double v_bias = 0.0;
  double v_pulse = kSetVoltage;
};

DeviceSynapse make_device_synapse(const DeviceModel& model, double v_bias, double clock = 0.0);

struct DeviceUpdate {
  DeviceSynapse synapse;
  double delta_g = 0.0;
};

/// Optical pulse at `at`; delta_g is the photoresponse at pulse end.
DeviceUpdate device_weight_update(const DeviceModel& model, DeviceSynapse syn, double p_opt,
                                  double at, double width = kPulseWidth);

/// SET event at `at` with amplitude h times the tabulated train amplitude.
DeviceSynapse device_eligibility_event(const DeviceModel& model, DeviceSynapse syn, double at,
                                       double h = 1.0);

/// Single exponential fitted to sqrt(G0) over the first 10 s after a SET.
struct EffectiveDecay {
  double tau = 0.0;      // s
  double lambda = 0.0;   // per step
  double r_squared = 0.0;
};

inline constexpr double kLearningStep = 1e-3;

EffectiveDecay effective_decay(const DeviceModel& model, double v_bias, double step = kLearningStep);

struct CompareConfig {
  double v_bias = 0.0;
  double alpha = 1.0;
  double reward = 1.0;
  double h = 1.0;
  double step = kLearningStep;
};

struct CompareRow {
  double delay = 0.0;
  double theory = 0.0;
  double device = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  EffectiveDecay decay;
  /// Undefined when either side has no variation.
  std::optional<double> spearman;
  double sign_agreement = 0.0;

  nlohmann::json to_json() const;
};

CompareReport compare_theory_device(const DeviceModel& model, const std::vector<double>& delays,
                                    const CompareConfig& cfg = {});

/// Spearman rank correlation (average ranks for ties); nullopt if a side is
/// constant.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

enum class SynapseType { Theory, Device, Both };
std::string_view to_string(SynapseType type);
SynapseType synapse_type_from_string(std::string_view name);

struct BanditConfig {
  std::vector<double> arm_probabilities{1.0, 0.0};
  int n_trials = 500;
  std::uint64_t seed = kDefaultSeed;
  SynapseType synapse = SynapseType::Both;
  double alpha = 0.5;
  double inverse_temperature = 5.0;
  double reward_delay = 0.5;   // s after the eligibility event
  double trial_period = 20.0;  // s
  double stdp_lag = 5e-3;      // t_post - t_pre
  double v_bias = 0.0;
  /// Theory decay per step; defaults to the device's effective decay.
  std::optional<double> lambda;
  StdpKernel kernel;

  void validate() const;
  nlohmann::json to_json() const;
  static BanditConfig from_json(const nlohmann::json& doc);
};

struct TrialRecord {
  int trial = 0;  // 1-based
  int arm = 0;
  double reward = 0.0;
  double mean_reward_100 = 0.0;
};

struct LearningCurve {
  SynapseType synapse = SynapseType::Theory;
  std::vector<TrialRecord> trials;
  std::vector<double> final_weights;
  double lambda = 0.0;

  double final_mean_reward() const;
};

struct BanditReport {
  std::optional<LearningCurve> theory;
  std::optional<LearningCurve> device;
};

BanditReport run_bandit_experiment(const DeviceModel& model, const BanditConfig& cfg);

void write_learning_curve_csv(std::ostream& out, const LearningCurve& curve);

}  // namespace stomem
