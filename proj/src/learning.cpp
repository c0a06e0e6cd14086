#include "stomem/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "stomem/fitting.hpp"
#include "stomem/rng.hpp"
#include "stomem/trace_io.hpp"

namespace stomem {

using nlohmann::json;

void SynapseRecord::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::domain_error("SynapseRecord: lambda must lie in [0, 1]");
  if (!(alpha > 0.0)) throw std::domain_error("SynapseRecord: alpha must be > 0");
}

void StdpKernel::validate() const {
  if (!(tau_plus > 0.0) || !(tau_minus > 0.0)) {
    throw std::domain_error("StdpKernel: time constants must be > 0");
  }
}

double stdp_update(const StdpKernel& kernel, double delta_t) {
  if (delta_t > 0.0) return kernel.a_plus * std::exp(-delta_t / kernel.tau_plus);
  if (delta_t < 0.0) return kernel.a_minus * std::exp(delta_t / kernel.tau_minus);
  return 0.0;
}

double eligibility_step(double z, double lambda, double h) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::domain_error("eligibility_step: lambda must lie in [0, 1]");
  return lambda * z + h;
}

SynapseRecord weight_update(SynapseRecord rec, double delta) {
  rec.w += rec.alpha * delta * rec.z;
  return rec;
}

DeviceSynapse make_device_synapse(const DeviceModel& model, double v_bias, double clock) {
  return DeviceSynapse{model.rest_state(v_bias, clock), model.law(), v_bias, kSetVoltage};
}

DeviceUpdate device_weight_update(const DeviceModel& model, DeviceSynapse syn, double p_opt,
                                  double at, double width) {
  DeviceState& s = syn.device;
  if (!(at >= s.clock)) throw std::domain_error("optical pulse lies in the device's past");
  if (!(width > 0.0)) throw std::domain_error("optical pulse width must be > 0");
  prune_kernels(s, at, model.options().prune_threshold);
  const double dg = photoresponse(syn.law, conductance_at(s, at), p_opt);
  if (dg > 0.0) s.kernels.push_back(DecayKernel::from_optical(model.bias_params(s.bias).opt, at + width, dg));
  s.clock = at + width;
  return DeviceUpdate{std::move(syn), dg};
}

DeviceSynapse device_eligibility_event(const DeviceModel& model, DeviceSynapse syn, double at,
                                       double h) {
  if (!(h >= 0.0)) throw std::domain_error("device eligibility: h must be >= 0 (SET only raises G0)");
  if (h == 0.0) {
    if (!(at >= syn.device.clock)) throw std::domain_error("SET event lies in the device's past");
    syn.device.clock = at;
    return syn;
  }
  const double amplitude = h * model.set_amplitude(syn.device.bias, model.options().tabulated_train_length);
  syn.device = model.apply_set_event(std::move(syn.device), at, amplitude);
  return syn;
}

EffectiveDecay effective_decay(const DeviceModel& model, double v_bias, double step) {
  if (!(step > 0.0)) throw std::domain_error("effective_decay: step must be > 0");
  const DeviceState s = model.apply_set_event(model.rest_state(v_bias), 0.0);
  constexpr int kSamples = 101;
  constexpr double kWindow = 10.0;
  std::vector<double> t(kSamples);
  std::vector<double> y(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    t[i] = kWindow * i / (kSamples - 1);
    y[i] = 0.5 * std::log(conductance_at(s, t[i]));
  }
  const LinearFit line = linear_fit(t, y);
  EffectiveDecay out;
  out.r_squared = line.r_squared;
  if (line.slope < 0.0) {
    out.tau = -1.0 / line.slope;
    out.lambda = std::exp(-step / out.tau);
  } else {
    out.tau = std::numeric_limits<double>::infinity();
    out.lambda = 1.0;
  }
  return out;
}

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: size mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&v](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

namespace {

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

json CompareReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"delay_s", r.delay}, {"theory_dw", r.theory}, {"device_dG_nS", r.device}});
  }
  return {{"rows", std::move(rows_json)},
          {"effective_tau_s", decay.tau},
          {"effective_lambda", decay.lambda},
          {"effective_fit_r_squared", decay.r_squared},
          {"spearman", spearman ? json(*spearman) : json(nullptr)},
          {"sign_agreement", sign_agreement}};
}

CompareReport compare_theory_device(const DeviceModel& model, const std::vector<double>& delays,
                                    const CompareConfig& cfg) {
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (!(delays[i] > 0.0)) throw std::invalid_argument("compare: delays must be > 0");
    if (i > 0 && !(delays[i] > delays[i - 1])) throw std::invalid_argument("compare: delays must be sorted");
  }
  if (!(cfg.reward >= 0.0 && cfg.reward <= 1.0)) throw std::invalid_argument("compare: reward must lie in [0, 1]");
  CompareReport report;
  report.decay = effective_decay(model, cfg.v_bias, cfg.step);
  // Reward 1 corresponds to a pulse at the reference power density.
  const double p_opt = cfg.reward * cfg.reward * model.law().p_ref;
  std::vector<double> theory;
  std::vector<double> device;
  std::size_t agree = 0;
  for (double delay : delays) {
    const double z = cfg.h * std::exp(-delay / report.decay.tau);
    const double dw = cfg.alpha * cfg.reward * z;
    DeviceSynapse syn = device_eligibility_event(model, make_device_synapse(model, cfg.v_bias), 0.0, cfg.h);
    const double dg = device_weight_update(model, std::move(syn), p_opt, delay).delta_g;
    report.rows.push_back({delay, dw, dg});
    theory.push_back(dw);
    device.push_back(dg);
    if (sign(dw) == sign(dg)) ++agree;
  }
  report.spearman = spearman(theory, device);
  report.sign_agreement = delays.empty() ? 1.0 : static_cast<double>(agree) / static_cast<double>(delays.size());
  return report;
}

std::string_view to_string(SynapseType type) {
  switch (type) {
    case SynapseType::Theory: return "theory";
    case SynapseType::Device: return "device";
    case SynapseType::Both: return "both";
  }
  return "both";
}

SynapseType synapse_type_from_string(std::string_view name) {
  if (name == "theory") return SynapseType::Theory;
  if (name == "device") return SynapseType::Device;
  if (name == "both") return SynapseType::Both;
  throw std::invalid_argument("unknown synapse type '" + std::string(name) + "'");
}

void BanditConfig::validate() const {
  if (arm_probabilities.size() < 2) throw std::invalid_argument("bandit: need at least 2 arms");
  for (double p : arm_probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bandit: arm probabilities must lie in [0, 1]");
  }
  if (n_trials < 1) throw std::invalid_argument("bandit: n_trials must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("bandit: alpha must be >= 0");
  if (!(inverse_temperature >= 0.0)) throw std::invalid_argument("bandit: inverse_temperature must be >= 0");
  if (!(reward_delay > 0.0)) throw std::invalid_argument("bandit: reward_delay_s must be > 0");
  if (!(trial_period > reward_delay + kPulseWidth)) {
    throw std::invalid_argument("bandit: trial_period_s must exceed the reward delay");
  }
  if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0)) throw std::invalid_argument("bandit: lambda must lie in [0, 1]");
  kernel.validate();
}

json BanditConfig::to_json() const {
  json doc = {{"arm_probabilities", arm_probabilities},
              {"n_trials", n_trials},
              {"seed", seed},
              {"synapse", to_string(synapse)},
              {"alpha", alpha},
              {"inverse_temperature", inverse_temperature},
              {"reward_delay_s", reward_delay},
              {"trial_period_s", trial_period},
              {"stdp_lag_s", stdp_lag},
              {"v_bias_V", v_bias},
              {"stdp",
               {{"a_plus", kernel.a_plus},
                {"a_minus", kernel.a_minus},
                {"tau_plus_s", kernel.tau_plus},
                {"tau_minus_s", kernel.tau_minus}}}};
  doc["lambda"] = lambda ? json(*lambda) : json(nullptr);
  return doc;
}

BanditConfig BanditConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("bandit config must be a JSON object");
  static const std::vector<std::string> known = {
      "arm_probabilities", "n_trials", "seed",     "synapse", "alpha", "inverse_temperature",
      "reward_delay_s",    "trial_period_s", "stdp_lag_s", "v_bias_V", "lambda", "stdp"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("bandit config: unknown key '" + key + "'");
    }
  }
  BanditConfig cfg;
  try {
    if (doc.contains("arm_probabilities")) cfg.arm_probabilities = doc.at("arm_probabilities").get<std::vector<double>>();
    if (doc.contains("n_trials")) cfg.n_trials = doc.at("n_trials").get<int>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("synapse")) cfg.synapse = synapse_type_from_string(doc.at("synapse").get<std::string>());
    if (doc.contains("alpha")) cfg.alpha = doc.at("alpha").get<double>();
    if (doc.contains("inverse_temperature")) cfg.inverse_temperature = doc.at("inverse_temperature").get<double>();
    if (doc.contains("reward_delay_s")) cfg.reward_delay = doc.at("reward_delay_s").get<double>();
    if (doc.contains("trial_period_s")) cfg.trial_period = doc.at("trial_period_s").get<double>();
    if (doc.contains("stdp_lag_s")) cfg.stdp_lag = doc.at("stdp_lag_s").get<double>();
    if (doc.contains("v_bias_V")) cfg.v_bias = doc.at("v_bias_V").get<double>();
    if (doc.contains("lambda") && !doc.at("lambda").is_null()) cfg.lambda = doc.at("lambda").get<double>();
    if (doc.contains("stdp")) {
      const json& k = doc.at("stdp");
      cfg.kernel.a_plus = k.value("a_plus", cfg.kernel.a_plus);
      cfg.kernel.a_minus = k.value("a_minus", cfg.kernel.a_minus);
      cfg.kernel.tau_plus = k.value("tau_plus_s", cfg.kernel.tau_plus);
      cfg.kernel.tau_minus = k.value("tau_minus_s", cfg.kernel.tau_minus);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bandit config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

double LearningCurve::final_mean_reward() const {
  return trials.empty() ? 0.0 : trials.back().mean_reward_100;
}

namespace {

int choose_arm(const std::vector<double>& w, double beta, double u) {
  const double top = *std::max_element(w.begin(), w.end());
  std::vector<double> p(w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    p[i] = std::exp(beta * (w[i] - top));
    total += p[i];
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    acc += p[i] / total;
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

class RewardWindow {
 public:
  double push(double r) {
    window_.push_back(r);
    sum_ += r;
    if (window_.size() > 100) {
      sum_ -= window_[window_.size() - 101];
    }
    const std::size_t n = std::min<std::size_t>(window_.size(), 100);
    return sum_ / static_cast<double>(n);
  }

 private:
  std::vector<double> window_;
  double sum_ = 0.0;
};

// Steps of the theory clock between two instants.
double steps_between(double from, double to) { return std::round((to - from) / kLearningStep); }

LearningCurve run_theory(const BanditConfig& cfg, double lambda) {
  const std::size_t n_arms = cfg.arm_probabilities.size();
  Rng rng(cfg.seed);
  std::vector<SynapseRecord> syn(n_arms, SynapseRecord{0.0, 0.0, lambda, cfg.alpha});
  const double h = stdp_update(cfg.kernel, cfg.stdp_lag);
  LearningCurve curve;
  curve.synapse = SynapseType::Theory;
  curve.lambda = lambda;
  RewardWindow window;
  double now = 0.0;
  for (int k = 0; k < cfg.n_trials; ++k) {
    const double u_choice = rng.uniform();
    const double u_reward = rng.uniform();
    std::vector<double> w(n_arms);
    for (std::size_t i = 0; i < n_arms; ++i) w[i] = syn[i].w;
    const int arm = choose_arm(w, cfg.inverse_temperature, u_choice);

    const double t_event = k * cfg.trial_period;
    const double decay_to_event = std::pow(lambda, steps_between(now, t_event));
    for (std::size_t i = 0; i < n_arms; ++i) {
      syn[i].z = eligibility_step(syn[i].z, decay_to_event, static_cast<int>(i) == arm ? h : 0.0);
    }
    const double t_reward = t_event + cfg.reward_delay;
    const double decay_to_reward = std::pow(lambda, steps_between(t_event, t_reward));
    const double reward = u_reward < cfg.arm_probabilities[arm] ? 1.0 : 0.0;
    for (auto& s : syn) {
      s.z = eligibility_step(s.z, decay_to_reward, 0.0);
      s = weight_update(s, reward);
    }
    now = t_reward;
    curve.trials.push_back({k + 1, arm, reward, window.push(reward)});
  }
  for (const auto& s : syn) curve.final_weights.push_back(s.w);
  return curve;
}

LearningCurve run_device(const DeviceModel& model, const BanditConfig& cfg) {
  const std::size_t n_arms = cfg.arm_probabilities.size();
  Rng rng(cfg.seed);
  std::vector<DeviceSynapse> syn(n_arms, make_device_synapse(model, cfg.v_bias));
  std::vector<double> w(n_arms, 0.0);
  const double h = stdp_update(cfg.kernel, cfg.stdp_lag);
  const PhotoresponseLaw& law = model.law();
  const double g_rest = syn.front().device.g_steady;
  const double dg_set = model.set_amplitude(cfg.v_bias, model.options().tabulated_train_length);
  // Weight change of one unit: the extra photoresponse of a freshly SET
  // device over a resting one at the reference power.
  const double norm = photoresponse(law, g_rest + dg_set, law.p_ref) - photoresponse(law, g_rest, law.p_ref);
  LearningCurve curve;
  curve.synapse = SynapseType::Device;
  curve.lambda = effective_decay(model, cfg.v_bias).lambda;
  RewardWindow window;
  for (int k = 0; k < cfg.n_trials; ++k) {
    const double u_choice = rng.uniform();
    const double u_reward = rng.uniform();
    const int arm = choose_arm(w, cfg.inverse_temperature, u_choice);

    const double t_event = k * cfg.trial_period;
    syn[arm] = device_eligibility_event(model, std::move(syn[arm]), t_event, h);
    const double reward = u_reward < cfg.arm_probabilities[arm] ? 1.0 : 0.0;
    if (reward > 0.0) {
      const double p_opt = reward * reward * law.p_ref;
      const double dg_rest = photoresponse(law, g_rest, p_opt);
      for (std::size_t i = 0; i < n_arms; ++i) {
        DeviceUpdate up = device_weight_update(model, std::move(syn[i]), p_opt, t_event + cfg.reward_delay);
        syn[i] = std::move(up.synapse);
        w[i] += cfg.alpha * (up.delta_g - dg_rest) / norm;
      }
    }
    curve.trials.push_back({k + 1, arm, reward, window.push(reward)});
  }
  curve.final_weights = w;
  return curve;
}

}  // namespace

BanditReport run_bandit_experiment(const DeviceModel& model, const BanditConfig& cfg) {
  cfg.validate();
  BanditReport report;
  if (cfg.synapse != SynapseType::Device) {
    const double lambda = cfg.lambda ? *cfg.lambda : effective_decay(model, cfg.v_bias).lambda;
    report.theory = run_theory(cfg, lambda);
  }
  if (cfg.synapse != SynapseType::Theory) report.device = run_device(model, cfg);
  return report;
}

void write_learning_curve_csv(std::ostream& out, const LearningCurve& curve) {
  out << "trial,reward,mean_reward_100\n";
  for (const auto& t : curve.trials) {
    out << t.trial << ',' << format_double(t.reward) << ',' << format_double(t.mean_reward_100) << '\n';
  }
}

}  // namespace stomem
