#include "stomem/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "stomem/builtin_data.hpp"
#include "stomem/crossbar.hpp"
#include "stomem/fitting.hpp"
#include "stomem/learning.hpp"
#include "stomem/parameter_table.hpp"
#include "stomem/protocol.hpp"
#include "stomem/rng.hpp"
#include "stomem/synthetic.hpp"
#include "stomem/trace_io.hpp"

namespace stomem::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string params;
  std::uint64_t seed = kDefaultSeed;
  bool emit_plots_data = false;
};

struct Loaded {
  ParameterTable table;
  std::string source;
};

Loaded load_table(const Common& common) {
  std::string source;
  try {
    ParameterTable table = resolve_parameter_table(common.params, &source);
    return {std::move(table), source};
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

fs::path sidecar_path(const fs::path& output) {
  return output.parent_path() / (output.stem().string() + ".provenance.json");
}

json provenance(const std::string& command, const std::vector<std::string>& args, const Common& common,
                const Loaded& table) {
  return {{"artifact", "stomem"},
          {"version", builtin::kVersion},
          {"command", command},
          {"args", args},
          {"seed", common.seed},
          {"parameter_source", table.source},
          {"parameters", table.table.to_json()}};
}

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

std::string to_csv(const Trace& trace) {
  std::ostringstream s;
  write_trace_csv(s, trace);
  return s.str();
}

std::pair<int, int> parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("expected ROW,COL, got '" + text + "'");
  try {
    return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ConfigError("expected ROW,COL, got '" + text + "'");
  }
}

// --- simulate ------------------------------------------------------------

struct SimulateArgs {
  std::string protocol;
  std::string protocol_file;
  std::optional<double> bias;
  std::vector<double> optical_times;
  int measurement = 1;
  double t_end = 1000.0;
  bool drift = false;
  std::optional<double> drift_tau;
  double noise = 0.0;
  std::string out = "trace.csv";
};

PulseProtocol build_protocol(const SimulateArgs& a, const DeviceModel& model) {
  if (!a.protocol_file.empty()) {
    if (a.bias) throw ConfigError("--bias cannot be combined with --protocol-file");
    return protocol_from_json(read_json_file(a.protocol_file));
  }
  if (a.protocol == "fig2") {
    const std::vector<double> times = a.optical_times.empty() ? timing_measurement_times(a.measurement) : a.optical_times;
    return build_fig2_protocol(model, times, a.bias.value_or(0.6), a.t_end);
  }
  if (!a.optical_times.empty()) throw ConfigError("--optical-times applies to the fig2 protocol only");
  if (a.protocol == "fig3") return build_fig3_protocol(model, a.bias.value_or(0.0), a.t_end);
  S3Options s3;
  s3.v_bias = a.bias.value_or(0.0);
  return build_s3_protocol(model, a.protocol == "s3-1" ? S3Variant::IndividualPulses : S3Variant::PulseTrain, s3);
}

int cmd_simulate(const SimulateArgs& a, const Common& common, const std::vector<std::string>& args,
                 std::ostream& out) {
  const Loaded table = load_table(common);
  const DeviceModel model(table.table);
  PulseProtocol proto = build_protocol(a, model);
  if (a.drift) proto.drift_enabled = true;
  if (a.drift_tau) proto.drift_tau = *a.drift_tau;
  proto.validate();

  double clock = proto.sample_times.empty() ? 0.0 : proto.sample_times.front();
  if (!proto.events.empty()) clock = std::min(clock, proto.events.front().start);
  Trace trace = run_protocol(proto, model.rest_state(proto.v_bias, clock), model);
  if (a.noise > 0.0) {
    Rng rng(common.seed);
    add_multiplicative_noise(trace, a.noise, rng);
  }

  const fs::path csv(a.out);
  write_text_file(csv, to_csv(trace));
  json meta = provenance("simulate", args, common, table);
  meta["protocol"] = protocol_to_json(proto);
  meta["noise_relative"] = a.noise;
  json outputs = json::array({csv.filename().string()});

  if (common.emit_plots_data) {
    const auto set = std::find_if(proto.events.begin(), proto.events.end(),
                                  [](const PulseEvent& e) { return e.kind == PulseKind::SetTrain; });
    if (set != proto.events.end()) {
      SetDecayParams p = model.bias_params(proto.v_bias).set;
      p.delta_g = set->delta_g.value_or(model.set_amplitude(proto.v_bias, set->count));
      const fs::path sub = csv.parent_path() / (csv.stem().string() + ".baseline_subtracted.csv");
      write_text_file(sub, to_csv(subtract_baseline(trace, p, set->end())));
      outputs.push_back(sub.filename().string());
    }
  }
  meta["outputs"] = outputs;
  write_json(sidecar_path(csv), meta);

  out << "simulate: " << proto.name << " at " << format_double(proto.v_bias) << " V, " << trace.rows.size()
      << " samples -> " << csv.string() << '\n';
  return kExitOk;
}

// --- fit -----------------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string model = "set";
  double t0 = 0.0;
  std::optional<double> baseline_constant;
  std::optional<double> baseline_bias;
  double baseline_t0 = 0.0;
  std::string weighting = "relative";
  std::string outlier_policy = "sigma-clip";
  double clip_threshold = 3.0;
  int max_iterations = 500;
  bool allow_nonconverged = false;
  std::string out = "fit.json";
};

std::string summary(const FitResult& fit) {
  std::ostringstream s;
  s << "fit " << to_string(fit.model) << ':';
  auto put = [&](const char* key) { s << ' ' << key << '=' << format_double(fit.params.at(key)); };
  if (fit.model == FitModel::PowerLaw) {
    put("k");
    std::size_t masked = 0;
    for (bool m : fit.outlier_mask) masked += m ? 1 : 0;
    s << " outliers=" << masked;
  } else {
    put("tau1_s");
    put("tau2_s");
    if (fit.model == FitModel::SetDecay) put("beta");
  }
  s << " rmse=" << format_double(fit.rmse) << (fit.converged ? "" : " NON_CONVERGED");
  return s.str();
}

int cmd_fit(const FitArgs& a, const Common& common, const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  FitOptions options;
  options.max_iterations = a.max_iterations;
  options.weighting = a.weighting == "uniform" ? Weighting::Uniform : Weighting::Relative;

  const Loaded table = load_table(common);
  json meta = provenance("fit", args, common, table);
  FitResult fit;
  if (a.model == "power") {
    OutlierPolicy policy;
    if (a.outlier_policy == "none") policy = OutlierPolicy::none();
    policy.threshold = a.clip_threshold;
    fit = fit_power_law(read_points_csv(fs::path(a.input)), policy);
  } else {
    const Trace trace = read_trace_csv(fs::path(a.input));
    if (a.model == "set") {
      fit = fit_set_decay(trace, a.t0, std::nullopt, options);
    } else {
      if (a.baseline_constant && a.baseline_bias) {
        throw ConfigError("--baseline-constant and --baseline-bias are exclusive");
      }
      Baseline baseline;
      if (a.baseline_bias) {
        baseline = Baseline::set_decay(table.table.at(*a.baseline_bias).set, a.baseline_t0);
      } else if (a.baseline_constant) {
        baseline = Baseline::constant_level(*a.baseline_constant);
      } else {
        // Level just before the pulse.
        const TraceRow* before = nullptr;
        for (const auto& row : trace.rows) {
          if (row.t < a.t0) before = &row;
        }
        if (!before) throw ConfigError("no samples before --t0; give --baseline-constant or --baseline-bias");
        baseline = Baseline::constant_level(before->g);
      }
      meta["baseline"] = {{"constant_nS", baseline.constant},
                          {"set_bias_V", a.baseline_bias ? json(*a.baseline_bias) : json(nullptr)},
                          {"set_t0_s", baseline.set_t0}};
      fit = fit_optical_decay(trace, baseline, a.t0, std::nullopt, options);
    }
  }

  json doc = fit.to_json();
  doc["input"] = fs::path(a.input).filename().string();
  const fs::path path(a.out);
  write_json(path, doc);
  meta["outputs"] = json::array({path.filename().string()});
  write_json(sidecar_path(path), meta);

  out << summary(fit) << '\n';
  if (!fit.converged && !a.allow_nonconverged) {
    err << "error: fit did not converge (NON_CONVERGED); pass --allow-nonconverged to accept\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// --- learn ---------------------------------------------------------------

struct LearnArgs {
  std::string config;
  std::string synapse;
  std::optional<double> alpha;
  std::optional<int> trials;
  std::vector<double> arms;
  std::optional<double> delay;
  std::optional<double> bias;
  std::optional<double> lambda;
  std::vector<double> compare_delays;
  std::string out = "learn_out";
};

int cmd_learn(const LearnArgs& a, Common common, bool seed_given, const std::vector<std::string>& args,
              std::ostream& out) {
  BanditConfig cfg;
  if (!a.config.empty()) {
    try {
      cfg = BanditConfig::from_json(read_json_file(a.config));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
  }
  if (!a.synapse.empty()) cfg.synapse = synapse_type_from_string(a.synapse);
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.trials) cfg.n_trials = *a.trials;
  if (!a.arms.empty()) cfg.arm_probabilities = a.arms;
  if (a.delay) cfg.reward_delay = *a.delay;
  if (a.bias) cfg.v_bias = *a.bias;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (seed_given || a.config.empty()) cfg.seed = common.seed;
  common.seed = cfg.seed;
  cfg.validate();

  const Loaded table = load_table(common);
  const DeviceModel model(table.table);
  const fs::path dir(a.out);
  json meta = provenance("learn", args, common, table);
  meta["config"] = cfg.to_json();
  json outputs = json::array();

  if (!a.compare_delays.empty()) {
    CompareConfig cc;
    cc.v_bias = cfg.v_bias;
    cc.alpha = cfg.alpha;
    cc.h = stdp_update(cfg.kernel, cfg.stdp_lag);
    const CompareReport report = compare_theory_device(model, a.compare_delays, cc);
    bool decreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      decreasing = decreasing && report.rows[i].device < report.rows[i - 1].device;
    }
    json doc = report.to_json();
    doc["device_strictly_decreasing"] = decreasing;
    write_json(dir / "compare.json", doc);
    outputs.push_back("compare.json");
    out << "learn: compare " << report.rows.size() << " delays, spearman="
        << (report.spearman ? format_double(*report.spearman) : std::string("undefined"))
        << " device dG " << (decreasing ? "strictly decreasing" : "NOT strictly decreasing") << '\n';
  } else {
    const BanditReport report = run_bandit_experiment(model, cfg);
    out << "learn:";
    for (const auto* curve : {report.theory ? &*report.theory : nullptr, report.device ? &*report.device : nullptr}) {
      if (!curve) continue;
      const std::string name = "learning_" + std::string(to_string(curve->synapse)) + ".csv";
      std::ostringstream csv;
      write_learning_curve_csv(csv, *curve);
      write_text_file(dir / name, csv.str());
      outputs.push_back(name);
      meta["lambda_" + std::string(to_string(curve->synapse))] = curve->lambda;
      out << ' ' << to_string(curve->synapse) << " final mean reward " << format_double(curve->final_mean_reward());
    }
    out << " (" << cfg.n_trials << " trials) -> " << dir.string() << '\n';
  }
  meta["outputs"] = outputs;
  write_json(dir / "provenance.json", meta);
  return kExitOk;
}

// --- crossbar ------------------------------------------------------------

struct CrossbarArgs {
  int rows = 2;
  int cols = 2;
  double bias = 0.0;
  std::vector<std::string> address;
  std::vector<std::string> illumination;
  double power = kReferencePower;
  double width = kPulseWidth;
  std::vector<double> broadcast_times{1.0};
  std::optional<double> snapshot_time;
  bool shared_rail = false;
  std::string out = "crossbar_out";
};

int cmd_crossbar(const CrossbarArgs& a, const Common& common, const std::vector<std::string>& args,
                 std::ostream& out) {
  const Loaded table = load_table(common);
  CrossbarOptions options;
  options.shared_bias_rail = a.shared_rail;
  CrossbarArray array(DeviceModel(table.table), a.rows, a.cols, a.bias, options);

  for (const auto& spec : a.illumination) {
    const auto last = spec.rfind(',');
    if (last == std::string::npos) throw ConfigError("expected ROW,COL,MULTIPLIER, got '" + spec + "'");
    const auto [r, c] = parse_cell(spec.substr(0, last));
    double m = 0.0;
    try {
      m = std::stod(spec.substr(last + 1));
    } catch (const std::exception&) {
      throw ConfigError("expected ROW,COL,MULTIPLIER, got '" + spec + "'");
    }
    array.set_illumination(r, c, m);
  }
  // Addressed cells receive the tabulated SET train ending at t = 0.
  for (const auto& spec : a.address) {
    const auto [r, c] = parse_cell(spec);
    array.address_device(r, c, set_train_ending_at(0.0));
  }

  std::ostringstream responses;
  responses << "t_s,row,col,dG_nS\n";
  std::vector<PulseEvent> pulses;
  double t_last = 0.0;
  for (double t : a.broadcast_times) {
    const std::vector<double> dg = array.broadcast_optical(a.power, a.width, t);
    pulses.push_back(optical_pulse(t, a.power, a.width));
    for (int r = 0; r < a.rows; ++r) {
      for (int c = 0; c < a.cols; ++c) {
        responses << format_double(t) << ',' << r << ',' << c << ','
                  << format_double(dg[static_cast<std::size_t>(r * a.cols + c)]) << '\n';
      }
    }
    t_last = t + a.width;
  }
  const double t_snap = a.snapshot_time.value_or(t_last);
  std::ostringstream snapshot;
  array.write_snapshot_csv(snapshot, t_snap);

  const fs::path dir(a.out);
  write_text_file(dir / "crossbar_snapshot.csv", snapshot.str());
  write_text_file(dir / "crossbar_broadcast.csv", responses.str());
  const double energy = array.total_optical_energy(pulses);
  json meta = provenance("crossbar", args, common, table);
  meta["array"] = {{"rows", a.rows}, {"cols", a.cols}, {"bias_V", a.bias}, {"shared_bias_rail", a.shared_rail},
                   {"pitch_area_um2", array.pitch_area()}};
  meta["snapshot_time_s"] = t_snap;
  meta["total_optical_energy_pJ"] = energy;
  meta["outputs"] = json::array({"crossbar_snapshot.csv", "crossbar_broadcast.csv"});
  write_json(dir / "provenance.json", meta);
  out << "crossbar: " << a.rows << 'x' << a.cols << ", " << pulses.size() << " broadcasts, optical energy "
      << format_double(energy) << " pJ -> " << dir.string() << '\n';
  return kExitOk;
}

int classify(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << '\n';
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const CsvError*>(&e) ||
      dynamic_cast<const std::logic_error*>(&e) || dynamic_cast<const json::exception*>(&e)) {
    return kExitConfig;
  }
  return kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Electro-optical memristor simulator and analysis toolkit", "stomem"};
  app.set_version_flag("--version", std::string(builtin::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--params", common.params,
                 "Parameter table JSON (default: $" + std::string(kParamsEnvVar) + ", then built-in)")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", common.seed, "Seed for all stochastic components")
                       ->default_val(kDefaultSeed);
  app.add_flag("--emit-plots-data", common.emit_plots_data, "Write derived plot series next to outputs");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a measurement protocol and write the trace");
  auto* proto_opt = simulate->add_option("--protocol", sim.protocol, "Built-in protocol")
                        ->check(CLI::IsMember({"fig2", "fig3", "s3-1", "s3-2"}));
  auto* file_opt = simulate->add_option("--protocol-file", sim.protocol_file, "Protocol JSON")
                       ->check(CLI::ExistingFile);
  proto_opt->excludes(file_opt);
  simulate->add_option("--bias", sim.bias, "Bias voltage in V");
  simulate->add_option("--optical-times", sim.optical_times, "fig2 optical pulse start times in s")
      ->delimiter(',');
  simulate->add_option("--measurement", sim.measurement, "fig2 timing measurement")
      ->check(CLI::IsMember({1, 2}));
  simulate->add_option("--t-end", sim.t_end, "End of the trace in s")->check(CLI::PositiveNumber);
  simulate->add_flag("--drift", sim.drift, "Relax G_steady toward the tabulated level");
  simulate->add_option("--drift-tau", sim.drift_tau, "Drift time constant in s")->check(CLI::PositiveNumber);
  simulate->add_option("--noise", sim.noise, "Relative Gaussian noise on G")->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", sim.out, "Trace CSV path");

  FitArgs fit;
  auto* fitcmd = app.add_subcommand("fit", "Fit a relaxation or power-law model to CSV data");
  fitcmd->add_option("--input", fit.input, "Trace CSV, or x,y CSV for power laws")
      ->required()
      ->check(CLI::ExistingFile);
  fitcmd->add_option("--model", fit.model, "Model")->check(CLI::IsMember({"set", "optical", "power"}));
  fitcmd->add_option("--t0", fit.t0, "Origin of the relaxation in s");
  fitcmd->add_option("--baseline-constant", fit.baseline_constant, "Optical baseline level in nS");
  fitcmd->add_option("--baseline-bias", fit.baseline_bias, "Use the tabulated SET relaxation at this bias");
  fitcmd->add_option("--baseline-t0", fit.baseline_t0, "Origin of the SET baseline in s");
  fitcmd->add_option("--weighting", fit.weighting, "Residual weighting")
      ->check(CLI::IsMember({"relative", "uniform"}));
  fitcmd->add_option("--outlier-policy", fit.outlier_policy, "Power-law outlier policy")
      ->check(CLI::IsMember({"none", "sigma-clip"}));
  fitcmd->add_option("--clip-threshold", fit.clip_threshold, "Sigma-clip threshold")->check(CLI::PositiveNumber);
  fitcmd->add_option("--max-iterations", fit.max_iterations, "Iteration limit")->check(CLI::PositiveNumber);
  fitcmd->add_flag("--allow-nonconverged", fit.allow_nonconverged, "Exit 0 even if the fit did not converge");
  fitcmd->add_option("--out", fit.out, "Result JSON path");

  LearnArgs learn;
  auto* learncmd = app.add_subcommand("learn", "Run the three-factor learning experiments");
  learncmd->add_option("--config", learn.config, "Experiment JSON")->check(CLI::ExistingFile);
  learncmd->add_option("--synapse", learn.synapse, "Synapse type")
      ->check(CLI::IsMember({"theory", "device", "both"}));
  learncmd->add_option("--alpha", learn.alpha, "Learning rate")->check(CLI::NonNegativeNumber);
  learncmd->add_option("--trials", learn.trials, "Number of trials")->check(CLI::PositiveNumber);
  learncmd->add_option("--arms", learn.arms, "Reward probability per arm")->delimiter(',');
  learncmd->add_option("--delay", learn.delay, "Reward delay in s")->check(CLI::PositiveNumber);
  learncmd->add_option("--bias", learn.bias, "Device bias in V");
  learncmd->add_option("--lambda", learn.lambda, "Theory decay per 1 ms step")->check(CLI::Range(0.0, 1.0));
  learncmd->add_option("--compare-delays", learn.compare_delays, "Compare theory and device at these delays (s)")
      ->delimiter(',');
  learncmd->add_option("--out", learn.out, "Output directory");

  CrossbarArgs xbar;
  auto* xbarcmd = app.add_subcommand("crossbar", "Address cells and broadcast optical pulses over an array");
  xbarcmd->add_option("--rows", xbar.rows, "Rows")->check(CLI::PositiveNumber);
  xbarcmd->add_option("--cols", xbar.cols, "Columns")->check(CLI::PositiveNumber);
  xbarcmd->add_option("--bias", xbar.bias, "Bias voltage in V");
  xbarcmd->add_option("--address", xbar.address, "ROW,COL receiving a SET train ending at t=0");
  xbarcmd->add_option("--illumination", xbar.illumination, "ROW,COL,MULTIPLIER local intensity");
  xbarcmd->add_option("--power", xbar.power, "Optical power density in mW/cm^2")->check(CLI::NonNegativeNumber);
  xbarcmd->add_option("--width", xbar.width, "Optical pulse width in s")->check(CLI::PositiveNumber);
  xbarcmd->add_option("--broadcast-times", xbar.broadcast_times, "Optical pulse start times in s")
      ->delimiter(',');
  xbarcmd->add_option("--snapshot-time", xbar.snapshot_time, "Time of the state snapshot in s");
  xbarcmd->add_flag("--shared-rail", xbar.shared_rail, "All devices share one bias rail");
  xbarcmd->add_option("--out", xbar.out, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      if (sim.protocol.empty() && sim.protocol_file.empty()) {
        throw ConfigError("simulate: give --protocol or --protocol-file");
      }
      return cmd_simulate(sim, common, args, out);
    }
    if (fitcmd->parsed()) return cmd_fit(fit, common, args, out, err);
    if (learncmd->parsed()) return cmd_learn(learn, common, seed_opt->count() > 0, args, out);
    if (xbarcmd->parsed()) return cmd_crossbar(xbar, common, args, out);
  } catch (const std::exception& e) {
    return classify(e, err);
  }
  return kExitConfig;
}

}  // namespace stomem::cli
