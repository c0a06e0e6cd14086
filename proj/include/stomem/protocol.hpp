#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stomem/device_model.hpp"

namespace stomem {

/// (0.5 ms * v_read + 1.5 ms * v_bias) / 2 ms: time-averaged voltage of the
/// interleaved read/bias waveform.
double mean_applied_voltage(double v_read, double v_bias);

/// Energy per device of one optical pulse, in pJ.
/// p in mW/cm^2, area in um^2, width in s.
double optical_pulse_energy(double p_mw_cm2, double area_um2, double width_s);

enum class PulseKind { Read, Bias, SetTrain, Optical };

std::string_view to_string(PulseKind kind);
PulseKind pulse_kind_from_string(std::string_view name);

struct PulseEvent {
  PulseKind kind = PulseKind::Read;
  double start = 0.0;
  /// Single pulse width; a SET train occupies count * width back to back.
  double width = 1e-3;
  /// Volts for electrical kinds, mW/cm^2 for optical pulses.
  double amplitude = 0.0;
  int count = 1;
  /// SET amplitude override in nS (otherwise taken from the parameter table).
  std::optional<double> delta_g;

  double end() const;
  bool is_electrical() const { return kind != PulseKind::Optical; }
};

struct PulseProtocol {
  std::string name;
  std::vector<PulseEvent> events;
  double v_read = 0.6;
  double read_width = 0.5e-3;
  double bias_width = 1.5e-3;
  /// Bias used for parameter lookup. With `interleaved` the device sees
  /// read pulses separated by this bias; otherwise a constant read voltage.
  double v_bias = 0.0;
  bool interleaved = false;
  /// Steady conductance at the start of the run; the device's own value is
  /// kept when absent.
  std::optional<double> initial_g;
  bool drift_enabled = false;
  double drift_tau = 100.0;
  std::vector<double> sample_times;

  /// Checks event ordering, widths, counts, electrical overlap and sample
  /// ordering. Throws std::invalid_argument.
  void validate() const;
};

struct TraceRow {
  double t = 0.0;       // s
  double g = 0.0;       // nS
  double current = 0.0; // A
  double v_applied = 0.0;
  double p_opt = 0.0;   // mW/cm^2
};

struct Trace {
  std::vector<TraceRow> rows;
};

/// Electrical read power at a sample, G * V^2, in nW.
double read_power_nw(const TraceRow& row);

/// Logarithmic samples after every SET/optical event (10 per decade from
/// 1 ms up to the next such event) plus a uniform 1 s grid before the first
/// event, limited to [t_begin, t_end]. Times strictly inside electrical
/// pulses are omitted.
std::vector<double> default_sample_grid(const std::vector<PulseEvent>& events, double t_begin,
                                        double t_end, int per_decade = 10);

inline constexpr double kSetVoltage = 4.0;
inline constexpr double kPulseWidth = 1e-3;
inline constexpr double kReferencePower = 65.0;
inline constexpr double kTraceBegin = -600.0;

/// SET train of `count` 4 V / 1 ms pulses ending at `end_time`.
PulseEvent set_train_ending_at(double end_time, int count = 100);
PulseEvent optical_pulse(double start, double p_opt = kReferencePower, double width = kPulseWidth);

/// Constant 0.6 V read, a 100-pulse SET train ending at t = 0 and 1 ms UV
/// pulses starting at `optical_times`. Throws on unsorted times.
PulseProtocol build_fig2_protocol(const DeviceModel& model, const std::vector<double>& optical_times,
                                  double v_bias = 0.6, double t_end = 1000.0);

/// Optical pulse times of the two timing measurements (delay 0.1 s and 10 s
/// after the SET), each with two pre-SET and three post-SET pulses.
std::vector<double> timing_measurement_times(int measurement);

/// Interleaved read/bias protocol: pre-SET pulses at -400 s and -200 s, a
/// 100-pulse SET train ending at 0 and post-SET pulses every 100 s.
PulseProtocol build_fig3_protocol(const DeviceModel& model, double v_bias, double t_end = 1000.0);

enum class S3Variant { IndividualPulses, PulseTrain };

struct S3Options {
  int segments = 5;
  double segment_period = 60.0;
  double probe_delay = 1.0;
  double v_bias = 0.0;
};

/// Protocol 1: `segments` single SET pulses each followed by an optical
/// probe. Protocol 2: one 100-pulse train followed by `segments` probes.
PulseProtocol build_s3_protocol(const DeviceModel& model, S3Variant variant,
                                const S3Options& options = {});

/// READ leaves the state alone, BIAS switches the device bias and a SET
/// train appends its kernel at the train end.
DeviceState apply_electrical_event(const DeviceModel& model, DeviceState device, const PulseEvent& e);

/// Executes the protocol on a copy of `device`. SET trains collapse to one
/// kernel at the train end; a tabulated-length train without an amplitude
/// override restores the table's steady level first, so the relaxation that
/// follows is exactly the tabulated SET decay.
Trace run_protocol(const PulseProtocol& proto, DeviceState device, const DeviceModel& model);

/// Subtracts the SET relaxation G0(t) from every sample (G_steady before t0).
Trace subtract_baseline(const Trace& trace, const SetDecayParams& p, double t0);

/// Sum of optical_pulse_energy over the protocol's optical events, in pJ.
double protocol_optical_energy(const PulseProtocol& proto, double area_um2);

nlohmann::json protocol_to_json(const PulseProtocol& proto);
PulseProtocol protocol_from_json(const nlohmann::json& doc);

}  // namespace stomem
