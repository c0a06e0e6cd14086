#include "stomem/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stomem {

using nlohmann::json;

double mean_applied_voltage(double v_read, double v_bias) {
  return (0.5 * v_read + 1.5 * v_bias) / 2.0;
}

double optical_pulse_energy(double p_mw_cm2, double area_um2, double width_s) {
  if (!(p_mw_cm2 >= 0.0) || !(area_um2 >= 0.0) || !(width_s >= 0.0)) {
    throw std::domain_error("optical_pulse_energy: arguments must be >= 0");
  }
  // mW/cm^2 -> W/cm^2 (1e-3), um^2 -> cm^2 (1e-8), J -> pJ (1e12).
  return p_mw_cm2 * area_um2 * width_s * 10.0;
}

std::string_view to_string(PulseKind kind) {
  switch (kind) {
    case PulseKind::Read: return "READ";
    case PulseKind::Bias: return "BIAS";
    case PulseKind::SetTrain: return "SET_TRAIN";
    case PulseKind::Optical: return "OPTICAL";
  }
  return "READ";
}

PulseKind pulse_kind_from_string(std::string_view name) {
  if (name == "READ") return PulseKind::Read;
  if (name == "BIAS") return PulseKind::Bias;
  if (name == "SET_TRAIN") return PulseKind::SetTrain;
  if (name == "OPTICAL") return PulseKind::Optical;
  throw std::invalid_argument("unknown pulse kind '" + std::string(name) + "'");
}

double PulseEvent::end() const {
  if (kind == PulseKind::SetTrain) return start + width * static_cast<double>(count);
  return start + width;
}

void PulseProtocol::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!(e.width > 0.0)) throw std::invalid_argument("protocol: event width must be > 0");
    if (e.count < 1) throw std::invalid_argument("protocol: event count must be >= 1");
    if (e.kind != PulseKind::SetTrain && e.count != 1) {
      throw std::invalid_argument("protocol: only SET_TRAIN events may have count > 1");
    }
    if (e.kind == PulseKind::Optical && !(e.amplitude >= 0.0)) {
      throw std::invalid_argument("protocol: optical power must be >= 0");
    }
    if (e.delta_g && !(*e.delta_g >= 0.0)) {
      throw std::invalid_argument("protocol: SET amplitude override must be >= 0");
    }
    if (i > 0 && e.start < events[i - 1].start) {
      throw std::invalid_argument("protocol: events must be sorted by start time");
    }
  }
  const PulseEvent* last_electrical = nullptr;
  for (const auto& e : events) {
    if (!e.is_electrical()) continue;
    if (last_electrical && e.start < last_electrical->end()) {
      throw std::invalid_argument("protocol: overlapping electrical events");
    }
    last_electrical = &e;
  }
  for (std::size_t i = 1; i < sample_times.size(); ++i) {
    if (!(sample_times[i] > sample_times[i - 1])) {
      throw std::invalid_argument("protocol: sample times must be strictly increasing");
    }
  }
  if (!(drift_tau > 0.0)) throw std::invalid_argument("protocol: drift tau must be > 0");
}

double read_power_nw(const TraceRow& row) { return row.g * row.v_applied * row.v_applied; }

std::vector<double> default_sample_grid(const std::vector<PulseEvent>& events, double t_begin,
                                        double t_end, int per_decade) {
  if (!(t_end > t_begin)) throw std::invalid_argument("sample grid: t_end must exceed t_begin");
  if (per_decade < 1) throw std::invalid_argument("sample grid: per_decade must be >= 1");

  std::vector<const PulseEvent*> state_events;
  for (const auto& e : events) {
    if (e.kind == PulseKind::SetTrain || e.kind == PulseKind::Optical) state_events.push_back(&e);
  }
  std::sort(state_events.begin(), state_events.end(),
            [](const PulseEvent* a, const PulseEvent* b) { return a->start < b->start; });

  std::vector<double> grid;
  const double first = events.empty() ? t_end : std::min_element(events.begin(), events.end(),
                                                                 [](const auto& a, const auto& b) {
                                                                   return a.start < b.start;
                                                                 })->start;
  for (long k = 0;; ++k) {
    const double t = t_begin + static_cast<double>(k);
    if (t >= first || t > t_end) break;
    grid.push_back(t);
  }
  for (std::size_t i = 0; i < state_events.size(); ++i) {
    const double origin = state_events[i]->end();
    const double next = i + 1 < state_events.size() ? state_events[i + 1]->start : t_end;
    if (origin > t_end || origin < t_begin) continue;
    grid.push_back(origin);
    for (int k = -3 * per_decade;; ++k) {
      const double t = origin + std::pow(10.0, static_cast<double>(k) / per_decade);
      if (t >= next && i + 1 < state_events.size()) break;
      if (t > t_end) break;
      grid.push_back(t);
    }
  }
  std::erase_if(grid, [&](double t) {
    if (t < t_begin || t > t_end) return true;
    return std::any_of(events.begin(), events.end(), [t](const PulseEvent& e) {
      return e.is_electrical() && t >= e.start && t < e.end();
    });
  });
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

PulseEvent set_train_ending_at(double end_time, int count) {
  PulseEvent e;
  e.kind = PulseKind::SetTrain;
  e.width = kPulseWidth;
  e.count = count;
  e.start = end_time - kPulseWidth * static_cast<double>(count);
  e.amplitude = kSetVoltage;
  return e;
}

PulseEvent optical_pulse(double start, double p_opt, double width) {
  PulseEvent e;
  e.kind = PulseKind::Optical;
  e.start = start;
  e.width = width;
  e.amplitude = p_opt;
  return e;
}

namespace {

void sort_events(std::vector<PulseEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const PulseEvent& a, const PulseEvent& b) { return a.start < b.start; });
}

}  // namespace

PulseProtocol build_fig2_protocol(const DeviceModel& model, const std::vector<double>& optical_times,
                                  double v_bias, double t_end) {
  if (!std::is_sorted(optical_times.begin(), optical_times.end())) {
    throw std::invalid_argument("fig2 protocol: optical times must be sorted");
  }
  PulseProtocol p;
  p.name = "fig2";
  p.v_bias = v_bias;
  p.interleaved = false;
  p.initial_g = model.bias_params(v_bias).optical_baseline;
  p.events.push_back(set_train_ending_at(0.0));
  for (double t : optical_times) p.events.push_back(optical_pulse(t));
  sort_events(p.events);
  p.sample_times = default_sample_grid(p.events, kTraceBegin, t_end);
  p.validate();
  return p;
}

std::vector<double> timing_measurement_times(int measurement) {
  double delay = 0.0;
  if (measurement == 1) {
    delay = 0.1;
  } else if (measurement == 2) {
    delay = 10.0;
  } else {
    throw std::invalid_argument("fig2 measurement must be 1 or 2");
  }
  return {-400.0, -200.0, delay, delay + 100.0, delay + 200.0};
}

PulseProtocol build_fig3_protocol(const DeviceModel& model, double v_bias, double t_end) {
  PulseProtocol p;
  p.name = "fig3";
  p.v_bias = v_bias;
  p.interleaved = true;
  p.initial_g = model.bias_params(v_bias).optical_baseline;
  p.events.push_back(optical_pulse(-400.0));
  p.events.push_back(optical_pulse(-200.0));
  p.events.push_back(set_train_ending_at(0.0));
  for (double t = 100.0; t < t_end; t += 100.0) p.events.push_back(optical_pulse(t));
  sort_events(p.events);
  p.sample_times = default_sample_grid(p.events, kTraceBegin, t_end);
  p.validate();
  return p;
}

PulseProtocol build_s3_protocol(const DeviceModel& model, S3Variant variant,
                                const S3Options& options) {
  if (options.segments < 1) throw std::invalid_argument("s3 protocol: segments must be >= 1");
  if (!(options.probe_delay > 0.0) || !(options.segment_period > options.probe_delay)) {
    throw std::invalid_argument("s3 protocol: need 0 < probe_delay < segment_period");
  }
  PulseProtocol p;
  p.v_bias = options.v_bias;
  p.interleaved = true;
  p.initial_g = model.bias_params(options.v_bias).set.g_steady;
  if (variant == S3Variant::IndividualPulses) {
    p.name = "s3-1";
    for (int i = 0; i < options.segments; ++i) {
      const double set_end = static_cast<double>(i) * options.segment_period;
      p.events.push_back(set_train_ending_at(set_end, 1));
      p.events.push_back(optical_pulse(set_end + options.probe_delay));
    }
  } else {
    p.name = "s3-2";
    p.events.push_back(set_train_ending_at(0.0));
    for (int i = 0; i < options.segments; ++i) {
      p.events.push_back(
          optical_pulse(options.probe_delay + static_cast<double>(i) * options.segment_period));
    }
  }
  sort_events(p.events);
  const double t_end = static_cast<double>(options.segments) * options.segment_period;
  p.sample_times = default_sample_grid(p.events, -60.0, t_end);
  p.validate();
  return p;
}

namespace {

struct ActivePulse {
  double v_applied;
  double p_opt;
};

ActivePulse active_at(const PulseProtocol& proto, double t) {
  ActivePulse a{proto.v_read, 0.0};
  for (const auto& e : proto.events) {
    if (t < e.start || t >= e.end()) continue;
    if (e.is_electrical()) {
      a.v_applied = e.amplitude;
    } else {
      a.p_opt += e.amplitude;
    }
  }
  return a;
}

double due_time(const PulseEvent& e) {
  return (e.kind == PulseKind::SetTrain || e.kind == PulseKind::Optical) ? e.end() : e.start;
}

}  // namespace

DeviceState apply_electrical_event(const DeviceModel& model, DeviceState device, const PulseEvent& e) {
  switch (e.kind) {
    case PulseKind::Read:
      break;
    case PulseKind::Bias:
      device.bias = e.amplitude;
      break;
    case PulseKind::SetTrain: {
      // The tabulated train re-establishes the steady level it was fitted on.
      const bool tabulated = !e.delta_g && e.count == model.options().tabulated_train_length;
      if (tabulated) device.g_steady = model.bias_params(device.bias).set.g_steady;
      const double dg = e.delta_g.value_or(model.set_amplitude(device.bias, e.count));
      device = model.apply_set_event(std::move(device), e.end(), dg);
      break;
    }
    case PulseKind::Optical:
      throw std::invalid_argument("apply_electrical_event: optical event");
  }
  return device;
}

Trace run_protocol(const PulseProtocol& proto, DeviceState device, const DeviceModel& model) {
  proto.validate();
  if (!proto.events.empty() && device.clock > proto.events.front().start) {
    throw std::domain_error("run_protocol: device clock is past the first event");
  }
  device.bias = proto.v_bias;
  if (proto.initial_g) device.g_steady = *proto.initial_g;

  double last_time = proto.sample_times.empty() ? device.clock : proto.sample_times.front();
  auto drift_to = [&](double t) {
    if (proto.drift_enabled && t > last_time) {
      device = model.steady_drift(std::move(device), t - last_time, proto.drift_tau);
    }
    last_time = std::max(last_time, t);
  };

  auto apply = [&](const PulseEvent& e) {
    switch (e.kind) {
      case PulseKind::Read:
        break;
      case PulseKind::Bias:
        drift_to(e.start);
        device = apply_electrical_event(model, std::move(device), e);
        break;
      case PulseKind::SetTrain:
        drift_to(e.end());
        device = apply_electrical_event(model, std::move(device), e);
        break;
      case PulseKind::Optical:
        drift_to(e.start);
        device = model.apply_optical_pulse(std::move(device), e.amplitude, e.width, e.start);
        break;
    }
  };

  Trace trace;
  trace.rows.reserve(proto.sample_times.size());
  std::size_t next_event = 0;
  for (double t : proto.sample_times) {
    while (next_event < proto.events.size() && due_time(proto.events[next_event]) <= t) {
      apply(proto.events[next_event++]);
    }
    drift_to(t);
    const ActivePulse a = active_at(proto, t);
    TraceRow row;
    row.t = t;
    row.g = conductance_at(device, t);
    row.v_applied = a.v_applied;
    row.current = row.g * 1e-9 * row.v_applied;
    row.p_opt = a.p_opt;
    trace.rows.push_back(row);
  }
  return trace;
}

Trace subtract_baseline(const Trace& trace, const SetDecayParams& p, double t0) {
  Trace out = trace;
  for (auto& row : out.rows) {
    const double baseline = row.t >= t0 ? set_decay_value(p, row.t, t0) : p.g_steady;
    row.g -= baseline;
    row.current = row.g * 1e-9 * row.v_applied;
  }
  return out;
}

double protocol_optical_energy(const PulseProtocol& proto, double area_um2) {
  double total = 0.0;
  for (const auto& e : proto.events) {
    if (e.kind == PulseKind::Optical) total += optical_pulse_energy(e.amplitude, area_um2, e.width);
  }
  return total;
}

json protocol_to_json(const PulseProtocol& proto) {
  json events = json::array();
  for (const auto& e : proto.events) {
    json je = {{"kind", to_string(e.kind)},
               {"start", e.start},
               {"width", e.width},
               {"amplitude", e.amplitude},
               {"count", e.count}};
    if (e.delta_g) je["dg_nS"] = *e.delta_g;
    events.push_back(std::move(je));
  }
  json doc = {{"name", proto.name},
              {"v_read", proto.v_read},
              {"read_width", proto.read_width},
              {"bias_width", proto.bias_width},
              {"v_bias", proto.v_bias},
              {"interleaved", proto.interleaved},
              {"drift", {{"enabled", proto.drift_enabled}, {"tau_s", proto.drift_tau}}},
              {"events", std::move(events)},
              {"sample_times", proto.sample_times}};
  if (proto.initial_g) doc["initial_g_nS"] = *proto.initial_g;
  return doc;
}

PulseProtocol protocol_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("protocol file: expected a JSON object");
  try {
    PulseProtocol p;
    p.name = doc.value("name", std::string("custom"));
    p.v_read = doc.value("v_read", 0.6);
    p.read_width = doc.value("read_width", 0.5e-3);
    p.bias_width = doc.value("bias_width", 1.5e-3);
    p.v_bias = doc.value("v_bias", 0.0);
    p.interleaved = doc.value("interleaved", false);
    if (doc.contains("initial_g_nS")) p.initial_g = doc.at("initial_g_nS").get<double>();
    if (doc.contains("drift")) {
      const json& d = doc.at("drift");
      p.drift_enabled = d.value("enabled", false);
      p.drift_tau = d.value("tau_s", 100.0);
    }
    for (const json& je : doc.value("events", json::array())) {
      PulseEvent e;
      e.kind = pulse_kind_from_string(je.at("kind").get<std::string>());
      e.start = je.at("start").get<double>();
      e.width = je.value("width", kPulseWidth);
      e.amplitude = je.value("amplitude", 0.0);
      e.count = je.value("count", 1);
      if (je.contains("dg_nS")) e.delta_g = je.at("dg_nS").get<double>();
      p.events.push_back(e);
    }
    if (doc.contains("sample_times")) {
      p.sample_times = doc.at("sample_times").get<std::vector<double>>();
    } else {
      const json s = doc.value("sampling", json::object());
      p.sample_times = default_sample_grid(p.events, s.value("t_begin", kTraceBegin),
                                           s.value("t_end", 1000.0), s.value("per_decade", 10));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("protocol file: ") + e.what());
  }
}

}  // namespace stomem
