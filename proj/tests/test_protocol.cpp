#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stomem/device_model.hpp"
#include "stomem/protocol.hpp"

using namespace stomem;

namespace {

Trace run(const PulseProtocol& p, const DeviceModel& model) {
  double clock = p.sample_times.front();
  if (!p.events.empty()) clock = std::min(clock, p.events.front().start);
  return run_protocol(p, model.rest_state(p.v_bias, clock), model);
}

PulseProtocol single_optical(double baseline, double p_opt, double bias) {
  PulseProtocol p;
  p.name = "single-optical";
  p.v_bias = bias;
  p.initial_g = baseline;
  p.events.push_back(optical_pulse(0.0, p_opt));
  p.sample_times = default_sample_grid(p.events, -10.0, 1e3);
  return p;
}

}  // namespace

TEST_CASE("mean applied voltage") {
  CHECK(mean_applied_voltage(0.6, 0.6) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(mean_applied_voltage(0.6, 0.0) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(mean_applied_voltage(0.6, -0.6) == doctest::Approx(-0.3).epsilon(1e-15));
}

TEST_CASE("optical pulse energy") {
  CHECK(optical_pulse_energy(65.0, 0.5625, 1e-3) == doctest::Approx(0.365625).epsilon(1e-13));
  CHECK(optical_pulse_energy(0.0, 0.5625, 1e-3) == 0.0);
  CHECK(optical_pulse_energy(130.0, 0.5625, 1e-3) == doctest::Approx(0.73125).epsilon(1e-13));
  CHECK_THROWS(optical_pulse_energy(-1.0, 0.5625, 1e-3));
}

TEST_CASE("pulse kinds round-trip through their names") {
  for (PulseKind k : {PulseKind::Read, PulseKind::Bias, PulseKind::SetTrain, PulseKind::Optical}) {
    CHECK(pulse_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(pulse_kind_from_string("LASER"), std::invalid_argument);
}

TEST_CASE("SET trains end where asked") {
  const PulseEvent e = set_train_ending_at(0.0);
  CHECK(e.count == 100);
  CHECK(e.amplitude == kSetVoltage);
  CHECK(e.end() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.start == doctest::Approx(-0.1));
}

TEST_CASE("sample grid") {
  const std::vector<PulseEvent> events{set_train_ending_at(0.0), optical_pulse(100.0)};
  const std::vector<double> grid = default_sample_grid(events, -600.0, 1000.0);
  CHECK(grid.front() == -600.0);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
  for (double t : grid) CHECK_FALSE((t > events[0].start && t < events[0].end()));
  // Pre-event grid is 1 s wide.
  CHECK(std::count_if(grid.begin(), grid.end(), [](double t) { return t < -0.1; }) >= 599);
  CHECK(std::find(grid.begin(), grid.end(), 0.001) != grid.end());
  CHECK_THROWS_AS(default_sample_grid(events, 5.0, 5.0), std::invalid_argument);
}

TEST_CASE("timing protocol builder") {
  const DeviceModel model;
  const PulseProtocol one = build_fig2_protocol(model, timing_measurement_times(1));
  CHECK(one.v_bias == 0.6);
  CHECK_FALSE(one.interleaved);
  CHECK(one.events.size() == 6);
  CHECK(std::count_if(one.events.begin(), one.events.end(),
                      [](const PulseEvent& e) { return e.kind == PulseKind::Optical; }) == 5);
  CHECK_THROWS_AS(build_fig2_protocol(model, {10.0, 5.0}), std::invalid_argument);

  const PulseProtocol empty = build_fig2_protocol(model, {});
  REQUIRE(empty.events.size() == 1);
  CHECK(empty.events.front().kind == PulseKind::SetTrain);

  CHECK(timing_measurement_times(2)[2] == 10.0);
  CHECK_THROWS(timing_measurement_times(3));
}

TEST_CASE("timing protocol: first post-SET response is larger for the shorter delay") {
  const DeviceModel model;
  auto response = [&](int measurement) {
    const std::vector<double> times = timing_measurement_times(measurement);
    const PulseProtocol p = build_fig2_protocol(model, times);
    DeviceState s = model.rest_state(p.v_bias, p.sample_times.front());
    s.g_steady = *p.initial_g;
    std::size_t n = 0;
    for (const auto& e : p.events) {
      if (e.kind == PulseKind::Optical) {
        s = model.apply_optical_pulse(s, e.amplitude, e.width, e.start);
        if (e.start > 0.0 && n++ == 0) return s.kernels.back().amplitude;
      } else {
        s.g_steady = model.bias_params(p.v_bias).set.g_steady;
        s = model.apply_set_event(s, e.end());
      }
    }
    return 0.0;
  };
  CHECK(response(1) > response(2));
}

TEST_CASE("interleaved bias protocol builder") {
  const DeviceModel model;
  const PulseProtocol p = build_fig3_protocol(model, 0.6);
  CHECK(p.interleaved);
  CHECK(*p.initial_g == 9.7);
  CHECK(*build_fig3_protocol(model, -0.6).initial_g == 0.5);
  CHECK(p.sample_times.front() == kTraceBegin);
  bool has_minus_200 = false;
  for (const auto& e : p.events) has_minus_200 = has_minus_200 || (e.kind == PulseKind::Optical && e.start == -200.0);
  CHECK(has_minus_200);

  const Trace a = run(p, model);
  const Trace b = run(build_fig3_protocol(model, 0.6), model);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].g == b.rows[i].g);
  CHECK(a.rows.front().g == 9.7);
}

TEST_CASE("interleaved protocol at 0 V follows the tabulated SET relaxation after the train") {
  const DeviceModel model;
  const PulseProtocol p = build_fig3_protocol(model, 0.0);
  const Trace trace = run(p, model);
  const SetDecayParams set = model.bias_params(0.0).set;
  int checked = 0;
  for (const auto& row : trace.rows) {
    if (row.t < 0.0 || row.t >= 100.0) continue;
    CHECK(std::abs(row.g - set_decay_value(set, row.t, 0.0)) < 1e-9);
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("interleaved protocols report the bias between reads") {
  const DeviceModel model;
  const PulseProtocol p = build_fig3_protocol(model, -0.6);
  const Trace trace = run(p, model);
  for (const auto& row : trace.rows) {
    CHECK(row.current == doctest::Approx(row.g * 1e-9 * row.v_applied).epsilon(1e-15));
    CHECK(read_power_nw(row) == doctest::Approx(row.g * row.v_applied * row.v_applied));
  }
}

TEST_CASE("single-event protocols match the closed forms") {
  const DeviceModel model;
  for (const auto& row : model.table().rows()) {
    CAPTURE(row.bias);
    const Trace set_trace = run(build_fig2_protocol(model, {}, row.bias), model);
    for (const auto& r : set_trace.rows) {
      const double expected = r.t >= 0.0 ? set_decay_value(row.set, r.t, 0.0) : row.optical_baseline;
      CHECK(std::abs(r.g - expected) < 1e-9);
    }

    const PulseProtocol opt = single_optical(row.optical_baseline, 65.0, row.bias);
    const Trace opt_trace = run(opt, model);
    OpticalDecayParams p = row.opt;
    p.delta_g = photoresponse(model.law(), row.optical_baseline, 65.0);
    const double t0 = opt.events.front().end();
    for (const auto& r : opt_trace.rows) {
      const double expected = r.t >= t0 ? optical_decay_value(p, row.optical_baseline, r.t, t0) : row.optical_baseline;
      CHECK(std::abs(r.g - expected) < 1e-9);
    }
  }
}

TEST_CASE("no events gives a flat trace") {
  const DeviceModel model;
  PulseProtocol p;
  p.sample_times = {0.0, 1.0, 10.0, 1e4};
  p.initial_g = 2.5;
  const Trace trace = run_protocol(p, model.rest_state(0.0), model);
  for (const auto& row : trace.rows) CHECK(row.g == 2.5);
}

TEST_CASE("segmented SET protocols") {
  const DeviceModel model;
  const PulseProtocol one = build_s3_protocol(model, S3Variant::IndividualPulses);
  const PulseProtocol two = build_s3_protocol(model, S3Variant::PulseTrain);
  auto count = [](const PulseProtocol& p, PulseKind k) {
    return std::count_if(p.events.begin(), p.events.end(), [k](const PulseEvent& e) { return e.kind == k; });
  };
  CHECK(count(one, PulseKind::SetTrain) == 5);
  CHECK(count(one, PulseKind::Optical) == 5);
  CHECK(count(two, PulseKind::SetTrain) == 1);
  CHECK(count(two, PulseKind::Optical) == 5);
  for (const auto& e : one.events) {
    if (e.kind == PulseKind::SetTrain) CHECK(e.count == 1);
  }
  S3Options opts;
  opts.segments = 3;
  CHECK(count(build_s3_protocol(model, S3Variant::IndividualPulses, opts), PulseKind::SetTrain) == 3);
  opts.segments = 0;
  CHECK_THROWS_AS(build_s3_protocol(model, S3Variant::PulseTrain, opts), std::invalid_argument);

  // Single pulses add 1/100 of the tabulated train amplitude each.
  const Trace trace = run(one, model);
  CHECK(trace.rows.back().g > model.bias_params(0.0).set.g_steady);
}

TEST_CASE("protocol validation") {
  PulseProtocol p;
  p.events = {set_train_ending_at(0.0), set_train_ending_at(0.05)};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.events = {optical_pulse(5.0), optical_pulse(1.0)};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.events = {optical_pulse(1.0)};
  p.sample_times = {1.0, 1.0};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("run_protocol rejects a device clock past the first event") {
  const DeviceModel model;
  const PulseProtocol p = build_fig3_protocol(model, 0.0);
  CHECK_THROWS_AS(run_protocol(p, model.rest_state(0.0, 0.0), model), std::domain_error);
}

TEST_CASE("drift raises a low starting level") {
  const DeviceModel model;
  PulseProtocol p;
  p.v_bias = 0.0;
  p.initial_g = 0.4;
  p.drift_enabled = true;
  p.sample_times = {0.0, 100.0};
  const Trace trace = run_protocol(p, model.rest_state(0.0), model);
  CHECK(trace.rows[1].g == doctest::Approx(2.04351345295425).epsilon(1e-13));
}

TEST_CASE("baseline subtraction") {
  const DeviceModel model;
  const SetDecayParams set = model.bias_params(0.0).set;
  const Trace trace = run(build_fig2_protocol(model, {}, 0.0), model);
  const Trace flat = subtract_baseline(trace, set, 0.0);
  for (const auto& row : flat.rows) {
    if (row.t >= 0.0) CHECK(std::abs(row.g) < 1e-9);
  }

  // An optical pulse on a steady level leaves a pure double exponential.
  const PulseProtocol opt = single_optical(3.0, 65.0, 0.0);
  SetDecayParams steady = set;
  steady.delta_g = 0.0;
  const Trace residual = subtract_baseline(run(opt, model), steady, 0.0);
  OpticalDecayParams op = model.bias_params(0.0).opt;
  op.delta_g = std::sqrt(3.0);
  for (const auto& row : residual.rows) {
    if (row.t >= 1e-3) CHECK(row.g == doctest::Approx(optical_decay_value(op, 0.0, row.t, 1e-3)).epsilon(1e-12));
  }
}

TEST_CASE("protocol energy is additive") {
  const DeviceModel model;
  const PulseProtocol p = build_fig3_protocol(model, 0.0);
  const auto n = std::count_if(p.events.begin(), p.events.end(),
                               [](const PulseEvent& e) { return e.kind == PulseKind::Optical; });
  CHECK(protocol_optical_energy(p, 0.5625) == doctest::Approx(0.365625 * static_cast<double>(n)));
}

TEST_CASE("protocol JSON round-trip") {
  const DeviceModel model;
  PulseProtocol p = build_fig3_protocol(model, 0.6);
  p.events[0].delta_g = 1.5;
  const PulseProtocol q = protocol_from_json(protocol_to_json(p));
  CHECK(q.name == p.name);
  CHECK(q.sample_times == p.sample_times);
  REQUIRE(q.events.size() == p.events.size());
  CHECK(q.events[0].delta_g == p.events[0].delta_g);
  CHECK(*q.initial_g == *p.initial_g);
  CHECK(q.interleaved);

  nlohmann::json generated = {{"v_bias", 0.0},
                              {"events", {{{"kind", "SET_TRAIN"}, {"start", -0.1}, {"count", 100}, {"amplitude", 4.0}}}},
                              {"sampling", {{"t_begin", -10.0}, {"t_end", 100.0}}}};
  const PulseProtocol r = protocol_from_json(generated);
  CHECK(r.sample_times.front() == -10.0);
  CHECK_THROWS_AS(protocol_from_json(nlohmann::json{{"events", {{{"kind", "NOPE"}, {"start", 0}}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(protocol_from_json(nlohmann::json::array()), std::invalid_argument);
}
