#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "stomem/crossbar.hpp"

using namespace stomem;

namespace {

bool same_state(const DeviceState& a, const DeviceState& b) {
  if (a.g_steady != b.g_steady || a.bias != b.bias || a.clock != b.clock) return false;
  if (a.kernels.size() != b.kernels.size()) return false;
  for (std::size_t i = 0; i < a.kernels.size(); ++i) {
    if (a.kernels[i].t0 != b.kernels[i].t0 || a.kernels[i].amplitude != b.kernels[i].amplitude) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("identical devices respond identically") {
  CrossbarArray arr(DeviceModel{}, 3, 4);
  const std::vector<double> dg = arr.broadcast_optical(kReferencePower, kPulseWidth, 1.0);
  REQUIRE(dg.size() == 12);
  for (double x : dg) CHECK(x == dg.front());
  CHECK(dg.front() > 0.0);
}

TEST_CASE("photoresponse follows each device's own conductance") {
  const DeviceModel model;
  CrossbarArray arr(model, 1, 3);
  const double levels[3] = {1.0, 4.0, 16.0};
  for (int c = 0; c < 3; ++c) {
    DeviceState s = model.rest_state(0.0);
    s.g_steady = levels[c];
    arr.set_device(0, c, s);
  }
  const std::vector<double> dg = arr.broadcast_optical(kReferencePower, kPulseWidth, 0.0);
  CHECK(dg[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dg[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(dg[2] == doctest::Approx(4.0).epsilon(1e-12));

  for (double x : arr.broadcast_optical(0.0, kPulseWidth, 1.0)) CHECK(x == 0.0);
}

TEST_CASE("illumination multipliers scale the local power") {
  const DeviceModel model;
  CrossbarArray arr(model, 1, 2);
  arr.set_illumination(0, 1, 0.0);
  const std::vector<double> dg = arr.broadcast_optical(kReferencePower, kPulseWidth, 0.0);
  CHECK(dg[0] > 0.0);
  CHECK(dg[1] == 0.0);
  CHECK(arr.illumination(0, 0) == 1.0);
  CHECK_THROWS_AS(arr.set_illumination(0, 0, -1.0), std::invalid_argument);
}

TEST_CASE("broadcast equals per-device application") {
  const DeviceModel model;
  CrossbarArray arr(model, 2, 2);
  arr.address_device(1, 0, set_train_ending_at(0.0));
  arr.set_bias(0, 1, 0.6);
  std::vector<DeviceState> before;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) before.push_back(arr.device(r, c));
  const std::vector<double> dg = arr.broadcast_optical(kReferencePower, kPulseWidth, 2.0);
  for (std::size_t i : {3u, 0u, 2u, 1u}) {
    const DeviceState single = model.apply_optical_pulse(before[i], kReferencePower, kPulseWidth, 2.0);
    CHECK(same_state(single, arr.device(static_cast<int>(i / 2), static_cast<int>(i % 2))));
    CHECK(dg[i] == single.kernels.back().amplitude);
  }
}

TEST_CASE("addressing touches one device and commutes") {
  const DeviceModel model;
  CrossbarArray a(model, 2, 2);
  CrossbarArray b(model, 2, 2);
  const DeviceState untouched = a.device(0, 1);
  a.address_device(0, 0, set_train_ending_at(0.0));
  CHECK(same_state(a.device(0, 1), untouched));
  CHECK(a.device(0, 0).kernels.size() == 1);

  a.address_device(1, 1, set_train_ending_at(0.5, 10));
  b.address_device(1, 1, set_train_ending_at(0.5, 10));
  b.address_device(0, 0, set_train_ending_at(0.0));
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) CHECK(same_state(a.device(r, c), b.device(r, c)));

  CHECK_THROWS_AS(a.address_device(0, 0, optical_pulse(5.0)), std::invalid_argument);
}

TEST_CASE("addressed cell reproduces the single-device timing run") {
  const DeviceModel model;
  const std::vector<double> pulses{0.1, 100.1, 200.1};
  const PulseProtocol proto = build_fig2_protocol(model, pulses, 0.6);
  const Trace reference = run_protocol(proto, model.rest_state(0.6, kTraceBegin), model);

  CrossbarArray arr(model, 2, 2, 0.6);
  arr.address_device(0, 0, set_train_ending_at(0.0));
  std::size_t next = 0;
  std::size_t checked = 0;
  for (const auto& row : reference.rows) {
    if (row.t < 0.0) continue;
    while (next < pulses.size() && pulses[next] + kPulseWidth <= row.t) arr.broadcast_optical(kReferencePower, kPulseWidth, pulses[next++]);
    if (next < pulses.size() && row.t > pulses[next]) continue;  // inside a pulse
    CHECK(conductance_at(arr.device(0, 0), row.t) == doctest::Approx(row.g).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("array energy") {
  const DeviceModel model;
  CHECK(CrossbarArray(model, 1, 1).total_optical_energy({optical_pulse(0.0)}) ==
        doctest::Approx(0.365625).epsilon(1e-12));
  CHECK(CrossbarArray(model, 2, 2).total_optical_energy({optical_pulse(0.0)}) ==
        doctest::Approx(1.4625).epsilon(1e-12));
  CHECK(CrossbarArray(model, 2, 2).total_optical_energy({}) == 0.0);
  const std::vector<PulseEvent> three{optical_pulse(0.0), set_train_ending_at(1.0), optical_pulse(2.0),
                                      optical_pulse(3.0)};
  CHECK(CrossbarArray(model, 3, 5).total_optical_energy(three) ==
        doctest::Approx(15 * 3 * 0.365625).epsilon(1e-12));
}

TEST_CASE("index and configuration errors") {
  const DeviceModel model;
  CrossbarArray arr(model, 2, 3);
  CHECK_THROWS_AS(arr.device(2, 0), std::out_of_range);
  CHECK_THROWS_AS(arr.device(0, -1), std::out_of_range);
  CHECK_THROWS_AS(arr.address_device(0, 3, set_train_ending_at(0.0)), std::out_of_range);
  CHECK_THROWS_AS(CrossbarArray(model, 0, 3), std::invalid_argument);
  CrossbarOptions bad;
  bad.pitch_area = 0.0;
  CHECK_THROWS_AS(CrossbarArray(model, 1, 1, 0.0, bad), std::invalid_argument);
  CHECK_THROWS(arr.broadcast_optical(kReferencePower, kPulseWidth, -1.0));
}

TEST_CASE("shared bias rail") {
  const DeviceModel model;
  CrossbarOptions opts;
  opts.shared_bias_rail = true;
  CrossbarArray arr(model, 2, 2, 0.0, opts);
  CHECK_THROWS_AS(arr.set_bias(0, 0, 0.6), std::logic_error);
  PulseEvent bias;
  bias.kind = PulseKind::Bias;
  bias.start = 1.0;
  bias.amplitude = 0.6;
  CHECK_THROWS_AS(arr.address_device(0, 0, bias), std::logic_error);
  arr.set_rail_bias(-0.6);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) CHECK(arr.device(r, c).bias == -0.6);
}

TEST_CASE("snapshot csv") {
  const DeviceModel model;
  CrossbarArray arr(model, 1, 2);
  arr.address_device(0, 1, set_train_ending_at(0.0));
  std::ostringstream out;
  arr.write_snapshot_csv(out, 0.0);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "row,col,G_nS,bias_V,kernel_count");
  std::getline(in, line);
  CHECK(line.rfind("0,0,", 0) == 0);
  CHECK(line.substr(line.size() - 2) == ",0");
  std::getline(in, line);
  CHECK(line.substr(line.size() - 2) == ",1");
}
