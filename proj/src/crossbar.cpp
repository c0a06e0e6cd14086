#include "stomem/crossbar.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

#include "stomem/trace_io.hpp"

namespace stomem {

CrossbarArray::CrossbarArray(DeviceModel model, int rows, int cols, double bias, CrossbarOptions options)
    : model_(std::move(model)), rows_(rows), cols_(cols), options_(options) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("crossbar: rows and cols must be >= 1");
  if (!(options_.pitch_area > 0.0)) throw std::invalid_argument("crossbar: pitch area must be > 0");
  const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  devices_.assign(n, model_.rest_state(bias));
  illumination_.assign(n, 1.0);
}

std::size_t CrossbarArray::index(int row, int col) const {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_) {
    throw std::out_of_range("crossbar: cell (" + std::to_string(row) + "," + std::to_string(col) +
                            ") outside " + std::to_string(rows_) + "x" + std::to_string(cols_) + " array");
  }
  return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col);
}

const DeviceState& CrossbarArray::device(int row, int col) const { return devices_[index(row, col)]; }

void CrossbarArray::set_device(int row, int col, DeviceState state) {
  const std::size_t i = index(row, col);
  if (options_.shared_bias_rail && state.bias != devices_[i].bias) {
    throw std::logic_error("crossbar: bias is shared by all devices");
  }
  devices_[i] = std::move(state);
}

double CrossbarArray::illumination(int row, int col) const { return illumination_[index(row, col)]; }

void CrossbarArray::set_illumination(int row, int col, double multiplier) {
  if (!(multiplier >= 0.0)) throw std::invalid_argument("crossbar: illumination multiplier must be >= 0");
  illumination_[index(row, col)] = multiplier;
}

void CrossbarArray::set_bias(int row, int col, double bias) {
  const std::size_t i = index(row, col);
  if (options_.shared_bias_rail) throw std::logic_error("crossbar: bias is shared by all devices");
  devices_[i].bias = bias;
}

void CrossbarArray::set_rail_bias(double bias) {
  for (auto& d : devices_) d.bias = bias;
}

std::vector<double> CrossbarArray::broadcast_optical(double p_opt, double width, double at) {
  for (const auto& d : devices_) {
    if (!(at >= d.clock)) throw std::domain_error("crossbar: optical pulse lies in a device's past");
  }
  std::vector<double> dg(devices_.size());
  for (std::size_t i = 0; i < devices_.size(); ++i) {
    devices_[i] = model_.apply_optical_pulse(std::move(devices_[i]), illumination_[i] * p_opt, width, at);
    dg[i] = devices_[i].kernels.back().amplitude;
  }
  return dg;
}

void CrossbarArray::address_device(int row, int col, const PulseEvent& event) {
  const std::size_t i = index(row, col);
  if (!event.is_electrical()) throw std::invalid_argument("crossbar: addressed events must be electrical");
  if (event.kind == PulseKind::Bias && options_.shared_bias_rail) {
    throw std::logic_error("crossbar: bias is shared by all devices");
  }
  devices_[i] = apply_electrical_event(model_, std::move(devices_[i]), event);
}

double CrossbarArray::total_optical_energy(const std::vector<PulseEvent>& events) const {
  double per_device = 0.0;
  for (const auto& e : events) {
    if (e.kind == PulseKind::Optical) per_device += optical_pulse_energy(e.amplitude, options_.pitch_area, e.width);
  }
  return per_device * static_cast<double>(rows_) * static_cast<double>(cols_);
}

void CrossbarArray::write_snapshot_csv(std::ostream& out, double t) const {
  out << "row,col,G_nS,bias_V,kernel_count\n";
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const DeviceState& d = devices_[index(r, c)];
      out << r << ',' << c << ',' << format_double(conductance_at(d, t)) << ',' << format_double(d.bias)
          << ',' << d.kernels.size() << '\n';
    }
  }
}

}  // namespace stomem
