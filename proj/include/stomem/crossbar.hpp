#pragma once

#include <iosfwd>
#include <vector>

#include "stomem/device_model.hpp"
#include "stomem/protocol.hpp"

namespace stomem {

inline constexpr double kDevicePitchArea = 0.5625;  // um^2

struct CrossbarOptions {
  double pitch_area = kDevicePitchArea;
  /// All devices see one bias; per-device bias changes are rejected.
  bool shared_bias_rail = false;
};

/// Independent devices with row/column electrical addressing and one optical
/// signal illuminating the whole array. No line resistance or sneak paths.
class CrossbarArray {
 public:
  CrossbarArray(DeviceModel model, int rows, int cols, double bias = 0.0, CrossbarOptions options = {});

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double pitch_area() const { return options_.pitch_area; }
  bool shared_bias_rail() const { return options_.shared_bias_rail; }
  const DeviceModel& model() const { return model_; }

  const DeviceState& device(int row, int col) const;
  void set_device(int row, int col, DeviceState state);
  double illumination(int row, int col) const;
  /// Local intensity relative to the broadcast power (default 1).
  void set_illumination(int row, int col, double multiplier);
  void set_bias(int row, int col, double bias);
  void set_rail_bias(double bias);

  /// Same pulse on every device; returns the photoresponses row-major.
  std::vector<double> broadcast_optical(double p_opt, double width, double at);

  /// Applies an electrical event to one device.
  void address_device(int row, int col, const PulseEvent& event);

  /// Incident energy of the optical events on the whole array, in pJ.
  double total_optical_energy(const std::vector<PulseEvent>& events) const;

  /// CSV `row,col,G_nS,bias_V,kernel_count` with conductances at time t.
  void write_snapshot_csv(std::ostream& out, double t) const;

 private:
  std::size_t index(int row, int col) const;

  DeviceModel model_;
  int rows_;
  int cols_;
  CrossbarOptions options_;
  std::vector<DeviceState> devices_;
  std::vector<double> illumination_;
};

}  // namespace stomem
