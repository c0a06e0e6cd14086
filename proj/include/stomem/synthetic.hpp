#pragma once

#include <utility>
#include <vector>

#include "stomem/parameter_table.hpp"
#include "stomem/protocol.hpp"
#include "stomem/rng.hpp"

namespace stomem {

/// n log-spaced offsets from s_min to s_max inclusive.
std::vector<double> log_spaced(double s_min, double s_max, int n);

/// Noise-free SET relaxation sampled at t0 + offsets, read at `v_read`.
Trace synthetic_set_trace(const SetDecayParams& p, const std::vector<double>& offsets, double t0 = 0.0,
                          double v_read = 0.6);

/// Noise-free optical relaxation on a constant baseline.
Trace synthetic_optical_trace(const OpticalDecayParams& p, double baseline, const std::vector<double>& offsets,
                              double t0 = 0.0, double v_read = 0.6);

/// G -> G * (1 + rel * N(0, 1)) on every row; the current follows.
void add_multiplicative_noise(Trace& trace, double rel, Rng& rng);

/// y = prefactor * x^k at n log-spaced x, with the listed points multiplied
/// by `outlier_factor`.
std::vector<std::pair<double, double>> synthetic_power_law(double k, double prefactor, double x_min, double x_max,
                                                           int n, const std::vector<int>& outliers = {},
                                                           double outlier_factor = 5.0);

/// Outlier positions used by the bundled power-law data sets.
inline const std::vector<int> kBundledOutliers{3, 10, 16};

}  // namespace stomem
