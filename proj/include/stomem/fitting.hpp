#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stomem/parameter_table.hpp"
#include "stomem/protocol.hpp"

namespace stomem {

enum class FitModel { SetDecay, OpticalDecay, PowerLaw };
std::string_view to_string(FitModel model);

enum class FitErrorCode { InsufficientData, NonPositiveValue };

class FitError : public std::runtime_error {
 public:
  FitError(FitErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  FitErrorCode code() const { return code_; }

 private:
  FitErrorCode code_;
};

struct FitResult {
  FitModel model = FitModel::SetDecay;
  /// Keys follow the parameter-table schema (g_steady_nS, dg_nS, gamma,
  /// tau1_s, tau2_s, beta) or, for power laws, k / ln_prefactor / prefactor.
  std::map<std::string, double> params;
  /// Unweighted root-mean-square residual in the data's units.
  double rmse = 0.0;
  /// Root-mean-square of the residuals actually minimized (equals rmse for
  /// uniform weighting).
  double weighted_rmse = 0.0;
  double r_squared = 0.0;
  /// true = excluded as an outlier (power-law fits only).
  std::vector<bool> outlier_mask;
  bool converged = false;
  int iterations = 0;
  std::size_t n_points = 0;

  nlohmann::json to_json() const;
};

SetDecayParams set_params_of(const FitResult& fit);
OpticalDecayParams optical_params_of(const FitResult& fit);

enum class Weighting {
  Uniform,
  /// Residuals divided by the measured conductance (maximum likelihood for
  /// multiplicative noise).
  Relative,
};

struct FitOptions {
  int max_iterations = 500;
  Weighting weighting = Weighting::Relative;
};

/// Least-squares fit of the SET relaxation to the samples at t >= t0.
/// Needs >= 12 such samples spanning >= 2 decades of t - t0.
FitResult fit_set_decay(const Trace& trace, double t0,
                        std::optional<SetDecayParams> init = std::nullopt,
                        const FitOptions& options = {});

/// Partial derivatives of the SET relaxation at offset s = t - t0 with
/// respect to (g_steady, delta_g, gamma, tau1, tau2, beta).
std::array<double, 6> set_decay_sensitivities(const SetDecayParams& p, double s);

/// Partial derivatives of the optical relaxation (without baseline) with
/// respect to (delta_g, gamma, tau1, tau2).
std::array<double, 4> optical_decay_sensitivities(const OpticalDecayParams& p, double s);

/// The conductance state the photoresponse relaxes on top of.
struct Baseline {
  double constant = 0.0;
  std::optional<SetDecayParams> set;
  double set_t0 = 0.0;

  static Baseline constant_level(double g) { return Baseline{g, std::nullopt, 0.0}; }
  static Baseline set_decay(const SetDecayParams& p, double t0) { return Baseline{0.0, p, t0}; }
  double at(double t) const;
};

/// Fits the optical double exponential to trace - baseline at t >= t0
/// (>= 8 samples). The fast component is always reported as tau1.
FitResult fit_optical_decay(const Trace& trace, const Baseline& baseline, double t0,
                            std::optional<OpticalDecayParams> init = std::nullopt,
                            const FitOptions& options = {});

struct OutlierPolicy {
  enum class Kind { None, SigmaClip };
  Kind kind = Kind::SigmaClip;
  double threshold = 3.0;
  int max_iterations = 5;

  static OutlierPolicy none() { return OutlierPolicy{Kind::None, 3.0, 0}; }
};

/// y = prefactor * x^k by linear least squares on (ln x, ln y). SIGMA_CLIP
/// masks points whose log residual lies more than `threshold` robust sigmas
/// (1.4826 * MAD) from the median residual and refits, up to
/// `max_iterations` times or until the mask is stable.
FitResult fit_power_law(std::span<const std::pair<double, double>> points,
                        const OutlierPolicy& policy = {});

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x (centered formulation).
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace stomem
