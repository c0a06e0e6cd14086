#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace stomem {

/// Relaxation after an electrical SET: one exponential plus one stretched
/// exponential. Units: nS and s.
struct SetDecayParams {
  double g_steady = 0.0;
  double delta_g = 0.0;
  double gamma = 0.0;
  double tau1 = 1.0;
  double tau2 = 1.0;
  double beta = 1.0;

  /// Throws std::domain_error naming the first violated invariant.
  void validate() const;
  bool operator==(const SetDecayParams&) const = default;
};

/// Relaxation of the photoresponse: a weighted double exponential.
struct OpticalDecayParams {
  double delta_g = 0.0;
  double gamma = 0.0;
  double tau1 = 1.0;
  double tau2 = 1.0;

  void validate() const;
  bool operator==(const OpticalDecayParams&) const = default;
};

struct BiasParams {
  double bias = 0.0;
  SetDecayParams set;
  OpticalDecayParams opt;
  /// Steady conductance observed before optical pulses at this bias (the
  /// baseline of the optical relaxation fits).
  double optical_baseline = 0.0;

  bool operator==(const BiasParams&) const = default;
};

/// Fitted parameter rows indexed by bias voltage.
///
/// Lookups between tabulated biases interpolate time constants log-linearly
/// and every other field linearly; lookups outside the tabulated range clamp
/// to the nearest end row.
class ParameterTable {
 public:
  explicit ParameterTable(std::vector<BiasParams> rows);

  /// Table compiled into the library (the three measured bias rows).
  static const ParameterTable& builtin();
  static ParameterTable from_json(const nlohmann::json& doc);
  static ParameterTable from_file(const std::filesystem::path& path);

  BiasParams at(double bias) const;
  const std::vector<BiasParams>& rows() const { return rows_; }
  double min_bias() const { return rows_.front().bias; }
  double max_bias() const { return rows_.back().bias; }

  nlohmann::json to_json() const;

 private:
  std::vector<BiasParams> rows_;
};

/// Resolves the table used by the CLI: an explicit path wins, then the
/// STOMEM_PARAMS environment variable, then the builtin table. `source`
/// receives "builtin" or the path that was loaded.
ParameterTable resolve_parameter_table(const std::string& explicit_path, std::string* source);

inline constexpr std::string_view kParamsEnvVar = "STOMEM_PARAMS";

}  // namespace stomem
