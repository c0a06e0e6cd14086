#include "stomem/special_functions.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stomem {

namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczosCoefficients = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace

double gamma_function(double x) {
  if (std::isnan(x)) return x;
  if (x <= 0.0 && x == std::floor(x)) {
    throw std::domain_error("gamma_function: pole at non-positive integer");
  }
  if (x < 0.5) {
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma_function(1.0 - x));
  }
  const double z = x - 1.0;
  double series = kLanczosCoefficients[0];
  for (std::size_t i = 1; i < kLanczosCoefficients.size(); ++i) {
    series += kLanczosCoefficients[i] / (z + static_cast<double>(i));
  }
  const double t = z + kLanczosG + 0.5;
  // t^(z+1/2) is split in two halves so that large arguments do not overflow
  // before the exp(-t) factor is applied.
  const double half_power = std::pow(t, 0.5 * (z + 0.5));
  return std::sqrt(2.0 * std::numbers::pi) * half_power * (half_power * std::exp(-t)) * series;
}

}  // namespace stomem
