#pragma once

namespace stomem {

/// Gamma function via the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2. Relative error is below 1e-13 on [0.5, 100].
/// Throws std::domain_error at the poles (0, -1, -2, ...).
double gamma_function(double x);

}  // namespace stomem
