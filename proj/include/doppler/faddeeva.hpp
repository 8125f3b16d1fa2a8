#pragma once

#include <complex>

namespace doppler {

/// Faddeeva function w(z) = exp(-z^2) erfc(-i z), about 14 significant digits
/// over the whole complex plane.
///
/// Upper half-plane evaluation follows Gautschi's continued-fraction/Taylor
/// scheme with the region constants of Poppe and Wijers; the lower half-plane
/// uses w(z) = 2 exp(-z^2) - w(-z), which overflows for large |z| there.
std::complex<double> faddeeva_w(std::complex<double> z);

}  // namespace doppler
