#pragma once
// Truncated power test functions used by the iteration machinery and by the
// positivity-condition measurements.

#include <cmath>

#include "core.hpp"

namespace ibvp {

/// psi_{t,m}(x) = 0 for x <= 0, x^t for 0 < x < m, m^{t-1} x for x >= m:
/// a power truncated to linear growth above m (keeps test functions in the
/// form domain).
inline double moser_psi(double x, double t, double m) {
    if (!(t > 0.0) || !(m > 0.0)) throw validation_error("moser_psi: t and m must be positive");
    if (x <= 0.0) return 0.0;
    if (x < m) return std::pow(x, t);
    return std::pow(m, t - 1.0) * x;
}

}  // namespace ibvp
