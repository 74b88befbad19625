#pragma once

#include <cstdint>

namespace consol {

// tanh and exp with ~1-2 ulp accuracy (Cephes rational approximations).
// They replace libm in the evaluation hot path: several times faster, and
// pure arithmetic, so results do not depend on the host's libm build.
double fast_exp(double x);
double fast_tanh(double x);

}  // namespace consol
