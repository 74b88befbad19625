#include "consol/fastmath.hpp"

#include <bit>
#include <cmath>

namespace consol {

namespace {

// Cephes double-precision coefficients (Moshier, public domain).
constexpr double kExpC1 = 6.93145751953125e-1;
constexpr double kExpC2 = 1.42860682030941723212e-6;
constexpr double kLog2E = 1.4426950408889634073599;

constexpr double kExpP[] = {1.26177193074810590878e-4, 3.02994407707441961300e-2,
                            9.99999999999999999910e-1};
constexpr double kExpQ[] = {3.00198505138664455042e-6, 2.52448340349684104192e-3,
                            2.27265548208155028766e-1, 2.00000000000000000005e0};

constexpr double kTanhP[] = {-9.64399179425052238628e-1,
                             -9.92877231001918586564e1,
                             -1.61468768441708447952e3};
constexpr double kTanhQ[] = {1.12811678491632931402e2, 2.23548839060100448583e3,
                             4.84406305325125486048e3};

inline double ldexp_int(double v, long n) {
  // 2^n by exponent-field construction; |n| stays far from the subnormal
  // range for every argument the callers produce.
  const std::uint64_t bits = static_cast<std::uint64_t>(n + 1023) << 52;
  return v * std::bit_cast<double>(bits);
}

}  // namespace

double fast_exp(double x) {
  if (x > 709.0) return std::numeric_limits<double>::infinity();
  if (x < -708.0) return 0.0;
  double n = std::floor(kLog2E * x + 0.5);
  const long ni = static_cast<long>(n);
  // x - n*ln2 in two pieces keeps the reduced argument accurate.
  x -= n * kExpC1;
  x -= n * kExpC2;
  const double xx = x * x;
  const double px = x * ((kExpP[0] * xx + kExpP[1]) * xx + kExpP[2]);
  const double qx = ((kExpQ[0] * xx + kExpQ[1]) * xx + kExpQ[2]) * xx + kExpQ[3];
  const double e = 1.0 + 2.0 * px / (qx - px);
  return ldexp_int(e, ni);
}

double fast_tanh(double x) {
  const double a = std::fabs(x);
  double r;
  if (a <= 0.625) {
    const double z = x * x;
    const double p = ((kTanhP[0] * z + kTanhP[1]) * z + kTanhP[2]) * z;
    const double q = ((z + kTanhQ[0]) * z + kTanhQ[1]) * z + kTanhQ[2];
    return x + x * p / q;
  }
  if (a > 19.06154747) return x > 0.0 ? 1.0 : -1.0;  // saturated in double
  const double e = fast_exp(2.0 * a);
  r = 1.0 - 2.0 / (e + 1.0);
  return x > 0.0 ? r : -r;
}

}  // namespace consol
