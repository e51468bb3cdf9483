#pragma once

namespace qresp {

/// H(s, N) = sum_{i >= N} i^{-s} for s > 1, N >= 1: direct partial sum up to
/// max(N, 32) and an Euler-Maclaurin tail; relative accuracy ~1e-15.
double hurwitz_tail(double s, double N);

/// Riemann zeta, s > 1.
double zeta(double s);

}  // namespace qresp
