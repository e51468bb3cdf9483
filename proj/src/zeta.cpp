#include "qresp/zeta.hpp"

#include <cmath>

#include "qresp/error.hpp"

namespace qresp {

namespace {

// B_{2k} / (2k)!
constexpr double kBernoulliOverFactorial[] = {
    1.0 / 12.0,          -1.0 / 720.0,       1.0 / 30240.0,          -1.0 / 1209600.0,
    1.0 / 47900160.0,    -691.0 / 1307674368000.0, 1.0 / 74724249600.0,
};

}  // namespace

double hurwitz_tail(double s, double N) {
  if (!(s > 1.0)) throw DomainError("hurwitz_tail: s must exceed 1");
  if (!(N >= 1.0)) throw DomainError("hurwitz_tail: N must be >= 1");
  N = std::floor(N);
  constexpr double kStart = 32.0;
  double head = 0.0;
  double a = N;
  while (a < kStart) {
    head += std::pow(a, -s);
    a += 1.0;
  }
  // sum_{i >= a} i^{-s} = a^{1-s}/(s-1) + a^{-s}/2 + sum_k B_2k/(2k)! s(s+1)...(s+2k-2) a^{-s-2k+1}
  double tail = std::pow(a, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(a, -s);
  double rising = s;  // s (s+1) ... (s+2k-2)
  double apow = std::pow(a, -s - 1.0);
  for (int k = 1; k <= 7; ++k) {
    tail += kBernoulliOverFactorial[k - 1] * rising * apow;
    rising *= (s + 2 * k - 1) * (s + 2 * k);
    apow /= a * a;
  }
  // Add the small direct part last so it does not lose bits to the tail.
  return tail + head;
}

double zeta(double s) { return hurwitz_tail(s, 1.0); }

}  // namespace qresp
