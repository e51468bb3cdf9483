#pragma once

#include <complex>
#include <span>
#include <vector>

namespace qresp {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// One real trigonometric term `amp * sin(2*pi*freq*x + phase)`.
struct TrigTerm {
  double amp = 0.0;
  int freq = 1;
  double phase = 0.0;
};

/// How L1 norms of a trigonometric polynomial are evaluated.
enum class L1Rule {
  /// (1/Q) sum_q |f(x_q)| on the uniform grid.
  Rectangle,
  /// Sign changes located on the grid and refined to machine precision, then
  /// integrated with the exact antiderivative.
  Exact,
};

/**
 * A real function on the circle R/Z stored as its Fourier coefficients
 * c_k, |k| <= M, of e^{2 pi i k x}.
 *
 * Coefficients are Hermitian, c_{-k} = conj(c_k). Construction from raw
 * coefficients symmetrizes and rejects inputs whose asymmetry exceeds 1e-10
 * relative to the largest coefficient.
 */
class FourierFunction {
 public:
  FourierFunction() : FourierFunction(0) {}
  explicit FourierFunction(int modes);
  FourierFunction(int modes, std::vector<cplx> coeffs);

  static FourierFunction constant(int modes, double value);
  static FourierFunction cosine(int modes, int k, double amp = 1.0);
  static FourierFunction sine(int modes, int k, double amp = 1.0);
  static FourierFunction from_terms(int modes, std::span<const TrigTerm> terms);
  /// Symmetrizes without the asymmetry check; for outputs of real operators.
  static FourierFunction symmetrized(int modes, std::vector<cplx> coeffs);

  int modes() const noexcept { return modes_; }
  /// c_k, zero outside the stored range.
  cplx coeff(int k) const noexcept {
    return (k < -modes_ || k > modes_) ? cplx{} : coeffs_[static_cast<std::size_t>(k + modes_)];
  }
  std::span<const cplx> coeffs() const noexcept { return coeffs_; }
  double mean() const noexcept { return coeffs_[static_cast<std::size_t>(modes_)].real(); }

  double operator()(double x) const { return value(x, 0); }
  /// order-th derivative at x.
  double value(double x, int order) const;
  /// Values of the order-th derivative on the uniform grid x_q = q/Q.
  std::vector<double> sample(int Q, int order = 0) const;

  FourierFunction derivative(int order) const;
  /// Periodic antiderivative F with F(0) = 0; requires mean zero.
  FourierFunction antiderivative() const;
  /// Same function with truncation order M (pads or truncates).
  FourierFunction resized(int M) const;
  FourierFunction with_mean(double mean) const;

  FourierFunction& operator+=(const FourierFunction& other);
  FourierFunction& operator-=(const FourierFunction& other);
  FourierFunction& operator*=(double s);
  friend FourierFunction operator+(FourierFunction a, const FourierFunction& b) { return a += b; }
  friend FourierFunction operator-(FourierFunction a, const FourierFunction& b) { return a -= b; }
  friend FourierFunction operator*(FourierFunction a, double s) { return a *= s; }
  friend FourierFunction operator*(double s, FourierFunction a) { return a *= s; }

  /// Integral of f*g over the circle (Parseval).
  double inner(const FourierFunction& other) const;
  double l2_norm() const;
  double max_abs_coeff() const;
  /// Largest |c_k| with |k| > M (zero when modes() <= M).
  double tail_beyond(int M) const;

 private:
  int modes_;
  std::vector<cplx> coeffs_;
};

/// Discrete Fourier interpolant of uniform-grid samples, truncated at M.
/// Throws AliasingError when samples.size() < 2M+1.
FourierFunction project(std::span<const double> samples, int M);

FourierFunction derivative(const FourierFunction& f, int order);

/// Default quadrature size 8(2M+1).
int default_quadrature(int M);

/// ||f||_{L^1} with the given rule; Q <= 0 selects default_quadrature.
double l1_norm(const FourierFunction& f, int Q = 0, L1Rule rule = L1Rule::Rectangle);

/// sum_{j<=ell} ||f^{(j)}||_{L^1}.
double sobolev_norm(const FourierFunction& f, int ell, int Q = 0,
                    L1Rule rule = L1Rule::Rectangle);

/// ||f^{(ell)}||_{L^1}, the top-order seminorm.
double sobolev_seminorm(const FourierFunction& f, int ell, int Q = 0,
                        L1Rule rule = L1Rule::Rectangle);

/// Min and max of f on the uniform Q-grid.
std::pair<double, double> grid_range(const FourierFunction& f, int Q = 0);

/// Pointwise product of grid samples projected back to M modes.
FourierFunction multiply_on_grid(const FourierFunction& f, std::span<const double> g_samples,
                                 int M);

}  // namespace qresp
