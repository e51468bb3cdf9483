#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qresp {

/**
 * Polynomial in x_1, x_2, ... with integer coefficients.
 *
 * A monomial is stored as its exponent vector (entry i is the power of
 * x_{i+1}) with trailing zeros trimmed, so the ordering of the term map is
 * lexicographic in exponents. Zero coefficients are never stored.
 */
class FormalPolynomial {
 public:
  using Exponents = std::vector<int>;

  FormalPolynomial() = default;
  static FormalPolynomial constant(std::int64_t c);
  /// x_index, index >= 1.
  static FormalPolynomial variable(int index);
  static FormalPolynomial monomial(std::int64_t c, Exponents exps);

  const std::map<Exponents, std::int64_t>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  /// Largest variable index appearing (0 for constants).
  int max_variable() const;

  FormalPolynomial& operator+=(const FormalPolynomial& other);
  FormalPolynomial& operator-=(const FormalPolynomial& other);
  friend FormalPolynomial operator+(FormalPolynomial a, const FormalPolynomial& b) { return a += b; }
  friend FormalPolynomial operator-(FormalPolynomial a, const FormalPolynomial& b) { return a -= b; }
  friend FormalPolynomial operator*(const FormalPolynomial& a, const FormalPolynomial& b);
  friend FormalPolynomial operator*(std::int64_t c, const FormalPolynomial& a);
  friend bool operator==(const FormalPolynomial& a, const FormalPolynomial& b) { return a.terms_ == b.terms_; }

  /// x[i] is the value of x_{i+1}.
  double evaluate(std::span<const double> x) const;
  FormalPolynomial abs_coeffs() const;
  /// Like "-x2^2 + x1*x3", terms in exponent-lexicographic order.
  std::string to_string() const;

 private:
  void add_term(const Exponents& e, std::int64_t c);
  std::map<Exponents, std::int64_t> terms_;
};

/// Linear extension of x_j -> x_{j+1} with the Leibniz rule.
FormalPolynomial formal_derivative(const FormalPolynomial& p);

enum class GVariant {
  Paper,      ///< G_{l+1,k} = (1-2l) x2 G_{l,k} + x1 (G'_{l,k} + G_{l,k-1})
  Corrected,  ///< same with -(2l+1) in place of (1-2l)
};

const char* to_string(GVariant v);

/// G_{ell,0..ell}. Throws DomainError unless 0 <= ell <= smoothness-1.
std::vector<FormalPolynomial> g_polynomials(int ell, GVariant variant, int smoothness = 8);

}  // namespace qresp
