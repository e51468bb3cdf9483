#include "qresp/polynomial.hpp"

#include <cmath>
#include <sstream>

#include "qresp/error.hpp"

namespace qresp {

namespace {

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw DomainError("FormalPolynomial: coefficient overflow");
  return r;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw DomainError("FormalPolynomial: coefficient overflow");
  return r;
}

void trim(FormalPolynomial::Exponents& e) {
  while (!e.empty() && e.back() == 0) e.pop_back();
}

}  // namespace

FormalPolynomial FormalPolynomial::constant(std::int64_t c) { return monomial(c, {}); }

FormalPolynomial FormalPolynomial::variable(int index) {
  if (index < 1) throw DomainError("FormalPolynomial: variable index must be >= 1");
  Exponents e(static_cast<std::size_t>(index), 0);
  e.back() = 1;
  return monomial(1, std::move(e));
}

FormalPolynomial FormalPolynomial::monomial(std::int64_t c, Exponents exps) {
  for (int a : exps) {
    if (a < 0) throw DomainError("FormalPolynomial: negative exponent");
  }
  trim(exps);
  FormalPolynomial p;
  p.add_term(exps, c);
  return p;
}

void FormalPolynomial::add_term(const Exponents& e, std::int64_t c) {
  if (c == 0) return;
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second = checked_add(it->second, c);
    if (it->second == 0) terms_.erase(it);
  }
}

int FormalPolynomial::max_variable() const {
  int m = 0;
  for (const auto& [e, c] : terms_) m = std::max(m, static_cast<int>(e.size()));
  return m;
}

FormalPolynomial& FormalPolynomial::operator+=(const FormalPolynomial& other) {
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

FormalPolynomial& FormalPolynomial::operator-=(const FormalPolynomial& other) {
  for (const auto& [e, c] : other.terms_) add_term(e, checked_mul(c, -1));
  return *this;
}

FormalPolynomial operator*(const FormalPolynomial& a, const FormalPolynomial& b) {
  FormalPolynomial out;
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      FormalPolynomial::Exponents e(std::max(ea.size(), eb.size()), 0);
      for (std::size_t i = 0; i < ea.size(); ++i) e[i] += ea[i];
      for (std::size_t i = 0; i < eb.size(); ++i) e[i] += eb[i];
      out.add_term(e, checked_mul(ca, cb));
    }
  }
  return out;
}

FormalPolynomial operator*(std::int64_t c, const FormalPolynomial& a) {
  return FormalPolynomial::constant(c) * a;
}

double FormalPolynomial::evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) < max_variable()) {
    throw DomainError("FormalPolynomial::evaluate: needs " + std::to_string(max_variable()) + " values");
  }
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = static_cast<double>(c);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i]) m *= std::pow(x[i], e[i]);
    }
    sum += m;
  }
  return sum;
}

FormalPolynomial FormalPolynomial::abs_coeffs() const {
  FormalPolynomial out;
  for (const auto& [e, c] : terms_) out.terms_.emplace(e, c < 0 ? checked_mul(c, -1) : c);
  return out;
}

std::string FormalPolynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    const std::int64_t mag = c < 0 ? -c : c;
    if (first) {
      if (c < 0) os << '-';
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    std::ostringstream mono;
    bool any = false;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!e[i]) continue;
      if (any) mono << '*';
      mono << 'x' << (i + 1);
      if (e[i] > 1) mono << '^' << e[i];
      any = true;
    }
    if (!any) {
      os << mag;
    } else if (mag != 1) {
      os << mag << '*' << mono.str();
    } else {
      os << mono.str();
    }
    first = false;
  }
  return os.str();
}

FormalPolynomial formal_derivative(const FormalPolynomial& p) {
  FormalPolynomial out;
  for (const auto& [e, c] : p.terms()) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!e[i]) continue;
      FormalPolynomial::Exponents d = e;
      if (d.size() < i + 2) d.resize(i + 2, 0);
      d[i] -= 1;
      d[i + 1] += 1;
      out += FormalPolynomial::monomial(checked_mul(c, e[i]), std::move(d));
    }
  }
  return out;
}

const char* to_string(GVariant v) { return v == GVariant::Paper ? "paper" : "corrected"; }

std::vector<FormalPolynomial> g_polynomials(int ell, GVariant variant, int smoothness) {
  if (ell < 0) throw DomainError("g_polynomials: ell must be nonnegative");
  if (ell > smoothness - 1) {
    throw DomainError("g_polynomials: ell = " + std::to_string(ell) + " exceeds smoothness order " +
                      std::to_string(smoothness) + " - 1");
  }
  const auto x1 = FormalPolynomial::variable(1);
  const auto x2 = FormalPolynomial::variable(2);
  std::vector<FormalPolynomial> G{FormalPolynomial::constant(1)};
  for (int l = 0; l < ell; ++l) {
    const std::int64_t c = variant == GVariant::Paper ? 1 - 2 * l : -(2 * l + 1);
    std::vector<FormalPolynomial> next(static_cast<std::size_t>(l + 2));
    for (int k = 0; k <= l; ++k) {
      FormalPolynomial inner = formal_derivative(G[static_cast<std::size_t>(k)]);
      if (k > 0) inner += G[static_cast<std::size_t>(k - 1)];
      next[static_cast<std::size_t>(k)] = c * (x2 * G[static_cast<std::size_t>(k)]) + x1 * inner;
    }
    FormalPolynomial top = FormalPolynomial::constant(1);
    for (int i = 0; i <= l; ++i) top = top * x1;
    next[static_cast<std::size_t>(l + 1)] = top;
    G = std::move(next);
  }
  return G;
}

}  // namespace qresp
