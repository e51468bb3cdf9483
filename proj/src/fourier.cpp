#include "qresp/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "qresp/error.hpp"

namespace qresp {

namespace {

// e^{2 pi i m / Q}, m = 0..Q-1, shared across threads.
std::shared_ptr<const std::vector<cplx>> roots_of_unity(int Q) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const std::vector<cplx>>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(Q);
  if (it != cache.end()) return it->second;
  auto table = std::make_shared<std::vector<cplx>>(static_cast<std::size_t>(Q));
  for (int m = 0; m < Q; ++m) {
    (*table)[static_cast<std::size_t>(m)] = std::polar(1.0, kTwoPi * m / Q);
  }
  cache.emplace(Q, table);
  return table;
}

cplx ik_power(int k, int order) {
  cplx factor{1.0, 0.0};
  const cplx ik{0.0, kTwoPi * k};
  for (int i = 0; i < order; ++i) factor *= ik;
  return factor;
}

}  // namespace

FourierFunction::FourierFunction(int modes)
    : modes_(modes), coeffs_(static_cast<std::size_t>(2 * modes + 1)) {
  if (modes < 0) throw DomainError("FourierFunction: negative truncation order");
}

FourierFunction::FourierFunction(int modes, std::vector<cplx> coeffs) : FourierFunction(modes) {
  if (coeffs.size() != coeffs_.size()) {
    throw DomainError("FourierFunction: expected " + std::to_string(coeffs_.size()) +
                      " coefficients, got " + std::to_string(coeffs.size()));
  }
  double scale = 1.0;
  for (const auto& c : coeffs) scale = std::max(scale, std::abs(c));
  for (int k = 0; k <= modes; ++k) {
    const cplx& pos = coeffs[static_cast<std::size_t>(modes + k)];
    const cplx& neg = coeffs[static_cast<std::size_t>(modes - k)];
    if (std::abs(pos - std::conj(neg)) > 1e-10 * scale) {
      throw DomainError("FourierFunction: coefficients are not Hermitian at k=" +
                        std::to_string(k));
    }
  }
  *this = symmetrized(modes, std::move(coeffs));
}

FourierFunction FourierFunction::symmetrized(int modes, std::vector<cplx> coeffs) {
  FourierFunction f(modes);
  if (coeffs.size() != f.coeffs_.size()) {
    throw DomainError("FourierFunction: coefficient count mismatch");
  }
  const auto m = static_cast<std::size_t>(modes);
  f.coeffs_[m] = cplx{coeffs[m].real(), 0.0};
  for (std::size_t k = 1; k <= m; ++k) {
    const cplx avg = 0.5 * (coeffs[m + k] + std::conj(coeffs[m - k]));
    f.coeffs_[m + k] = avg;
    f.coeffs_[m - k] = std::conj(avg);
  }
  return f;
}

FourierFunction FourierFunction::constant(int modes, double value) {
  FourierFunction f(modes);
  f.coeffs_[static_cast<std::size_t>(modes)] = value;
  return f;
}

FourierFunction FourierFunction::cosine(int modes, int k, double amp) {
  const TrigTerm term{amp, k, kTwoPi / 4};
  return from_terms(modes, std::span(&term, 1));
}

FourierFunction FourierFunction::sine(int modes, int k, double amp) {
  const TrigTerm term{amp, k, 0.0};
  return from_terms(modes, std::span(&term, 1));
}

FourierFunction FourierFunction::from_terms(int modes, std::span<const TrigTerm> terms) {
  FourierFunction f(modes);
  for (const auto& t : terms) {
    if (t.freq < 0) throw DomainError("trig term with negative frequency");
    if (t.freq > modes) {
      throw AliasingError("trig term frequency " + std::to_string(t.freq) +
                          " exceeds truncation order " + std::to_string(modes));
    }
    if (t.freq == 0) {
      f.coeffs_[static_cast<std::size_t>(modes)] += t.amp * std::sin(t.phase);
      continue;
    }
    // amp sin(theta) = amp (e^{i theta} - e^{-i theta}) / (2i)
    const cplx c = t.amp * std::polar(1.0, t.phase) / cplx{0.0, 2.0};
    f.coeffs_[static_cast<std::size_t>(modes + t.freq)] += c;
    f.coeffs_[static_cast<std::size_t>(modes - t.freq)] += std::conj(c);
  }
  return f;
}

double FourierFunction::value(double x, int order) const {
  const cplx z = std::polar(1.0, kTwoPi * (x - std::floor(x)));
  cplx zk{1.0, 0.0};
  double acc = order == 0 ? coeffs_[static_cast<std::size_t>(modes_)].real() : 0.0;
  for (int k = 1; k <= modes_; ++k) {
    zk *= z;
    acc += 2.0 * (coeffs_[static_cast<std::size_t>(modes_ + k)] * ik_power(k, order) * zk).real();
  }
  return acc;
}

std::vector<double> FourierFunction::sample(int Q, int order) const {
  if (Q < 1) throw DomainError("sample: Q must be positive");
  const auto table = roots_of_unity(Q);
  std::vector<cplx> d(static_cast<std::size_t>(modes_ + 1));
  for (int k = 0; k <= modes_; ++k) {
    d[static_cast<std::size_t>(k)] =
        coeffs_[static_cast<std::size_t>(modes_ + k)] * ik_power(k, order);
  }
  std::vector<double> out(static_cast<std::size_t>(Q));
  for (int q = 0; q < Q; ++q) {
    double acc = d[0].real();
    long long idx = 0;
    for (int k = 1; k <= modes_; ++k) {
      idx += q;
      if (idx >= Q) idx %= Q;
      acc += 2.0 * (d[static_cast<std::size_t>(k)] * (*table)[static_cast<std::size_t>(idx)]).real();
    }
    out[static_cast<std::size_t>(q)] = acc;
  }
  return out;
}

FourierFunction FourierFunction::derivative(int order) const {
  if (order < 0) throw DomainError("derivative: negative order");
  FourierFunction out(modes_);
  for (int k = -modes_; k <= modes_; ++k) {
    out.coeffs_[static_cast<std::size_t>(k + modes_)] =
        coeffs_[static_cast<std::size_t>(k + modes_)] * ik_power(k, order);
  }
  return out;
}

FourierFunction FourierFunction::antiderivative() const {
  if (std::abs(mean()) > 1e-12 * std::max(1.0, max_abs_coeff())) {
    throw DomainError("antiderivative: function must have zero mean");
  }
  FourierFunction out(modes_);
  double at_zero = 0.0;
  for (int k = -modes_; k <= modes_; ++k) {
    if (k == 0) continue;
    const cplx c = coeffs_[static_cast<std::size_t>(k + modes_)] / cplx{0.0, kTwoPi * k};
    out.coeffs_[static_cast<std::size_t>(k + modes_)] = c;
    at_zero += c.real();
  }
  out.coeffs_[static_cast<std::size_t>(modes_)] = -at_zero;
  return out;
}

FourierFunction FourierFunction::resized(int M) const {
  FourierFunction out(M);
  const int lim = std::min(M, modes_);
  for (int k = -lim; k <= lim; ++k) {
    out.coeffs_[static_cast<std::size_t>(k + M)] = coeffs_[static_cast<std::size_t>(k + modes_)];
  }
  return out;
}

FourierFunction FourierFunction::with_mean(double m) const {
  FourierFunction out = *this;
  out.coeffs_[static_cast<std::size_t>(modes_)] = m;
  return out;
}

FourierFunction& FourierFunction::operator+=(const FourierFunction& other) {
  if (other.modes_ != modes_) throw DomainError("FourierFunction: mode mismatch in +");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

FourierFunction& FourierFunction::operator-=(const FourierFunction& other) {
  if (other.modes_ != modes_) throw DomainError("FourierFunction: mode mismatch in -");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

FourierFunction& FourierFunction::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

double FourierFunction::inner(const FourierFunction& other) const {
  const int lim = std::min(modes_, other.modes_);
  double acc = (coeff(0) * other.coeff(0)).real();
  for (int k = 1; k <= lim; ++k) acc += 2.0 * (coeff(k) * std::conj(other.coeff(k))).real();
  return acc;
}

double FourierFunction::l2_norm() const { return std::sqrt(std::max(0.0, inner(*this))); }

double FourierFunction::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
  return m;
}

double FourierFunction::tail_beyond(int M) const {
  double m = 0.0;
  for (int k = M + 1; k <= modes_; ++k) m = std::max(m, std::abs(coeff(k)));
  return m;
}

FourierFunction project(std::span<const double> samples, int M) {
  const auto P = static_cast<int>(samples.size());
  if (M < 0) throw DomainError("project: negative truncation order");
  if (P < 2 * M + 1) {
    throw AliasingError("project: " + std::to_string(P) + " samples cannot resolve " +
                        std::to_string(M) + " modes (need at least " +
                        std::to_string(2 * M + 1) + ")");
  }
  const auto table = roots_of_unity(P);
  std::vector<cplx> c(static_cast<std::size_t>(2 * M + 1));
  for (int k = 0; k <= M; ++k) {
    cplx acc{};
    long long idx = 0;
    for (int p = 0; p < P; ++p) {
      // e^{-2 pi i k p / P} = conj(table[k p mod P])
      acc += samples[static_cast<std::size_t>(p)] * std::conj((*table)[static_cast<std::size_t>(idx)]);
      idx += k;
      if (idx >= P) idx -= P;
    }
    acc /= static_cast<double>(P);
    c[static_cast<std::size_t>(M + k)] = acc;
    c[static_cast<std::size_t>(M - k)] = std::conj(acc);
  }
  return FourierFunction::symmetrized(M, std::move(c));
}

FourierFunction derivative(const FourierFunction& f, int order) { return f.derivative(order); }

int default_quadrature(int M) { return 8 * (2 * M + 1); }

namespace {

double exact_l1(const FourierFunction& f, int Q) {
  const auto s = f.sample(Q);
  const int M = f.modes();
  auto F = [&](double x) {
    const cplx z = std::polar(1.0, kTwoPi * x);
    cplx zk{1.0, 0.0};
    double acc = f.mean() * x;
    for (int k = 1; k <= M; ++k) {
      zk *= z;
      acc += 2.0 * (f.coeff(k) * zk / cplx{0.0, kTwoPi * k}).real();
    }
    return acc;
  };
  std::vector<double> roots;
  for (int q = 0; q < Q; ++q) {
    const double a = s[static_cast<std::size_t>(q)];
    const double b = s[static_cast<std::size_t>((q + 1) % Q)];
    const double xa = static_cast<double>(q) / Q;
    if (a == 0.0) {
      roots.push_back(xa);
      continue;
    }
    if (a * b >= 0.0) continue;
    // Illinois-modified regula falsi on [xa, xa + 1/Q].
    double lo = xa, hi = xa + 1.0 / Q, flo = a, fhi = b;
    int side = 0;
    double x = lo, prev = hi;
    for (int it = 0; it < 80; ++it) {
      x = (lo * fhi - hi * flo) / (fhi - flo);
      const double fx = f(x);
      if (fx == 0.0 || std::abs(x - prev) < 1e-16) break;
      prev = x;
      if (fx * fhi > 0.0) {
        hi = x;
        fhi = fx;
        if (side == -1) flo *= 0.5;
        side = -1;
      } else {
        lo = x;
        flo = fx;
        if (side == 1) fhi *= 0.5;
        side = 1;
      }
    }
    roots.push_back(x);
  }
  if (roots.empty()) return std::abs(f.mean());
  std::sort(roots.begin(), roots.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < roots.size(); ++i) {
    total += std::abs(F(roots[i + 1]) - F(roots[i]));
  }
  total += std::abs(F(roots.front()) + f.mean() - F(roots.back()));
  return total;
}

}  // namespace

double l1_norm(const FourierFunction& f, int Q, L1Rule rule) {
  if (Q <= 0) Q = default_quadrature(f.modes());
  if (rule == L1Rule::Exact) return exact_l1(f, Q);
  const auto s = f.sample(Q);
  double acc = 0.0;
  for (double v : s) acc += std::abs(v);
  return acc / Q;
}

double sobolev_norm(const FourierFunction& f, int ell, int Q, L1Rule rule) {
  if (ell < 0) throw DomainError("sobolev_norm: negative order");
  double acc = 0.0;
  for (int j = 0; j <= ell; ++j) acc += l1_norm(f.derivative(j), Q, rule);
  return acc;
}

double sobolev_seminorm(const FourierFunction& f, int ell, int Q, L1Rule rule) {
  if (ell < 0) throw DomainError("sobolev_seminorm: negative order");
  return l1_norm(f.derivative(ell), Q, rule);
}

std::pair<double, double> grid_range(const FourierFunction& f, int Q) {
  if (Q <= 0) Q = default_quadrature(f.modes());
  const auto s = f.sample(Q);
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  return {*lo, *hi};
}

FourierFunction multiply_on_grid(const FourierFunction& f, std::span<const double> g_samples,
                                 int M) {
  const auto Q = static_cast<int>(g_samples.size());
  auto s = f.sample(Q);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= g_samples[i];
  return project(s, M);
}

}  // namespace qresp
