#include "qresp/suspension.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "qresp/error.hpp"
#include "qresp/fit.hpp"
#include "qresp/maps.hpp"
#include "qresp/response.hpp"
#include "qresp/rng.hpp"
#include "qresp/transfer.hpp"
#include "qresp/zeta.hpp"

namespace qresp {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0) || delta > 1.0) {
    throw DomainError("delta must lie in (0, 1]; the roof is not integrable for delta <= 0");
  }
}

constexpr std::size_t kBlock = 4096;

}  // namespace

RoofLaw::RoofLaw(double delta, bool size_biased, int table) : delta_(delta) {
  check_delta(delta);
  if (table < 16) throw DomainError("RoofLaw: table too small");
  s_ = size_biased ? 1.0 + delta : 2.0 + delta;
  norm_ = zeta(s_);
  cdf_.resize(static_cast<std::size_t>(table));
  double acc = 0.0;
  for (int k = 0; k < table; ++k) {
    acc += std::pow(static_cast<double>(k + 1), -s_);
    cdf_[static_cast<std::size_t>(k)] = acc / norm_;
  }
}

double RoofLaw::survival(std::uint64_t n) const {
  if (n <= 1) return 1.0;
  return hurwitz_tail(s_, static_cast<double>(n)) / norm_;
}

std::uint64_t RoofLaw::quantile(double u) const {
  if (u <= cdf_.back()) {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
  }
  // Least n with P(X > n) <= 1 - u.
  const double t = 1.0 - u;
  if (survival(kCap + 1) > t) return kCap;
  std::uint64_t lo = cdf_.size(), hi = kCap;  // P(X > lo) > t >= P(X > hi)
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (survival(mid + 1) <= t) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::vector<SuspensionState> sample_suspension(std::uint64_t seed, double delta, std::size_t count, int threads) {
  check_delta(delta);
  if (count < 1) throw DomainError("sample_suspension: count must be >= 1");
  const RoofLaw law(delta, true);
  std::vector<SuspensionState> out(count);
  const std::size_t blocks = (count + kBlock - 1) / kBlock;
  auto work = [&](std::size_t first_block, std::size_t stride) {
    for (std::size_t b = first_block; b < blocks; b += stride) {
      Rng rng(derive_seed(seed, b));
      const std::size_t end = std::min(count, (b + 1) * kBlock);
      for (std::size_t j = b * kBlock; j < end; ++j) {
        SuspensionState s;
        s.omega0 = law.quantile(uniform01(rng));
        s.capped = s.omega0 == RoofLaw::kCap;
        s.i = uniform_below(rng, s.omega0);
        s.stream = rng();
        out[j] = s;
      }
    }
  };
  const int T = std::max(1, std::min<int>(threads, static_cast<int>(blocks)));
  if (T == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t) pool.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(T));
    for (auto& th : pool) th.join();
  }
  return out;
}

double prob_covering_equals(double delta, std::uint64_t N) {
  check_delta(delta);
  if (N < 1) return 0.0;
  return hurwitz_tail(2.0 + delta, static_cast<double>(N)) / zeta(1.0 + delta);
}

double prob_covering_at_least(double delta, std::uint64_t m) {
  check_delta(delta);
  if (m <= 1) return 1.0;
  const double x = static_cast<double>(m);
  return (hurwitz_tail(1.0 + delta, x) - (x - 1.0) * hurwitz_tail(2.0 + delta, x)) / zeta(1.0 + delta);
}

double exact_truncated_mean(double delta, std::uint64_t N) {
  double acc = 0.0;
  for (std::uint64_t m = 1; m <= N; ++m) acc += prob_covering_at_least(delta, m);
  return acc;
}

// ---------------------------------------------------------------------------

PsiObservable make_psi(double a, double b, int M, PsiProfile profile) {
  if (!(a > 0.0 && b > a && b < 1.0)) throw DomainError("make_psi: need 0 < a < b < 1");
  auto overlaps = [](double a1, double b1, double a2, double b2) { return a1 < b2 && a2 < b1; };
  if (overlaps(a, b, a / 2, b / 2) || overlaps(a, b, a / 2 + 0.5, b / 2 + 0.5)) {
    throw DomainError("make_psi: I intersects its preimage under doubling");
  }
  if (profile == PsiProfile::Antiperiodic && b - a >= 0.5) {
    throw DomainError("make_psi: antiperiodic profile needs |I| < 1/2");
  }
  const double c = 0.5 * (a + b), w = 0.5 * (b - a);
  auto bump = [&](double x) {
    x -= std::floor(x);
    const double t = (x - c) / w;
    return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
  };
  int P = 1 << 14;
  while (P < 16 * (2 * M + 1)) P *= 2;
  std::vector<double> samples(static_cast<std::size_t>(P));
  for (int q = 0; q < P; ++q) {
    const double x = static_cast<double>(q) / P;
    samples[static_cast<std::size_t>(q)] = profile == PsiProfile::Bump ? bump(x) : bump(x) - bump(x + 0.5);
  }
  FourierFunction psi = project(samples, M).with_mean(0.0);
  if (profile == PsiProfile::Antiperiodic) {
    std::vector<cplx> cs(psi.coeffs().begin(), psi.coeffs().end());
    for (int k = -M; k <= M; ++k) {
      if (k % 2 == 0) cs[static_cast<std::size_t>(k + M)] = 0.0;
    }
    psi = FourierFunction(M, std::move(cs));
  }
  psi *= 1.0 / psi.l2_norm();

  PsiObservable out;
  out.a = a;
  out.b = b;
  out.profile = profile;
  out.mean = psi.mean();
  out.l2 = psi.l2_norm();
  const auto vals = psi.sample(P, 0);
  double outside = 0.0;
  for (int q = 0; q < P; ++q) {
    const double x = static_cast<double>(q) / P;
    bool inside = x >= a && x <= b;
    if (profile == PsiProfile::Antiperiodic) inside = inside || (x >= a - 0.5 && x <= b - 0.5) || (x >= a + 0.5 && x <= b + 0.5);
    if (!inside) outside += std::abs(vals[static_cast<std::size_t>(q)]);
  }
  out.mass_outside = outside / P;
  double corr = 0.0;
  for (int j = -M; j <= M; ++j) corr += (psi.coeff(j) * std::conj(psi.coeff(2 * j))).real();
  out.corr_doubling = corr;
  out.psi = std::move(psi);
  return out;
}

namespace {

const TransferMatrix& doubling_matrix(int M, int Q) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const TransferMatrix>> memo;
  static const MapPtr doubling = builtin_family("doubling");
  std::lock_guard lock(mu);
  auto& slot = memo[{M, Q}];
  if (!slot) slot = std::make_shared<const TransferMatrix>(assemble(*doubling, 0.0, M, Q));
  return *slot;
}

}  // namespace

QuenchedValue quenched_response_value(const SuspensionState& state, ResponseRoute route, const PsiObservable& psi,
                                      double delta, int M, int Q, long long N) {
  if (state.omega0 < 1 || state.i >= state.omega0) throw DomainError("invalid suspension state");
  const std::uint64_t nc = state.covering_time();
  QuenchedValue out;
  if (route == ResponseRoute::ClosedForm) {
    out.value = static_cast<double>(nc);
    out.terms = 0;
    return out;
  }
  check_delta(delta);
  if (Q <= 0) Q = default_quadrature(M);
  const auto f = psi.psi.resized(M);
  if (N <= 0) N = static_cast<long long>(nc) + 5;
  out.truncated = static_cast<std::uint64_t>(N) < nc;

  double smax = 0.0;
  for (double v : f.sample(Q, 0)) smax = std::max(smax, std::abs(v));
  const auto composed = doubling_composed(2, f, 0.5 / std::max(smax, 1e-300));
  FourierFunction g = derivative_operator(*composed, FourierFunction::constant(M, 1.0), Q);
  const TransferMatrix& D = doubling_matrix(M, Q);

  // Forward fibers: omega0 - 1 - i identities, one doubling, then fresh roofs.
  const RoofLaw law(delta, false);
  Rng rng(state.stream);
  std::uint64_t identities_left = state.omega0 - 1 - state.i;
  double value = 0.0;
  // Identity stretches leave L^n psi unchanged, so their terms are added in one step.
  long long n = 0;
  while (n < N) {
    const double c = g.inner(f);
    const auto run = static_cast<long long>(std::min<std::uint64_t>(identities_left, static_cast<std::uint64_t>(N - n - 1)));
    value += c * static_cast<double>(1 + run);
    n += 1 + run;
    identities_left -= static_cast<std::uint64_t>(run);
    if (n >= N) break;
    g = apply(D, g);
    identities_left = law.quantile(uniform01(rng)) - 1;
  }
  out.value = value;
  out.terms = static_cast<int>(std::min<long long>(N, 1LL << 30));
  return out;
}

DivergenceReport annealed_divergence_experiment(std::uint64_t seed, double delta,
                                                const std::vector<std::size_t>& sample_sizes,
                                                const std::vector<std::uint64_t>& caps, int threads) {
  check_delta(delta);
  if (sample_sizes.empty() || caps.size() < 2) throw DomainError("divergence experiment: need sizes and >= 2 caps");
  for (std::size_t k = 1; k < sample_sizes.size(); ++k) {
    if (sample_sizes[k] <= sample_sizes[k - 1]) throw DomainError("sample_sizes must be increasing");
  }
  for (std::size_t k = 1; k < caps.size(); ++k) {
    if (caps[k] <= caps[k - 1]) throw DomainError("caps must be increasing");
  }
  const std::size_t S = sample_sizes.back();
  const std::uint64_t cap_max = caps.back();
  const auto states = sample_suspension(seed, delta, S, threads);

  DivergenceReport rep;
  std::vector<double> lx, ly, logcap;
  std::vector<DivergenceRow> cap_rows;
  for (std::uint64_t cap : caps) {
    std::uint64_t sum = 0, mx = 0;
    for (const auto& s : states) {
      const std::uint64_t v = s.covering_time();
      sum += std::min(v, cap);
      mx = std::max(mx, v);
    }
    DivergenceRow row;
    row.kind = "cap";
    row.sample_size = S;
    row.cap = cap;
    row.truncated_mean = static_cast<double>(sum) / static_cast<double>(S);
    row.exact_mean = exact_truncated_mean(delta, cap);
    row.max_sample = mx;
    cap_rows.push_back(row);
    lx.push_back(std::log(static_cast<double>(cap)));
    ly.push_back(std::log(row.truncated_mean));
    logcap.push_back(row.truncated_mean);
  }
  const auto power = fit_line(lx, ly);
  const auto logfit = fit_line(lx, logcap);
  rep.fitted_slope = power.slope;
  rep.power_r2 = power.r_squared;
  rep.log_r2 = logfit.r_squared;
  rep.increasing_in_cap = true;
  for (std::size_t k = 1; k < cap_rows.size(); ++k) {
    if (!(cap_rows[k].truncated_mean > cap_rows[k - 1].truncated_mean)) rep.increasing_in_cap = false;
  }

  const double exact_at_cap = exact_truncated_mean(delta, cap_max);
  std::size_t done = 0;
  std::uint64_t sum = 0, mx = 0;
  for (std::size_t size : sample_sizes) {
    for (; done < size; ++done) {
      const std::uint64_t v = states[done].covering_time();
      sum += std::min(v, cap_max);
      mx = std::max(mx, v);
    }
    DivergenceRow row;
    row.kind = "samples";
    row.sample_size = size;
    row.cap = cap_max;
    row.truncated_mean = static_cast<double>(sum) / static_cast<double>(size);
    row.exact_mean = exact_at_cap;
    row.fitted_slope = power.slope;
    row.max_sample = mx;
    rep.rows.push_back(row);
  }
  for (auto& row : cap_rows) {
    row.fitted_slope = power.slope;
    rep.rows.push_back(row);
  }
  for (const auto& s : states) {
    rep.max_sample = std::max(rep.max_sample, s.covering_time());
    if (s.capped) ++rep.capped_samples;
  }
  return rep;
}

}  // namespace qresp
