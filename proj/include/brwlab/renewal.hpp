#pragma once

// The exponential renewal function V(x) = sum_n e^{an} P(T_n <= x):
// finiteness classification, tilted importance-sampling estimation with
// certified Chernoff tail bounds, a direct-simulation oracle, and the
// asymptotic predictions for V and for the V_a integrals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brwlab/common.hpp"
#include "brwlab/laplace.hpp"
#include "brwlab/parallel.hpp"
#include "brwlab/rng.hpp"
#include "brwlab/stats.hpp"
#include "brwlab/walk.hpp"

namespace brwlab {

// ---------------------------------------------------------------------------
// classification per the finiteness trichotomy

struct Classification {
  enum class Verdict { FiniteAll, InfiniteAll, FiniteWithCase, InfiniteWithCase, Undecided };
  Verdict verdict = Verdict::Undecided;
  std::string tag;     // which clause fired: "(a)(i)".."(a)(iv)", "(b)", "(c)"
  std::string detail;  // qualifications ("for x >= 0") or the tolerance report
  double R = kNaN;
  std::optional<double> gamma0;

  bool finite() const {
    return verdict == Verdict::FiniteAll || verdict == Verdict::FiniteWithCase;
  }
};

inline const char* to_string(Classification::Verdict v) {
  switch (v) {
    case Classification::Verdict::FiniteAll: return "FiniteAll";
    case Classification::Verdict::InfiniteAll: return "InfiniteAll";
    case Classification::Verdict::FiniteWithCase: return "FiniteWithCase";
    case Classification::Verdict::InfiniteWithCase: return "InfiniteWithCase";
    default: return "Undecided";
  }
}

// Decision tree: (b) strictly positive steps give a finite V for every a;
// (c) nonnegative steps with an atom beta at 0 give R = -log beta and
// finiteness iff a < R (for x >= 0); (a) steps with negative mass split on
// a vs R, with the boundary a = R decided by the sign of psi'(gamma0).
// The sign is certified, never guessed: an uncertifiable sign is Undecided.
inline Classification classify_finiteness(const StepLaw& law, double a) {
  if (!(a > 0.0)) throw OutsideDomain("classify_finiteness: a must be positive");
  Classification c;

  Tri sp = law.strictly_positive();
  Tri nn = law.nonnegative();
  double pz = law.prob_zero();
  if (sp == Tri::Unknown || nn == Tri::Unknown || pz < 0.0) {
    // no exact descriptors: a sampled negative increment is a hard witness
    // for case (a); absence of one proves nothing
    Rng rng(0xc1a55ull);
    bool negative_witness = false;
    for (int i = 0; i < 20000 && !negative_witness; ++i)
      negative_witness = law.sample(rng) < -1e-12;
    if (negative_witness) {
      sp = Tri::False;
      nn = Tri::False;
    } else {
      c.verdict = Classification::Verdict::Undecided;
      c.detail =
          "support descriptors unavailable and no negative increment observed "
          "in 20000 draws; cannot certify a case";
      return c;
    }
  }

  if (sp == Tri::True) {
    c.verdict = Classification::Verdict::FiniteAll;
    c.tag = "(b)";
    c.R = kInf;
    return c;
  }
  if (nn == Tri::True && pz > 0.0) {
    c.tag = "(c)";
    c.R = -std::log(pz);
    if (a < c.R - 1e-12) {
      c.verdict = Classification::Verdict::FiniteWithCase;
    } else {
      c.verdict = Classification::Verdict::InfiniteWithCase;
      c.detail = "infinite for x >= 0 (V vanishes below 0)";
    }
    return c;
  }

  // case (a): P(T < 0) > 0
  const RateInfo rate = rate_R(law);
  c.R = rate.R;
  c.gamma0 = rate.gamma0;
  const double atol = 1e-8;
  if (a < rate.R - atol) {
    c.verdict = Classification::Verdict::FiniteAll;
    c.tag = "(a)(i)";
    return c;
  }
  if (a > rate.R + atol) {
    c.verdict = Classification::Verdict::InfiniteAll;
    c.tag = "(a)(iii)";
    return c;
  }
  if (!rate.gamma0.has_value()) {
    c.verdict = Classification::Verdict::Undecided;
    c.detail = "a = R but the infimum of psi is not attained: " + rate.note;
    return c;
  }
  const DerivativeEstimate d = law.psi_deriv(*rate.gamma0);
  const double margin = std::max(1e-8, d.error_bar);
  if (-d.value > margin) {
    c.verdict = Classification::Verdict::FiniteAll;
    c.tag = "(a)(ii)";
    return c;
  }
  if (d.closed_form && std::fabs(d.value) <= margin) {
    c.verdict = Classification::Verdict::InfiniteAll;
    c.tag = "(a)(iv)";
    c.detail = "psi'(gamma0) = 0 within closed-form evaluation error";
    return c;
  }
  c.verdict = Classification::Verdict::Undecided;
  c.detail = "a = R and the sign of psi'(gamma0) = " + std::to_string(d.value) +
             " cannot be certified (error bar " + std::to_string(d.error_bar) + ")";
  return c;
}

// ---------------------------------------------------------------------------
// estimates

enum class RenewalMethod { Tilted, Direct, ClosedForm };

struct RenewalEstimate {
  double x = kNaN;  // evaluation point after lattice snapping
  double value = kNaN;
  double se = 0.0;
  std::size_t horizon = 0;
  double tail_bound = 0.0;
  RenewalMethod method = RenewalMethod::Tilted;
  bool horizon_exceeded = false;
  std::string note;
};

struct RenewalOptions {
  std::size_t max_horizon = 100000;  // hard cap on the summation horizon
  double rel_tol = 1e-3;             // stop when tail_bound <= rel_tol * value
  std::size_t chunks = 256;          // deterministic reduction granularity
  unsigned workers = 0;              // 0 = worker_count()
};

// Evaluation points of arithmetic walks snap down to the support lattice
// {offset + span * Z}; the asymptotic statements only speak along it.
inline double snap_to_lattice(const SpanInfo& s, double x) {
  if (s.kind != SupportKind::Arithmetic || !(s.span > 0.0)) return x;
  return s.offset + s.span * std::floor((x - s.offset) / s.span + 1e-9);
}

namespace detail {

// Chernoff certificate grid: rates r with q(r) = e^a psi(r) < 1, so that
// sum_{n>N} e^{an} P(T_n <= x) <= e^{rx} q(r)^{N+1}/(1-q(r)).  r_cap bounds
// the grid from above (the inverse-moment certificate needs r <= 1).
struct TailCert {
  std::vector<std::pair<double, double>> rq;  // (r, q) with q < 1
};

inline TailCert build_cert(const StepLaw& law, double a, double gamma,
                           std::optional<double> gamma0, double r_cap = kInf) {
  TailCert cert;
  const double ea = std::exp(a);
  std::vector<double> candidates;
  double hi = r_cap;
  if (gamma0 && *gamma0 > gamma) hi = std::min(hi, *gamma0);
  if (std::isfinite(hi) && hi > gamma) {
    for (int k = 1; k <= 32; ++k)
      candidates.push_back(gamma + (hi - gamma) * k / 33.0);
    candidates.push_back(hi);
  } else {
    for (int k = 1; k <= 32; ++k) {
      const double r = gamma * (1.0 + k / 8.0);
      if (r < r_cap) candidates.push_back(r);
    }
  }
  for (double r : candidates) {
    const double p = law.psi(r);
    if (!std::isfinite(p)) continue;
    const double q = ea * p;
    if (q < 1.0 - 1e-12) cert.rq.emplace_back(r, q);
  }
  return cert;
}

// coeff maps r to the x-dependent exponent of the bound (r*x for V,
// (1+r)*L for the first moment, -(1-r)*L for the inverse moment)
template <class Coeff>
double tail_bound(const TailCert& cert, std::size_t horizon, Coeff&& coeff) {
  double best = kInf;
  for (auto& [r, q] : cert.rq) {
    const double b =
        std::exp(coeff(r) + std::log(q) * static_cast<double>(horizon + 1)) / (1.0 - q);
    best = std::min(best, b);
  }
  return best;
}

}  // namespace detail

// Importance-sampling estimate of V at several points on shared paths.
// Paths are simulated under the gamma-tilted law; each step contributes
// e^{gamma T_n} to every x >= T_n, which reconstructs e^{an} P(T_n <= x)
// because e^{an} psi(gamma)^n = 1.  The horizon is fixed by a deterministic
// pilot pass, so results are independent of the worker count.
inline std::vector<RenewalEstimate> estimate_V_grid(const StepLaw& law, double a,
                                                    std::vector<double> xs,
                                                    std::size_t budget,
                                                    std::uint64_t seed,
                                                    const RenewalOptions& opts = {}) {
  if (xs.empty()) return {};
  if (budget == 0) throw Error("estimate_V: budget must be positive");
  const Classification cls = classify_finiteness(law, a);
  if (cls.verdict == Classification::Verdict::Undecided)
    throw Error("estimate_V: finiteness undecided: " + cls.detail);
  if (!cls.finite())
    throw Error("estimate_V: V is infinite for this law and rate (" + cls.tag + ")");
  const GammaResult gr = solve_gamma(law, a);
  if (!gr.ok()) throw Error("estimate_V: solve_gamma failed: " + gr.reason);
  const double gamma = *gr.gamma;
  const DerivativeEstimate dpsi = law.psi_deriv(gamma);
  if (!(-dpsi.value > std::max(1e-8, dpsi.error_bar)))
    throw Error("estimate_V: tilted drift -psi'(gamma) not certifiably positive");

  const SpanInfo& span = law.support();
  const double slack = span.kind == SupportKind::Arithmetic ? span.span * 1e-9 : 0.0;
  const std::size_t npts = xs.size();
  std::vector<double> snapped(npts), thresholds(npts);
  for (std::size_t i = 0; i < npts; ++i) {
    snapped[i] = snap_to_lattice(span, xs[i]);
    thresholds[i] = snapped[i] + slack;
  }
  // shared-path evaluation needs ascending thresholds; remember the order
  std::vector<std::size_t> order(npts);
  for (std::size_t i = 0; i < npts; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t p, std::size_t q) { return thresholds[p] < thresholds[q]; });
  std::vector<double> tsorted(npts);
  for (std::size_t i = 0; i < npts; ++i) tsorted[i] = thresholds[order[i]];

  const StepLaw tilted = tilt(law, gamma);
  const detail::TailCert cert = detail::build_cert(law, a, gamma, cls.gamma0);
  // the term weight is (e^a psi(gamma))^n e^{gamma T_n}; the first factor is 1
  // up to the root-finding error in gamma, and carrying it keeps the
  // estimator unbiased (and exact on deterministic paths) regardless
  const double logq0 = a + std::log(law.psi(gamma));

  // one path's contributions to every point of the sorted grid
  auto run_path = [&](Rng& rng, std::size_t horizon, std::vector<double>& sums) {
    std::fill(sums.begin(), sums.end(), 0.0);
    double t = 0.0;
    for (std::size_t n = 0;; ++n) {
      const std::size_t j =
          std::lower_bound(tsorted.begin(), tsorted.end(), t) - tsorted.begin();
      if (j < npts) sums[j] += std::exp(gamma * t + logq0 * static_cast<double>(n));
      if (n == horizon) break;
      t += tilted.sample(rng);
    }
    for (std::size_t j = 1; j < npts; ++j) sums[j] += sums[j - 1];
  };

  // pilot pass: grow the horizon until the certified tail is small against
  // the pilot values; no certificate at all (boundary a = R) means no
  // stopping signal exists, so run straight to the cap and say so
  const std::size_t pilot_paths = std::min<std::size_t>(64, budget);
  std::size_t horizon = std::min<std::size_t>(16, opts.max_horizon);
  bool capped = false;
  if (cert.rq.empty()) {
    horizon = opts.max_horizon;
    capped = true;
  }
  std::vector<double> pilot_vals(npts, 0.0);
  while (!capped) {
    std::vector<double> sums(npts);
    std::fill(pilot_vals.begin(), pilot_vals.end(), 0.0);
    for (std::size_t i = 0; i < pilot_paths; ++i) {
      Rng rng(derive_seed(mix64(seed ^ 0x9114071ull), i));
      run_path(rng, horizon, sums);
      for (std::size_t j = 0; j < npts; ++j) pilot_vals[j] += sums[j];
    }
    for (auto& v : pilot_vals) v /= static_cast<double>(pilot_paths);
    bool ok = true;
    for (std::size_t j = 0; ok && j < npts; ++j) {
      const double b =
          detail::tail_bound(cert, horizon, [&](double r) { return r * tsorted[j]; });
      ok = b <= opts.rel_tol * std::max(pilot_vals[j], 1e-12);
    }
    if (ok) break;
    if (horizon >= opts.max_horizon) {
      capped = true;
      break;
    }
    horizon = std::min(opts.max_horizon,
                       std::max(horizon + 8, static_cast<std::size_t>(horizon * 1.6)));
  }

  // main run, chunked for a worker-count-independent reduction
  const std::size_t chunks = std::max<std::size_t>(1, std::min(opts.chunks, budget));
  struct ChunkStats {
    std::vector<RunningStat> per_point;
  };
  auto chunk_fn = [&](std::size_t c) {
    ChunkStats cs;
    cs.per_point.resize(npts);
    const std::size_t lo = c * budget / chunks, hi = (c + 1) * budget / chunks;
    std::vector<double> sums(npts);
    for (std::size_t i = lo; i < hi; ++i) {
      Rng rng(derive_seed(seed, i));
      run_path(rng, horizon, sums);
      for (std::size_t j = 0; j < npts; ++j) cs.per_point[j].add(sums[j]);
    }
    return cs;
  };
  const std::vector<ChunkStats> parts =
      parallel_map<ChunkStats>(chunks, chunk_fn, opts.workers);
  std::vector<RunningStat> stats(npts);
  for (const auto& part : parts)
    for (std::size_t j = 0; j < npts; ++j) stats[j].merge(part.per_point[j]);

  std::vector<RenewalEstimate> out(npts);
  for (std::size_t i = 0; i < npts; ++i) {
    const std::size_t j =
        std::find(order.begin(), order.end(), i) - order.begin();  // sorted slot of i
    RenewalEstimate& e = out[i];
    e.x = snapped[i];
    e.value = stats[j].mean();
    e.se = stats[j].stderror();
    e.horizon = horizon;
    e.tail_bound =
        detail::tail_bound(cert, horizon, [&](double r) { return r * tsorted[j]; });
    e.method = RenewalMethod::Tilted;
    e.horizon_exceeded = capped;
    if (capped) e.note = "horizon cap reached before the tail certificate closed";
  }
  return out;
}

inline RenewalEstimate estimate_V(const StepLaw& law, double a, double x,
                                  std::size_t budget, std::uint64_t seed,
                                  const RenewalOptions& opts = {}) {
  return estimate_V_grid(law, a, {x}, budget, seed, opts).front();
}

// Direct-simulation oracle: per path, sum e^{an} 1{T_n <= x} over the fixed
// horizon under the untilted law.  Variance explodes with x, so this is a
// cross-check at small x only.  partial_out, when given, receives the
// per-n partial sums sum_{k<=n} e^{ak} Phat(T_k <= x).
inline RenewalEstimate estimate_V_direct(const StepLaw& law, double a, double x,
                                         std::size_t horizon, std::size_t reps,
                                         std::uint64_t seed,
                                         std::vector<double>* partial_out = nullptr) {
  if (reps == 0) throw Error("estimate_V_direct: reps must be positive");
  const SpanInfo& span = law.support();
  const double slack = span.kind == SupportKind::Arithmetic ? span.span * 1e-9 : 0.0;
  const double xsnap = snap_to_lattice(span, x);
  const double threshold = xsnap + slack;
  RunningStat stat;
  std::vector<double> hit_counts(horizon + 1, 0.0);
  for (std::size_t i = 0; i < reps; ++i) {
    Rng rng(derive_seed(seed, i));
    double t = 0.0, z = 0.0;
    for (std::size_t n = 0; n <= horizon; ++n) {
      if (n > 0) t += law.sample(rng);
      if (t <= threshold) {
        z += std::exp(a * static_cast<double>(n));
        hit_counts[n] += 1.0;
      }
    }
    stat.add(z);
  }
  if (partial_out) {
    partial_out->assign(horizon + 1, 0.0);
    double run = 0.0;
    for (std::size_t n = 0; n <= horizon; ++n) {
      run += std::exp(a * static_cast<double>(n)) * hit_counts[n] /
             static_cast<double>(reps);
      (*partial_out)[n] = run;
    }
  }
  RenewalEstimate e;
  e.x = xsnap;
  e.value = stat.mean();
  e.se = stat.stderror();
  e.horizon = horizon;
  e.tail_bound = kNaN;  // no certificate; this is the naive oracle
  e.method = RenewalMethod::Direct;
  return e;
}

// ---------------------------------------------------------------------------
// asymptotic predictions

struct AsymptotePrediction {
  enum class Target { V, VIncrement, Va, VaFirstMoment, VaInverseMoment };
  Target target = Target::V;
  double gamma = kNaN;     // the positive tilt rate behind the asymptotics
  double exponent = kNaN;  // e^{exponent * x} scale for V-targets, x^exponent
                           // for Va-targets (theta - 2 < 0 for the inverse)
  double constant = kNaN;
  bool arithmetic = false;
  double span = 0.0;  // lattice span when arithmetic

  double evaluate(double x) const {
    if (target == Target::V || target == Target::VIncrement)
      return constant * std::exp(exponent * x);
    return constant * std::pow(x, exponent);
  }
};

namespace detail {
inline AsymptotePrediction make_prediction(AsymptotePrediction::Target target,
                                           double gamma, double exponent,
                                           double constant, bool arithmetic,
                                           double span) {
  if (!(constant > 0.0) || !std::isfinite(constant))
    throw Error("asymptote prediction: constant must be positive and finite");
  return {target, gamma, exponent, constant, arithmetic, span};
}
}  // namespace detail

struct VAsymptote {
  double gamma = kNaN;
  AsymptotePrediction v;
  std::optional<AsymptotePrediction> increment;  // arithmetic case only
};

// Leading behavior of V: non-arithmetic constant e^{-a}/(gamma(-psi'(gamma)));
// arithmetic V-constant lambda e^{-a}/((1-e^{-lambda gamma})(-psi'(gamma)))
// along x = lambda n, plus the per-step increment constant
// lambda e^{-a}/(-psi'(gamma)).
inline VAsymptote predict_asymptote(const StepLaw& law, double a) {
  const GammaResult gr = solve_gamma(law, a);
  if (!gr.ok()) throw Error("predict_asymptote: " + gr.reason);
  const double gamma = *gr.gamma;
  const DerivativeEstimate d = law.psi_deriv(gamma);
  const double mdpsi = -d.value;
  if (!(mdpsi > std::max(1e-8, d.error_bar)))
    throw Error("predict_asymptote: -psi'(gamma) not certifiably positive");
  const SpanInfo& span = law.support();
  if (span.kind == SupportKind::Unknown)
    throw SpanRequired("predict_asymptote: support kind unknown; detect the span first");

  VAsymptote out;
  out.gamma = gamma;
  const double ema = std::exp(-a);
  using T = AsymptotePrediction::Target;
  if (span.kind == SupportKind::NonArithmetic) {
    out.v = detail::make_prediction(T::V, gamma, gamma, ema / (gamma * mdpsi), false, 0.0);
    return out;
  }
  const double lam = span.span;
  out.v = detail::make_prediction(
      T::V, gamma, gamma, lam * ema / ((1.0 - std::exp(-lam * gamma)) * mdpsi), true, lam);
  out.increment =
      detail::make_prediction(T::VIncrement, gamma, gamma, lam * ema / mdpsi, true, lam);
  return out;
}

struct VaPredictions {
  double theta = kNaN;
  double denom = kNaN;  // e^{a theta}(-m'(theta)) - a
  AsymptotePrediction va;
  AsymptotePrediction first_moment;
  std::optional<AsymptotePrediction> inverse_moment;
  std::string inverse_note;  // set when the inverse prediction is unavailable
};

// The three asymptotics of V_a and its integrals, in terms of theta and the
// denominator D = e^{a theta}(-m'(theta)) - a.  The span argument describes
// the a-shifted associated walk (S_n - an); the lattice displays evaluate
// along x = e^{lambda_a n}, where the power form constant * x^rate coincides
// with the e^{rate lambda_a n} form.
inline VaPredictions predict_Va(const LaplaceProfile& profile, double a,
                                const SpanInfo& shifted_span) {
  detail::require_canonical(profile, "predict_Va");
  if (shifted_span.kind == SupportKind::Unknown)
    throw SpanRequired("predict_Va: span of the shifted walk unknown");
  const SpectralMinResult sm = minimize_spectral(profile);
  if (!sm.ok()) throw Error("predict_Va: hypotheses fail: " + sm.diagnosis);
  const RootResult rt = solve_theta(profile, a);
  if (!rt.ok()) throw Error("predict_Va: hypotheses fail: " + rt.reason);
  const double theta = *rt.root;
  if (std::fabs(a + std::log(sm.minimum->value)) <= 1e-8) {
    // boundary case needs the strict-decrease condition at theta0
    const DerivativeEstimate md = left_derivative(profile, sm.minimum->theta0);
    const double m0 = profile.value(sm.minimum->theta0);
    const double lhs = -std::log(m0) / sm.minimum->theta0;
    const double rhs = -md.value / m0;
    if (!(lhs < rhs - std::max(1e-9, md.error_bar / m0)))
      throw Error("predict_Va: hypotheses fail: boundary strictness");
  }

  const DerivativeEstimate md = left_derivative(profile, theta);
  const double D = std::exp(a * theta) * (-md.value) - a;
  if (!(D > 0.0))
    throw Error("predict_Va: denominator e^{a theta}(-m'(theta)) - a = " +
                std::to_string(D) + " not positive");

  VaPredictions out;
  out.theta = theta;
  out.denom = D;
  const double gam = theta - 1.0;
  const bool arith = shifted_span.kind == SupportKind::Arithmetic;
  const double lam = arith ? shifted_span.span : 0.0;
  using T = AsymptotePrediction::Target;
  if (!arith) {
    out.va = detail::make_prediction(T::Va, gam, gam, 1.0 / (gam * D), false, 0.0);
    out.first_moment =
        detail::make_prediction(T::VaFirstMoment, gam, theta, 1.0 / (theta * D), false, 0.0);
    if (theta < 2.0 - 1e-9) {
      out.inverse_moment = detail::make_prediction(
          T::VaInverseMoment, gam, theta - 2.0, 1.0 / ((2.0 - theta) * D), false, 0.0);
    } else {
      out.inverse_note = "inverse-moment asymptotics require theta < 2";
    }
    return out;
  }
  out.va = detail::make_prediction(T::Va, gam, gam,
                                   lam / ((1.0 - std::exp(-lam * gam)) * D), true, lam);
  out.first_moment = detail::make_prediction(
      T::VaFirstMoment, gam, theta, lam / ((1.0 - std::exp(-lam * theta)) * D), true, lam);
  if (theta < 2.0 - 1e-9) {
    out.inverse_moment = detail::make_prediction(
        T::VaInverseMoment, gam, theta - 2.0,
        lam / ((1.0 - std::exp(lam * (theta - 2.0))) * D), true, lam);
  } else {
    out.inverse_note = "inverse-moment asymptotics require theta < 2";
  }
  return out;
}

// ---------------------------------------------------------------------------
// the V_a integrals on the shifted walk

// first = sum_n e^{an} E[e^{T_n}; T_n <= log x]  (= int_{(0,x]} y V_a(dy))
// inverse = sum_n e^{an} E[e^{-T_n}; T_n >= log x]  (= int_{[x,inf)} y^{-1} V_a(dy))
// both estimated under the gamma-tilt, gamma = theta - 1, where the weights
// become e^{theta T_n} and e^{(gamma-1) T_n}.
inline std::pair<RenewalEstimate, RenewalEstimate> estimate_Va_integrals(
    const StepLaw& shifted_law, double a, double x, std::size_t budget,
    std::uint64_t seed, const RenewalOptions& opts = {}) {
  if (!(x > 0.0)) throw OutsideDomain("estimate_Va_integrals: x must be positive");
  if (budget == 0) throw Error("estimate_Va_integrals: budget must be positive");
  const GammaResult gr = solve_gamma(shifted_law, a);
  if (!gr.ok()) throw Error("estimate_Va_integrals: solve_gamma failed: " + gr.reason);
  const double gamma = *gr.gamma;
  const DerivativeEstimate dpsi = shifted_law.psi_deriv(gamma);
  if (!(-dpsi.value > std::max(1e-8, dpsi.error_bar)))
    throw Error("estimate_Va_integrals: tilted drift not certifiably positive");

  const SpanInfo& span = shifted_law.support();
  const double slack = span.kind == SupportKind::Arithmetic ? span.span * 1e-9 : 0.0;
  const double L = snap_to_lattice(span, std::log(x));
  const double up_threshold = L + slack;    // T_n <= L
  const double down_threshold = L - slack;  // T_n >= L

  const StepLaw tilted = tilt(shifted_law, gamma);
  const Classification cls = classify_finiteness(shifted_law, a);
  const detail::TailCert cert_first =
      detail::build_cert(shifted_law, a, gamma, cls.gamma0);
  const detail::TailCert cert_inv =
      detail::build_cert(shifted_law, a, gamma, cls.gamma0, 1.0);
  auto first_coeff = [&](double r) { return (1.0 + r) * up_threshold; };
  auto inv_coeff = [&](double r) { return -(1.0 - r) * down_threshold; };
  const double logq0 = a + std::log(shifted_law.psi(gamma));

  auto run_path = [&](Rng& rng, std::size_t horizon, double& first, double& inv) {
    first = 0.0;
    inv = 0.0;
    double t = 0.0;
    for (std::size_t n = 0;; ++n) {
      const double corr = logq0 * static_cast<double>(n);
      if (t <= up_threshold) first += std::exp((1.0 + gamma) * t + corr);
      if (t >= down_threshold) inv += std::exp((gamma - 1.0) * t + corr);
      if (n == horizon) break;
      t += tilted.sample(rng);
    }
  };

  const std::size_t pilot_paths = std::min<std::size_t>(64, budget);
  std::size_t horizon = std::min<std::size_t>(16, opts.max_horizon);
  bool capped = false;
  if (cert_first.rq.empty() || cert_inv.rq.empty()) {
    horizon = opts.max_horizon;
    capped = true;
  }
  while (!capped) {
    double pf = 0.0, pi = 0.0;
    for (std::size_t i = 0; i < pilot_paths; ++i) {
      Rng rng(derive_seed(mix64(seed ^ 0x9114071ull), i));
      double f, v;
      run_path(rng, horizon, f, v);
      pf += f;
      pi += v;
    }
    pf /= static_cast<double>(pilot_paths);
    pi /= static_cast<double>(pilot_paths);
    const double bf = detail::tail_bound(cert_first, horizon, first_coeff);
    const double bi = detail::tail_bound(cert_inv, horizon, inv_coeff);
    if (bf <= opts.rel_tol * std::max(pf, 1e-12) &&
        bi <= opts.rel_tol * std::max(pi, 1e-12))
      break;
    if (horizon >= opts.max_horizon) {
      capped = true;
      break;
    }
    horizon = std::min(opts.max_horizon,
                       std::max(horizon + 8, static_cast<std::size_t>(horizon * 1.6)));
  }

  const std::size_t chunks = std::max<std::size_t>(1, std::min(opts.chunks, budget));
  struct Pair {
    RunningStat first, inv;
  };
  auto chunk_fn = [&](std::size_t c) {
    Pair p;
    const std::size_t lo = c * budget / chunks, hi = (c + 1) * budget / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      Rng rng(derive_seed(seed, i));
      double f, v;
      run_path(rng, horizon, f, v);
      p.first.add(f);
      p.inv.add(v);
    }
    return p;
  };
  const std::vector<Pair> parts = parallel_map<Pair>(chunks, chunk_fn, opts.workers);
  RunningStat first_stat, inv_stat;
  for (const auto& p : parts) {
    first_stat.merge(p.first);
    inv_stat.merge(p.inv);
  }

  auto fill = [&](const RunningStat& s, const detail::TailCert& cert, auto&& coeff) {
    RenewalEstimate e;
    e.x = std::exp(L);
    e.value = s.mean();
    e.se = s.stderror();
    e.horizon = horizon;
    e.tail_bound = detail::tail_bound(cert, horizon, coeff);
    e.method = RenewalMethod::Tilted;
    e.horizon_exceeded = capped;
    if (capped) e.note = "horizon cap reached before the tail certificate closed";
    return e;
  };
  return {fill(first_stat, cert_first, first_coeff),
          fill(inv_stat, cert_inv, inv_coeff)};
}

}  // namespace brwlab
