#pragma once

// The associated random walk and generic step laws: exponential tilting,
// shifting by the rate a, the decay rate R = -log inf psi, minimal tilt
// roots, and arithmetic-span detection.  Parametric families (point mass,
// finite atoms, Gaussian, exponentially tilted uniform) are closed under
// tilt and shift, so those operations stay exact; everything else goes
// through a Generic wrapper with quantified approximations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "brwlab/common.hpp"
#include "brwlab/laplace.hpp"
#include "brwlab/minimize.hpp"
#include "brwlab/offspring.hpp"
#include "brwlab/rng.hpp"
#include "brwlab/stats.hpp"

namespace brwlab {

enum class SupportKind { NonArithmetic, Arithmetic, Unknown };

struct SpanInfo {
  SupportKind kind = SupportKind::Unknown;
  double span = 0.0;    // lambda, when Arithmetic
  double offset = 0.0;  // one point of the lattice (minimal atom for finite laws)
  bool single_atom = false;
};

enum class Tri { False, True, Unknown };

class StepLaw {
 public:
  enum class Family { Deterministic, Atoms, Gaussian, TiltedUniform, Generic };

  // ---- factories ----------------------------------------------------------

  static StepLaw deterministic(double c) {
    if (c == 0.0) throw Degenerate("StepLaw: T = 0 almost surely");
    StepLaw s;
    s.family_ = Family::Deterministic;
    s.c_ = c;
    s.support_ = {SupportKind::Arithmetic, std::fabs(c), c, true};
    s.strictly_positive_ = c > 0 ? Tri::True : Tri::False;
    s.nonnegative_ = s.strictly_positive_;
    s.prob_zero_ = 0.0;
    s.rebuild_transform();
    return s;
  }

  static StepLaw atoms(std::vector<std::pair<double, double>> a) {
    if (a.empty()) throw Error("StepLaw: empty atom list");
    std::sort(a.begin(), a.end());
    double tot = 0.0;
    for (auto& [x, p] : a) {
      if (!(p >= 0.0)) throw Error("StepLaw: negative atom probability");
      tot += p;
    }
    if (!(std::fabs(tot - 1.0) <= 1e-9))
      throw Error("StepLaw: atom probabilities must sum to 1");
    StepLaw s;
    s.family_ = Family::Atoms;
    s.atoms_ = std::move(a);
    double pz = 0.0, pmass_pos = 0.0, pmass_nonneg = 0.0;
    for (auto& [x, p] : s.atoms_) {
      if (std::fabs(x) < 1e-15) pz += p;
      if (x > 1e-15) pmass_pos += p;
      if (x > -1e-15) pmass_nonneg += p;
    }
    if (pz >= 1.0 - 1e-12) throw Degenerate("StepLaw: T = 0 almost surely");
    s.prob_zero_ = pz;
    s.strictly_positive_ = (pmass_pos >= 1.0 - 1e-12) ? Tri::True : Tri::False;
    s.nonnegative_ = (pmass_nonneg >= 1.0 - 1e-12) ? Tri::True : Tri::False;
    s.rebuild_cum();
    s.support_ = exact_atom_span(s.atoms_);
    s.rebuild_transform();
    return s;
  }

  static StepLaw gaussian(double mu, double sigma2) {
    if (!(sigma2 > 0.0)) throw Error("StepLaw: sigma^2 must be positive");
    StepLaw s;
    s.family_ = Family::Gaussian;
    s.mu_ = mu;
    s.s2_ = sigma2;
    s.support_ = {SupportKind::NonArithmetic, 0.0, 0.0, false};
    s.strictly_positive_ = Tri::False;
    s.nonnegative_ = Tri::False;
    s.prob_zero_ = 0.0;
    s.rebuild_transform();
    return s;
  }

  // density proportional to e^(-g t) on [lo, hi]; g = 0 is the plain uniform
  static StepLaw tilted_uniform(double lo, double hi, double g = 0.0) {
    if (!(hi > lo)) throw Error("StepLaw: uniform needs lo < hi");
    StepLaw s;
    s.family_ = Family::TiltedUniform;
    s.lo_ = lo;
    s.hi_ = hi;
    s.tg_ = g;
    s.support_ = {SupportKind::NonArithmetic, 0.0, 0.0, false};
    s.strictly_positive_ = lo >= 0.0 ? Tri::True : Tri::False;
    s.nonnegative_ = s.strictly_positive_;
    s.prob_zero_ = 0.0;
    s.rebuild_transform();
    return s;
  }

  static StepLaw custom(std::function<double(Rng&)> sampler, LaplaceProfile transform,
                        SpanInfo support_hint = {}, Tri strictly_positive = Tri::Unknown,
                        Tri nonnegative = Tri::Unknown, double prob_zero = -1.0) {
    if (!sampler) throw Error("StepLaw: custom sampler required");
    if (!transform.evaluator) throw Error("StepLaw: custom transform required");
    StepLaw s;
    s.family_ = Family::Generic;
    s.gsampler_ = std::move(sampler);
    s.transform_ = std::move(transform);
    s.support_ = support_hint;
    s.strictly_positive_ = strictly_positive;
    s.nonnegative_ = nonnegative;
    s.prob_zero_ = prob_zero;
    return s;
  }

  // ---- basic access -------------------------------------------------------

  Family family() const { return family_; }
  const LaplaceProfile& transform() const { return transform_; }
  const SpanInfo& support() const { return support_; }
  double tilt_level() const { return tilt_level_; }
  Tri strictly_positive() const { return strictly_positive_; }
  Tri nonnegative() const { return nonnegative_; }
  double prob_zero() const { return prob_zero_; }
  const std::vector<std::pair<double, double>>& atom_list() const { return atoms_; }

  double psi(double t) const { return transform_.value(t); }

  DerivativeEstimate psi_deriv(double t) const { return left_derivative(transform_, t); }

  double sample(Rng& rng) const {
    switch (family_) {
      case Family::Deterministic: return c_;
      case Family::Atoms:
        return atoms_[rng.pick_cumulative(cum_.data(), cum_.size())].first;
      case Family::Gaussian: return rng.normal(mu_, std::sqrt(s2_));
      case Family::TiltedUniform: {
        const double u = rng.uniform01();
        if (std::fabs(tg_) < 1e-12) return lo_ + u * (hi_ - lo_);
        // inverse CDF of the truncated exponential, written to stay stable
        // for large tg_*(hi-lo)
        const double z = 1.0 - std::exp(-tg_ * (hi_ - lo_));
        return lo_ - std::log1p(-u * z) / tg_;
      }
      case Family::Generic: return gsampler_(rng);
    }
    return kNaN;
  }

 private:
  Family family_ = Family::Deterministic;
  double c_ = 0.0;
  std::vector<std::pair<double, double>> atoms_;
  std::vector<double> cum_;
  double mu_ = 0.0, s2_ = 0.0;
  double lo_ = 0.0, hi_ = 0.0, tg_ = 0.0;
  std::function<double(Rng&)> gsampler_;
  LaplaceProfile transform_;
  SpanInfo support_;
  double tilt_level_ = 0.0;
  Tri strictly_positive_ = Tri::Unknown;
  Tri nonnegative_ = Tri::Unknown;
  double prob_zero_ = -1.0;

  void rebuild_cum() {
    cum_.clear();
    double c = 0.0;
    for (auto& [x, p] : atoms_) {
      c += p;
      cum_.push_back(c);
    }
    cum_.back() = 1.0;
  }

  void rebuild_transform() {
    transform_ = LaplaceProfile{};
    transform_.is_exact = true;
    switch (family_) {
      case Family::Deterministic: {
        const double c = c_;
        transform_.evaluator = [c](double t) { return std::exp(-c * t); };
        transform_.derivative = [c](double t) { return -c * std::exp(-c * t); };
        break;
      }
      case Family::Atoms: {
        const auto a = atoms_;
        transform_.evaluator = [a](double t) {
          double s = 0.0;
          for (auto& [x, p] : a) s += p * std::exp(-t * x);
          return s;
        };
        transform_.derivative = [a](double t) {
          double s = 0.0;
          for (auto& [x, p] : a) s += -x * p * std::exp(-t * x);
          return s;
        };
        break;
      }
      case Family::Gaussian: {
        const double mu = mu_, s2 = s2_;
        transform_.evaluator = [mu, s2](double t) {
          return std::exp(-t * mu + 0.5 * t * t * s2);
        };
        transform_.derivative = [mu, s2](double t) {
          return (-mu + t * s2) * std::exp(-t * mu + 0.5 * t * t * s2);
        };
        break;
      }
      case Family::TiltedUniform: {
        const DisplacementLaw u = DisplacementLaw::uniform(lo_, hi_);
        const double tg = tg_;
        const double z = u.laplace(tg);
        transform_.evaluator = [u, tg, z](double t) { return u.laplace(tg + t) / z; };
        transform_.derivative = [u, tg, z](double t) {
          return u.laplace_deriv(tg + t) / z;
        };
        break;
      }
      case Family::Generic:
        break;  // keeps the supplied transform
    }
  }

  static SpanInfo exact_atom_span(const std::vector<std::pair<double, double>>& a);

  friend StepLaw tilt(const StepLaw&, double);
  friend StepLaw shift(const StepLaw&, double);
};

namespace detail {

// Greatest common divisor of real support differences via Euclid's algorithm
// (equivalently: continued-fraction rationalization of the ratios), with the
// denominator bounded by 1e6.  Returns nothing when the points do not fit a
// lattice at that resolution.
inline std::optional<double> lattice_gcd(const std::vector<double>& diffs) {
  double scale = 0.0;
  for (double d : diffs) scale = std::max(scale, std::fabs(d));
  if (scale == 0.0) return std::nullopt;
  double g = 0.0;
  for (double d : diffs) {
    d = std::fabs(d);
    if (d < scale * 1e-12) continue;
    if (g == 0.0) {
      g = d;
      continue;
    }
    double x = std::max(g, d), y = std::min(g, d);
    for (int it = 0; it < 80 && y > scale * 1e-10; ++it) {
      double r = std::fmod(x, y);
      if (r > y * (1.0 - 1e-9)) r = 0.0;  // remainder indistinguishable from a multiple
      if (r < scale * 1e-10) r = 0.0;
      x = y;
      y = r;
    }
    g = x;
    if (scale / g > 1e6) return std::nullopt;
  }
  if (g == 0.0) return std::nullopt;
  for (double d : diffs) {
    const double q = std::fabs(d) / g;
    if (std::fabs(q - std::round(q)) > 1e-6) return std::nullopt;
  }
  return g;
}

}  // namespace detail

inline SpanInfo StepLaw::exact_atom_span(const std::vector<std::pair<double, double>>& a) {
  SpanInfo info;
  std::vector<double> pos;
  for (auto& [x, p] : a)
    if (p > 0.0) pos.push_back(x);
  if (pos.size() == 1) {
    return {SupportKind::Arithmetic, std::fabs(pos[0]), pos[0], true};
  }
  std::vector<double> diffs;
  for (std::size_t i = 1; i < pos.size(); ++i) diffs.push_back(pos[i] - pos[0]);
  if (auto g = detail::lattice_gcd(diffs)) {
    return {SupportKind::Arithmetic, *g, pos[0], false};
  }
  return {SupportKind::Unknown, 0.0, 0.0, false};
}

// ---------------------------------------------------------------------------
// tilting and shifting

// Law of T under the measure with density e^(-gamma t)/psi(gamma); tilt
// levels compose additively and the transform becomes psi(gamma+t)/psi(gamma).
inline StepLaw tilt(const StepLaw& law, double gamma) {
  const double pg = law.psi(gamma);
  if (std::isinf(pg)) throw OutsideDomain("tilt: psi(gamma) infinite");
  if (!(pg > 0.0)) throw OutsideDomain("tilt: psi(gamma) not positive");
  StepLaw out = law;
  out.tilt_level_ += gamma;
  switch (law.family_) {
    case StepLaw::Family::Deterministic:
      break;  // point masses are fixed by tilting
    case StepLaw::Family::Atoms: {
      double tot = 0.0;
      for (auto& [x, p] : out.atoms_) {
        p *= std::exp(-gamma * x);
        tot += p;
      }
      for (auto& [x, p] : out.atoms_) p /= tot;
      out.rebuild_cum();
      out.rebuild_transform();
      break;
    }
    case StepLaw::Family::Gaussian:
      out.mu_ = law.mu_ - gamma * law.s2_;
      out.rebuild_transform();
      break;
    case StepLaw::Family::TiltedUniform:
      out.tg_ = law.tg_ + gamma;
      out.rebuild_transform();
      break;
    case StepLaw::Family::Generic: {
      // Acceptance-rejection against the untilted sampler with envelope
      // e^(-gamma(t - L)) on [L, inf); L is a Chernoff truncation point with
      // lost tilted mass below 1e-12.  Exponentially inefficient when the
      // base law reaches far below L, hence the loud failure after too many
      // tries; parametric families never take this path.
      double L = -kInf;
      for (double s : {gamma + 2.0, gamma + 1.0, gamma + 0.5, gamma + 0.25}) {
        const double ps = law.psi(s);
        if (std::isinf(ps) || !(ps > 0.0)) continue;
        L = std::max(L, std::log(1e-12 * pg / ps) / (s - gamma));
      }
      if (std::isinf(L))
        throw OutsideDomain("tilt: no Chernoff truncation point available right of gamma");
      auto base = law.gsampler_;
      auto wrapped = [base, gamma, L](Rng& rng) {
        for (std::size_t tries = 0; tries < 1000000; ++tries) {
          const double t = base(rng);
          if (t < L) continue;
          if (rng.uniform01() <= std::exp(-gamma * (t - L))) return t;
        }
        throw Error("tilt: acceptance rate too low for generic sampler");
      };
      out.gsampler_ = wrapped;
      LaplaceProfile tf;
      const LaplaceProfile base_tf = law.transform_;
      tf.evaluator = [base_tf, gamma, pg](double t) { return base_tf.value(gamma + t) / pg; };
      if (base_tf.derivative) {
        tf.derivative = [base_tf, gamma, pg](double t) {
          return base_tf.derivative(gamma + t) / pg;
        };
      }
      tf.domain_right_edge = base_tf.domain_right_edge - gamma;
      tf.is_exact = base_tf.is_exact;
      tf.eval_tolerance = base_tf.eval_tolerance;
      out.transform_ = tf;
      break;
    }
  }
  return out;
}

// Law of T - a; the transform becomes t -> e^(at) psi(t) and the lattice
// offset moves while the span stays put.
inline StepLaw shift(const StepLaw& law, double a) {
  if (a == 0.0) return law;
  StepLaw out = law;
  switch (law.family_) {
    case StepLaw::Family::Deterministic:
      if (law.c_ - a == 0.0) throw Degenerate("shift: T - a = 0 almost surely");
      out.c_ = law.c_ - a;
      out.support_ = {SupportKind::Arithmetic, std::fabs(out.c_), out.c_, true};
      out.strictly_positive_ = out.c_ > 0 ? Tri::True : Tri::False;
      out.nonnegative_ = out.strictly_positive_;
      out.rebuild_transform();
      break;
    case StepLaw::Family::Atoms: {
      auto a2 = law.atoms_;
      for (auto& [x, p] : a2) x -= a;
      return StepLaw::atoms(std::move(a2));
    }
    case StepLaw::Family::Gaussian:
      out.mu_ = law.mu_ - a;
      out.rebuild_transform();
      break;
    case StepLaw::Family::TiltedUniform:
      out.lo_ = law.lo_ - a;
      out.hi_ = law.hi_ - a;
      out.strictly_positive_ = out.lo_ >= 0.0 ? Tri::True : Tri::False;
      out.nonnegative_ = out.strictly_positive_;
      out.rebuild_transform();
      break;
    case StepLaw::Family::Generic: {
      auto base = law.gsampler_;
      out.gsampler_ = [base, a](Rng& rng) { return base(rng) - a; };
      LaplaceProfile tf;
      const LaplaceProfile base_tf = law.transform_;
      tf.evaluator = [base_tf, a](double t) {
        const double v = base_tf.value(t);
        return std::isinf(v) ? kInf : std::exp(a * t) * v;
      };
      if (base_tf.derivative) {
        tf.derivative = [base_tf, a](double t) {
          return std::exp(a * t) * (a * base_tf.value(t) + base_tf.derivative(t));
        };
      }
      tf.domain_right_edge = base_tf.domain_right_edge;
      tf.is_exact = base_tf.is_exact;
      tf.eval_tolerance = base_tf.eval_tolerance;
      out.transform_ = tf;
      if (out.support_.kind == SupportKind::Arithmetic) out.support_.offset -= a;
      out.strictly_positive_ = Tri::Unknown;
      out.nonnegative_ = Tri::Unknown;
      out.prob_zero_ = -1.0;
      break;
    }
  }
  out.tilt_level_ = law.tilt_level_;
  return out;
}

// ---------------------------------------------------------------------------
// R = -log inf_{t>=0} psi(t)

struct RateInfo {
  double R = kNaN;
  std::optional<double> gamma0;  // minimizer, when the infimum is attained
  std::string note;
};

inline RateInfo rate_R(const StepLaw& law) {
  RateInfo out;
  if (law.strictly_positive() == Tri::True) {
    out.R = kInf;
    out.note = "P(T > 0) = 1: psi decreases to 0, infimum not attained";
    return out;
  }
  if (law.nonnegative() == Tri::True && law.prob_zero() > 0.0) {
    out.R = -std::log(law.prob_zero());
    out.note = "P(T >= 0) = 1 with an atom at 0: psi decreases to P(T = 0)";
    return out;
  }
  // expand until psi turns upward (or the domain/precision ends)
  auto psi = [&](double t) { return law.psi(t); };
  double hi = 1.0;
  double prev = psi(0.5), cur = psi(1.0);
  int doublings = 0;
  while (doublings++ < 60 && std::isfinite(cur) && cur < prev && cur > 1e-280) {
    prev = cur;
    hi *= 2.0;
    cur = psi(hi);
  }
  if (!std::isfinite(cur)) {
    // diverged: the minimum is inside [0, hi]; golden section avoids the
    // infinite wing automatically
  } else if (cur > 1e-280 && cur < prev) {
    // still decreasing at the expansion cap
    if (cur < 1e-200) {
      out.R = kInf;
      out.note = "psi still decreasing toward 0 at the expansion cap";
      return out;
    }
    if (std::fabs(cur - prev) <= 1e-14 * cur) {
      out.R = -std::log(cur);
      out.note = "psi plateaus without an attained minimizer";
      return out;
    }
  }
  const MinResult m = golden_section_min(psi, 0.0, hi, 1e-10);
  double g0 = m.arg;
  double val = std::min(m.value, 1.0);  // psi(0) = 1 caps the infimum
  if (g0 < 1e-9 && val > 1.0 - 1e-12) {
    out.R = 0.0;
    out.gamma0 = 0.0;
    out.note = "psi minimized at t = 0";
    return out;
  }
  out.R = -std::log(val);
  if (out.R < 0.0) out.R = 0.0;
  out.gamma0 = g0;
  return out;
}

// ---------------------------------------------------------------------------
// minimal positive root of psi(t) = e^{-a}

struct GammaResult {
  std::optional<double> gamma;
  std::string reason;
  bool ok() const { return gamma.has_value(); }
};

inline GammaResult solve_gamma(const StepLaw& law, double a) {
  if (!(a > 0.0)) throw OutsideDomain("solve_gamma: a must be positive");
  GammaResult out;
  const RateInfo rate = rate_R(law);
  const double target = std::exp(-a);
  auto f = [&](double t) {
    const double v = law.psi(t);
    return (std::isinf(v) ? kInf : v) - target;
  };

  if (!rate.gamma0.has_value()) {
    if (std::isfinite(rate.R) && a > rate.R + 1e-12) {
      out.reason = "exceeds R";
      return out;
    }
    // psi decreases monotonically toward its infimum; bracket by doubling
    double hi = 1.0;
    int it = 0;
    while (f(hi) > 0.0 && it++ < 200) hi *= 2.0;
    if (f(hi) > 0.0) {
      out.reason = "could not bracket a root below the infimum";
      return out;
    }
    out.gamma = bisect_root(f, 0.0, hi, 1e-10);
    return out;
  }

  const double g0 = *rate.gamma0;
  if (a > rate.R + 1e-12) {
    out.reason = "exceeds R";
    return out;
  }
  if (std::fabs(a - rate.R) <= 1e-8) {
    // boundary: the root coincides with the minimizer; usable only when the
    // left slope there is certifiably negative
    const DerivativeEstimate d = law.psi_deriv(g0);
    const double slope_margin = std::max(1e-8, d.error_bar);
    if (!(-d.value > slope_margin)) {
      out.reason = "flat minimum";
      return out;
    }
    out.gamma = g0;
    return out;
  }
  // interior: psi(0) - e^{-a} > 0 > psi(gamma0) - e^{-a}, and psi is
  // nonincreasing on [0, gamma0], so the first crossing is the minimal root
  out.gamma = bisect_root(f, 0.0, g0, 1e-10);
  return out;
}

// ---------------------------------------------------------------------------
// span detection

inline SpanInfo detect_span(const StepLaw& law, std::size_t samples = 0,
                            std::uint64_t seed = 0) {
  if (law.family() != StepLaw::Family::Generic) return law.support();
  if (law.support().kind != SupportKind::Unknown) return law.support();
  if (samples < 1000)
    throw Error("detect_span: empirical detection needs samples >= 1000");
  Rng rng(seed);
  std::vector<double> draws(samples);
  for (auto& d : draws) d = law.sample(rng);
  std::sort(draws.begin(), draws.end());
  // cluster to distinct values
  std::vector<double> distinct;
  const double spread = std::max(1.0, std::fabs(draws.back() - draws.front()));
  const double tol = spread * 1e-9;
  for (double d : draws) {
    if (distinct.empty() || d - distinct.back() > tol) distinct.push_back(d);
  }
  SpanInfo info;
  if (distinct.size() == 1) {
    return {SupportKind::Arithmetic, std::fabs(distinct[0]), distinct[0], true};
  }
  if (distinct.size() > samples / 4) {
    return {SupportKind::Unknown, 0.0, 0.0, false};  // looks continuous; stay agnostic
  }
  std::vector<double> diffs;
  for (std::size_t i = 1; i < distinct.size(); ++i)
    diffs.push_back(distinct[i] - distinct[0]);
  if (auto g = detail::lattice_gcd(diffs)) {
    return {SupportKind::Arithmetic, *g, distinct[0], false};
  }
  return {SupportKind::Unknown, 0.0, 0.0, false};
}

// ---------------------------------------------------------------------------
// path sampling and tilt reporting

inline std::vector<double> sample_path(const StepLaw& law, std::size_t n, Rng& rng) {
  std::vector<double> path(n + 1);
  path[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) path[i] = path[i - 1] + law.sample(rng);
  return path;
}

inline std::vector<double> sample_path(const StepLaw& law, std::size_t n,
                                       std::uint64_t seed) {
  Rng rng(seed);
  return sample_path(law, n, rng);
}

struct TiltReport {
  double gamma = 0.0;
  double tilted_mean = kNaN;            // -psi'(gamma)/psi(gamma)
  double tilted_mean_estimate = kNaN;   // Monte Carlo E_gamma T
  double tilted_mean_se = kNaN;
  double exp_identity_estimate = kNaN;  // Monte Carlo E_gamma e^{gamma T}
  double exp_identity_se = kNaN;
  double exp_identity_target = kNaN;    // 1/psi(gamma)
  std::optional<double> drift_nu;       // -e^a psi'(gamma) when a is supplied
};

inline TiltReport tilt_report(const StepLaw& law, double gamma, std::size_t samples,
                              std::uint64_t seed, std::optional<double> a = {}) {
  const double pg = law.psi(gamma);
  if (std::isinf(pg)) throw OutsideDomain("tilt_report: psi(gamma) infinite");
  TiltReport rep;
  rep.gamma = gamma;
  const DerivativeEstimate d = law.psi_deriv(gamma);
  rep.tilted_mean = -d.value / pg;
  rep.exp_identity_target = 1.0 / pg;
  if (a) rep.drift_nu = -std::exp(*a) * d.value;
  const StepLaw tl = tilt(law, gamma);
  Rng rng(seed);
  RunningStat stat, mean_stat;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = tl.sample(rng);
    stat.add(std::exp(gamma * t));
    mean_stat.add(t);
  }
  rep.exp_identity_estimate = stat.mean();
  rep.exp_identity_se = stat.stderror();
  rep.tilted_mean_estimate = mean_stat.mean();
  rep.tilted_mean_se = mean_stat.stderror();
  return rep;
}

// ---------------------------------------------------------------------------
// the associated walk of a canonical offspring model

// One step of the walk whose n-step marginals satisfy the many-to-one
// identity: the increment law is the normalized intensity e^{-x} xi(dx), and
// the transform is t -> m(1+t).  Sampling is exact for parametric kinds; for
// Custom kinds a pooled weighted-resampling scheme (K configurations per
// draw) approximates the size-biased pick with O(1/K) bias.
inline StepLaw associated_step(const OffspringModel& model, std::size_t pool = 64) {
  if (model.mean_children() == 0.0)
    throw Degenerate("associated_step: model has no offspring");
  if (!model.is_canonical())
    throw NotCanonical("associated_step: model must be canonical");

  switch (model.kind()) {
    case OffspringModel::Kind::GaltonWatson:
      return StepLaw::deterministic(std::log(model.count_law().mean()));
    case OffspringModel::Kind::IndependentDisplacements: {
      const DisplacementLaw& d = model.displacement_law();
      switch (d.kind) {
        case DisplacementLaw::Kind::Point:
          return StepLaw::deterministic(d.p1);
        case DisplacementLaw::Kind::Normal:
          return StepLaw::gaussian(d.p1 - d.p2, d.p2);
        case DisplacementLaw::Kind::Atoms: {
          auto a = d.atoms;
          double tot = 0.0;
          for (auto& [x, p] : a) {
            p *= std::exp(-x);
            tot += p;
          }
          for (auto& [x, p] : a) p /= tot;
          return StepLaw::atoms(std::move(a));
        }
        case DisplacementLaw::Kind::Uniform:
          return StepLaw::tilted_uniform(d.p1, d.p2, 1.0);
      }
      break;
    }
    case OffspringModel::Kind::Lattice: {
      std::vector<std::pair<double, double>> a;
      double tot = 0.0;
      for (auto& e : model.lattice_entries()) {
        const double p = e.mean_count * std::exp(-e.displacement);
        a.emplace_back(e.displacement, p);
        tot += p;
      }
      for (auto& [x, p] : a) p /= tot;
      return StepLaw::atoms(std::move(a));
    }
    case OffspringModel::Kind::Custom: {
      OffspringModel copy = model;
      auto sampler = [copy, pool](Rng& rng) {
        std::vector<double> xs, weights;
        std::vector<double> cfg;
        for (std::size_t k = 0; k < pool; ++k) {
          copy.sample_into(rng, cfg);
          for (double x : cfg) {
            xs.push_back(x);
            weights.push_back(weights.empty() ? std::exp(-x)
                                              : weights.back() + std::exp(-x));
          }
        }
        if (xs.empty()) throw Error("associated_step: pooled configurations all empty");
        return xs[rng.pick_cumulative(weights.data(), weights.size())];
      };
      const LaplaceProfile mp = model.profile();
      LaplaceProfile tf;
      tf.evaluator = [mp](double t) { return mp.value(1.0 + t); };
      if (mp.derivative) {
        tf.derivative = [mp](double t) { return mp.derivative(1.0 + t); };
      }
      tf.domain_right_edge = mp.domain_right_edge - 1.0;
      tf.is_exact = mp.is_exact;
      tf.eval_tolerance = mp.eval_tolerance;
      return StepLaw::custom(sampler, tf);
    }
  }
  throw Error("associated_step: unreachable");
}

// Bias diagnostic for the pooled sampler: empirical E e^{-t S_1} versus the
// exact m(1+t) on a t-grid.
struct BiasProbe {
  double t = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double exact = 0.0;
};

inline std::vector<BiasProbe> associated_sampler_bias(const OffspringModel& model,
                                                      const std::vector<double>& t_grid,
                                                      std::size_t samples,
                                                      std::uint64_t seed,
                                                      std::size_t pool = 64) {
  const StepLaw law = associated_step(model, pool);
  std::vector<RunningStat> stats(t_grid.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    const double s1 = law.sample(rng);
    for (std::size_t j = 0; j < t_grid.size(); ++j)
      stats[j].add(std::exp(-t_grid[j] * s1));
  }
  std::vector<BiasProbe> out(t_grid.size());
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    out[j] = {t_grid[j], stats[j].mean(), stats[j].stderror(),
              law.transform().value(t_grid[j])};
  }
  return out;
}

}  // namespace brwlab
