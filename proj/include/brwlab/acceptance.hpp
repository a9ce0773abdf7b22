#pragma once

// The acceptance suite: nine checks with pinned tolerances, one [PASS]/[FAIL]
// line each.  Shared between the dedicated test binary and the `verify`
// subcommand of the CLI.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "brwlab/brw.hpp"
#include "brwlab/laplace.hpp"
#include "brwlab/offspring.hpp"
#include "brwlab/renewal.hpp"
#include "brwlab/stats.hpp"
#include "brwlab/walk.hpp"

namespace brwlab::acceptance {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

struct SuiteResult {
  std::vector<CriterionResult> criteria;
  bool all_pass = true;
};

namespace detail {

// accumulates failure messages; pass() stays true until a check fails
class Checker {
 public:
  void require(bool ok, const std::string& on_fail) {
    if (!ok) {
      if (!fail_.empty()) fail_ += "; ";
      fail_ += on_fail;
    }
  }
  void note(const std::string& s) {
    if (!info_.empty()) info_ += "; ";
    info_ += s;
  }
  bool pass() const { return fail_.empty(); }
  std::string detail() const {
    if (fail_.empty()) return info_;
    return info_.empty() ? fail_ : fail_ + " [" + info_ + "]";
  }

 private:
  std::string fail_, info_;
};

inline std::string num(double v, int digits = 10) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

inline double median_of_three(const std::vector<double>& v, std::size_t n) {
  const std::size_t lo = n == 0 ? 0 : n - 1;
  const std::size_t hi = std::min(v.size() - 1, n + 1);
  std::vector<double> w(v.begin() + lo, v.begin() + hi + 1);
  return median(w);
}

}  // namespace detail

// 1. the worked Galton-Watson instance: theta, gamma, and the theorem verdict
inline detail::Checker criterion_gw_example() {
  detail::Checker c;
  const double a = std::log(2.0) / 3.0;
  const auto model = OffspringModel::galton_watson(CountLaw::uniform_range(1, 3));
  const LaplaceProfile profile = model.profile();
  const RootResult rt = solve_theta(profile, a);
  c.require(rt.ok(), "no theta root: " + rt.reason);
  if (rt.ok()) {
    c.require(std::fabs(*rt.root - 1.5) <= 1e-9,
              "theta = " + detail::num(*rt.root, 15) + ", want 1.5 within 1e-9");
    c.note("theta = " + detail::num(*rt.root, 12));
  }
  const StepLaw shifted = shift(associated_step(model), a);
  const GammaResult gr = solve_gamma(shifted, a);
  c.require(gr.ok(), "no gamma root: " + gr.reason);
  if (gr.ok()) {
    c.require(std::fabs(*gr.gamma - 0.5) <= 1e-8,
              "gamma = " + detail::num(*gr.gamma, 15) + ", want 0.5 within 1e-8");
    c.note("gamma = " + detail::num(*gr.gamma, 12));
  }
  const ConditionReport rep = check_rate_theorem(profile, a, model.moment_oracle());
  c.require(rep.applies, "theorem verdict silent: " + rep.reason);
  return c;
}

// 2. deterministic steps: the estimator equals the geometric closed form
inline detail::Checker criterion_deterministic_exact() {
  detail::Checker c;
  double worst = 0.0;
  for (double a : {0.2, 0.3, 0.5})
    for (double step : {0.7, 1.0, 1.3})
      for (double x : {0.45, 1.7, 3.3, 5.05, 6.2}) {
        const auto law = StepLaw::deterministic(step);
        const RenewalEstimate e = estimate_V(law, a, x, 64, 0xd37ull);
        const double k = std::floor(x / step + 1e-9);
        const double truth =
            (std::exp(a * (k + 1.0)) - 1.0) / (std::exp(a) - 1.0);
        const double rel = std::fabs(e.value - truth) / truth;
        worst = std::max(worst, rel);
        c.require(rel < 1e-12, "a=" + detail::num(a, 3) + " c=" + detail::num(step, 3) +
                                   " x=" + detail::num(x, 4) + ": rel err " +
                                   detail::num(rel, 3));
      }
  c.note("worst rel err " + detail::num(worst, 3));
  return c;
}

// 3. Gaussian step, a = 0.3: scaled estimate near the predicted constant
inline detail::Checker criterion_gaussian_constant() {
  detail::Checker c;
  const auto law = StepLaw::gaussian(1.0, 1.0);
  const double a = 0.3;
  const double gamma = 1.0 - std::sqrt(0.4);
  // psi(t) = e^{-t + t^2/2}, so -psi'(gamma) = (1 - gamma) e^{-a} and the
  // constant e^{-a}/(gamma(-psi'(gamma))) collapses to 1/(gamma(1 - gamma))
  const double target = 1.0 / (gamma * (1.0 - gamma));
  const RenewalEstimate e = estimate_V(law, a, 15.0, 1000000, 0x9a5eedull);
  const double scaled = std::exp(-gamma * 15.0) * e.value;
  const double rel = std::fabs(scaled - target) / target;
  c.require(rel < 0.10, "e^{-gamma x} V(15) = " + detail::num(scaled, 6) + " vs " +
                            detail::num(target, 6) + " (rel " + detail::num(rel, 3) + ")");
  c.note("scaled " + detail::num(scaled, 6) + " target " + detail::num(target, 6) +
         " horizon " + std::to_string(e.horizon));
  return c;
}

// 4. the finiteness classifier on its five worked examples
inline detail::Checker criterion_classifier() {
  detail::Checker c;
  using V = Classification::Verdict;
  const auto twopoint = StepLaw::atoms({{-1.0, 1.0 / 3.0}, {2.0, 2.0 / 3.0}});
  auto expect = [&](const Classification& got, V verdict, const std::string& tag,
                    const std::string& which) {
    c.require(got.verdict == verdict && got.tag == tag,
              which + ": got " + std::string(to_string(got.verdict)) + " " + got.tag);
  };
  const Classification below = classify_finiteness(twopoint, 0.1);
  expect(below, V::FiniteAll, "(a)(i)", "two-point a=0.1");
  expect(classify_finiteness(twopoint, 0.3), V::InfiniteAll, "(a)(iii)",
         "two-point a=0.3");
  expect(classify_finiteness(StepLaw::atoms({{-1.0, 0.5}, {1.0, 0.5}}), 0.05),
         V::InfiniteAll, "(a)(iii)", "symmetric walk");
  expect(classify_finiteness(StepLaw::deterministic(0.7), 1.0), V::FiniteAll, "(b)",
         "strictly positive");
  expect(classify_finiteness(StepLaw::atoms({{0.0, 0.5}, {1.0, 0.5}}), std::log(2.0)),
         V::InfiniteWithCase, "(c)", "atom at zero");
  const double r_exact = 0.2310490601866485;  // log(inf psi)^-1 for the two-point law
  c.require(std::fabs(below.R - r_exact) <= 1e-6,
            "two-point R = " + detail::num(below.R, 12) + ", want " +
                detail::num(r_exact, 12) + " within 1e-6");
  c.note("R = " + detail::num(below.R, 10));
  return c;
}

// 5. exponential tilting identities, Monte Carlo vs closed form
inline detail::Checker criterion_tilt_identities() {
  detail::Checker c;
  struct Case {
    StepLaw law;
    double a;
    const char* name;
  };
  const std::vector<Case> cases = {
      {StepLaw::atoms({{-1.0, 1.0 / 3.0}, {2.0, 2.0 / 3.0}}), 0.1, "two-point"},
      {StepLaw::gaussian(1.0, 1.0), 0.3, "gaussian"}};
  for (const auto& cs : cases) {
    const GammaResult gr = solve_gamma(cs.law, cs.a);
    c.require(gr.ok(), std::string(cs.name) + ": no gamma");
    if (!gr.ok()) continue;
    const TiltReport rep = tilt_report(cs.law, *gr.gamma, 100000, 0x7117ull);
    const double id_dev = std::fabs(rep.exp_identity_estimate - rep.exp_identity_target);
    c.require(id_dev <= 4.0 * rep.exp_identity_se,
              std::string(cs.name) + ": exp identity off by " + detail::num(id_dev, 4) +
                  " > 4se = " + detail::num(4.0 * rep.exp_identity_se, 4));
    const double mean_dev = std::fabs(rep.tilted_mean_estimate - rep.tilted_mean);
    c.require(mean_dev <= 4.0 * rep.tilted_mean_se,
              std::string(cs.name) + ": tilted mean off by " + detail::num(mean_dev, 4) +
                  " > 4se = " + detail::num(4.0 * rep.tilted_mean_se, 4));
  }
  return c;
}

// 6. the lattice forms on the Galton-Watson instance
inline detail::Checker criterion_lattice_forms() {
  detail::Checker c;
  const double a = std::log(2.0) / 3.0;
  const auto model = OffspringModel::galton_watson(CountLaw::deterministic(2));
  const StepLaw shifted = shift(associated_step(model), a);
  const SpanInfo& span = shifted.support();
  c.require(span.kind == SupportKind::Arithmetic, "shifted walk span not arithmetic");
  const double lam = span.span;
  c.note("lambda_a = " + detail::num(lam, 12));
  double worst = 0.0;
  for (int n = 3; n <= 6; ++n) {
    const RenewalEstimate e = estimate_V(shifted, a, lam * n, 64, 0x6a77ull);
    const double truth = (std::exp(a * (n + 1.0)) - 1.0) / (std::exp(a) - 1.0);
    const double rel = std::fabs(e.value - truth) / truth;
    worst = std::max(worst, rel);
    c.require(rel < 1e-12,
              "V_a at n=" + std::to_string(n) + ": rel err " + detail::num(rel, 3));
  }
  c.note("worst rel err " + detail::num(worst, 3));
  const VaPredictions p = predict_Va(model.profile(), a, span);
  const double growth = std::exp(p.va.exponent * lam);
  const double target = std::exp(0.5 * lam);  // theta - 1 = 1/2 here
  c.require(std::fabs(growth - target) <= 1e-9,
            "lattice growth factor " + detail::num(growth, 15) + " vs e^{(theta-1)lambda} = " +
                detail::num(target, 15));
  c.note("growth " + detail::num(growth, 12));
  return c;
}

// 7 and 8 share one ensemble; the struct keeps it alive across both
struct TwoSeriesState {
  std::vector<MartingaleTrace> traces;
};

inline detail::Checker criterion_two_series(TwoSeriesState& st) {
  detail::Checker c;
  const double a = std::log(2.0) / 3.0;
  const auto model = OffspringModel::galton_watson(CountLaw::uniform_range(0, 4));
  st.traces = simulate_ensemble(model, a, 20, 10000000, 0xacce55ull, 200);
  const EnsembleReport rep = m_series_diagnostics(st.traces);
  c.require(std::isfinite(rep.exp_r_slope) && rep.exp_r_slope < 0.0,
            "slope of log mean e^{an}R_n = " + detail::num(rep.exp_r_slope, 4) +
                ", want negative");
  c.note("exp_r slope " + detail::num(rep.exp_r_slope, 4));
  // per-n truncation frequency, median-of-three smoothed, non-increasing
  // from n = 5 onward
  bool monotone = true;
  for (std::size_t n = 5; n + 1 < rep.mismatch_freq.size() && monotone; ++n)
    monotone = detail::median_of_three(rep.mismatch_freq, n + 1) <=
               detail::median_of_three(rep.mismatch_freq, n) + 1e-12;
  c.require(monotone, "smoothed mismatch frequency increases past n = 5");
  c.require(rep.m_second.size() > 20, "ensemble traces shorter than n = 20");
  if (rep.m_second.size() > 20) {
    c.require(rep.m_second[20] <= 3.0 * rep.m_second[10],
              "E M_20^2 = " + detail::num(rep.m_second[20], 5) + " exceeds 3 * E M_10^2 = " +
                  detail::num(3.0 * rep.m_second[10], 5));
    c.note("M2(10) = " + detail::num(rep.m_second[10], 5) + ", M2(20) = " +
           detail::num(rep.m_second[20], 5));
  }
  return c;
}

inline detail::Checker criterion_cauchy_ratio(const TwoSeriesState& st) {
  detail::Checker c;
  std::vector<double> q5, q15;
  for (const auto& t : st.traces) {
    const SeriesReport rep = exp_series_diagnostics(t);
    if (rep.cauchy.size() > 15) {
      q5.push_back(rep.cauchy[5]);
      q15.push_back(rep.cauchy[15]);
    }
  }
  c.require(q5.size() >= 100, "too few complete traces for the Cauchy statistic");
  if (q5.size() >= 100) {
    const double m5 = median(q5), m15 = median(q15);
    const double ratio = m5 / m15;
    c.require(ratio >= 2.0, "median Q5 / median Q15 = " + detail::num(ratio, 4) +
                                ", want >= 2");
    c.note("Q5 = " + detail::num(m5, 4) + ", Q15 = " + detail::num(m15, 4) +
           ", ratio = " + detail::num(ratio, 3));
  }
  return c;
}

// 9. module invariants of offspring, walk, and brw at seeds 1, 2, 3
inline detail::Checker criterion_invariants() {
  detail::Checker c;
  const double a = std::log(2.0) / 3.0;
  const auto gw13 = OffspringModel::galton_watson(CountLaw::uniform_range(1, 3));
  const auto gw04 = OffspringModel::galton_watson(CountLaw::uniform_range(0, 4));
  const auto gauss = OffspringModel::independent(
      CountLaw::poisson(2.0), DisplacementLaw::normal(std::log(2.0) + 0.125, 0.25));
  const auto lattice = OffspringModel::lattice(
      {{-1.0, std::exp(-1.0) / 3.0}, {2.0, 2.0 * std::exp(2.0) / 3.0}});

  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const std::string tag = "seed " + std::to_string(seed) + ": ";

    // offspring: canonical normalization, sampler vs transform, reproducibility
    int mi = 0;
    for (const auto* model : {&gw13, &gauss, &lattice}) {
      ++mi;
      c.require(model->is_canonical(), tag + "model " + std::to_string(mi) +
                                           " not canonical");
      for (double theta : {0.9, 1.0, 1.2}) {
        const LaplaceValue mc =
            model->intensity_laplace_mc(theta, 100000, derive_seed(seed, mi * 8 + 1));
        const double closed = model->intensity_laplace(theta).value;
        const double tol = std::max(4.0 * mc.se, 1e-9);
        c.require(std::fabs(mc.value - closed) <= tol,
                  tag + "model " + std::to_string(mi) + " m(" + detail::num(theta, 3) +
                      ") MC " + detail::num(mc.value, 6) + " vs closed " +
                      detail::num(closed, 6) + " beyond 4se");
      }
      const PointConfiguration c1 = model->sample_offspring(seed * 97 + 5);
      const PointConfiguration c2 = model->sample_offspring(seed * 97 + 5);
      c.require(c1.displacements == c2.displacements,
                tag + "sample_offspring not seed-reproducible");
    }

    // walk: tilt identity and the many-to-one identity at n = 1, 2, 3
    {
      const auto tp = StepLaw::atoms({{-1.0, 1.0 / 3.0}, {2.0, 2.0 / 3.0}});
      const TiltReport rep = tilt_report(tp, 0.25, 100000, derive_seed(seed, 40));
      c.require(std::fabs(rep.exp_identity_estimate - rep.exp_identity_target) <=
                    4.0 * rep.exp_identity_se,
                tag + "tilt identity beyond 4se");
    }
    {
      // many-to-one: tree-side weighted sums against walk-side expectations
      auto f = [](double s) { return std::exp(-(s - 1.0) * (s - 1.0) / 2.0); };
      const StepLaw assoc = associated_step(gauss);
      const std::size_t reps = 20000;
      RunningStat tree[3], walk_side[3];
      Rng tree_rng(derive_seed(seed, 50));
      std::vector<double> cfg;
      std::vector<std::pair<double, double>> cur, nxt;  // (weight, position)
      for (std::size_t i = 0; i < reps; ++i) {
        cur.assign(1, {1.0, 0.0});
        for (int n = 0; n < 3; ++n) {
          nxt.clear();
          double sum = 0.0;
          for (const auto& [w, s] : cur) {
            gauss.sample_into(tree_rng, cfg);
            for (double x : cfg) {
              nxt.emplace_back(w * std::exp(-x), s + x);
              sum += w * std::exp(-x) * f(s + x);
            }
          }
          tree[n].add(sum);
          cur.swap(nxt);
        }
      }
      Rng walk_rng(derive_seed(seed, 51));
      for (std::size_t i = 0; i < 100000; ++i) {
        double t = 0.0;
        for (int n = 0; n < 3; ++n) {
          t += assoc.sample(walk_rng);
          walk_side[n].add(f(t));
        }
      }
      for (int n = 0; n < 3; ++n) {
        const double dev = std::fabs(tree[n].mean() - walk_side[n].mean());
        const double band = 4.0 * std::sqrt(tree[n].stderror() * tree[n].stderror() +
                                            walk_side[n].stderror() * walk_side[n].stderror());
        c.require(dev <= band, tag + "many-to-one at n=" + std::to_string(n + 1) +
                                   ": dev " + detail::num(dev, 4) + " > " +
                                   detail::num(band, 4));
      }
    }

    // brw: martingale mean preservation, nonnegativity, bookkeeping, E W <= 1
    {
      const auto traces =
          simulate_ensemble(gw04, a, 5, 100000, derive_seed(seed, 60), 10000);
      RunningStat diff[6], w_final;
      bool nonneg = true, dominated = true, decomposed = true;
      for (const auto& t : traces) {
        double m_prev = 0.0;
        for (const auto& row : t.rows) {
          const double ean = std::exp(a * static_cast<double>(row.n));
          const double w_next = row.w + row.increment / ean;
          diff[row.n].add(w_next - row.w);
          nonneg = nonneg && row.r >= 0.0 && row.w >= 0.0;
          dominated = dominated && row.wtilde_next <= w_next + 1e-12;
          const double step = ean * (row.wtilde_next - row.w + row.r);
          decomposed = decomposed &&
                       std::fabs(row.m - m_prev - step) <= 1e-12 * std::max(1.0, std::fabs(row.m));
          m_prev = row.m;
          if (row.n == 5) w_final.add(w_next);
        }
      }
      for (int n = 0; n <= 5; ++n) {
        const double dev = std::fabs(diff[n].mean());
        c.require(dev <= 4.0 * diff[n].stderror(),
                  tag + "martingale mean at n=" + std::to_string(n) + " off by " +
                      detail::num(dev, 4) + " > 4se");
      }
      c.require(nonneg, tag + "negative weight or remainder seen");
      c.require(dominated, tag + "truncated sum exceeds the full sum");
      c.require(decomposed, tag + "M_n increments disagree with their definition");
      c.require(w_final.mean() <= 1.0 + 4.0 * w_final.stderror(),
                tag + "E W_6 = " + detail::num(w_final.mean(), 5) + " above 1 + 4se");
    }
  }
  return c;
}

inline SuiteResult run_all(std::ostream* progress = nullptr) {
  SuiteResult suite;
  TwoSeriesState shared;
  struct Item {
    int index;
    const char* name;
    std::function<detail::Checker()> fn;
  };
  const std::vector<Item> items = {
      {1, "Galton-Watson example reproduction", [] { return criterion_gw_example(); }},
      {2, "deterministic-step exactness", [] { return criterion_deterministic_exact(); }},
      {3, "non-arithmetic asymptotic constant",
       [] { return criterion_gaussian_constant(); }},
      {4, "finiteness classifier examples", [] { return criterion_classifier(); }},
      {5, "tilting identities", [] { return criterion_tilt_identities(); }},
      {6, "lattice asymptotics on the Galton-Watson instance",
       [] { return criterion_lattice_forms(); }},
      {7, "two-series decay and M_n^2 boundedness",
       [&shared] { return criterion_two_series(shared); }},
      {8, "exponential-convergence Cauchy signature",
       [&shared] { return criterion_cauchy_ratio(shared); }},
      {9, "module invariant suites at seeds 1, 2, 3",
       [] { return criterion_invariants(); }},
  };
  for (const auto& item : items) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Checker c;
    std::string aborted;
    try {
      c = item.fn();
    } catch (const std::exception& e) {
      aborted = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CriterionResult res;
    res.index = item.index;
    res.name = item.name;
    res.pass = aborted.empty() && c.pass();
    res.seconds = secs;
    res.detail = aborted.empty() ? c.detail() : "exception: " + aborted;
    suite.all_pass = suite.all_pass && res.pass;
    if (progress) {
      (*progress) << (res.pass ? "[PASS] " : "[FAIL] ") << res.index << ". " << res.name
                  << " (" << detail::num(secs, 3) << " s)";
      if (!res.detail.empty()) (*progress) << " -- " << res.detail;
      (*progress) << "\n" << std::flush;
    }
    suite.criteria.push_back(std::move(res));
  }
  return suite;
}

}  // namespace brwlab::acceptance
