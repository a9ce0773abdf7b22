#pragma once

// Forward simulation of the branching population: the intrinsic martingale
// W_n, its truncated companion and remainder terms, the bookkeeping
// martingale M_n built from them, and the series diagnostics that make
// exponential convergence observable on an ensemble of traces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brwlab/common.hpp"
#include "brwlab/offspring.hpp"
#include "brwlab/parallel.hpp"
#include "brwlab/rng.hpp"
#include "brwlab/stats.hpp"

namespace brwlab {

struct Individual {
  double weight;    // e^{-S(u)}
  double position;  // S(u)
};

struct Population {
  std::size_t generation = 0;
  std::vector<Individual> individuals;
  bool truncated = false;  // population cap was hit while building this state

  double martingale() const {
    double w = 0.0;
    for (const auto& ind : individuals) w += ind.weight;
    return w;
  }
};

inline Population initial_population() { return {0, {{1.0, 0.0}}, false}; }

// ---------------------------------------------------------------------------
// the distribution function of W_1, reduced to what the remainder term needs:
// the tail first moment t -> E[W_1; W_1 > t]

class W1Tail {
 public:
  // exact atom list (value, probability)
  static W1Tail exact_atoms(std::vector<std::pair<double, double>> atoms) {
    W1Tail t;
    t.exact_ = true;
    std::sort(atoms.begin(), atoms.end());
    t.atoms_ = std::move(atoms);
    for (auto& [w, p] : t.atoms_) t.mean_ += w * p;
    return t;
  }

  // empirical table: sorted quantile knots with tail-moment values, linear
  // interpolation in between
  static W1Tail empirical(const OffspringModel& model, std::size_t draws = 1000000,
                          std::size_t knots = 10000, std::uint64_t seed = 0xf7a31eull) {
    if (draws < 1000) throw Error("W1Tail::empirical: need at least 1000 draws");
    std::vector<double> w1(draws);
    std::vector<double> cfg;
    Rng rng(seed);
    for (std::size_t i = 0; i < draws; ++i) {
      model.sample_into(rng, cfg);
      double s = 0.0;
      for (double x : cfg) s += std::exp(-x);
      w1[i] = s;
    }
    std::sort(w1.begin(), w1.end());
    W1Tail t;
    t.exact_ = false;
    const std::size_t k = std::min(knots, draws);
    t.knots_.reserve(k + 1);
    t.knot_tail_.reserve(k + 1);
    // suffix sums from the top; knot j sits at quantile j/k
    std::vector<double> suffix(draws + 1, 0.0);
    for (std::size_t i = draws; i-- > 0;) suffix[i] = suffix[i + 1] + w1[i];
    const double n = static_cast<double>(draws);
    t.mean_ = suffix[0] / n;
    for (std::size_t j = 0; j <= k; ++j) {
      const std::size_t idx = std::min(draws - 1, j * draws / k);
      t.knots_.push_back(w1[idx]);
      t.knot_tail_.push_back(suffix[idx + 1] / n);  // strictly-above mass
    }
    return t;
  }

  // exact table when the model's W_1 distribution is enumerable
  static std::optional<W1Tail> from_model(const OffspringModel& model) {
    if (!model.w1_enumerable()) return std::nullopt;
    return exact_atoms(model.w1_atoms());
  }

  bool exact() const { return exact_; }
  double mean() const { return mean_; }

  // E[W_1; W_1 > t], strict inequality to mirror the truncation indicator
  double tail_moment(double t) const {
    if (exact_) {
      double s = 0.0;
      for (auto it = atoms_.rbegin(); it != atoms_.rend() && it->first > t; ++it)
        s += it->first * it->second;
      return s;
    }
    if (knots_.empty() || t < knots_.front()) return mean_;
    if (t >= knots_.back()) return 0.0;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    const std::size_t j = it - knots_.begin();  // knots_[j-1] <= t < knots_[j]
    const double t0 = knots_[j - 1], t1 = knots_[j];
    const double v0 = knot_tail_[j - 1], v1 = knot_tail_[j];
    if (t1 <= t0) return v1;
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
  }

 private:
  bool exact_ = false;
  std::vector<std::pair<double, double>> atoms_;
  std::vector<double> knots_, knot_tail_;
  double mean_ = 0.0;
};

// R_n = sum over individuals of Y_v * E[W_1; W_1 > e^{-an}/Y_v]: the
// conditional mean of the mass removed by the truncation indicator
inline double conditional_remainder(const Population& pop, const OffspringModel& model,
                                    double a, const W1Tail* table = nullptr) {
  std::optional<W1Tail> own;
  if (!table) {
    own = W1Tail::from_model(model);
    if (!own)
      throw FTableRequired(
          "conditional_remainder: W_1 distribution not enumerable; supply an "
          "empirical W1Tail table");
    table = &*own;
  }
  const double ean = std::exp(a * static_cast<double>(pop.generation));
  double r = 0.0;
  for (const auto& ind : pop.individuals)
    r += ind.weight * table->tail_moment(1.0 / (ean * ind.weight));
  return r;
}

// ---------------------------------------------------------------------------
// traces

struct TraceRow {
  std::size_t n = 0;
  double w = 0.0;            // W_n
  double wtilde_next = 0.0;  // truncated next-generation sum
  double r = 0.0;            // R_n
  double increment = 0.0;    // e^{an}(W_{n+1} - W_n)
  double m = 0.0;            // M_n, cumulative sum of e^{ak}(Wtilde_{k+1} - W_k + R_k)
  std::size_t pop_size = 0;
  bool truncated = false;  // sentinel row written when the cap stopped the trace
  bool mismatch = false;   // some parent's child sum was cut by the indicator
};

struct MartingaleTrace {
  double a = 0.0;
  std::uint64_t seed = 0;
  std::string model_id;
  bool truncated = false;
  std::vector<TraceRow> rows;
};

// Evolves generations 0..n_max+1 and records one row per n in 0..n_max.
// Extinction pads the remaining rows with zeros; hitting the population cap
// appends a sentinel row (forward-looking fields zeroed, truncated flag set)
// and stops.
inline MartingaleTrace simulate(const OffspringModel& model, double a,
                                std::size_t n_max, std::size_t cap,
                                std::uint64_t seed, const W1Tail* table = nullptr) {
  if (!(a > 0.0)) throw OutsideDomain("simulate: a must be positive");
  if (cap < 1000) throw Error("simulate: cap must be at least 1000");
  if (!model.is_canonical()) throw NotCanonical("simulate: model must be canonical");
  std::optional<W1Tail> own;
  if (!table) {
    own = W1Tail::from_model(model);
    if (!own)
      throw FTableRequired(
          "simulate: W_1 distribution not enumerable; supply an empirical "
          "W1Tail table");
    table = &*own;
  }

  MartingaleTrace trace;
  trace.a = a;
  trace.seed = seed;
  Rng rng(seed);
  Population pop = initial_population();
  std::vector<double> children;
  std::vector<Individual> next;
  double m_prev = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double ean = std::exp(a * static_cast<double>(n));
    const double w_n = pop.martingale();
    const double r_n = conditional_remainder(pop, model, a, table);

    next.clear();
    double w_next = 0.0, wtilde = 0.0;
    bool mismatch = false, overflow = false;
    for (const auto& parent : pop.individuals) {
      model.sample_into(rng, children);
      if (next.size() + children.size() > cap) {
        overflow = true;
        break;
      }
      double w1 = 0.0;
      for (double x : children) {
        const double cw = parent.weight * std::exp(-x);
        w1 += std::exp(-x);
        next.push_back({cw, parent.position + x});
        w_next += cw;
      }
      const double contribution = parent.weight * w1;
      if (ean * contribution <= 1.0)
        wtilde += contribution;
      else
        mismatch = true;
    }
    if (overflow) {
      trace.truncated = true;
      trace.rows.push_back({n, w_n, 0.0, 0.0, 0.0, m_prev, pop.individuals.size(),
                            true, false});
      break;
    }
    const double m_n = m_prev + ean * (wtilde - w_n + r_n);
    trace.rows.push_back({n, w_n, wtilde, r_n, ean * (w_next - w_n), m_n,
                          pop.individuals.size(), false, mismatch});
    m_prev = m_n;
    pop.individuals.swap(next);
    pop.generation = n + 1;
  }
  return trace;
}

inline std::vector<MartingaleTrace> simulate_ensemble(
    const OffspringModel& model, double a, std::size_t n_max, std::size_t cap,
    std::uint64_t master_seed, std::size_t replicates, const W1Tail* table = nullptr,
    unsigned workers = 0) {
  std::optional<W1Tail> own;
  if (!table && !model.w1_enumerable()) {
    own = W1Tail::empirical(model);
    table = &*own;
  }
  return parallel_map<MartingaleTrace>(
      replicates,
      [&](std::size_t i) {
        return simulate(model, a, n_max, cap, derive_seed(master_seed, i), table);
      },
      workers);
}

// ---------------------------------------------------------------------------
// diagnostics

// Partial sums P_k = sum_{n<=k} e^{an}(W_{n+1} - W_n) and the Cauchy-tail
// statistic Q_n = max_{n<=k<=N-1} |P_k - P_{n-1}|.  Q_n decreasing to 0 is
// the observable signature of the series converging; no claim about the
// unobservable limit W is made.
struct SeriesReport {
  std::vector<double> partial;  // P_k, k = 0..N
  std::vector<double> cauchy;   // Q_n, n = 0..N-1
  bool flagged_truncated = false;
};

inline SeriesReport exp_series_diagnostics(const MartingaleTrace& trace) {
  SeriesReport rep;
  rep.flagged_truncated = trace.truncated;
  double run = 0.0;
  for (const auto& row : trace.rows) {
    if (row.truncated) break;  // sentinel row has no increment
    run += row.increment;
    rep.partial.push_back(run);
  }
  const std::size_t sz = rep.partial.size();
  if (sz < 2) return rep;
  const std::size_t last = sz - 1;  // k ranges over [n, last-1]
  std::vector<double> sufmax(sz), sufmin(sz);
  sufmax[last - 1] = sufmin[last - 1] = rep.partial[last - 1];
  for (std::size_t k = last - 1; k-- > 0;) {
    sufmax[k] = std::max(rep.partial[k], sufmax[k + 1]);
    sufmin[k] = std::min(rep.partial[k], sufmin[k + 1]);
  }
  rep.cauchy.resize(last);
  for (std::size_t n = 0; n < last; ++n) {
    const double base = n == 0 ? 0.0 : rep.partial[n - 1];
    rep.cauchy[n] = std::max(std::fabs(sufmax[n] - base), std::fabs(sufmin[n] - base));
  }
  return rep;
}

// Ensemble view of the two series of the truncation argument: per-n mismatch
// frequency, per-n mean of e^{an}R_n (both with log-linear decay fits over
// their positive entries), and per-n second moments of M_n with their sup.
struct EnsembleReport {
  std::vector<double> mismatch_freq;
  std::vector<double> mean_exp_r;  // mean of e^{an} R_n
  std::vector<double> m_second;    // mean of M_n^2
  double mismatch_slope = kNaN;
  double exp_r_slope = kNaN;
  double sup_m_second = 0.0;
  std::size_t ensemble = 0;
};

namespace detail {
inline double log_decay_slope(const std::vector<double>& vals) {
  std::vector<double> xs, ys;
  for (std::size_t n = 0; n < vals.size(); ++n)
    if (vals[n] > 0.0) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(std::log(vals[n]));
    }
  if (xs.size() < 2) return kNaN;
  return fit_line(xs, ys).slope;
}
}  // namespace detail

inline EnsembleReport m_series_diagnostics(const std::vector<MartingaleTrace>& traces) {
  if (traces.size() < 100)
    throw Error("m_series_diagnostics: need an ensemble of at least 100 traces");
  std::size_t nrows = SIZE_MAX;
  for (const auto& t : traces) {
    std::size_t complete = 0;
    for (const auto& row : t.rows)
      if (!row.truncated) ++complete;
    nrows = std::min(nrows, complete);
  }
  if (nrows == 0 || nrows == SIZE_MAX)
    throw Error("m_series_diagnostics: traces have no complete rows");

  EnsembleReport rep;
  rep.ensemble = traces.size();
  rep.mismatch_freq.assign(nrows, 0.0);
  rep.mean_exp_r.assign(nrows, 0.0);
  rep.m_second.assign(nrows, 0.0);
  const double count = static_cast<double>(traces.size());
  for (const auto& t : traces) {
    for (std::size_t n = 0; n < nrows; ++n) {
      const TraceRow& row = t.rows[n];
      rep.mismatch_freq[n] += row.mismatch ? 1.0 : 0.0;
      rep.mean_exp_r[n] += std::exp(t.a * static_cast<double>(n)) * row.r;
      rep.m_second[n] += row.m * row.m;
    }
  }
  for (std::size_t n = 0; n < nrows; ++n) {
    rep.mismatch_freq[n] /= count;
    rep.mean_exp_r[n] /= count;
    rep.m_second[n] /= count;
    rep.sup_m_second = std::max(rep.sup_m_second, rep.m_second[n]);
  }
  rep.mismatch_slope = detail::log_decay_slope(rep.mismatch_freq);
  rep.exp_r_slope = detail::log_decay_slope(rep.mean_exp_r);
  return rep;
}

}  // namespace brwlab
