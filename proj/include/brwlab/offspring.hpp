#pragma once

// Reproduction point-process models.  A model describes one generation of
// offspring displacements (a random number J of children at real positions
// X_1..X_J relative to the parent), evaluates the intensity Laplace
// transform m(theta) = E sum_i e^(-theta X_i), and canonicalizes itself to
// m(1) = 1 via x -> gamma*x + log m(gamma).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "brwlab/common.hpp"
#include "brwlab/laplace.hpp"
#include "brwlab/rng.hpp"

namespace brwlab {

// ---------------------------------------------------------------------------
// count laws

struct CountLaw {
  enum class Kind { Deterministic, Poisson, UniformRange };
  Kind kind = Kind::Deterministic;
  long value = 0;        // Deterministic
  double poisson_mean = 0.0;
  long lo = 0, hi = 0;   // UniformRange, inclusive

  static CountLaw deterministic(long k) {
    if (k < 0) throw Error("CountLaw: negative deterministic count");
    CountLaw c;
    c.kind = Kind::Deterministic;
    c.value = k;
    return c;
  }
  static CountLaw poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
      throw Error("CountLaw: poisson mean must be finite and nonnegative");
    CountLaw c;
    c.kind = Kind::Poisson;
    c.poisson_mean = mean;
    return c;
  }
  static CountLaw uniform_range(long lo, long hi) {
    if (lo < 0 || hi < lo) throw Error("CountLaw: bad uniform range");
    CountLaw c;
    c.kind = Kind::UniformRange;
    c.lo = lo;
    c.hi = hi;
    return c;
  }

  double mean() const {
    switch (kind) {
      case Kind::Deterministic: return static_cast<double>(value);
      case Kind::Poisson: return poisson_mean;
      case Kind::UniformRange: return 0.5 * static_cast<double>(lo + hi);
    }
    return 0.0;
  }

  bool bounded() const { return kind != Kind::Poisson; }

  long sample(Rng& rng) const {
    switch (kind) {
      case Kind::Deterministic: return value;
      case Kind::Poisson: return rng.poisson(poisson_mean);
      case Kind::UniformRange: return rng.uniform_int(lo, hi);
    }
    return 0;
  }

  // (count, probability) pairs; the Poisson tail is cut once it drops below
  // tail_eps (the discarded mass is below any tolerance used in this library)
  std::vector<std::pair<long, double>> pmf(double tail_eps = 1e-15) const {
    std::vector<std::pair<long, double>> out;
    switch (kind) {
      case Kind::Deterministic:
        out.emplace_back(value, 1.0);
        break;
      case Kind::UniformRange: {
        const double p = 1.0 / static_cast<double>(hi - lo + 1);
        for (long k = lo; k <= hi; ++k) out.emplace_back(k, p);
        break;
      }
      case Kind::Poisson: {
        double p = std::exp(-poisson_mean);
        double cum = 0.0;
        for (long k = 0; k < 4096; ++k) {
          out.emplace_back(k, p);
          cum += p;
          if (1.0 - cum < tail_eps && k > poisson_mean) break;
          p *= poisson_mean / static_cast<double>(k + 1);
        }
        break;
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// displacement laws (all four kinds have entire Laplace transforms and are
// closed under affine maps, which is what canonicalization needs)

struct DisplacementLaw {
  enum class Kind { Point, Normal, Atoms, Uniform };
  Kind kind = Kind::Point;
  double p1 = 0.0, p2 = 0.0;  // Point: value | Normal: mu, sigma^2 | Uniform: lo, hi
  std::vector<std::pair<double, double>> atoms;  // (position, probability)
  std::vector<double> cum;                       // cumulative atom weights

  static DisplacementLaw point(double x) {
    DisplacementLaw d;
    d.kind = Kind::Point;
    d.p1 = x;
    return d;
  }
  static DisplacementLaw normal(double mu, double sigma2) {
    if (!(sigma2 > 0.0)) throw Error("DisplacementLaw: sigma^2 must be positive");
    DisplacementLaw d;
    d.kind = Kind::Normal;
    d.p1 = mu;
    d.p2 = sigma2;
    return d;
  }
  static DisplacementLaw make_atoms(std::vector<std::pair<double, double>> a) {
    if (a.empty()) throw Error("DisplacementLaw: empty atom list");
    double tot = 0.0;
    for (auto& [x, p] : a) {
      if (!(p >= 0.0)) throw Error("DisplacementLaw: negative atom probability");
      tot += p;
    }
    if (!(std::fabs(tot - 1.0) <= 1e-9))
      throw Error("DisplacementLaw: atom probabilities must sum to 1");
    DisplacementLaw d;
    d.kind = Kind::Atoms;
    d.atoms = std::move(a);
    d.cum.reserve(d.atoms.size());
    double c = 0.0;
    for (auto& [x, p] : d.atoms) {
      c += p;
      d.cum.push_back(c);
    }
    d.cum.back() = 1.0;
    return d;
  }
  static DisplacementLaw uniform(double lo, double hi) {
    if (!(hi > lo)) throw Error("DisplacementLaw: uniform needs lo < hi");
    DisplacementLaw d;
    d.kind = Kind::Uniform;
    d.p1 = lo;
    d.p2 = hi;
    return d;
  }

  // E e^(-theta X)
  double laplace(double theta) const {
    switch (kind) {
      case Kind::Point: return std::exp(-theta * p1);
      case Kind::Normal: return std::exp(-theta * p1 + 0.5 * theta * theta * p2);
      case Kind::Atoms: {
        double s = 0.0;
        for (auto& [x, p] : atoms) s += p * std::exp(-theta * x);
        return s;
      }
      case Kind::Uniform: {
        if (std::fabs(theta) < 1e-8) {
          const double mu = 0.5 * (p1 + p2);
          const double m2 = (p1 * p1 + p1 * p2 + p2 * p2) / 3.0;
          return 1.0 - theta * mu + 0.5 * theta * theta * m2;
        }
        return (std::exp(-theta * p1) - std::exp(-theta * p2)) / (theta * (p2 - p1));
      }
    }
    return kNaN;
  }

  // d/dtheta of the above
  double laplace_deriv(double theta) const {
    switch (kind) {
      case Kind::Point: return -p1 * std::exp(-theta * p1);
      case Kind::Normal:
        return (-p1 + theta * p2) * std::exp(-theta * p1 + 0.5 * theta * theta * p2);
      case Kind::Atoms: {
        double s = 0.0;
        for (auto& [x, p] : atoms) s += -x * p * std::exp(-theta * x);
        return s;
      }
      case Kind::Uniform: {
        if (std::fabs(theta) < 1e-8) {
          const double mu = 0.5 * (p1 + p2);
          const double m2 = (p1 * p1 + p1 * p2 + p2 * p2) / 3.0;
          return -mu + theta * m2;
        }
        const double w = p2 - p1;
        const double ea = std::exp(-theta * p1), eb = std::exp(-theta * p2);
        return ((-p1 * ea + p2 * eb) * theta - (ea - eb)) / (theta * theta * w);
      }
    }
    return kNaN;
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::Point: return p1;
      case Kind::Normal: return rng.normal(p1, std::sqrt(p2));
      case Kind::Atoms: return atoms[rng.pick_cumulative(cum.data(), cum.size())].first;
      case Kind::Uniform: return rng.uniform(p1, p2);
    }
    return kNaN;
  }

  // law of scale*X + shift
  DisplacementLaw affine(double scale, double shift) const {
    switch (kind) {
      case Kind::Point: return point(scale * p1 + shift);
      case Kind::Normal: return normal(scale * p1 + shift, scale * scale * p2);
      case Kind::Atoms: {
        auto a = atoms;
        for (auto& [x, p] : a) x = scale * x + shift;
        return make_atoms(std::move(a));
      }
      case Kind::Uniform: {
        double lo = scale * p1 + shift, hi = scale * p2 + shift;
        if (lo > hi) std::swap(lo, hi);
        return uniform(lo, hi);
      }
    }
    return *this;
  }
};

// ---------------------------------------------------------------------------
// results of transform / moment evaluation

struct LaplaceValue {
  double value = kNaN;
  double se = 0.0;        // 0 for closed forms
  bool exact = true;
  bool infinite = false;  // divergence detected (closed form or heuristic)
  std::size_t samples = 0;
  std::string note;
};

struct MomentEstimate {
  double value = kNaN;
  double se = kInf;
  bool suspected_infinite = false;
  std::size_t samples = 0;
};

struct PointConfiguration {
  std::vector<double> displacements;
};

// ---------------------------------------------------------------------------
// the model

class OffspringModel {
 public:
  enum class Kind { GaltonWatson, IndependentDisplacements, Lattice, Custom };
  struct LatticeEntry {
    double displacement = 0.0;
    double mean_count = 0.0;
  };
  using Sampler = std::function<void(Rng&, std::vector<double>&)>;

  // Galton-Watson embedding: every child sits at log(E J), so the weights
  // e^(-X) are exactly 1/(E J) and the model is canonical by construction.
  static OffspringModel galton_watson(CountLaw count) {
    if (!(count.mean() > 0.0)) throw Error("galton_watson: count mean must be positive");
    OffspringModel m;
    m.kind_ = Kind::GaltonWatson;
    m.count_ = count;
    m.displacement_ = DisplacementLaw::point(std::log(count.mean()));
    return m;
  }

  static OffspringModel independent(CountLaw count, DisplacementLaw disp) {
    OffspringModel m;
    m.kind_ = Kind::IndependentDisplacements;
    m.count_ = count;
    m.displacement_ = std::move(disp);
    return m;
  }

  // Poisson counts at each lattice entry, independent across entries; only
  // the mean counts enter the intensity transform.
  static OffspringModel lattice(std::vector<LatticeEntry> entries) {
    if (entries.empty()) throw Error("lattice: at least one entry required");
    for (auto& e : entries)
      if (!(e.mean_count >= 0.0)) throw Error("lattice: mean counts must be >= 0");
    OffspringModel m;
    m.kind_ = Kind::Lattice;
    m.lattice_ = std::move(entries);
    return m;
  }

  // transform/transform_deriv, when supplied, are declared closed forms and
  // make the model exact; without them every transform query is Monte Carlo.
  static OffspringModel custom(Sampler sampler,
                               std::function<double(double)> transform = {},
                               std::function<double(double)> transform_deriv = {},
                               double domain_right_edge = kInf) {
    if (!sampler) throw Error("custom: sampler required");
    OffspringModel m;
    m.kind_ = Kind::Custom;
    m.sampler_ = std::move(sampler);
    m.transform_ = std::move(transform);
    m.transform_deriv_ = std::move(transform_deriv);
    m.domain_right_edge_ = domain_right_edge;
    return m;
  }

  Kind kind() const { return kind_; }
  const CountLaw& count_law() const { return count_; }
  const DisplacementLaw& displacement_law() const { return displacement_; }
  const std::vector<LatticeEntry>& lattice_entries() const { return lattice_; }
  std::size_t max_children() const { return max_children_; }
  void set_max_children(std::size_t cap) { max_children_ = cap; }
  bool has_closed_form() const { return kind_ != Kind::Custom || bool(transform_); }

  // ---- sampling -----------------------------------------------------------

  void sample_into(Rng& rng, std::vector<double>& out) const {
    out.clear();
    switch (kind_) {
      case Kind::GaltonWatson:
      case Kind::IndependentDisplacements: {
        const long j = count_.sample(rng);
        if (static_cast<std::size_t>(j) > max_children_)
          throw CapExceeded("sample_offspring: count " + std::to_string(j) +
                            " exceeds max_children");
        for (long i = 0; i < j; ++i) out.push_back(displacement_.sample(rng));
        break;
      }
      case Kind::Lattice: {
        for (auto& e : lattice_) {
          const long n = rng.poisson(e.mean_count);
          if (out.size() + static_cast<std::size_t>(n) > max_children_)
            throw CapExceeded("sample_offspring: lattice configuration exceeds max_children");
          for (long i = 0; i < n; ++i) out.push_back(e.displacement);
        }
        break;
      }
      case Kind::Custom: {
        sampler_(rng, out);
        if (out.size() > max_children_)
          throw CapExceeded("sample_offspring: custom sampler returned " +
                            std::to_string(out.size()) + " children");
        break;
      }
    }
  }

  PointConfiguration sample_offspring(std::uint64_t seed) const {
    Rng rng(seed);
    PointConfiguration cfg;
    sample_into(rng, cfg.displacements);
    return cfg;
  }

  // ---- intensity transform ------------------------------------------------

  LaplaceValue intensity_laplace(double theta) const {
    if (!(theta >= 0.0)) throw OutsideDomain("intensity_laplace: theta must be >= 0");
    if (has_closed_form()) {
      LaplaceValue v;
      v.value = closed_m(theta);
      v.exact = true;
      v.infinite = std::isinf(v.value);
      return v;
    }
    return intensity_laplace_mc(theta, 200000, 0x6d5a1ull);
  }

  // Monte Carlo m(theta) with the doubling instability heuristic: if doubling
  // the sample changes the running mean by more than 20% twice in a row, the
  // value is reported as suspected infinite instead of as a number.
  LaplaceValue intensity_laplace_mc(double theta, std::size_t budget,
                                    std::uint64_t seed) const {
    if (budget < 16) budget = 16;
    Rng rng(seed);
    std::vector<double> cfg;
    double sum = 0.0, sumsq = 0.0;
    double est_quarter = 0.0, est_half = 0.0;
    const std::size_t quarter = budget / 4, half = budget / 2;
    for (std::size_t i = 0; i < budget; ++i) {
      sample_into(rng, cfg);
      double w = 0.0;
      for (double x : cfg) w += std::exp(-theta * x);
      sum += w;
      sumsq += w * w;
      if (i + 1 == quarter) est_quarter = sum / static_cast<double>(i + 1);
      if (i + 1 == half) est_half = sum / static_cast<double>(i + 1);
    }
    const double n = static_cast<double>(budget);
    LaplaceValue v;
    v.exact = false;
    v.samples = budget;
    v.value = sum / n;
    const double var = std::max(0.0, sumsq / n - v.value * v.value);
    v.se = std::sqrt(var / n);
    const double jump1 = std::fabs(est_half - est_quarter);
    const double jump2 = std::fabs(v.value - est_half);
    if (jump1 > 0.2 * std::fabs(est_quarter) && jump2 > 0.2 * std::fabs(est_half)) {
      v.infinite = true;
      v.note = "running mean unstable under sample doubling";
      v.value = kInf;
    }
    return v;
  }

  // ---- canonicalization ---------------------------------------------------

  OffspringModel canonicalize(double gamma) const {
    if (!(gamma > 0.0)) throw Error("canonicalize: gamma must be positive");
    double mg;
    if (has_closed_form()) {
      mg = closed_m(gamma);
    } else {
      const LaplaceValue v = intensity_laplace_mc(gamma, 200000, 0xca70ull);
      if (v.infinite)
        throw NotCanonicalizable("canonicalize: m(gamma) suspected infinite");
      mg = v.value;
    }
    if (std::isinf(mg) || !(mg > 0.0))
      throw NotCanonicalizable("canonicalize: m(gamma) must be finite and positive");
    const double shift = std::log(mg);

    switch (kind_) {
      case Kind::GaltonWatson:
        // gamma*log(EJ) + log(EJ^(1-gamma)) = log(EJ): the embedding is a
        // fixed point of the transformation for every gamma
        return *this;
      case Kind::IndependentDisplacements: {
        OffspringModel m = independent(count_, displacement_.affine(gamma, shift));
        m.max_children_ = max_children_;
        return m;
      }
      case Kind::Lattice: {
        auto entries = lattice_;
        for (auto& e : entries) e.displacement = gamma * e.displacement + shift;
        OffspringModel m = lattice(std::move(entries));
        m.max_children_ = max_children_;
        return m;
      }
      case Kind::Custom: {
        auto base = sampler_;
        Sampler wrapped = [base, gamma, shift](Rng& rng, std::vector<double>& out) {
          base(rng, out);
          for (double& x : out) x = gamma * x + shift;
        };
        std::function<double(double)> tf, td;
        if (transform_) {
          auto t0 = transform_;
          tf = [t0, gamma, shift](double th) {
            return t0(gamma * th) * std::exp(-th * shift);
          };
          if (transform_deriv_) {
            auto d0 = transform_deriv_;
            td = [t0, d0, gamma, shift](double th) {
              const double e = std::exp(-th * shift);
              return gamma * d0(gamma * th) * e - shift * t0(gamma * th) * e;
            };
          }
        }
        OffspringModel m = custom(std::move(wrapped), std::move(tf), std::move(td),
                                  domain_right_edge_ / gamma);
        m.max_children_ = max_children_;
        return m;
      }
    }
    return *this;
  }

  // ---- profile for the analytic engine ------------------------------------

  LaplaceProfile profile() const {
    LaplaceProfile p;
    if (has_closed_form()) {
      OffspringModel copy = *this;
      p.evaluator = [copy](double th) { return copy.closed_m(th); };
      if (kind_ != Kind::Custom || transform_deriv_) {
        OffspringModel c2 = *this;
        p.derivative = [c2](double th) { return c2.closed_m_deriv(th); };
      }
      p.domain_right_edge = domain_right_edge_;
      p.is_exact = true;
      return p;
    }
    OffspringModel copy = *this;
    p.evaluator = [copy](double th) {
      const LaplaceValue v = copy.intensity_laplace_mc(th, 200000, 0x9d0f11ull);
      return v.infinite ? kInf : v.value;
    };
    p.domain_right_edge = domain_right_edge_;
    p.is_exact = false;
    p.eval_tolerance = intensity_laplace_mc(1.0, 200000, 0x9d0f11ull).se * 4;
    return p;
  }

  // ---- moments ------------------------------------------------------------

  bool is_canonical(double tol = 1e-9) const {
    const LaplaceValue v = intensity_laplace(1.0);
    if (v.infinite) return false;
    const double slack = v.exact ? tol : std::max(4 * v.se, 1e-3);
    return std::fabs(v.value - 1.0) <= slack;
  }

  // Monte Carlo E W_1^theta with W_1 = sum_i e^(-X_i); the doubling
  // heuristic flags suspected divergence exactly as for intensity_laplace.
  MomentEstimate w1_moment(double theta, std::size_t budget, std::uint64_t seed) const {
    if (budget < 1000) throw Error("w1_moment: budget must be at least 1000");
    if (!is_canonical()) throw NotCanonical("w1_moment: model must be canonical");
    Rng rng(seed);
    std::vector<double> cfg;
    double sum = 0.0, sumsq = 0.0, est_quarter = 0.0, est_half = 0.0;
    const std::size_t quarter = budget / 4, half = budget / 2;
    for (std::size_t i = 0; i < budget; ++i) {
      sample_into(rng, cfg);
      double w = 0.0;
      for (double x : cfg) w += std::exp(-x);
      const double v = std::pow(w, theta);
      sum += v;
      sumsq += v * v;
      if (i + 1 == quarter) est_quarter = sum / static_cast<double>(i + 1);
      if (i + 1 == half) est_half = sum / static_cast<double>(i + 1);
    }
    const double n = static_cast<double>(budget);
    MomentEstimate e;
    e.samples = budget;
    e.value = sum / n;
    e.se = std::sqrt(std::max(0.0, sumsq / n - e.value * e.value) / n);
    const double jump1 = std::fabs(est_half - est_quarter);
    const double jump2 = std::fabs(e.value - est_half);
    e.suspected_infinite =
        jump1 > 0.2 * std::fabs(est_quarter) && jump2 > 0.2 * std::fabs(est_half);
    return e;
  }

  // Moment oracle for check_rate_theorem: enumerable W_1 distributions answer
  // analytically, bounded configurations answer Holds, everything else falls
  // back to the Monte Carlo estimate and its instability heuristic.
  MomentOracle moment_oracle(std::size_t budget = 100000, std::uint64_t seed = 0x3a9ull) const {
    OffspringModel copy = *this;
    return [copy, budget, seed](double theta) {
      if (copy.w1_enumerable()) return TriState::Holds;  // finite sums are finite
      const MomentEstimate e = copy.w1_moment(theta, budget, seed);
      return e.suspected_infinite ? TriState::Undetermined : TriState::Holds;
    };
  }

  double mean_children() const {
    switch (kind_) {
      case Kind::GaltonWatson:
      case Kind::IndependentDisplacements:
        return count_.mean();
      case Kind::Lattice: {
        double s = 0.0;
        for (auto& e : lattice_) s += e.mean_count;
        return s;
      }
      case Kind::Custom: {
        Rng rng(0x5ca1eull);
        std::vector<double> cfg;
        double s = 0.0;
        const std::size_t n = 20000;
        for (std::size_t i = 0; i < n; ++i) {
          sample_into(rng, cfg);
          s += static_cast<double>(cfg.size());
        }
        return s / static_cast<double>(n);
      }
    }
    return 0.0;
  }

  // Supercriticality and structural checks.  Kept out of the factories so
  // degenerate laws (J = 0) remain constructible for one-step sampling
  // experiments; population simulation and the CLI validate before use.
  bool validate(std::string* why = nullptr) const {
    auto fail = [&](const std::string& msg) {
      if (why) *why = msg;
      return false;
    };
    const double mean = mean_children();
    if (!(mean > 1.0)) return fail("mean offspring count " + std::to_string(mean) + " is not > 1");
    if (kind_ == Kind::Lattice) {
      double tot = 0.0;
      for (auto& e : lattice_) tot += e.mean_count;
      if (!(tot > 0.0)) return fail("lattice model has zero total intensity");
    }
    return true;
  }

  // ---- exact W_1 distribution when the configuration weight is a function
  // of J alone (Galton-Watson, or point displacements) ----------------------

  bool w1_enumerable() const {
    if (kind_ == Kind::GaltonWatson) return true;
    return kind_ == Kind::IndependentDisplacements &&
           displacement_.kind == DisplacementLaw::Kind::Point;
  }

  // (w, prob) atoms of W_1
  std::vector<std::pair<double, double>> w1_atoms(double tail_eps = 1e-15) const {
    if (!w1_enumerable()) throw NoClosedForm("w1_atoms: W_1 distribution not enumerable");
    const double per_child = std::exp(-displacement_.p1);
    std::vector<std::pair<double, double>> out;
    for (auto& [k, p] : count_.pmf(tail_eps))
      out.emplace_back(per_child * static_cast<double>(k), p);
    return out;
  }

  // closed-form m(theta); +inf outside the domain
  double closed_m(double theta) const {
    switch (kind_) {
      case Kind::GaltonWatson:
      case Kind::IndependentDisplacements:
        return count_.mean() * displacement_.laplace(theta);
      case Kind::Lattice: {
        double s = 0.0;
        for (auto& e : lattice_) s += e.mean_count * std::exp(-theta * e.displacement);
        return s;
      }
      case Kind::Custom:
        if (!transform_) throw NoClosedForm("closed_m: custom model lacks a transform");
        if (theta >= domain_right_edge_) return kInf;
        return transform_(theta);
    }
    return kNaN;
  }

  double closed_m_deriv(double theta) const {
    switch (kind_) {
      case Kind::GaltonWatson:
      case Kind::IndependentDisplacements:
        return count_.mean() * displacement_.laplace_deriv(theta);
      case Kind::Lattice: {
        double s = 0.0;
        for (auto& e : lattice_)
          s += -e.displacement * e.mean_count * std::exp(-theta * e.displacement);
        return s;
      }
      case Kind::Custom:
        if (!transform_deriv_) throw NoClosedForm("closed_m_deriv: no derivative declared");
        if (theta >= domain_right_edge_) throw OutsideDomain("closed_m_deriv: outside domain");
        return transform_deriv_(theta);
    }
    return kNaN;
  }

 private:
  Kind kind_ = Kind::GaltonWatson;
  CountLaw count_;
  DisplacementLaw displacement_;
  std::vector<LatticeEntry> lattice_;
  Sampler sampler_;
  std::function<double(double)> transform_;
  std::function<double(double)> transform_deriv_;
  double domain_right_edge_ = kInf;
  std::size_t max_children_ = 1000000;
};

}  // namespace brwlab
