#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "brwlab/common.hpp"

namespace brwlab {

struct MinResult {
  double arg = kNaN;
  double value = kInf;
};

// Golden-section search for a unimodal f on [lo, hi].  +inf values are legal
// and simply lose comparisons, so the bracket walks away from divergent
// regions.  Returns the best point actually evaluated, which keeps the
// reported minimum value honest even when the bracket midpoint sits on the
// flat noise plateau around the true minimizer.
template <class F>
MinResult golden_section_min(F&& f, double lo, double hi, double tol = 1e-10,
                             int max_iter = 200) {
  static const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  MinResult best;
  auto consider = [&](double x, double v) {
    if (v < best.value) best = {x, v};
  };
  consider(lo, f(lo));
  consider(hi, f(hi));
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  consider(x1, f1);
  consider(x2, f2);
  for (int it = 0; it < max_iter && (hi - lo) > tol; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
      consider(x1, f1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
      consider(x2, f2);
    }
  }
  return best;
}

// Bisection on a bracketing interval with f(lo) > 0 > f(hi) or the reverse.
template <class F>
double bisect_root(F&& f, double lo, double hi, double tol = 1e-10,
                   int max_iter = 200) {
  double flo = f(lo);
  for (int it = 0; it < max_iter && (hi - lo) > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((flo > 0) == (fm > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace brwlab
