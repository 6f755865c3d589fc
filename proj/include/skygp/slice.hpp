#pragma once

#include <cmath>
#include <limits>

#include "skygp/rng.hpp"

namespace skygp {

struct SliceOptions {
  double width = 1.0;
  int max_step_out = 64;
  int max_shrink = 100;
};

struct SliceResult {
  double value = 0.0;
  double log_density = 0.0;
  bool moved = false;
};

/// Univariate slice sampler (step-out then shrink). On shrinkage exhaustion
/// the current value is kept and `moved` stays false.
template <class LogDensFn>
SliceResult slice_sample(double x0, double log_f0, LogDensFn&& log_f, Rng& rng,
                         const SliceOptions& opts = {}) {
  const double log_y = log_f0 - rng.exponential();

  const double r = rng.u01();
  double lo = x0 - r * opts.width;
  double hi = x0 + (1.0 - r) * opts.width;
  for (int i = 0; i < opts.max_step_out && log_f(lo) > log_y; ++i) lo -= opts.width;
  for (int i = 0; i < opts.max_step_out && log_f(hi) > log_y; ++i) hi += opts.width;

  for (int shrink = 0; shrink < opts.max_shrink; ++shrink) {
    const double x1 = rng.uniform(lo, hi);
    const double lf = log_f(x1);
    if (lf > log_y) return {x1, lf, true};
    if (x1 < x0)
      lo = x1;
    else
      hi = x1;
  }
  return {x0, log_f0, false};
}

}  // namespace skygp
