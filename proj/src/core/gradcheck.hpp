#pragma once

#include <functional>
#include <span>
#include <vector>

#include "core/mat.hpp"

namespace struchis {

// Central finite differences against analytic gradients, in double precision.
// `f` must be a pure scalar function of the inputs; `analytic[i]` must match
// the shape of `inputs[i]`. Returns the max relative error over all
// coordinates, with the denominator floored to avoid division blow-up on
// near-zero pairs.
inline double grad_check(
    const std::function<double(const std::vector<MatD>&)>& f,
    std::vector<MatD> inputs, const std::vector<MatD>& analytic,
    double h = 1e-5) {
  if (inputs.size() != analytic.size())
    fail(ErrorKind::contract, "grad_check: input/gradient count mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!analytic[i].same_shape(inputs[i]))
      fail(ErrorKind::contract, "grad_check: gradient shape mismatch at " +
                                    std::to_string(i));
    for (size_t k = 0; k < inputs[i].d.size(); ++k) {
      double orig = inputs[i].d[k];
      inputs[i].d[k] = orig + h;
      double fp = f(inputs);
      inputs[i].d[k] = orig - h;
      double fm = f(inputs);
      inputs[i].d[k] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      double a = analytic[i].d[k];
      double denom = std::max({std::abs(numeric), std::abs(a), 1e-6});
      double rel = std::abs(numeric - a) / denom;
      if (rel > worst) worst = rel;
    }
  }
  return worst;
}

}  // namespace struchis
