#pragma once

#include <vector>

#include "core/mat.hpp"

namespace struchis {

// Adam with decoupled weight decay. The decay shrinks the parameter directly
// (theta -= lr * wd * theta) before the moment update, so it never enters the
// moment estimates.
template <class T>
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  std::vector<Mat<T>> m;
  std::vector<Mat<T>> v;
  int64_t t = 0;

  void init(const std::vector<Mat<T>*>& params) {
    m.clear();
    v.clear();
    for (const Mat<T>* p : params) {
      m.emplace_back(p->rows, p->cols);
      v.emplace_back(p->rows, p->cols);
    }
    t = 0;
  }

  void step(const std::vector<Mat<T>*>& params,
            const std::vector<const Mat<T>*>& grads) {
    if (params.size() != m.size() || grads.size() != m.size())
      fail(ErrorKind::contract, "adam: parameter count changed since init");
    for (size_t i = 0; i < grads.size(); ++i) {
      if (!grads[i]->all_finite())
        fail(ErrorKind::runtime, "adam: non-finite gradient");
      if (!grads[i]->same_shape(*params[i]))
        fail(ErrorKind::contract, "adam: gradient shape mismatch, " +
                                      grads[i]->shape_str() + " vs " +
                                      params[i]->shape_str());
    }
    ++t;
    double bc1 = 1.0 - std::pow(beta1, double(t));
    double bc2 = 1.0 - std::pow(beta2, double(t));
    for (size_t i = 0; i < params.size(); ++i) {
      Mat<T>& p = *params[i];
      const Mat<T>& g = *grads[i];
      for (size_t k = 0; k < p.d.size(); ++k) {
        double theta = double(p.d[k]);
        theta -= lr * weight_decay * theta;
        double gv = double(g.d[k]);
        double mv = beta1 * double(m[i].d[k]) + (1.0 - beta1) * gv;
        double vv = beta2 * double(v[i].d[k]) + (1.0 - beta2) * gv * gv;
        m[i].d[k] = T(mv);
        v[i].d[k] = T(vv);
        double mhat = mv / bc1;
        double vhat = vv / bc2;
        p.d[k] = T(theta - lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

using AdamF = Adam<float>;
using AdamD = Adam<double>;

}  // namespace struchis
