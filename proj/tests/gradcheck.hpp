#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "laviter/core/tensor.hpp"

namespace testutil {

// Central-difference check of a scalar-valued graph against its analytic
// gradients. `f` must rebuild the graph from the current leaf contents on
// every call. Returns the worst hybrid error
//   |analytic - numeric| / max(1, |analytic|, |numeric|)
// over every element of every leaf.
inline double gradcheck(std::vector<laviter::Tensor> leaves,
                        const std::function<laviter::Tensor()>& f, double h = 1e-5) {
  for (auto& leaf : leaves) leaf.zero_grad();
  laviter::Tensor y = f();
  y.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) analytic.push_back(leaf.grad());

  double worst = 0.0;
  laviter::NoGradGuard guard;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& buf = leaves[li].raw();
    for (size_t i = 0; i < buf.size(); ++i) {
      double saved = buf[i];
      buf[i] = saved + h;
      double up = f().value();
      buf[i] = saved - h;
      double down = f().value();
      buf[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[li][i];
      double err = std::fabs(a - numeric) /
                   std::max({1.0, std::fabs(a), std::fabs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace testutil
