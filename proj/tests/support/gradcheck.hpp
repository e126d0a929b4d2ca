#pragma once

// Central finite-difference gradient checking against the reverse-mode
// engine. The builder must reconstruct the whole graph from the store's
// current parameter values on every call.

#include <cmath>
#include <functional>

#include "tkg/autodiff.hpp"

namespace tkg::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
};

inline GradCheckResult check_gradients(tkg::nn::ParameterStore& store,
                                       const std::function<tkg::nn::Var()>& builder,
                                       double step = 1e-5) {
  using tkg::nn::GradMap;
  using tkg::nn::Var;

  GradMap grads;
  Var loss = builder();
  tkg::nn::backward(loss, grads);

  GradCheckResult result;
  for (auto& entry : store.entries()) {
    if (!entry.trainable) continue;
    auto it = grads.find(entry.var.node().get());
    for (Eigen::Index r = 0; r < entry.var.rows(); ++r) {
      for (Eigen::Index c = 0; c < entry.var.cols(); ++c) {
        double& cell = entry.var.mutable_value()(r, c);
        double saved = cell;
        cell = saved + step;
        double up = builder().item();
        cell = saved - step;
        double down = builder().item();
        cell = saved;
        double fd = (up - down) / (2.0 * step);
        double analytic = it == grads.end() ? 0.0 : it->second(r, c);
        double denom = std::max({1.0, std::abs(fd), std::abs(analytic)});
        double rel = std::abs(fd - analytic) / denom;
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_param = entry.name;
        }
      }
    }
  }
  return result;
}

}  // namespace tkg::testing
