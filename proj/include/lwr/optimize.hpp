#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <utility>

#include "lwr/types.hpp"

namespace lwr {

/// Diminishing step rule: normalized subgradient steps of a fixed
/// length, halved whenever the best objective has not improved by a
/// relative `tolerance` over the last `patience` iterations.
struct StepSchedule {
  double initial_step = 1.0;
  double shrink = 0.5;
  int patience = 50;
  double min_step = 1e-12;
};

struct SubgradientOptions {
  long max_iterations = 200000;
  double tolerance = 1e-6;
  StepSchedule schedule;
};

struct MinimizeResult {
  Vector x;
  double objective;
  long iterations;
  bool converged;
};

/// Projected-free subgradient descent with best-iterate tracking.
/// Deterministic: fixed initial point, fixed reduction order, no RNG.
/// Each stage restarts from the best point found so far.
template <class Objective, class Subgrad>
MinimizeResult minimize_subgradient(Vector x0, Objective&& obj, Subgrad&& grad,
                                    const SubgradientOptions& opt) {
  Vector x = std::move(x0);
  Vector best_x = x;
  double best_f = obj(x);
  double step = opt.schedule.initial_step;
  double window_best = best_f;
  int since_improve = 0;
  long it = 0;

  for (; it < opt.max_iterations; ++it) {
    const Vector g = grad(x);
    const double gnorm = g.norm();
    if (gnorm < opt.tolerance) {
      const double fx = obj(x);
      if (fx < best_f) return {std::move(x), fx, it, true};
      return {std::move(best_x), best_f, it, true};
    }

    x.noalias() -= (step / gnorm) * g;
    const double fx = obj(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }

    const double scale = std::max(1.0, std::abs(window_best));
    if (window_best - best_f > opt.tolerance * scale) {
      window_best = best_f;
      since_improve = 0;
    } else if (++since_improve >= opt.schedule.patience) {
      step *= opt.schedule.shrink;
      since_improve = 0;
      window_best = best_f;
      x = best_x;
      if (step < opt.schedule.min_step)
        return {std::move(best_x), best_f, it, true};
    }
  }
  return {std::move(best_x), best_f, it, false};
}

}  // namespace lwr
