#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "lwr/loss.hpp"
#include "lwr/optimize.hpp"
#include "lwr/types.hpp"

namespace lwr {

struct TrainConfig {
  long max_iterations = 200000;
  double tolerance = 1e-6;
  StepSchedule step_schedule;  // used by the subgradient baselines
  std::uint64_t seed = 0;  // reserved for randomized variants; init is zero

  void validate() const {
    if (max_iterations < 1) throw config_error("max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw config_error("tolerance must be positive");
  }
};

/// Thrown when the iteration budget runs out. Carries the best iterate
/// so callers can still inspect or use it. CLI exit code 4.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(LwrModel best, const std::string& what)
      : std::runtime_error(what), best_(std::make_shared<LwrModel>(std::move(best))) {}
  const LwrModel& best_iterate() const { return *best_; }

 private:
  std::shared_ptr<LwrModel> best_;
};

struct TrainReport {
  bool single_class = false;
  long iterations = 0;
};

/// Minimizes the regularized surrogate risk over (w, b, u, b') from a
/// zero start. Deterministic given (data, hyper, cfg).
///
/// The per-sample loss max(t_cls, t_rej, 0) is replaced by the
/// log-sum-exp smoothing mu*log(exp(t_cls/mu) + exp(t_rej/mu) + 1) and
/// minimized by damped Newton while mu is driven from 1 down to 1e-9;
/// the smoothing overshoot is at most mu*log(3) per sample, so the
/// returned exact objective sits within 1.1e-9 * m of the optimum.
inline LwrModel train(const Dataset& data, const LwrHyperparams& hyper,
                      const TrainConfig& cfg, TrainReport* report = nullptr) {
  cfg.validate();
  const Eigen::Index d = data.phi().dims();
  const Eigen::Index dp = data.phi_prime().dims();
  const Eigen::Index m = data.size();
  const Eigen::Index n = packed_size(data);
  const Vector y = data.label_vector();
  const double half_alpha = 0.5 * hyper.alpha;
  const double c_beta = hyper.c.value() * hyper.beta;

  // Both branches are affine in theta: t_cls = 1 + A theta and
  // t_rej = c + B theta, with A and B assembled blockwise.
  Matrix A(m, n), B(m, n);
  A.leftCols(d) =
      (data.phi().values().array().colwise() * (-half_alpha * y.array()))
          .matrix();
  A.col(d) = -half_alpha * y;
  A.middleCols(d + 1, dp) = half_alpha * data.phi_prime().values();
  A.col(n - 1).setConstant(half_alpha);
  B.setZero();
  B.middleCols(d + 1, dp) = -c_beta * data.phi_prime().values();
  B.col(n - 1).setConstant(-c_beta);

  Vector reg = Vector::Zero(n);
  reg.head(d).setConstant(hyper.lambda);
  reg.segment(d + 1, dp).setConstant(hyper.lambda_prime);

  // Smoothed objective, gradient, and Hessian at theta; softmax weights
  // are computed per sample with the usual max shift.
  Vector q(m), s(m);  // branch weights, reused across evaluations
  auto smoothed = [&](const Vector& theta, double mu, Vector* grad,
                      Matrix* hess) {
    const Vector t_cls = Vector::Ones(m) + A * theta;
    const Vector t_rej = Vector::Constant(m, hyper.c.value()) + B * theta;
    double value = 0.5 * (reg.array() * theta.array().square()).sum();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double top = std::max({t_cls[i], t_rej[i], 0.0});
      const double e1 = std::exp((t_cls[i] - top) / mu);
      const double e2 = std::exp((t_rej[i] - top) / mu);
      const double z = e1 + e2 + std::exp(-top / mu);
      value += top + mu * std::log(z);
      q[i] = e1 / z;
      s[i] = e2 / z;
    }
    if (grad) {
      grad->noalias() = A.transpose() * q + B.transpose() * s;
      grad->array() += reg.array() * theta.array();
    }
    if (hess) {
      const Matrix mix = A.array().colwise() * q.array() +
                         B.array().colwise() * s.array();
      hess->noalias() = A.transpose() * (A.array().colwise() * q.array()).matrix();
      hess->noalias() += B.transpose() * (B.array().colwise() * s.array()).matrix();
      hess->noalias() -= mix.transpose() * mix;
      *hess /= mu;
      hess->diagonal() += reg;
    }
    return value;
  };

  Vector theta = Vector::Zero(n);
  Vector best_theta = theta;
  double best_exact = primal_objective(unpack(theta, d, dp, hyper), data);
  long used = 0;
  bool exhausted = false;

  const double grad_tol = std::min(cfg.tolerance, 1e-9);
  Vector grad(n);
  Matrix hess(n, n);
  for (double mu = 1.0; mu >= 0.5e-9 && !exhausted; mu *= 0.1) {
    for (int iter = 0; iter < 500; ++iter) {
      if (used >= cfg.max_iterations) {
        exhausted = true;
        break;
      }
      ++used;
      const double value = smoothed(theta, mu, &grad, &hess);
      if (grad.norm() <= grad_tol * std::max(1.0, std::abs(value))) break;

      Matrix damped = hess;
      damped.diagonal().array() += 1e-12 * std::max(1.0, hess.trace());
      Vector dir = -Eigen::LDLT<Matrix>(damped).solve(grad);
      if (!dir.allFinite() || grad.dot(dir) >= 0.0) dir = -grad;

      const double slope = grad.dot(dir);
      double t = 1.0;
      bool stepped = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        if (smoothed(theta + t * dir, mu, nullptr, nullptr) <=
            value + 1e-4 * t * slope) {
          theta += t * dir;
          stepped = true;
          break;
        }
      }
      if (!stepped) break;

      const double exact = primal_objective(unpack(theta, d, dp, hyper), data);
      if (exact < best_exact) {
        best_exact = exact;
        best_theta = theta;
      }
    }
  }

  LwrModel model = unpack(best_theta, d, dp, hyper);
  model.objective_value = best_exact;
  if (exhausted)
    throw convergence_error(std::move(model),
                            "training did not converge within " +
                                std::to_string(cfg.max_iterations) +
                                " iterations");
  if (report) {
    report->single_class = data.single_class();
    report->iterations = used;
  }
  return model;
}

}  // namespace lwr
