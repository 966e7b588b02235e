#pragma once

#include <Eigen/Core>

#include <cmath>

#include "lwr/types.hpp"

namespace lwr {

/// Which branch of the three-term max is active. Ties resolve in the
/// fixed order classification > rejection > zero so subgradients are
/// deterministic.
enum class ActiveBranch { Classification, Rejection, Zero };

/// Convex surrogate for the pointwise misclassify-or-reject loss:
///   max(1 + (alpha/2)(r - y f), c (1 - beta r), 0).
inline double surrogate_loss(double f_val, double r_val, Label y,
                             const LwrHyperparams& hyper) {
  const double cls = 1.0 + 0.5 * hyper.alpha * (r_val - y.as_real() * f_val);
  const double rej = hyper.c.value() * (1.0 - hyper.beta * r_val);
  return std::max(cls, std::max(rej, 0.0));
}

inline ActiveBranch active_branch(double f_val, double r_val, Label y,
                                  const LwrHyperparams& hyper) {
  const double cls = 1.0 + 0.5 * hyper.alpha * (r_val - y.as_real() * f_val);
  const double rej = hyper.c.value() * (1.0 - hyper.beta * r_val);
  const double top = std::max(cls, std::max(rej, 0.0));
  if (cls == top) return ActiveBranch::Classification;
  if (rej == top) return ActiveBranch::Rejection;
  return ActiveBranch::Zero;
}

struct SlackVector {
  Vector xi;  // xi_i >= 0, the minimal feasible slack per sample
};

namespace detail {

inline void check_dims(const LwrModel& model, const Dataset& data) {
  if (model.w.size() != data.phi().dims() ||
      model.u.size() != data.phi_prime().dims())
    throw data_error("model dimensions do not match dataset feature spaces");
}

}  // namespace detail

/// Affine scores f_i = w . phi_i + b for the whole dataset.
inline Vector f_scores(const LwrModel& model, const Dataset& data) {
  return (data.phi().values() * model.w).array() + model.b;
}

inline Vector r_scores(const LwrModel& model, const Dataset& data) {
  return (data.phi_prime().values() * model.u).array() + model.b_prime;
}

/// Minimal feasible slacks: xi_i equals the per-sample surrogate at the
/// model's scores, so the active constraint holds with equality.
inline SlackVector recover_slacks(const LwrModel& model, const Dataset& data) {
  detail::check_dims(model, data);
  const Vector f = f_scores(model, data);
  const Vector r = r_scores(model, data);
  SlackVector out;
  out.xi.resize(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    out.xi[i] = surrogate_loss(f[i], r[i], data.labels()[i], model.hyper);
  return out;
}

/// Regularized empirical surrogate risk, equal to the constrained
/// objective with every slack at its minimal feasible value:
///   (lambda/2)||w||^2 + (lambda'/2)||u||^2 + sum_i xi_i.
inline double primal_objective(const LwrModel& model, const Dataset& data) {
  const double reg = 0.5 * model.hyper.lambda * model.w.squaredNorm() +
                     0.5 * model.hyper.lambda_prime * model.u.squaredNorm();
  return reg + recover_slacks(model, data).xi.sum();
}

struct LwrGradient {
  Vector dw;
  double db;
  Vector du;
  double db_prime;
};

/// A deterministic subgradient of primal_objective. At kinks the branch
/// order classification > rejection > zero picks the representative.
inline LwrGradient subgradient(const LwrModel& model, const Dataset& data) {
  detail::check_dims(model, data);
  const Vector f = f_scores(model, data);
  const Vector r = r_scores(model, data);

  LwrGradient g;
  g.dw = model.hyper.lambda * model.w;
  g.du = model.hyper.lambda_prime * model.u;
  g.db = 0.0;
  g.db_prime = 0.0;

  const double half_alpha = 0.5 * model.hyper.alpha;
  const double c_beta = model.hyper.c.value() * model.hyper.beta;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double y = data.labels()[i].as_real();
    switch (active_branch(f[i], r[i], data.labels()[i], model.hyper)) {
      case ActiveBranch::Classification:
        g.dw.noalias() -= (half_alpha * y) * data.phi().row(i).transpose();
        g.db -= half_alpha * y;
        g.du.noalias() += half_alpha * data.phi_prime().row(i).transpose();
        g.db_prime += half_alpha;
        break;
      case ActiveBranch::Rejection:
        g.du.noalias() -= c_beta * data.phi_prime().row(i).transpose();
        g.db_prime -= c_beta;
        break;
      case ActiveBranch::Zero:
        break;
    }
  }
  return g;
}

/// Flattened parameter layout [w; b; u; b'] shared by the trainer and
/// the reference solver.
inline Eigen::Index packed_size(const Dataset& data) {
  return data.phi().dims() + data.phi_prime().dims() + 2;
}

inline Vector pack(const LwrModel& model) {
  Vector theta(model.w.size() + model.u.size() + 2);
  theta << model.w, model.b, model.u, model.b_prime;
  return theta;
}

inline LwrModel unpack(const Eigen::Ref<const Vector>& theta,
                       Eigen::Index phi_dims, Eigen::Index phi_prime_dims,
                       const LwrHyperparams& hyper) {
  LwrModel m{Vector(theta.segment(0, phi_dims)),
             theta[phi_dims],
             Vector(theta.segment(phi_dims + 1, phi_prime_dims)),
             theta[phi_dims + 1 + phi_prime_dims],
             hyper,
             0.0};
  return m;
}

}  // namespace lwr
