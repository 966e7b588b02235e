#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lwr/evaluation.hpp"
#include "lwr/optimize.hpp"
#include "lwr/train.hpp"
#include "lwr/types.hpp"

namespace lwr {

struct LinearModel {
  Vector w;
  double b;
  double score(const Eigen::Ref<const Vector>& phi_row) const {
    return w.dot(phi_row) + b;
  }
};

/// Plain linear soft-margin classifier over phi:
///   min (lambda/2)||w||^2 + sum_i max(1 - y_i (w.phi_i + b), 0),
/// solved by the same subgradient machinery as the joint trainer.
inline LinearModel train_svm(const Dataset& data, double lambda,
                             const TrainConfig& cfg) {
  cfg.validate();
  if (!(lambda > 0.0)) throw config_error("lambda must be positive");
  const Matrix& phi = data.phi().values();
  const Vector y = data.label_vector();
  const Eigen::Index d = phi.cols();

  auto obj = [&](const Vector& theta) {
    const Vector margins =
        y.array() * ((phi * theta.head(d)).array() + theta[d]);
    return 0.5 * lambda * theta.head(d).squaredNorm() +
           (1.0 - margins.array()).max(0.0).sum();
  };
  auto grad = [&](const Vector& theta) {
    const Vector margins =
        y.array() * ((phi * theta.head(d)).array() + theta[d]);
    Vector g(d + 1);
    g.head(d) = lambda * theta.head(d);
    g[d] = 0.0;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
      if (1.0 - margins[i] >= 0.0) {  // hinge active, ties included
        g.head(d).noalias() -= y[i] * phi.row(i).transpose();
        g[d] -= y[i];
      }
    }
    return g;
  };

  SubgradientOptions opt;
  opt.max_iterations = cfg.max_iterations;
  opt.tolerance = cfg.tolerance;
  opt.schedule = cfg.step_schedule;
  MinimizeResult res =
      minimize_subgradient(Vector::Zero(d + 1), obj, grad, opt);
  if (!res.converged) {
    LwrModel best{Vector(res.x.head(d)),   res.x[d], Vector::Zero(1), 1.0,
                  LwrHyperparams(RejectionCost(0.25), lambda, 1.0),
                  res.objective};
    throw convergence_error(std::move(best), "svm training did not converge");
  }
  return {Vector(res.x.head(d)), res.x[d]};
}

/// Platt-style sigmoid calibration p(+1|s) = sigmoid(a s + b), fit by
/// damped Newton on the binomial log-likelihood. |a| is capped at 1e4
/// so separable inputs stay finite; a negative optimal slope indicates
/// a scorer/label mismatch and is rejected.
inline std::pair<double, double> fit_calibration(
    const std::vector<double>& scores, const std::vector<Label>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw data_error("calibration needs equal-length nonempty inputs");
  bool has_pos = false, has_neg = false;
  for (const Label& l : labels) (l.value() > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw data_error("calibration needs both labels present");
  for (double s : scores)
    if (!std::isfinite(s)) throw data_error("non-finite calibration score");

  constexpr double kCap = 1e4;
  const auto nll = [&](double a, double b) {
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = labels[i].as_real() * (a * scores[i] + b);
      // log(1 + exp(-z)), stable for both signs
      total += z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    }
    return total;
  };

  double a = 0.0, b = 0.0;
  double current = nll(a, b);
  for (int iter = 0; iter < 200; ++iter) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double s = scores[i];
      const double t = labels[i].value() > 0 ? 1.0 : 0.0;
      const double p = 1.0 / (1.0 + std::exp(-(a * s + b)));
      const double e = p - t;
      ga += e * s;
      gb += e;
      const double v = std::max(p * (1.0 - p), 1e-12);
      haa += v * s * s;
      hab += v * s;
      hbb += v;
    }
    if (std::hypot(ga, gb) < 1e-10 * std::max(1.0, current)) break;

    const double det = haa * hbb - hab * hab;
    double da, db;
    if (std::abs(det) > 1e-300) {
      da = -(hbb * ga - hab * gb) / det;
      db = -(haa * gb - hab * ga) / det;
    } else {
      da = -ga;
      db = -gb;
    }
    double t_step = 1.0;
    bool stepped = false;
    for (int ls = 0; ls < 60; ++ls, t_step *= 0.5) {
      const double na = std::clamp(a + t_step * da, -kCap, kCap);
      const double nb = b + t_step * db;
      const double trial = nll(na, nb);
      if (trial < current) {
        a = na;
        b = nb;
        current = trial;
        stepped = true;
        break;
      }
    }
    if (!stepped) break;
  }
  if (a < 0.0)
    throw data_error(
        "calibration slope came out negative; scores and labels disagree in "
        "orientation");
  return {a, b};
}

/// Linear scorer plus Platt calibration map.
struct CalibratedLinearModel {
  Vector w;
  double b;
  double cal_a;
  double cal_b;

  double prob_positive(const Eigen::Ref<const Vector>& phi_row) const {
    const double s = w.dot(phi_row) + b;
    return 1.0 / (1.0 + std::exp(-(cal_a * s + cal_b)));
  }
};

/// Confidence-threshold rule: accept the class whose posterior strictly
/// exceeds theta, reject otherwise. Exactly-at-theta falls to Reject.
inline Decision threshold_decide(double p_plus, double theta) {
  if (!(p_plus >= 0.0 && p_plus <= 1.0))
    throw data_error("probability outside [0,1]");
  if (!(theta >= 0.5 && theta <= 1.0))
    throw config_error("theta must lie in [1/2, 1]");
  if (p_plus > theta) return Decision::AcceptPositive;
  if (1.0 - p_plus > theta) return Decision::AcceptNegative;
  return Decision::Reject;
}

/// Calibrated confidence-threshold model.
struct ThresholdModel {
  CalibratedLinearModel scorer;
  double theta;
};

/// Exhaustive scan for the validation-risk-minimizing theta. The risk
/// is piecewise constant in theta with breakpoints at the observed
/// confidences max(p, 1-p), so scanning {1/2} + confidences + midpoints
/// + {1} is exact. Ties break toward the smallest theta.
inline double tune_threshold(const std::vector<double>& p_plus,
                             const std::vector<Label>& labels,
                             RejectionCost c) {
  if (p_plus.empty() || p_plus.size() != labels.size())
    throw data_error("tune_threshold needs equal-length nonempty inputs");

  std::vector<double> conf;
  conf.reserve(p_plus.size());
  for (double p : p_plus) {
    if (!(p >= 0.0 && p <= 1.0)) throw data_error("probability outside [0,1]");
    conf.push_back(std::max(p, 1.0 - p));
  }
  std::sort(conf.begin(), conf.end());
  conf.erase(std::unique(conf.begin(), conf.end()), conf.end());

  std::vector<double> candidates{0.5, 1.0};
  for (std::size_t i = 0; i < conf.size(); ++i) {
    candidates.push_back(conf[i]);
    if (i + 1 < conf.size())
      candidates.push_back(0.5 * (conf[i] + conf[i + 1]));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  double best_theta = 0.5;
  double best_risk = std::numeric_limits<double>::infinity();
  for (double theta : candidates) {
    if (theta < 0.5 || theta > 1.0) continue;
    double risk = 0.0;
    for (std::size_t i = 0; i < p_plus.size(); ++i) {
      const Decision d = threshold_decide(p_plus[i], theta);
      if (d == Decision::Reject)
        risk += c.value();
      else if (accepted_and_wrong(d, labels[i]))
        risk += 1.0;
    }
    if (risk < best_risk) {  // strict: earlier (smaller) theta wins ties
      best_risk = risk;
      best_theta = theta;
    }
  }
  return best_theta;
}

}  // namespace lwr
