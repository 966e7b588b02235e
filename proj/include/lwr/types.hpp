#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lwr/errors.hpp"

namespace lwr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Binary class label, restricted to {+1, -1}.
class Label {
 public:
  explicit Label(int value) : value_(value) {
    if (value != 1 && value != -1)
      throw data_error("label must be +1 or -1, got " + std::to_string(value));
  }
  int value() const { return value_; }
  double as_real() const { return static_cast<double>(value_); }
  friend bool operator==(Label a, Label b) { return a.value_ == b.value_; }

 private:
  int value_;
};

/// Dense m x d feature block with one opaque id per row.
class FeatureMatrix {
 public:
  FeatureMatrix(Matrix values, std::vector<std::string> sample_ids)
      : values_(std::move(values)), ids_(std::move(sample_ids)) {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw data_error("feature matrix must have at least one row and column");
    if (static_cast<Eigen::Index>(ids_.size()) != values_.rows())
      throw data_error("feature matrix rows and id count differ");
    if (!values_.allFinite())
      throw data_error("feature matrix contains non-finite entries");
    for (std::size_t i = 0; i < ids_.size(); ++i)
      for (std::size_t j = i + 1; j < ids_.size(); ++j)
        if (ids_[i] == ids_[j])
          throw data_error("duplicate sample id '" + ids_[i] + "'");
  }

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index dims() const { return values_.cols(); }
  const Matrix& values() const { return values_; }
  const std::vector<std::string>& sample_ids() const { return ids_; }
  Eigen::MatrixXd::ConstRowXpr row(Eigen::Index i) const { return values_.row(i); }

 private:
  Matrix values_;
  std::vector<std::string> ids_;
};

/// Labeled samples viewed through two feature spaces: phi for the
/// classifier, phi_prime for the rejector. Rows of the two spaces are
/// aligned by identical id sequences, not just by position.
class Dataset {
 public:
  Dataset(std::vector<Label> labels, FeatureMatrix phi, FeatureMatrix phi_prime)
      : labels_(std::move(labels)),
        phi_(std::move(phi)),
        phi_prime_(std::move(phi_prime)) {
    const auto m = static_cast<Eigen::Index>(labels_.size());
    if (phi_.rows() != m || phi_prime_.rows() != m)
      throw data_error("label count and feature row counts differ");
    if (phi_.sample_ids() != phi_prime_.sample_ids())
      throw data_error("phi and phi_prime sample id sequences differ");
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(labels_.size()); }
  const std::vector<Label>& labels() const { return labels_; }
  const FeatureMatrix& phi() const { return phi_; }
  const FeatureMatrix& phi_prime() const { return phi_prime_; }

  /// Label column as a real vector, convenient for Eigen expressions.
  Vector label_vector() const {
    Vector y(size());
    for (Eigen::Index i = 0; i < size(); ++i) y[i] = labels_[i].as_real();
    return y;
  }

  bool single_class() const {
    for (const Label& l : labels_)
      if (!(l == labels_.front())) return false;
    return true;
  }

 private:
  std::vector<Label> labels_;
  FeatureMatrix phi_;
  FeatureMatrix phi_prime_;
};

/// Per-rejection penalty c, constrained to (0, 1/2) so that
/// beta = 1/(1-2c) stays finite and positive.
class RejectionCost {
 public:
  explicit RejectionCost(double c) : c_(c) {
    if (!(c > 0.0 && c < 0.5))
      throw config_error("rejection cost must lie in (0, 1/2), got " +
                         std::to_string(c));
  }
  double value() const { return c_; }

 private:
  double c_;
};

inline double beta_of(RejectionCost c) { return 1.0 / (1.0 - 2.0 * c.value()); }

/// Hyperparameters of the joint classifier/rejector objective.
/// alpha is fixed to 1; beta is derived from c and stored so the
/// surrogate formula reads the same as its closed form.
struct LwrHyperparams {
  RejectionCost c;
  double lambda;
  double lambda_prime;
  double alpha;
  double beta;

  LwrHyperparams(RejectionCost cost, double lam, double lam_prime)
      : c(cost),
        lambda(lam),
        lambda_prime(lam_prime),
        alpha(1.0),
        beta(beta_of(cost)) {
    if (!(lambda > 0.0)) throw config_error("lambda must be positive");
    if (!(lambda_prime > 0.0)) throw config_error("lambda_prime must be positive");
  }
};

/// Trained classifier f(x) = w . phi(x) + b and rejector
/// r(x) = u . phi_prime(x) + b'.
struct LwrModel {
  Vector w;
  double b;
  Vector u;
  double b_prime;
  LwrHyperparams hyper;
  double objective_value;

  double f_score(const Eigen::Ref<const Vector>& phi_row) const {
    return w.dot(phi_row) + b;
  }
  double r_score(const Eigen::Ref<const Vector>& phi_prime_row) const {
    return u.dot(phi_prime_row) + b_prime;
  }
};

enum class Decision { AcceptPositive, AcceptNegative, Reject };

/// Three-way decision rule: reject whenever r <= 0, otherwise classify
/// by the sign of f with f == 0 falling to the negative class.
inline Decision decide(double f_val, double r_val) {
  if (!(std::isfinite(f_val) && std::isfinite(r_val)))
    throw std::invalid_argument("decide requires finite scores");
  if (r_val <= 0.0) return Decision::Reject;
  return f_val > 0.0 ? Decision::AcceptPositive : Decision::AcceptNegative;
}

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::AcceptPositive: return "+1";
    case Decision::AcceptNegative: return "-1";
    case Decision::Reject: return "reject";
  }
  return "?";
}

}  // namespace lwr
