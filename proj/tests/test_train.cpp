#include <doctest.h>

#include "lwr/reference.hpp"
#include "lwr/train.hpp"
#include "test_util.hpp"

using namespace lwr;

namespace {

Dataset separable_pair() {
  Matrix phi(2, 1), phip(2, 1);
  phi << 1.0, -1.0;
  phip << 1.0, -1.0;
  return Dataset({Label(+1), Label(-1)}, FeatureMatrix(phi, {"a", "b"}),
                 FeatureMatrix(phip, {"a", "b"}));
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(1e-30, std::abs(b));
}

}  // namespace

TEST_CASE("train matches the reference oracle on the separable pair") {
  const Dataset data = separable_pair();
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  const TrainConfig cfg;
  const LwrModel fast = train(data, h, cfg);
  const LwrModel slow = reference_solve(data, h);
  CHECK(rel_diff(fast.objective_value, slow.objective_value) < 1e-6);
}

TEST_CASE("zero rejection features reduce r to a constant bias") {
  Matrix phi(3, 1), phip(3, 1);
  phi << 1.0, -1.0, 2.0;
  phip << 0.0, 0.0, 0.0;
  const Dataset data({Label(+1), Label(-1), Label(+1)},
                     FeatureMatrix(phi, {"a", "b", "c"}),
                     FeatureMatrix(phip, {"a", "b", "c"}));
  const LwrHyperparams h(RejectionCost(0.2), 1.0, 1.0);
  const LwrModel fast = train(data, h, TrainConfig{});
  const LwrModel slow = reference_solve(data, h);
  CHECK(rel_diff(fast.objective_value, slow.objective_value) < 1e-6);
}

TEST_CASE("optimal objective is invariant to feature scaling with rescaled regularization") {
  const Dataset data = testing::random_dataset(8, 1, 1, 23);
  const double s = 3.0;
  Matrix phi = data.phi().values() * s;
  Matrix phip = data.phi_prime().values() * s;
  const Dataset scaled(data.labels(),
                       FeatureMatrix(std::move(phi), data.phi().sample_ids()),
                       FeatureMatrix(std::move(phip), data.phi().sample_ids()));
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 2.0);
  const LwrHyperparams h_scaled(RejectionCost(0.25), 1.0 * s * s, 2.0 * s * s);
  const LwrModel a = train(data, h, TrainConfig{});
  const LwrModel b = train(scaled, h_scaled, TrainConfig{});
  CHECK(rel_diff(a.objective_value, b.objective_value) < 1e-6);
}

TEST_CASE("training is deterministic: identical runs give bit-identical models") {
  const Dataset data = testing::random_dataset(10, 2, 2, 29);
  const LwrHyperparams h(RejectionCost(0.3), 0.5, 0.5);
  TrainConfig cfg;
  cfg.seed = 7;
  const LwrModel a = train(data, h, cfg);
  const LwrModel b = train(data, h, cfg);
  CHECK(a.w == b.w);
  CHECK(a.b == b.b);
  CHECK(a.u == b.u);
  CHECK(a.b_prime == b.b_prime);
  CHECK(a.objective_value == b.objective_value);
}

TEST_CASE("objective sequence: trained objective never exceeds the zero start") {
  const Dataset data = testing::random_dataset(12, 2, 2, 31);
  const LwrHyperparams h(RejectionCost(0.2), 1.0, 1.0);
  const LwrModel m = train(data, h, TrainConfig{});
  CHECK(m.objective_value <= static_cast<double>(data.size()) + 1e-12);
  CHECK(m.objective_value >= 0.0);
}

TEST_CASE("non-convergence raises an error carrying the best iterate") {
  const Dataset data = testing::random_dataset(10, 2, 2, 37);
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  TrainConfig cfg;
  cfg.max_iterations = 3;
  try {
    train(data, h, cfg);
    FAIL("expected convergence_error");
  } catch (const convergence_error& e) {
    CHECK(std::isfinite(e.best_iterate().objective_value));
    CHECK(e.best_iterate().objective_value <= static_cast<double>(data.size()));
  }
}

TEST_CASE("single-class data trains and is flagged in the report") {
  Matrix phi(3, 1), phip(3, 1);
  phi << 1.0, 2.0, 3.0;
  phip << 1.0, 2.0, 3.0;
  const Dataset data({Label(+1), Label(+1), Label(+1)},
                     FeatureMatrix(phi, {"a", "b", "c"}),
                     FeatureMatrix(phip, {"a", "b", "c"}));
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  TrainReport report;
  const LwrModel m = train(data, h, TrainConfig{}, &report);
  CHECK(report.single_class);
  CHECK(std::isfinite(m.objective_value));
}
