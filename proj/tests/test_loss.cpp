#include <doctest.h>

#include <random>

#include "lwr/evaluation.hpp"
#include "lwr/loss.hpp"
#include "test_util.hpp"

using namespace lwr;
using lwr::testing::random_dataset;
using lwr::testing::random_model;

namespace {

// Independent scalar oracle: evaluates the three surrogate terms
// separately and reduces with std::max afterwards.
double surrogate_oracle(double f, double r, int y, double c) {
  const double alpha = 1.0;
  const double beta = 1.0 / (1.0 - 2.0 * c);
  const double term_cls = 1.0 + (alpha / 2.0) * (r - y * f);
  const double term_rej = c * (1.0 - beta * r);
  double best = 0.0;
  for (double t : {term_cls, term_rej}) best = std::max(best, t);
  return best;
}

Vector packed_fd_gradient(const LwrModel& model, const Dataset& data,
                          double h = 1e-6) {
  const Vector theta0 = pack(model);
  Vector g(theta0.size());
  for (Eigen::Index k = 0; k < theta0.size(); ++k) {
    Vector tp = theta0, tm = theta0;
    tp[k] += h;
    tm[k] -= h;
    const double fp = primal_objective(
        unpack(tp, data.phi().dims(), data.phi_prime().dims(), model.hyper), data);
    const double fm = primal_objective(
        unpack(tm, data.phi().dims(), data.phi_prime().dims(), model.hyper), data);
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vector packed_subgradient(const LwrModel& model, const Dataset& data) {
  const LwrGradient g = subgradient(model, data);
  Vector out(g.dw.size() + g.du.size() + 2);
  out << g.dw, g.db, g.du, g.db_prime;
  return out;
}

Dataset one_sample(double phi_val, double phip_val, int y) {
  Matrix phi(1, 1), phip(1, 1);
  phi << phi_val;
  phip << phip_val;
  return Dataset({Label(y)}, FeatureMatrix(phi, {"a"}),
                 FeatureMatrix(phip, {"a"}));
}

}  // namespace

TEST_CASE("surrogate loss matches the scalar oracle on the spec cases") {
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  CHECK(surrogate_loss(2.0, 0.0, Label(+1), h) == doctest::Approx(0.25));
  CHECK(surrogate_loss(2.0, 0.0, Label(+1), h) ==
        doctest::Approx(surrogate_oracle(2.0, 0.0, +1, 0.25)));
  CHECK(surrogate_loss(3.0, 1.0, Label(+1), h) == 0.0);
  CHECK(surrogate_loss(0.0, 0.0, Label(-1), h) == doctest::Approx(1.0));
  CHECK(surrogate_loss(0.0, 0.0, Label(-1), h) ==
        doctest::Approx(surrogate_oracle(0.0, 0.0, -1, 0.25)));
}

TEST_CASE("surrogate loss agrees with the scalar oracle on a grid") {
  for (double c : {0.1, 0.2, 0.3, 0.4}) {
    const LwrHyperparams h(RejectionCost(c), 1.0, 1.0);
    for (int y : {-1, +1})
      for (double f = -3.0; f <= 3.0; f += 0.37)
        for (double r = -3.0; r <= 3.0; r += 0.41)
          CHECK(surrogate_loss(f, r, Label(y), h) ==
                doctest::Approx(surrogate_oracle(f, r, y, c)).epsilon(1e-12));
  }
}

TEST_CASE("surrogate majorizes the pointwise rejection loss") {
  for (double c : {0.1, 0.2, 0.3, 0.4}) {
    const LwrHyperparams h(RejectionCost(c), 1.0, 1.0);
    for (int y : {-1, +1})
      for (double f = -3.0; f <= 3.0; f += 0.11)
        for (double r = -3.0; r <= 3.0; r += 0.13) {
          const Decision d = decide(f, r);
          double pointwise = 0.0;
          if (d == Decision::Reject)
            pointwise = c;
          else if (accepted_and_wrong(d, Label(y)))
            pointwise = 1.0;
          CHECK(surrogate_loss(f, r, Label(y), h) >= pointwise);
        }
  }
}

TEST_CASE("primal objective at the zero model is m") {
  const Dataset data = random_dataset(7, 2, 3, 42);
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  const LwrModel zero{Vector::Zero(2), 0.0, Vector::Zero(3), 0.0, h, 0.0};
  CHECK(primal_objective(zero, data) == doctest::Approx(7.0));
}

TEST_CASE("primal objective, single confident sample") {
  // scores f = 3, r = 1 with ||w||^2 = ||u||^2 = 1, lambda = lambda' = 1
  const Dataset data = one_sample(3.0, 1.0, +1);
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  const LwrModel m{Vector::Ones(1), 0.0, Vector::Ones(1), 0.0, h, 0.0};
  CHECK(primal_objective(m, data) == doctest::Approx(1.0));
}

TEST_CASE("primal objective, deep rejection branch at c = 0.4") {
  const Dataset data = one_sample(5.0, -10.0, +1);
  const LwrHyperparams h(RejectionCost(0.4), 1.0, 1.0);
  const LwrModel m{Vector::Zero(1), 0.0, Vector::Ones(1), 0.0, h, 0.0};
  const double reg = 0.5;  // (lambda'/2)||u||^2
  CHECK(primal_objective(m, data) == doctest::Approx(reg + 20.4));
}

TEST_CASE("subgradient is the pure regularization gradient in the flat region") {
  // confident correct acceptances: y f large, r moderately positive
  Matrix phi(2, 1), phip(2, 1);
  phi << 10.0, -10.0;
  phip << 1.0, 1.0;
  const Dataset data({Label(+1), Label(-1)}, FeatureMatrix(phi, {"a", "b"}),
                     FeatureMatrix(phip, {"a", "b"}));
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  const LwrModel m{Vector::Ones(1), 0.0, Vector::Ones(1), 0.0, h, 0.0};
  const LwrGradient g = subgradient(m, data);
  CHECK(g.dw[0] == doctest::Approx(m.hyper.lambda * m.w[0]));
  CHECK(g.db == 0.0);
  CHECK(g.du[0] == doctest::Approx(m.hyper.lambda_prime * m.u[0]));
  CHECK(g.db_prime == 0.0);
}

TEST_CASE("subgradient in the strict rejection branch") {
  // r strongly negative makes c(1 - beta r) the strict max
  const Dataset data = one_sample(2.0, -10.0, +1);
  const LwrHyperparams h(RejectionCost(0.25), 2.0, 3.0);
  const LwrModel m{Vector::Zero(1), 0.0, Vector::Ones(1), 0.0, h, 0.0};
  const LwrGradient g = subgradient(m, data);
  const double c_beta = 0.25 * h.beta;
  CHECK(g.dw[0] == doctest::Approx(h.lambda * m.w[0]));
  CHECK(g.du[0] == doctest::Approx(h.lambda_prime * m.u[0] - c_beta * (-10.0)));
  CHECK(g.db_prime == doctest::Approx(-c_beta));
}

TEST_CASE("subgradient matches central finite differences at differentiable points") {
  const Dataset data = random_dataset(6, 2, 2, 7);
  const LwrHyperparams h(RejectionCost(0.3), 0.7, 1.3);
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20 && seed < 200; ++seed) {
    const LwrModel m = random_model(data, h, seed);
    // keep only clearly differentiable points: branch values well apart
    const Vector f = f_scores(m, data), r = r_scores(m, data);
    bool ok = true;
    for (Eigen::Index i = 0; i < data.size() && ok; ++i) {
      const double y = data.labels()[i].as_real();
      const double t1 = 1.0 + 0.5 * (r[i] - y * f[i]);
      const double t2 = h.c.value() * (1.0 - h.beta * r[i]);
      const double vals[] = {t1, t2, 0.0};
      for (int a = 0; a < 3; ++a)
        for (int bidx = a + 1; bidx < 3; ++bidx)
          if (std::abs(vals[a] - vals[bidx]) < 1e-3) ok = false;
    }
    if (!ok) continue;
    ++checked;
    const Vector fd = packed_fd_gradient(m, data);
    const Vector sg = packed_subgradient(m, data);
    for (Eigen::Index k = 0; k < fd.size(); ++k)
      CHECK(std::abs(sg[k] - fd[k]) <= 1e-4);
  }
  CHECK(checked == 20);
}

TEST_CASE("convexity probe") {
  const Dataset data = random_dataset(8, 2, 3, 11);
  const LwrHyperparams h(RejectionCost(0.2), 0.5, 0.9);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const Vector a = pack(random_model(data, h, 100 + k, 2.0));
    const Vector b = pack(random_model(data, h, 200 + k, 2.0));
    const double t = unif(rng);
    auto obj = [&](const Vector& theta) {
      return primal_objective(unpack(theta, 2, 3, h), data);
    };
    CHECK(obj(t * a + (1.0 - t) * b) <=
          t * obj(a) + (1.0 - t) * obj(b) + 1e-9);
  }
}

TEST_CASE("subgradient gives a first-order lower bound") {
  const Dataset data = random_dataset(8, 2, 3, 13);
  const LwrHyperparams h(RejectionCost(0.2), 0.5, 0.9);
  auto obj = [&](const Vector& theta) {
    return primal_objective(unpack(theta, 2, 3, h), data);
  };
  for (int k = 0; k < 50; ++k) {
    const LwrModel m = random_model(data, h, 300 + k, 2.0);
    const Vector theta = pack(m);
    const Vector g = packed_subgradient(m, data);
    const Vector dir = pack(random_model(data, h, 400 + k, 0.5));
    CHECK(obj(theta + dir) >= obj(theta) + g.dot(dir) - 1e-9);
  }
}

TEST_CASE("slack recovery on spec cases") {
  const LwrHyperparams h(RejectionCost(0.25), 1.0, 1.0);
  SUBCASE("confident correct acceptance has zero slack") {
    const Dataset data = one_sample(3.0, 1.0, +1);
    const LwrModel m{Vector::Ones(1), 0.0, Vector::Ones(1), 0.0, h, 0.0};
    CHECK(recover_slacks(m, data).xi[0] == 0.0);
  }
  SUBCASE("r = 0 reduces to max(c, 1 - y f / 2, 0)") {
    const Dataset data = one_sample(1.5, 0.0, +1);
    const LwrModel m{Vector::Ones(1), 0.0, Vector::Zero(1), 0.0, h, 0.0};
    CHECK(recover_slacks(m, data).xi[0] ==
          doctest::Approx(std::max(0.25, 1.0 - 0.5 * 1.5)));
  }
  SUBCASE("all-zero model gives unit slack") {
    const Dataset data = random_dataset(5, 2, 2, 17);
    const LwrModel m{Vector::Zero(2), 0.0, Vector::Zero(2), 0.0, h, 0.0};
    for (Eigen::Index i = 0; i < 5; ++i)
      CHECK(recover_slacks(m, data).xi[i] == doctest::Approx(1.0));
  }
}

TEST_CASE("slack identity: sum of slacks plus regularization equals the objective") {
  const Dataset data = random_dataset(9, 3, 1, 19);
  const LwrHyperparams h(RejectionCost(0.15), 0.8, 1.7);
  for (int k = 0; k < 20; ++k) {
    const LwrModel m = random_model(data, h, 500 + k, 1.5);
    const double reg = 0.5 * h.lambda * m.w.squaredNorm() +
                       0.5 * h.lambda_prime * m.u.squaredNorm();
    const double lhs = reg + recover_slacks(m, data).xi.sum();
    const double rhs = primal_objective(m, data);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}
