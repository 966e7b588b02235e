#include <doctest.h>

#include <algorithm>
#include <random>

#include "lwr/evaluation.hpp"

using namespace lwr;

namespace {

std::vector<Label> labels_of(const std::vector<int>& ys) {
  std::vector<Label> out;
  for (int y : ys) out.push_back(Label(y));
  return out;
}

}  // namespace

TEST_CASE("risk on hand-counted cases") {
  const auto y10 = labels_of(std::vector<int>(10, +1));
  SUBCASE("all accepted and correct") {
    const std::vector<Decision> d(10, Decision::AcceptPositive);
    CHECK(risk_lwr(d, y10, RejectionCost(0.3)) == 0.0);
  }
  SUBCASE("all rejected") {
    const std::vector<Decision> d(10, Decision::Reject);
    CHECK(risk_lwr(d, y10, RejectionCost(0.3)) == doctest::Approx(3.0));
  }
  SUBCASE("two wrong accepts plus three rejects") {
    std::vector<Decision> d(10, Decision::AcceptPositive);
    d[0] = d[1] = Decision::AcceptNegative;  // wrong: labels are +1
    d[2] = d[3] = d[4] = Decision::Reject;
    CHECK(risk_lwr(d, y10, RejectionCost(0.2)) == doctest::Approx(2.6));
  }
}

TEST_CASE("accuracy and rejection-rate formulas") {
  SUBCASE("8 correct accepts, 2 rejects") {
    std::vector<Decision> d(10, Decision::AcceptPositive);
    d[8] = d[9] = Decision::Reject;
    const auto [acc, rej] = metrics(d, labels_of(std::vector<int>(10, +1)));
    CHECK(acc.has_value());
    CHECK(*acc == doctest::Approx(1.0));
    CHECK(rej == doctest::Approx(0.2));
  }
  SUBCASE("no rejects degrades to plain accuracy") {
    std::vector<Decision> d(10, Decision::AcceptPositive);
    std::vector<int> ys(10, +1);
    for (int i = 0; i < 5; ++i) ys[i] = -1;
    const auto [acc, rej] = metrics(d, labels_of(ys));
    CHECK(*acc == doctest::Approx(0.5));
    CHECK(rej == 0.0);
  }
  SUBCASE("all rejected leaves accuracy undefined") {
    const std::vector<Decision> d(4, Decision::Reject);
    const auto [acc, rej] = metrics(d, labels_of({+1, -1, +1, -1}));
    CHECK(!acc.has_value());
    CHECK(rej == 1.0);
  }
}

TEST_CASE("risk decomposes through accuracy and rejection counts") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 5 + trial;
    std::vector<Decision> d;
    std::vector<int> ys;
    for (int i = 0; i < m; ++i) {
      const int k = pick(rng);
      d.push_back(k == 0 ? Decision::AcceptPositive
                         : k == 1 ? Decision::AcceptNegative : Decision::Reject);
      ys.push_back(coin(rng) ? +1 : -1);
    }
    const auto labels = labels_of(ys);
    const RejectionCost c(0.25);
    const auto [acc, rej] = metrics(d, labels);
    if (!acc) continue;
    const double accepted = m * (1.0 - rej);
    CHECK(risk_lwr(d, labels, c) ==
          doctest::Approx((1.0 - *acc) * accepted + c.value() * m * rej));
  }
}

TEST_CASE("risk is invariant under sample permutation") {
  std::vector<Decision> d{Decision::AcceptPositive, Decision::Reject,
                          Decision::AcceptNegative, Decision::AcceptPositive};
  std::vector<int> ys{+1, -1, +1, -1};
  const double before = risk_lwr(d, labels_of(ys), RejectionCost(0.2));
  std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<Decision> dp;
  std::vector<int> yp;
  for (std::size_t k : perm) {
    dp.push_back(d[k]);
    yp.push_back(ys[k]);
  }
  CHECK(risk_lwr(dp, labels_of(yp), RejectionCost(0.2)) == before);
}

TEST_CASE("risk is affine in c with slope equal to the rejected count") {
  std::vector<Decision> d{Decision::Reject, Decision::Reject,
                          Decision::AcceptPositive, Decision::AcceptNegative};
  const auto labels = labels_of({+1, -1, -1, -1});
  const double r1 = risk_lwr(d, labels, RejectionCost(0.1));
  const double r2 = risk_lwr(d, labels, RejectionCost(0.3));
  CHECK((r2 - r1) == doctest::Approx(0.2 * 2.0));
}

TEST_CASE("tradeoff curve assembly") {
  auto report_at = [&](double c, double rej) {
    std::vector<Decision> d{Decision::AcceptPositive};
    EvalReport r = evaluate(d, labels_of({+1}), RejectionCost(c));
    r.rejection_rate = rej;  // synthetic distinct values for ordering checks
    return r;
  };
  SUBCASE("single run passes through") {
    const auto rows = tradeoff_curve({report_at(0.2, 0.1)});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].c == 0.2);
    CHECK(rows[0].rejection_rate == 0.1);
  }
  SUBCASE("rows are sorted by c") {
    const auto rows = tradeoff_curve({report_at(0.4, 0.0), report_at(0.1, 0.3),
                                      report_at(0.3, 0.1), report_at(0.2, 0.2)});
    REQUIRE(rows.size() == 4);
    CHECK(std::is_sorted(rows.begin(), rows.end(),
                         [](const CurveRow& a, const CurveRow& b) {
                           return a.c < b.c;
                         }));
  }
  SUBCASE("duplicate costs are rejected") {
    CHECK_THROWS_AS(tradeoff_curve({report_at(0.2, 0.1), report_at(0.2, 0.2)}),
                    data_error);
  }
}
