#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "lwr/loss.hpp"
#include "lwr/types.hpp"

namespace lwr {

/// Metrics of a run at one rejection cost. accuracy_nonrejected is
/// empty when every sample was rejected (0/0).
struct EvalReport {
  double risk_total;
  double risk_per_sample;
  std::optional<double> accuracy_nonrejected;
  double rejection_rate;
  std::vector<Decision> decisions;
  RejectionCost c;
};

inline bool accepted_and_wrong(Decision d, Label y) {
  return (d == Decision::AcceptPositive && y.value() == -1) ||
         (d == Decision::AcceptNegative && y.value() == +1);
}

/// Total risk: one unit per accepted misclassification plus c per
/// rejection.
inline double risk_lwr(const std::vector<Decision>& decisions,
                       const std::vector<Label>& labels, RejectionCost c) {
  if (decisions.size() != labels.size())
    throw data_error("decision and label sequences differ in length");
  long wrong = 0, rejected = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] == Decision::Reject)
      ++rejected;
    else if (accepted_and_wrong(decisions[i], labels[i]))
      ++wrong;
  }
  return static_cast<double>(wrong) + c.value() * static_cast<double>(rejected);
}

/// (accuracy over non-rejected, rejection rate).
inline std::pair<std::optional<double>, double> metrics(
    const std::vector<Decision>& decisions, const std::vector<Label>& labels) {
  if (decisions.empty()) throw data_error("metrics on empty decision sequence");
  if (decisions.size() != labels.size())
    throw data_error("decision and label sequences differ in length");
  long rejected = 0, correct = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] == Decision::Reject)
      ++rejected;
    else if (!accepted_and_wrong(decisions[i], labels[i]))
      ++correct;
  }
  const long total = static_cast<long>(decisions.size());
  const long accepted = total - rejected;
  std::optional<double> acc;
  if (accepted > 0)
    acc = static_cast<double>(correct) / static_cast<double>(accepted);
  return {acc, static_cast<double>(rejected) / static_cast<double>(total)};
}

inline EvalReport evaluate(std::vector<Decision> decisions,
                           const std::vector<Label>& labels, RejectionCost c) {
  const double total = risk_lwr(decisions, labels, c);
  const auto [acc, rej] = metrics(decisions, labels);
  return EvalReport{total,
                    total / static_cast<double>(labels.size()),
                    acc,
                    rej,
                    std::move(decisions),
                    c};
}

/// Decisions of an LwR model over a dataset.
inline std::vector<Decision> decide_all(const LwrModel& model,
                                        const Dataset& data) {
  const Vector f = f_scores(model, data);
  const Vector r = r_scores(model, data);
  std::vector<Decision> out;
  out.reserve(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i)
    out.push_back(decide(f[i], r[i]));
  return out;
}

struct CurveRow {
  double c;
  double rejection_rate;
  std::optional<double> accuracy;
};

/// Plot-ready (c, rejection_rate, accuracy) rows sorted by c.
inline std::vector<CurveRow> tradeoff_curve(
    const std::vector<EvalReport>& runs) {
  if (runs.empty()) throw data_error("tradeoff_curve needs at least one run");
  std::vector<CurveRow> rows;
  rows.reserve(runs.size());
  for (const EvalReport& r : runs)
    rows.push_back({r.c.value(), r.rejection_rate, r.accuracy_nonrejected});
  std::sort(rows.begin(), rows.end(),
            [](const CurveRow& a, const CurveRow& b) { return a.c < b.c; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].c == rows[i - 1].c)
      throw data_error("duplicate rejection cost in curve input");
  return rows;
}

}  // namespace lwr
