#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lwr/types.hpp"

namespace lwr {

/// Shortest round-trip decimal rendering; re-parsing reproduces the
/// double bit-exactly.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw data_error("cannot parse number '" + s + "' (" + context + ")");
  }
}

}  // namespace detail

/// Parses a feature file (header `id,f1,...,fd`) preserving row order.
inline FeatureMatrix load_features(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw data_error("empty feature file: " + path.string());
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "id")
    throw data_error("bad feature header in " + path.string());
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j)
    if (header[j + 1] != "f" + std::to_string(j + 1))
      throw data_error("bad feature header column '" + header[j + 1] + "' in " +
                       path.string());
  if (lines.size() < 2) throw data_error("no rows in " + path.string());

  Matrix values(static_cast<Eigen::Index>(lines.size() - 1),
                static_cast<Eigen::Index>(d));
  std::vector<std::string> ids;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() != d + 1)
      throw data_error("row length mismatch at line " + std::to_string(r + 1) +
                       " of " + path.string());
    ids.push_back(fields[0]);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = detail::parse_double(
          fields[j + 1], path.string() + ":" + std::to_string(r + 1));
      if (!std::isfinite(v))
        throw data_error("non-finite value for id '" + fields[0] + "' in " +
                         path.string());
      values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return FeatureMatrix(std::move(values), std::move(ids));
}

/// Loads the three dataset files. Feature rows are realigned to the
/// label file's id order, so permuted feature files are fine; missing
/// or duplicate ids are named in the error.
inline Dataset load_dataset(const std::filesystem::path& label_file,
                            const std::filesystem::path& phi_file,
                            const std::filesystem::path& phi_prime_file) {
  const auto lines = detail::read_lines(label_file);
  if (lines.empty() || lines[0] != "id,label")
    throw data_error("bad label header in " + label_file.string());
  std::vector<std::string> ids;
  std::vector<Label> labels;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() != 2)
      throw data_error("row length mismatch at line " + std::to_string(r + 1) +
                       " of " + label_file.string());
    const double v = detail::parse_double(
        fields[1], label_file.string() + ":" + std::to_string(r + 1));
    labels.push_back(Label(static_cast<int>(v)));
    ids.push_back(fields[0]);
  }
  if (labels.empty()) throw data_error("no rows in " + label_file.string());

  auto realign = [&](const FeatureMatrix& fm,
                     const std::filesystem::path& path) {
    std::map<std::string, Eigen::Index> index;
    for (Eigen::Index i = 0; i < fm.rows(); ++i)
      index[fm.sample_ids()[static_cast<std::size_t>(i)]] = i;
    Matrix values(static_cast<Eigen::Index>(ids.size()), fm.dims());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto it = index.find(ids[i]);
      if (it == index.end())
        throw data_error("id '" + ids[i] + "' missing from " + path.string());
      values.row(static_cast<Eigen::Index>(i)) = fm.row(it->second);
    }
    return FeatureMatrix(std::move(values), ids);
  };

  FeatureMatrix phi = realign(load_features(phi_file), phi_file);
  FeatureMatrix phi_prime = realign(load_features(phi_prime_file), phi_prime_file);
  return Dataset(std::move(labels), std::move(phi), std::move(phi_prime));
}

inline void write_features(const FeatureMatrix& fm,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path.string());
  out << "id";
  for (Eigen::Index j = 0; j < fm.dims(); ++j) out << ",f" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < fm.rows(); ++i) {
    out << fm.sample_ids()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < fm.dims(); ++j)
      out << "," << format_double(fm.values()(i, j));
    out << "\n";
  }
}

inline void write_dataset(const Dataset& data,
                          const std::filesystem::path& label_file,
                          const std::filesystem::path& phi_file,
                          const std::filesystem::path& phi_prime_file) {
  std::ofstream out(label_file);
  if (!out) throw data_error("cannot write file: " + label_file.string());
  out << "id,label\n";
  for (Eigen::Index i = 0; i < data.size(); ++i)
    out << data.phi().sample_ids()[static_cast<std::size_t>(i)] << ","
        << (data.labels()[static_cast<std::size_t>(i)].value() > 0 ? "+1" : "-1")
        << "\n";
  out.close();
  write_features(data.phi(), phi_file);
  write_features(data.phi_prime(), phi_prime_file);
}

/// id -> p(+1|x) table from a `id,p_plus` file.
inline std::map<std::string, double> load_probabilities(
    const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != "id,p_plus")
    throw data_error("bad probability header in " + path.string());
  if (lines.size() < 2) throw data_error("no rows in " + path.string());
  std::map<std::string, double> table;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() != 2)
      throw data_error("row length mismatch at line " + std::to_string(r + 1) +
                       " of " + path.string());
    const double p = detail::parse_double(
        fields[1], path.string() + ":" + std::to_string(r + 1));
    if (!(p >= 0.0 && p <= 1.0))
      throw data_error("probability out of range at line " +
                       std::to_string(r + 1) + " of " + path.string());
    if (!table.emplace(fields[0], p).second)
      throw data_error("duplicate id '" + fields[0] + "' in " + path.string());
  }
  return table;
}

inline void write_probabilities(const std::map<std::string, double>& table,
                                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path.string());
  out << "id,p_plus\n";
  for (const auto& [id, p] : table) out << id << "," << format_double(p) << "\n";
}

/// Two-class isotropic Gaussian mixture in `dim` dimensions.
struct GaussianMixtureSpec {
  Vector mu_plus;
  Vector mu_minus;
  double sigma;
  double prior_plus;
  Eigen::Index dim;

  void validate() const {
    if (dim < 1 || mu_plus.size() != dim || mu_minus.size() != dim)
      throw config_error("gaussian spec dimensions inconsistent");
    if (!(sigma > 0.0)) throw config_error("sigma must be positive");
    if (!(prior_plus > 0.0 && prior_plus < 1.0))
      throw config_error("prior_plus must lie in (0,1)");
  }
};

/// How the rejection space phi_prime is derived from the raw draw.
enum class SecondSpace { Identity, RandomRotation, SquaredAppended };

/// Seeded i.i.d. benchmark draw. phi holds the raw coordinates; the
/// second space exercises LwR's distinct-feature-space capability.
inline Dataset synth_gaussian(const GaussianMixtureSpec& spec, Eigen::Index m,
                              std::uint64_t seed,
                              SecondSpace second = SecondSpace::Identity,
                              Eigen::Index rotation_dims = 0) {
  spec.validate();
  if (m < 1) throw config_error("sample count must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix phi(m, spec.dim);
  std::vector<Label> labels;
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool positive = unif(rng) < spec.prior_plus;
    labels.push_back(Label(positive ? +1 : -1));
    const Vector& mu = positive ? spec.mu_plus : spec.mu_minus;
    for (Eigen::Index j = 0; j < spec.dim; ++j)
      phi(i, j) = mu[j] + spec.sigma * gauss(rng);
    ids.push_back("s" + std::to_string(i + 1));
  }

  Matrix phi_prime;
  switch (second) {
    case SecondSpace::Identity:
      phi_prime = phi;
      break;
    case SecondSpace::RandomRotation: {
      const Eigen::Index k = rotation_dims > 0 ? rotation_dims : spec.dim;
      if (k > spec.dim)
        throw config_error("rotation projection dims exceed raw dims");
      Matrix g(spec.dim, spec.dim);
      for (Eigen::Index i = 0; i < spec.dim; ++i)
        for (Eigen::Index j = 0; j < spec.dim; ++j) g(i, j) = gauss(rng);
      const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
      phi_prime = phi * q.leftCols(k);
      break;
    }
    case SecondSpace::SquaredAppended:
      phi_prime.resize(m, 2 * spec.dim);
      phi_prime.leftCols(spec.dim) = phi;
      phi_prime.rightCols(spec.dim) = phi.array().square();
      break;
  }

  return Dataset(std::move(labels), FeatureMatrix(std::move(phi), ids),
                 FeatureMatrix(std::move(phi_prime), ids));
}

/// Bayes rule with abstention for the mixture: posterior is logistic in
/// x; reject iff max(p, 1-p) < 1 - c.
struct ChowRule {
  Vector coeff;     // posterior log-odds = coeff . x + intercept
  double intercept;
  double c;

  double posterior_plus(const Eigen::Ref<const Vector>& x) const {
    return 1.0 / (1.0 + std::exp(-(coeff.dot(x) + intercept)));
  }
  Decision decide(const Eigen::Ref<const Vector>& x) const {
    const double p = posterior_plus(x);
    if (std::max(p, 1.0 - p) < 1.0 - c) return Decision::Reject;
    return p >= 0.5 ? Decision::AcceptPositive : Decision::AcceptNegative;
  }
};

struct ChowOracle {
  ChowRule rule;
  double oracle_risk;  // expected per-sample risk of the rule
};

/// The optimal abstaining rule and its expected risk, integrated
/// numerically along the discriminant axis (the posterior depends on x
/// only through that projection).
inline ChowOracle chow_oracle(const GaussianMixtureSpec& spec,
                              RejectionCost c) {
  spec.validate();
  const double s2 = spec.sigma * spec.sigma;
  ChowRule rule;
  rule.coeff = (spec.mu_plus - spec.mu_minus) / s2;
  rule.intercept =
      (spec.mu_minus.squaredNorm() - spec.mu_plus.squaredNorm()) / (2.0 * s2) +
      std::log(spec.prior_plus / (1.0 - spec.prior_plus));
  rule.c = c.value();

  // Project onto the unit discriminant direction; class-conditional
  // projections are N(t_pm, sigma).
  const Vector delta = spec.mu_plus - spec.mu_minus;
  const double dnorm = delta.norm();
  if (dnorm == 0.0) {
    // Posterior is constant; the rule either always rejects or always
    // predicts the prior class.
    const double p = 1.0 / (1.0 + std::exp(-rule.intercept));
    double risk;
    if (std::max(p, 1.0 - p) < 1.0 - c.value())
      risk = c.value();
    else
      risk = p >= 0.5 ? 1.0 - spec.prior_plus : spec.prior_plus;
    return {rule, risk};
  }
  const Vector v = delta / dnorm;
  const double t_plus = v.dot(spec.mu_plus);
  const double t_minus = v.dot(spec.mu_minus);
  // coeff = k v, so the log-odds along the axis is k t + intercept
  const double k = dnorm / s2;
  const double q = rule.intercept;

  auto pdf = [&](double t, double mu) {
    const double z = (t - mu) / spec.sigma;
    return std::exp(-0.5 * z * z) /
           (spec.sigma * std::sqrt(2.0 * M_PI));
  };
  auto point_risk = [&](double t) {
    const double p = 1.0 / (1.0 + std::exp(-(k * t + q)));
    const double dens_plus = spec.prior_plus * pdf(t, t_plus);
    const double dens_minus = (1.0 - spec.prior_plus) * pdf(t, t_minus);
    if (std::max(p, 1.0 - p) < 1.0 - c.value())
      return c.value() * (dens_plus + dens_minus);
    return p >= 0.5 ? dens_minus : dens_plus;
  };

  // Composite Simpson on a generous truncation of the axis. The
  // integrand is piecewise smooth with at most two kinks; the fine grid
  // holds the absolute error well under 1e-4.
  const double lo = std::min(t_plus, t_minus) - 12.0 * spec.sigma;
  const double hi = std::max(t_plus, t_minus) + 12.0 * spec.sigma;
  const int n = 200000;  // even
  const double h = (hi - lo) / n;
  double sum = point_risk(lo) + point_risk(hi);
  for (int i = 1; i < n; ++i)
    sum += point_risk(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return {rule, sum * h / 3.0};
}

/// Disjoint, exhaustive, seeded split into the four-role scenario:
/// feature-producer pool, trainer set, validation set, test set.
struct SplitSpec {
  double feature_pool;
  double train;
  double validation;
  double test;
  std::uint64_t seed;

  void validate() const {
    const double parts[] = {feature_pool, train, validation, test};
    double total = 0.0;
    for (double p : parts) {
      if (!(p > 0.0)) throw config_error("split fractions must be positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw config_error("split fractions must sum to 1");
  }
};

struct Splits {
  Dataset feature_pool;
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Row subset preserving id alignment of both spaces.
inline Dataset subset(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  if (rows.empty()) throw data_error("empty dataset subset");
  Matrix phi(static_cast<Eigen::Index>(rows.size()), data.phi().dims());
  Matrix phip(static_cast<Eigen::Index>(rows.size()), data.phi_prime().dims());
  std::vector<Label> labels;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    phi.row(static_cast<Eigen::Index>(i)) = data.phi().row(rows[i]);
    phip.row(static_cast<Eigen::Index>(i)) = data.phi_prime().row(rows[i]);
    labels.push_back(data.labels()[static_cast<std::size_t>(rows[i])]);
    ids.push_back(data.phi().sample_ids()[static_cast<std::size_t>(rows[i])]);
  }
  return Dataset(std::move(labels), FeatureMatrix(std::move(phi), ids),
                 FeatureMatrix(std::move(phip), ids));
}

inline Splits split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  const Eigen::Index m = data.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const double fracs[] = {spec.feature_pool, spec.train, spec.validation,
                          spec.test};
  Eigen::Index bounds[5] = {0, 0, 0, 0, m};
  double cum = 0.0;
  for (int k = 0; k < 3; ++k) {
    cum += fracs[k];
    bounds[k + 1] = static_cast<Eigen::Index>(std::llround(cum * m));
  }
  std::vector<std::vector<Eigen::Index>> parts(4);
  for (int k = 0; k < 4; ++k) {
    if (bounds[k + 1] <= bounds[k])
      throw config_error("split produces an empty part");
    parts[k].assign(order.begin() + bounds[k], order.begin() + bounds[k + 1]);
  }
  return {subset(data, parts[0]), subset(data, parts[1]),
          subset(data, parts[2]), subset(data, parts[3])};
}

/// Per-dimension z-score parameters, fit on one split and applied to
/// all of them. Zero-variance dimensions pass through unscaled.
struct Normalization {
  Vector mean;
  Vector stddev;

  static Normalization fit(const FeatureMatrix& fm) {
    Normalization n;
    n.mean = fm.values().colwise().mean().transpose();
    Vector var = (fm.values().rowwise() - n.mean.transpose())
                     .array()
                     .square()
                     .colwise()
                     .mean()
                     .transpose();
    n.stddev = var.array().sqrt();
    for (Eigen::Index j = 0; j < n.stddev.size(); ++j)
      if (!(n.stddev[j] > 0.0)) n.stddev[j] = 1.0;
    return n;
  }

  FeatureMatrix apply(const FeatureMatrix& fm) const {
    Matrix scaled = (fm.values().rowwise() - mean.transpose()).array().rowwise() /
                    stddev.transpose().array();
    return FeatureMatrix(std::move(scaled), fm.sample_ids());
  }
};

}  // namespace lwr
