#include "lwr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "lwr/baselines.hpp"
#include "lwr/evaluation.hpp"
#include "lwr/train.hpp"

namespace lwr::cli {

namespace fs = std::filesystem;

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw config_error("missing required path: " + what);
  if (!fs::exists(path))
    throw config_error(what + " does not exist: " + path);
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.max_iterations = cfg.max_iterations;
  tc.tolerance = cfg.tolerance;
  tc.seed = cfg.seed;
  tc.validate();
  return tc;
}

SecondSpace parse_second_space(const std::string& name) {
  if (name == "identity") return SecondSpace::Identity;
  if (name == "rotation") return SecondSpace::RandomRotation;
  if (name == "squared") return SecondSpace::SquaredAppended;
  throw config_error("unknown second space '" + name +
                     "' (expected identity|rotation|squared)");
}

void validate_c_list(const std::vector<double>& cs) {
  if (cs.empty()) throw config_error("c list must be nonempty");
  for (double c : cs) static_cast<void>(RejectionCost{c});  // range check
}

std::string accuracy_field(const std::optional<double>& acc) {
  return acc ? format_double(*acc) : "nan";
}

struct MethodRow {
  std::string method;
  double c;
  EvalReport report;
};

void write_curves(std::vector<MethodRow> rows, const fs::path& path) {
  std::sort(rows.begin(), rows.end(), [](const MethodRow& a, const MethodRow& b) {
    return a.method != b.method ? a.method < b.method : a.c < b.c;
  });
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path.string());
  out << "method,c,rejection_rate,accuracy,risk_per_sample\n";
  for (const MethodRow& r : rows)
    out << r.method << "," << format_double(r.c) << ","
        << format_double(r.report.rejection_rate) << ","
        << accuracy_field(r.report.accuracy_nonrejected) << ","
        << format_double(r.report.risk_per_sample) << "\n";
}

void write_decisions(const std::vector<Decision>& decisions,
                     const std::vector<std::string>& ids, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path.string());
  out << "id,decision\n";
  for (std::size_t i = 0; i < decisions.size(); ++i)
    out << ids[i] << "," << to_string(decisions[i]) << "\n";
}

Dataset apply_norms(const Dataset& data, const std::optional<Normalization>& np,
                    const std::optional<Normalization>& npp) {
  if (!np && !npp) return data;
  FeatureMatrix phi = np ? np->apply(data.phi()) : data.phi();
  FeatureMatrix phip = npp ? npp->apply(data.phi_prime()) : data.phi_prime();
  return Dataset(data.labels(), std::move(phi), std::move(phip));
}

// Per-id probabilities for a dataset, in row order.
std::vector<double> probs_for(const std::map<std::string, double>& table,
                              const Dataset& data) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(data.size()));
  for (const std::string& id : data.phi().sample_ids()) {
    const auto it = table.find(id);
    if (it == table.end())
      throw data_error("id '" + id + "' missing from the probability table");
    out.push_back(it->second);
  }
  return out;
}

std::vector<Decision> threshold_decisions(const std::vector<double>& p,
                                          double theta) {
  std::vector<Decision> out;
  out.reserve(p.size());
  for (double pi : p) out.push_back(threshold_decide(pi, theta));
  return out;
}

struct GridFit {
  LwrModel model;
  double val_risk;  // NaN when no validation set is in play
};

struct GridRecord {
  double c, lambda, lambda_prime, objective, val_risk;
  bool selected;
};

// Trains the full (lambda, lambda') grid for one c and selects by
// minimum validation per-sample risk; first grid cell wins ties.
GridFit fit_lwr_grid(const Dataset& train_set, const Dataset* validation,
                     RejectionCost c, const RunConfig& cfg,
                     std::vector<GridRecord>* records) {
  const TrainConfig tc = train_config(cfg);
  std::optional<LwrModel> best;
  double best_risk = std::numeric_limits<double>::infinity();
  for (double lambda : cfg.lambda_grid) {
    for (double lambda_prime : cfg.lambda_prime_grid) {
      const LwrHyperparams hyper(c, lambda, lambda_prime);
      LwrModel model = train(train_set, hyper, tc);
      double risk = std::numeric_limits<double>::quiet_NaN();
      if (validation)
        risk = evaluate(decide_all(model, *validation), validation->labels(), c)
                   .risk_per_sample;
      const bool take =
          !best || (validation && risk < best_risk);
      if (records)
        records->push_back(
            {c.value(), lambda, lambda_prime, model.objective_value, risk, false});
      if (take) {
        best = std::move(model);
        best_risk = risk;
        if (records) {
          for (GridRecord& r : *records)
            if (r.c == c.value()) r.selected = false;
          records->back().selected = true;
        }
      }
    }
  }
  return {std::move(*best), best_risk};
}

void write_model_for_c(const LwrModel& model,
                       const std::optional<Normalization>& np,
                       const std::optional<Normalization>& npp,
                       const fs::path& out_dir) {
  const fs::path path =
      out_dir / ("lwr_model_c" + format_double(model.hyper.c.value()) + ".txt");
  save_model({model, np, npp}, path);
}

}  // namespace

void save_model(const SavedModel& saved, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write file: " + path.string());
  const LwrModel& m = saved.model;
  out << "c=" << format_double(m.hyper.c.value()) << "\n"
      << "lambda=" << format_double(m.hyper.lambda) << "\n"
      << "lambda_prime=" << format_double(m.hyper.lambda_prime) << "\n"
      << "b=" << format_double(m.b) << "\n"
      << "b_prime=" << format_double(m.b_prime) << "\n"
      << "objective=" << format_double(m.objective_value) << "\n";
  auto vec_line = [&](const char* key, const Vector& v) {
    out << key << "=";
    for (Eigen::Index i = 0; i < v.size(); ++i)
      out << (i ? " " : "") << format_double(v[i]);
    out << "\n";
  };
  vec_line("w", m.w);
  vec_line("u", m.u);
  if (saved.norm_phi) {
    vec_line("norm_phi_mean", saved.norm_phi->mean);
    vec_line("norm_phi_std", saved.norm_phi->stddev);
  }
  if (saved.norm_phi_prime) {
    vec_line("norm_phi_prime_mean", saved.norm_phi_prime->mean);
    vec_line("norm_phi_prime_std", saved.norm_phi_prime->stddev);
  }
}

SavedModel load_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open model file: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw data_error("bad model line '" + line + "' in " + path.string());
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw data_error("model file missing key '" + key + "': " + path.string());
    return it->second;
  };
  auto scalar = [&](const std::string& key) {
    return detail::parse_double(need(key), path.string());
  };
  auto vec = [&](const std::string& value) {
    std::vector<double> vals;
    std::stringstream ss(value);
    std::string tok;
    while (ss >> tok) vals.push_back(detail::parse_double(tok, path.string()));
    Vector v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = vals[i];
    return v;
  };

  LwrHyperparams hyper(RejectionCost(scalar("c")), scalar("lambda"),
                       scalar("lambda_prime"));
  LwrModel model{vec(need("w")), scalar("b"), vec(need("u")),
                 scalar("b_prime"), hyper, scalar("objective")};
  SavedModel saved{std::move(model), std::nullopt, std::nullopt};
  if (kv.count("norm_phi_mean"))
    saved.norm_phi = Normalization{vec(need("norm_phi_mean")),
                                   vec(need("norm_phi_std"))};
  if (kv.count("norm_phi_prime_mean"))
    saved.norm_phi_prime = Normalization{vec(need("norm_phi_prime_mean")),
                                         vec(need("norm_phi_prime_std"))};
  return saved;
}

void cmd_train(const RunConfig& cfg) {
  require_file(cfg.labels, "--labels");
  require_file(cfg.phi, "--phi");
  require_file(cfg.phi_prime, "--phi-prime");
  validate_c_list(cfg.c_list);
  if (cfg.lambda_grid.empty() || cfg.lambda_prime_grid.empty())
    throw config_error("lambda grids must be nonempty");
  const bool has_val_files = !cfg.val_labels.empty();
  if (has_val_files) {
    require_file(cfg.val_labels, "--val-labels");
    require_file(cfg.val_phi, "--val-phi");
    require_file(cfg.val_phi_prime, "--val-phi-prime");
  }
  const bool has_split = !cfg.split_fractions.empty();
  if (has_split && cfg.split_fractions.size() != 4)
    throw config_error("--split needs four fractions");
  const bool grid_is_single =
      cfg.lambda_grid.size() == 1 && cfg.lambda_prime_grid.size() == 1;
  if (!has_val_files && !has_split && !grid_is_single)
    throw config_error(
        "hyperparameter selection needs a validation set (--val-* files or "
        "--split)");
  fs::create_directories(cfg.out_dir);

  Dataset full = load_dataset(cfg.labels, cfg.phi, cfg.phi_prime);
  std::optional<Dataset> train_set, val_set;
  if (has_split) {
    SplitSpec sp{cfg.split_fractions[0], cfg.split_fractions[1],
                 cfg.split_fractions[2], cfg.split_fractions[3], cfg.seed};
    Splits parts = split(full, sp);
    train_set = std::move(parts.train);
    val_set = std::move(parts.validation);
  } else {
    train_set = std::move(full);
    if (has_val_files)
      val_set = load_dataset(cfg.val_labels, cfg.val_phi, cfg.val_phi_prime);
  }

  std::optional<Normalization> np, npp;
  if (cfg.normalize) {
    np = Normalization::fit(train_set->phi());
    npp = Normalization::fit(train_set->phi_prime());
    train_set = apply_norms(*train_set, np, npp);
    if (val_set) val_set = apply_norms(*val_set, np, npp);
  }

  std::vector<GridRecord> records;
  for (double c : cfg.c_list) {
    GridFit fit = fit_lwr_grid(*train_set, val_set ? &*val_set : nullptr,
                               RejectionCost(c), cfg, &records);
    write_model_for_c(fit.model, np, npp, cfg.out_dir);
  }

  std::ofstream rep(fs::path(cfg.out_dir) / "train_report.csv");
  if (!rep) throw data_error("cannot write train report");
  rep << "c,lambda,lambda_prime,objective,val_risk_per_sample,selected,"
         "single_class\n";
  const bool single = train_set->single_class();
  for (const GridRecord& r : records)
    rep << format_double(r.c) << "," << format_double(r.lambda) << ","
        << format_double(r.lambda_prime) << "," << format_double(r.objective)
        << "," << format_double(r.val_risk) << "," << (r.selected ? 1 : 0)
        << "," << (single ? 1 : 0) << "\n";
}

void cmd_eval(const RunConfig& cfg) {
  require_file(cfg.test_labels, "--test-labels");
  const bool has_models = !cfg.model_files.empty();
  const bool has_probs = !cfg.probs.empty();
  if (!has_models && !has_probs)
    throw config_error("eval needs --model files and/or a --probs table");
  if (has_models) {
    require_file(cfg.test_phi, "--test-phi");
    require_file(cfg.test_phi_prime, "--test-phi-prime");
    for (const std::string& m : cfg.model_files) require_file(m, "--model");
  }
  if (has_probs) {
    require_file(cfg.probs, "--probs");
    require_file(cfg.val_probs, "--val-probs");
    require_file(cfg.val_labels, "--val-labels");
    validate_c_list(cfg.c_list);
  }
  fs::create_directories(cfg.out_dir);

  std::vector<MethodRow> rows;

  if (has_models) {
    Dataset test = load_dataset(cfg.test_labels, cfg.test_phi, cfg.test_phi_prime);
    for (const std::string& mf : cfg.model_files) {
      SavedModel saved = load_model(mf);
      Dataset scaled = apply_norms(test, saved.norm_phi, saved.norm_phi_prime);
      std::vector<Decision> decisions = decide_all(saved.model, scaled);
      write_decisions(decisions, scaled.phi().sample_ids(),
                      fs::path(cfg.out_dir) /
                          ("decisions_lwr_c" +
                           format_double(saved.model.hyper.c.value()) + ".csv"));
      EvalReport report =
          evaluate(std::move(decisions), scaled.labels(), saved.model.hyper.c);
      rows.push_back({"lwr", saved.model.hyper.c.value(), std::move(report)});
    }
  }

  if (has_probs) {
    // Tuning data: validation labels aligned with the validation table.
    const auto val_lines = detail::read_lines(cfg.val_labels);
    if (val_lines.empty() || val_lines[0] != "id,label")
      throw data_error("bad label header in " + cfg.val_labels);
    const auto val_table = load_probabilities(cfg.val_probs);
    std::vector<double> val_p;
    std::vector<Label> val_y;
    for (std::size_t r = 1; r < val_lines.size(); ++r) {
      const auto fields = detail::split_csv_line(val_lines[r]);
      if (fields.size() != 2)
        throw data_error("row length mismatch in " + cfg.val_labels);
      const auto it = val_table.find(fields[0]);
      if (it == val_table.end())
        throw data_error("id '" + fields[0] + "' missing from " + cfg.val_probs);
      val_p.push_back(it->second);
      val_y.push_back(Label(static_cast<int>(
          detail::parse_double(fields[1], cfg.val_labels))));
    }

    const auto test_lines = detail::read_lines(cfg.test_labels);
    const auto test_table = load_probabilities(cfg.probs);
    std::vector<double> test_p;
    std::vector<Label> test_y;
    std::vector<std::string> test_ids;
    for (std::size_t r = 1; r < test_lines.size(); ++r) {
      const auto fields = detail::split_csv_line(test_lines[r]);
      if (fields.size() != 2)
        throw data_error("row length mismatch in " + cfg.test_labels);
      const auto it = test_table.find(fields[0]);
      if (it == test_table.end())
        throw data_error("id '" + fields[0] + "' missing from " + cfg.probs);
      test_ids.push_back(fields[0]);
      test_p.push_back(it->second);
      test_y.push_back(Label(static_cast<int>(
          detail::parse_double(fields[1], cfg.test_labels))));
    }

    for (double c : cfg.c_list) {
      const RejectionCost cost(c);
      const double theta = tune_threshold(val_p, val_y, cost);
      std::vector<Decision> decisions = threshold_decisions(test_p, theta);
      write_decisions(decisions, test_ids,
                      fs::path(cfg.out_dir) /
                          ("decisions_external_c" + format_double(c) + ".csv"));
      rows.push_back({"external", c, evaluate(std::move(decisions), test_y, cost)});
    }
  }

  std::ofstream rep(fs::path(cfg.out_dir) / "eval_report.csv");
  if (!rep) throw data_error("cannot write eval report");
  rep << "method,c,risk_total,risk_per_sample,accuracy,rejection_rate\n";
  std::sort(rows.begin(), rows.end(), [](const MethodRow& a, const MethodRow& b) {
    return a.method != b.method ? a.method < b.method : a.c < b.c;
  });
  for (const MethodRow& r : rows)
    rep << r.method << "," << format_double(r.c) << ","
        << format_double(r.report.risk_total) << ","
        << format_double(r.report.risk_per_sample) << ","
        << accuracy_field(r.report.accuracy_nonrejected) << ","
        << format_double(r.report.rejection_rate) << "\n";

  write_curves(std::move(rows), fs::path(cfg.out_dir) / "curves.csv");
}

void cmd_sweep(const RunConfig& cfg) {
  require_file(cfg.labels, "--labels");
  require_file(cfg.phi, "--phi");
  require_file(cfg.phi_prime, "--phi-prime");
  validate_c_list(cfg.c_list);
  if (cfg.split_fractions.size() != 4)
    throw config_error("sweep needs --split with four fractions");
  if (cfg.lambda_grid.empty() || cfg.lambda_prime_grid.empty())
    throw config_error("lambda grids must be nonempty");
  if (!cfg.probs.empty()) require_file(cfg.probs, "--probs");
  fs::create_directories(cfg.out_dir);

  Dataset full = load_dataset(cfg.labels, cfg.phi, cfg.phi_prime);
  SplitSpec sp{cfg.split_fractions[0], cfg.split_fractions[1],
               cfg.split_fractions[2], cfg.split_fractions[3], cfg.seed};
  Splits parts = split(full, sp);

  std::optional<Normalization> np, npp;
  Dataset train_set = parts.train, val_set = parts.validation,
          test_set = parts.test;
  if (cfg.normalize) {
    np = Normalization::fit(train_set.phi());
    npp = Normalization::fit(train_set.phi_prime());
    train_set = apply_norms(train_set, np, npp);
    val_set = apply_norms(val_set, np, npp);
    test_set = apply_norms(test_set, np, npp);
  }

  const TrainConfig tc = train_config(cfg);
  std::vector<MethodRow> rows;

  // LwR: grid-select per c on validation risk, evaluate on test.
  for (double c : cfg.c_list) {
    const RejectionCost cost(c);
    GridFit fit = fit_lwr_grid(train_set, &val_set, cost, cfg, nullptr);
    write_model_for_c(fit.model, np, npp, cfg.out_dir);
    rows.push_back({"lwr", c,
                    evaluate(decide_all(fit.model, test_set),
                             test_set.labels(), cost)});
  }

  // Linear max-margin baseline: calibrate on validation scores, tune
  // theta per c, select lambda per c by validation risk.
  struct SvmCandidate {
    CalibratedLinearModel scorer;
    std::vector<double> val_p;
  };
  std::vector<SvmCandidate> candidates;
  for (double lambda : cfg.lambda_grid) {
    LinearModel svm = train_svm(train_set, lambda, tc);
    std::vector<double> val_scores;
    for (Eigen::Index i = 0; i < val_set.size(); ++i)
      val_scores.push_back(svm.score(val_set.phi().row(i).transpose()));
    const auto [cal_a, cal_b] = fit_calibration(val_scores, val_set.labels());
    CalibratedLinearModel scorer{svm.w, svm.b, cal_a, cal_b};
    std::vector<double> val_p;
    for (Eigen::Index i = 0; i < val_set.size(); ++i)
      val_p.push_back(scorer.prob_positive(val_set.phi().row(i).transpose()));
    candidates.push_back({std::move(scorer), std::move(val_p)});
  }
  for (double c : cfg.c_list) {
    const RejectionCost cost(c);
    double best_risk = std::numeric_limits<double>::infinity();
    const SvmCandidate* best = nullptr;
    double best_theta = 0.5;
    for (const SvmCandidate& cand : candidates) {
      const double theta = tune_threshold(cand.val_p, val_set.labels(), cost);
      const double risk =
          risk_lwr(threshold_decisions(cand.val_p, theta), val_set.labels(),
                   cost) /
          static_cast<double>(val_set.size());
      if (risk < best_risk) {
        best_risk = risk;
        best = &cand;
        best_theta = theta;
      }
    }
    std::vector<double> test_p;
    for (Eigen::Index i = 0; i < test_set.size(); ++i)
      test_p.push_back(
          best->scorer.prob_positive(test_set.phi().row(i).transpose()));
    rows.push_back({"svm", c,
                    evaluate(threshold_decisions(test_p, best_theta),
                             test_set.labels(), cost)});
  }

  // External posterior table (e.g. a CNN evaluated elsewhere).
  if (!cfg.probs.empty()) {
    const auto table = load_probabilities(cfg.probs);
    const std::vector<double> val_p = probs_for(table, parts.validation);
    const std::vector<double> test_p = probs_for(table, parts.test);
    for (double c : cfg.c_list) {
      const RejectionCost cost(c);
      const double theta = tune_threshold(val_p, parts.validation.labels(), cost);
      rows.push_back({"external", c,
                      evaluate(threshold_decisions(test_p, theta),
                               parts.test.labels(), cost)});
    }
  }

  write_curves(std::move(rows), fs::path(cfg.out_dir) / "curves.csv");
}

void cmd_synth(const RunConfig& cfg) {
  validate_c_list(cfg.c_list);
  if (cfg.synth_dim < 1) throw config_error("--dim must be >= 1");
  if (cfg.synth_m < 1) throw config_error("--m must be >= 1");
  const SecondSpace second = parse_second_space(cfg.second_space);
  GaussianMixtureSpec spec;
  spec.dim = cfg.synth_dim;
  spec.mu_plus = Vector::Zero(spec.dim);
  spec.mu_plus[0] = cfg.synth_mu;
  spec.mu_minus = -spec.mu_plus;
  spec.sigma = cfg.synth_sigma;
  spec.prior_plus = cfg.synth_prior;
  spec.validate();
  fs::create_directories(cfg.out_dir);

  Dataset data =
      synth_gaussian(spec, cfg.synth_m, cfg.seed, second, cfg.rotation_dims);
  const fs::path dir(cfg.out_dir);
  write_dataset(data, dir / "synth_labels.csv", dir / "synth_phi.csv",
                dir / "synth_phi_prime.csv");

  std::ofstream out(dir / "synth_oracle.csv");
  if (!out) throw data_error("cannot write oracle summary");
  out << "c,oracle_risk\n";
  for (double c : cfg.c_list)
    out << format_double(c) << ","
        << format_double(chow_oracle(spec, RejectionCost(c)).oracle_risk)
        << "\n";
}

int run_command(const std::string& command, const RunConfig& cfg) {
  try {
    if (command == "train")
      cmd_train(cfg);
    else if (command == "eval")
      cmd_eval(cfg);
    else if (command == "sweep")
      cmd_sweep(cfg);
    else if (command == "synth")
      cmd_synth(cfg);
    else
      throw config_error("unknown command '" + command + "'");
    return kOk;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const convergence_error& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace lwr::cli
