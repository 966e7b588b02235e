#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwr/data_io.hpp"
#include "lwr/types.hpp"

namespace lwr::cli {

/// Everything a command might need; each command validates the fields
/// it uses before doing any work.
struct RunConfig {
  // datasets
  std::string labels, phi, phi_prime;
  std::string val_labels, val_phi, val_phi_prime;
  std::string test_labels, test_phi, test_phi_prime;
  std::string probs, val_probs;  // external per-sample p(+1|x) tables

  // models (eval)
  std::vector<std::string> model_files;

  // grids
  std::vector<double> c_list{0.1, 0.2, 0.3, 0.4};
  std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> lambda_prime_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0};

  // training
  long max_iterations = 200000;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  bool normalize = false;

  // four-way split (feature pool, train, validation, test); empty means
  // the command expects explicit per-role files
  std::vector<double> split_fractions;

  // synth
  Eigen::Index synth_dim = 1;
  double synth_mu = 1.0;
  double synth_sigma = 1.0;
  double synth_prior = 0.5;
  Eigen::Index synth_m = 4000;
  std::string second_space = "identity";  // identity|rotation|squared
  Eigen::Index rotation_dims = 0;

  std::string out_dir = ".";
};

/// Model file written by cmd_train and read by cmd_eval. Includes the
/// z-score parameters when the model was trained on normalized data.
struct SavedModel {
  LwrModel model;
  std::optional<Normalization> norm_phi;
  std::optional<Normalization> norm_phi_prime;
};

void save_model(const SavedModel& saved, const std::filesystem::path& path);
SavedModel load_model(const std::filesystem::path& path);

/// Exit codes used by the CLI binary.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kConvergenceError = 4,
};

void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_sweep(const RunConfig& cfg);
void cmd_synth(const RunConfig& cfg);

/// Maps an in-flight exception to the command exit code; used by main.
int run_command(const std::string& command, const RunConfig& cfg);

}  // namespace lwr::cli
