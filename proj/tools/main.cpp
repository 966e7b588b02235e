#include <CLI11.hpp>

#include <string>
#include <vector>

#include "lwr/cli.hpp"

// Command-line front end. Options may also come from a key=value config
// file (--config); explicit flags win over file values.
int main(int argc, char** argv) {
  CLI::App app{"Learning-with-Rejection: joint classifier/rejector training, "
               "threshold baselines, and risk/coverage evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags override it");

  lwr::cli::RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--c-list", cfg.c_list, "rejection costs, each in (0, 1/2)")->delimiter(',');
    sub->add_option("--seed", cfg.seed, "seed for splits and any sampling");
    sub->add_option("--out-dir", cfg.out_dir, "output directory");
  };
  auto add_train_opts = [&](CLI::App* sub) {
    sub->add_option("--lambda-grid", cfg.lambda_grid, "classifier regularization grid")->delimiter(',');
    sub->add_option("--lambda-prime-grid", cfg.lambda_prime_grid,
                    "rejector regularization grid")->delimiter(',');
    sub->add_option("--max-iterations", cfg.max_iterations, "iteration budget");
    sub->add_option("--tolerance", cfg.tolerance, "relative stopping tolerance");
    sub->add_flag("--normalize", cfg.normalize,
                  "z-score features using training-split statistics");
  };
  auto add_dataset_opts = [&](CLI::App* sub) {
    sub->add_option("--labels", cfg.labels, "label file (id,label)");
    sub->add_option("--phi", cfg.phi, "classification feature file");
    sub->add_option("--phi-prime", cfg.phi_prime, "rejection feature file");
  };

  CLI::App* train = app.add_subcommand("train", "train LwR over a (c, lambda, lambda') grid");
  add_common(train);
  add_train_opts(train);
  add_dataset_opts(train);
  train->add_option("--val-labels", cfg.val_labels, "validation label file");
  train->add_option("--val-phi", cfg.val_phi, "validation phi file");
  train->add_option("--val-phi-prime", cfg.val_phi_prime, "validation phi' file");
  train->add_option("--split", cfg.split_fractions,
                    "four fractions: feature-pool,train,validation,test")->delimiter(',');

  CLI::App* eval = app.add_subcommand("eval", "evaluate models and/or an external probability table");
  add_common(eval);
  eval->add_option("--model", cfg.model_files, "model file(s) from train")->delimiter(',');
  eval->add_option("--test-labels", cfg.test_labels, "test label file");
  eval->add_option("--test-phi", cfg.test_phi, "test phi file");
  eval->add_option("--test-phi-prime", cfg.test_phi_prime, "test phi' file");
  eval->add_option("--probs", cfg.probs, "external test probabilities (id,p_plus)");
  eval->add_option("--val-probs", cfg.val_probs, "external validation probabilities");
  eval->add_option("--val-labels", cfg.val_labels, "validation label file for theta tuning");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "split one dataset, train all methods per c, emit curves");
  add_common(sweep);
  add_train_opts(sweep);
  add_dataset_opts(sweep);
  sweep->add_option("--split", cfg.split_fractions,
                    "four fractions: feature-pool,train,validation,test")->delimiter(',');
  sweep->add_option("--probs", cfg.probs,
                    "external probability table covering validation and test ids");

  CLI::App* synth = app.add_subcommand("synth", "generate a Gaussian benchmark with its oracle");
  add_common(synth);
  synth->add_option("--dim", cfg.synth_dim, "raw feature dimension");
  synth->add_option("--mu", cfg.synth_mu, "class mean offset along the first axis");
  synth->add_option("--sigma", cfg.synth_sigma, "shared isotropic stddev");
  synth->add_option("--prior", cfg.synth_prior, "P(y=+1)");
  synth->add_option("--m", cfg.synth_m, "sample count");
  synth->add_option("--second-space", cfg.second_space, "identity|rotation|squared");
  synth->add_option("--rotation-dims", cfg.rotation_dims,
                    "projection dims for the rotation second space");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lwr::cli::kConfigError;
  }

  return lwr::cli::run_command(app.get_subcommands().front()->get_name(), cfg);
}
