// Command line front end. Every flag is folded into the layered config
// resolution (defaults, then preset, then config file, then assignments in
// command order), so the run described by the echoed config sidecar is the
// run that actually happened. Exit codes: 0 success, 2 usage, 3 data,
// 4 numeric; failures print one machine-readable JSON line on stderr.
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fanlasso/common.hpp"
#include "fanlasso/config.hpp"
#include "fanlasso/format.hpp"
#include "fanlasso/pipeline.hpp"

namespace {

using fanlasso::ConfigLayers;

// One subcommand's accumulated inputs plus the action that consumes them.
struct Command {
  CLI::App* app = nullptr;
  ConfigLayers layers;
  std::string config_path;
  std::function<int(const ConfigLayers&)> action;
};

// Value flags append (path, value) in command order; the resolver applies
// them left to right, so a repeated or conflicting flag is last-wins.
void bind_value(Command& cmd, const std::string& flag, std::string path,
                const std::string& desc) {
  ConfigLayers* layers = &cmd.layers;
  cmd.app
      ->add_option_function<std::string>(
          flag,
          [layers, path = std::move(path)](const std::string& value) {
            layers->assignments.emplace_back(path, value);
          },
          desc)
      ->trigger_on_parse();
}

void bind_flag(Command& cmd, const std::string& flag, std::string path, const std::string& desc) {
  ConfigLayers* layers = &cmd.layers;
  cmd.app
      ->add_flag_function(
          flag,
          [layers, path = std::move(path)](std::int64_t count) {
            if (count > 0) layers->assignments.emplace_back(path, "true");
          },
          desc)
      ->trigger_on_parse();
}

void add_set_option(Command& cmd) {
  ConfigLayers* layers = &cmd.layers;
  cmd.app
      ->add_option_function<std::string>(
          "--set",
          [layers](const std::string& kv) {
            const std::size_t eq = kv.find('=');
            if (eq == std::string::npos) {
              throw fanlasso::ValidationError("--set expects KEY=VALUE, got '" + kv + "'");
            }
            layers->assignments.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
          },
          "Override any config key, e.g. --set train.max_epochs=50")
      ->trigger_on_parse();
}

// Flags shared by every subcommand. seed_path is empty for the subcommands
// that have no randomness; threads-capable subcommands also pick up the
// FANLASSO_THREADS fallback (pre-seeded so explicit flags still win).
void add_common(Command& cmd, const std::string& seed_path, bool has_threads) {
  cmd.app->add_option("--config", cmd.config_path, "Config file (JSON, comments allowed)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd.app
      ->add_option_function<std::string>(
          "--preset",
          [layers = &cmd.layers](const std::string& name) { layers->preset = name; },
          "Named baseline: paper (full scale) or desk (small)")
      ->trigger_on_parse();
  if (!seed_path.empty()) bind_value(cmd, "--seed", seed_path, "Master seed");
  bind_value(cmd, "--out", "out_dir", "Output directory");
  if (has_threads) {
    if (const char* env = std::getenv("FANLASSO_THREADS"); env != nullptr && *env != '\0') {
      cmd.layers.assignments.emplace_back("threads", env);
    }
    bind_value(cmd, "--threads", "threads", "Worker thread count");
  }
  add_set_option(cmd);
}

void print_grid_best(const std::size_t depth, const std::size_t width,
                     const std::optional<double>& valid_rmse) {
  std::printf("best architecture: depth %zu, width %zu\n", depth, width);
  if (valid_rmse) {
    std::printf("validation rmse: %s\n", fanlasso::format_double(*valid_rmse).c_str());
  }
}

int run_sim_covariate(const ConfigLayers& layers) {
  const auto artifacts = fanlasso::run_sim(fanlasso::resolve_sim_covariate_run(layers));
  std::printf("wrote %s (%zu rows)\n", artifacts.csv_path.c_str(), artifacts.result.rows.size());
  return 0;
}

int run_sim_posterior(const ConfigLayers& layers) {
  const auto artifacts = fanlasso::run_sim(fanlasso::resolve_sim_posterior_run(layers));
  std::printf("wrote %s (%zu rows)\n", artifacts.csv_path.c_str(), artifacts.result.rows.size());
  return 0;
}

int run_train_source(const ConfigLayers& layers) {
  const auto artifacts = fanlasso::run_train_source(fanlasso::resolve_train_source_run(layers));
  print_grid_best(artifacts.best_depth, artifacts.best_width, artifacts.valid_rmse);
  std::printf("wrote %s\n", artifacts.model_path.c_str());
  return 0;
}

int run_finetune(const ConfigLayers& layers) {
  const auto artifacts = fanlasso::run_finetune(fanlasso::resolve_finetune_run(layers));
  print_grid_best(artifacts.best_depth, artifacts.best_width, artifacts.valid_rmse);
  if (artifacts.source_model_path) {
    std::printf("wrote %s\n", artifacts.source_model_path->c_str());
  }
  std::printf("wrote %s\n", artifacts.model_path.c_str());
  return 0;
}

int run_predict(const ConfigLayers& layers) {
  const auto artifacts = fanlasso::run_predict(fanlasso::resolve_predict_run(layers));
  std::printf("wrote %s (%zu predictions", artifacts.csv_path.c_str(),
              artifacts.predictions.size());
  if (artifacts.dropped_rows > 0) std::printf(", %zu rows dropped", artifacts.dropped_rows);
  std::printf(")\n");
  return 0;
}

int run_evaluate(const ConfigLayers& layers) {
  const auto artifacts = fanlasso::run_evaluate(fanlasso::resolve_evaluate_run(layers));
  std::printf("rmse: %s over %zu rows\n", fanlasso::format_double(artifacts.rmse).c_str(),
              artifacts.n_eval);
  std::printf("wrote %s\n", artifacts.report_path.c_str());
  return 0;
}

int run_summarize(const ConfigLayers& layers) {
  const auto artifacts = fanlasso::run_summarize(fanlasso::resolve_summarize_run(layers));
  std::printf("wrote %s (%zu groups)\n", artifacts.csv_path.c_str(), artifacts.rows.size());
  return 0;
}

struct ErrorKind {
  const char* category;
  int code;
};

ErrorKind classify(const std::exception& e) {
  if (dynamic_cast<const fanlasso::ValidationError*>(&e) != nullptr) return {"usage", 2};
  if (dynamic_cast<const fanlasso::DataError*>(&e) != nullptr) return {"data", 3};
  return {"numeric", 4};
}

int report_error(const char* category, const std::string& message, int code) {
  const nlohmann::json j{{"error", {{"category", category}, {"message", message}}}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
  return code;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Factor-augmented regression transfer toolkit"};
  app.require_subcommand(1);

  std::vector<Command> commands(7);

  Command& sim_cov = commands[0];
  sim_cov.app = app.add_subcommand("sim-covariate",
                                   "Projection alignment study under covariate shift");
  add_common(sim_cov, "experiment.master_seed", true);
  bind_value(sim_cov, "--reps", "experiment.replications", "Replication count");
  sim_cov.action = run_sim_covariate;

  Command& sim_post = commands[1];
  sim_post.app = app.add_subcommand("sim-posterior",
                                    "Estimator comparison study under posterior shift");
  add_common(sim_post, "experiment.master_seed", true);
  bind_value(sim_post, "--reps", "experiment.replications", "Replication count");
  sim_post.action = run_sim_posterior;

  Command& train = commands[2];
  train.app = app.add_subcommand("train-source", "Fit the source model on a labeled CSV");
  add_common(train, "seed", true);
  bind_value(train, "--source", "source_csv", "Labeled source CSV");
  bind_value(train, "--pool", "pool_csv", "Extra covariate rows for the projection");
  bind_value(train, "--label", "label_column", "Label column name");
  bind_value(train, "--normalize", "normalize", "Feature scaling: minmax, zscore or none");
  bind_value(train, "--r-bar", "r_bar", "Projection dimension");
  bind_value(train, "--kind", "source_kind", "Source estimator: fast_nn or vanilla");
  bind_value(train, "--epochs", "train.max_epochs", "Optimizer epoch budget");
  train.action = run_train_source;

  Command& finetune = commands[3];
  finetune.app = app.add_subcommand(
      "finetune", "Fine-tune on a labeled target CSV over a frozen or freshly trained source");
  add_common(finetune, "seed", true);
  bind_value(finetune, "--target", "target_csv", "Labeled target CSV");
  bind_value(finetune, "--source-model", "source_model", "Frozen source bundle");
  bind_value(finetune, "--source", "source_csv", "Labeled source CSV (train the source here)");
  bind_value(finetune, "--pool", "pool_csv", "Extra covariate rows for the target projection");
  bind_flag(finetune, "--decouple", "decouple", "Tune the source stage by its own error first");
  bind_value(finetune, "--label", "label_column", "Label column name");
  bind_value(finetune, "--normalize", "normalize", "Feature scaling: minmax, zscore or none");
  bind_value(finetune, "--r-bar", "r_bar", "Projection dimension");
  bind_value(finetune, "--kind", "source_kind", "Source estimator: fast_nn or vanilla");
  bind_value(finetune, "--epochs", "train.max_epochs", "Optimizer epoch budget");
  finetune.action = run_finetune;

  Command& predict = commands[4];
  predict.app = app.add_subcommand("predict", "Write model predictions for a CSV");
  add_common(predict, "", false);
  bind_value(predict, "--model", "model", "Model bundle");
  bind_value(predict, "--data", "data_csv", "Input CSV");
  bind_value(predict, "--label", "label_column", "Label column to drop when present");
  bind_value(predict, "--normalize", "normalize",
             "Fallback scaling when the bundle has no stored record");
  predict.action = run_predict;

  Command& evaluate = commands[5];
  evaluate.app = app.add_subcommand("evaluate", "Score a model against a labeled CSV");
  add_common(evaluate, "", false);
  bind_value(evaluate, "--model", "model", "Model bundle");
  bind_value(evaluate, "--data", "data_csv", "Labeled CSV");
  bind_value(evaluate, "--label", "label_column", "Label column name");
  bind_value(evaluate, "--normalize", "normalize",
             "Fallback scaling when the bundle has no stored record");
  evaluate.action = run_evaluate;

  Command& summarize = commands[6];
  summarize.app = app.add_subcommand("summarize", "Aggregate a result CSV into group means");
  add_common(summarize, "", false);
  bind_value(summarize, "--input", "input_csv", "Result CSV to aggregate");
  summarize.action = run_summarize;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      std::printf("%s", app.help().c_str());
      return 0;
    }
    // unknown flags or subcommands, malformed flag values
    return report_error("usage", e.what(), 2);
  } catch (const fanlasso::ValidationError& e) {
    return report_error("usage", e.what(), 2);
  }

  for (Command& cmd : commands) {
    if (!(*cmd.app)) continue;
    try {
      if (!cmd.config_path.empty()) {
        cmd.layers.file_text = fanlasso::read_text_file(cmd.config_path);
      }
      return cmd.action(cmd.layers);
    } catch (const std::exception& e) {
      const ErrorKind kind = classify(e);
      return report_error(kind.category, e.what(), kind.code);
    }
  }
  return report_error("usage", "no subcommand given", 2);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    return report_error("numeric", e.what(), 4);
  } catch (...) {
    return report_error("numeric", "unknown failure", 4);
  }
}
