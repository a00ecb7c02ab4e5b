#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fanlasso/dataset.hpp"
#include "fanlasso/fastnn.hpp"
#include "fanlasso/simulate.hpp"
#include "fanlasso/trainer.hpp"

namespace fanlasso {

// Architecture grid searched by the pipeline subcommands. One (depth, width)
// pair is applied to both the source and the fine-tuning stage unless the
// search is decoupled.
struct GridSpec {
  std::vector<std::size_t> depths = {4, 5, 6};
  std::vector<std::size_t> widths = {250, 350, 450};

  bool operator==(const GridSpec&) const = default;
};

// Which source-model family a pipeline run trains.
enum class SourceKind { FastNn, Vanilla };

const char* source_kind_name(SourceKind kind);
SourceKind parse_source_kind(std::string_view name);

struct SimCovariateRun {
  CovariateShiftConfig experiment;
  std::string out_dir = "out";
  std::size_t threads = 1;

  bool operator==(const SimCovariateRun&) const = default;
};

struct SimPosteriorRun {
  PosteriorShiftConfig experiment;
  std::string out_dir = "out";
  std::size_t threads = 1;

  bool operator==(const SimPosteriorRun&) const = default;
};

struct TrainSourceRun {
  std::string source_csv;
  // extra covariate rows pooled into the projection under the drift rule
  std::optional<std::string> pool_csv;
  std::string label_column = "ViolentCrimesPerPop";
  NormalizeMode normalize = NormalizeMode::MinMax;
  SplitFractions fractions;
  double unlabeled_fraction = 0.1;
  std::size_t r_bar = 3;
  SourceKind source_kind = SourceKind::FastNn;
  GridSpec grid;
  ArchConfig arch;  // depth_l / width_n are taken from the grid
  TrainConfig train;
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::size_t threads = 1;

  bool operator==(const TrainSourceRun&) const = default;
};

struct FinetuneRun {
  std::string target_csv;
  // exactly one of these two: fine-tune a frozen bundle, or train the source
  // stage from its CSV inside the same run
  std::optional<std::string> source_model;
  std::optional<std::string> source_csv;
  // extra covariate rows pooled into the target projection (frozen-bundle
  // mode; the end-to-end mode pools the source unlabeled rows automatically)
  std::optional<std::string> pool_csv;
  std::string label_column = "ViolentCrimesPerPop";
  NormalizeMode normalize = NormalizeMode::MinMax;
  SplitFractions fractions;
  double unlabeled_fraction = 0.1;
  std::size_t r_bar = 3;
  SourceKind source_kind = SourceKind::FastNn;  // end-to-end mode only
  GridSpec grid;
  // tune the source stage by its own validation error first instead of
  // carrying every grid cell through to the target stage
  bool decouple = false;
  ArchConfig arch;
  TrainConfig train;
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::size_t threads = 1;

  bool operator==(const FinetuneRun&) const = default;
};

struct PredictRun {
  std::string model;
  std::string data_csv;
  // dropped from the feature block when present in the file
  std::optional<std::string> label_column = "ViolentCrimesPerPop";
  NormalizeMode normalize = NormalizeMode::MinMax;  // fallback when the model has no stored record
  std::string out_dir = "out";

  bool operator==(const PredictRun&) const = default;
};

struct EvaluateRun {
  std::string model;
  std::string data_csv;
  std::string label_column = "ViolentCrimesPerPop";
  NormalizeMode normalize = NormalizeMode::MinMax;
  std::string out_dir = "out";

  bool operator==(const EvaluateRun&) const = default;
};

struct SummarizeRun {
  std::string input_csv;
  std::string out_dir = "out";

  bool operator==(const SummarizeRun&) const = default;
};

// Full resolved-config echo as pretty JSON (every field present, trailing
// newline). parse_* accepts the echo as well as hand-written files: // and
// /* */ comments are allowed, unknown keys are rejected with their path, and
// absent keys keep their defaults.
std::string to_json_text(const SimCovariateRun& run);
std::string to_json_text(const SimPosteriorRun& run);
std::string to_json_text(const TrainSourceRun& run);
std::string to_json_text(const FinetuneRun& run);
std::string to_json_text(const PredictRun& run);
std::string to_json_text(const EvaluateRun& run);
std::string to_json_text(const SummarizeRun& run);

SimCovariateRun parse_sim_covariate_run(const std::string& text);
SimPosteriorRun parse_sim_posterior_run(const std::string& text);
TrainSourceRun parse_train_source_run(const std::string& text);
FinetuneRun parse_finetune_run(const std::string& text);
PredictRun parse_predict_run(const std::string& text);
EvaluateRun parse_evaluate_run(const std::string& text);
SummarizeRun parse_summarize_run(const std::string& text);

// Constraint checks beyond shape: required paths set, grids non-empty,
// mode combinations coherent. Parsing alone never enforces these so that
// defaults and partial files stay representable.
void validate_run(const SimCovariateRun& run);
void validate_run(const SimPosteriorRun& run);
void validate_run(const TrainSourceRun& run);
void validate_run(const FinetuneRun& run);
void validate_run(const PredictRun& run);
void validate_run(const EvaluateRun& run);
void validate_run(const SummarizeRun& run);

// Layered resolution: defaults (re-seated by the optional preset), then the
// config file, then key.path=value assignments in order, so later layers win.
// Assignment values are parsed as JSON when possible and as bare strings
// otherwise; assigning null resets a key to its default.
struct ConfigLayers {
  std::optional<std::string> preset;
  std::optional<std::string> file_text;
  std::vector<std::pair<std::string, std::string>> assignments;
};

SimCovariateRun resolve_sim_covariate_run(const ConfigLayers& layers);
SimPosteriorRun resolve_sim_posterior_run(const ConfigLayers& layers);
TrainSourceRun resolve_train_source_run(const ConfigLayers& layers);
FinetuneRun resolve_finetune_run(const ConfigLayers& layers);
PredictRun resolve_predict_run(const ConfigLayers& layers);
EvaluateRun resolve_evaluate_run(const ConfigLayers& layers);
SummarizeRun resolve_summarize_run(const ConfigLayers& layers);

}  // namespace fanlasso
