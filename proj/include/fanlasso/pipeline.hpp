#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fanlasso/config.hpp"
#include "fanlasso/dataset.hpp"
#include "fanlasso/simulate.hpp"

namespace fanlasso {

// All file emission goes through here: parent directories are created, the
// content lands in a temp file in the same directory, then a rename makes it
// visible. Identical input produces identical bytes.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);

// ExperimentResult CSV per the result schema; empty results still get the
// header line.
void write_results(const ExperimentResult& result, const std::string& path);

// JSON round trip for a stored normalization record.
std::string record_to_json(const NormalizationRecord& record);
NormalizationRecord record_from_json(const std::string& text);

// A record file lives next to its model bundle: model.json -> model.norm.json.
std::string record_path_for(const std::string& model_path);

struct SimArtifacts {
  std::string csv_path;
  std::string meta_path;
  ExperimentResult result;
};

SimArtifacts run_sim(const SimCovariateRun& run);
SimArtifacts run_sim(const SimPosteriorRun& run);

// One evaluated architecture cell. Missing scores mean the stage had no
// validation rows (single-cell runs allow that).
struct GridCell {
  std::size_t depth = 0;
  std::size_t width = 0;
  std::optional<double> source_valid_rmse;
  std::optional<double> target_valid_rmse;
};

struct TrainArtifacts {
  std::string model_path;
  std::string record_path;
  std::string meta_path;
  std::size_t best_depth = 0;
  std::size_t best_width = 0;
  std::optional<double> valid_rmse;
  std::vector<GridCell> grid;
};

TrainArtifacts run_train_source(const TrainSourceRun& run);

struct FinetuneArtifacts {
  std::string model_path;
  std::string record_path;
  std::string meta_path;
  // written only when the source stage was trained in this run
  std::optional<std::string> source_model_path;
  std::size_t best_depth = 0;
  std::size_t best_width = 0;
  std::optional<double> valid_rmse;
  std::vector<GridCell> grid;
};

FinetuneArtifacts run_finetune(const FinetuneRun& run);

struct PredictArtifacts {
  std::string csv_path;
  std::string meta_path;
  std::vector<double> predictions;
  std::size_t dropped_rows = 0;
};

PredictArtifacts run_predict(const PredictRun& run);

struct EvaluateArtifacts {
  std::string report_path;
  std::string meta_path;
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t n_eval = 0;
  std::size_t dropped_rows = 0;
};

EvaluateArtifacts run_evaluate(const EvaluateRun& run);

// Per-group aggregate of a result CSV: mean and a 95% normal-approximation
// confidence interval (zero width when the group has one row or no spread).
struct SummaryRow {
  std::string method;
  std::size_t n_p = 0;
  std::size_t n_q = 0;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool operator==(const SummaryRow&) const = default;
};

std::vector<ResultRow> parse_results_csv(const std::string& text);
std::vector<SummaryRow> summarize_rows(const std::vector<ResultRow>& rows);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

struct SummarizeArtifacts {
  std::string csv_path;
  std::string meta_path;
  std::vector<SummaryRow> rows;
};

SummarizeArtifacts run_summarize(const SummarizeRun& run);

}  // namespace fanlasso
