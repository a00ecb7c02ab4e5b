#include "fanlasso/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>
#include <variant>

#include "fanlasso/common.hpp"
#include "fanlasso/digest.hpp"
#include "fanlasso/factor.hpp"
#include "fanlasso/fastnn.hpp"
#include "fanlasso/format.hpp"
#include "fanlasso/rng.hpp"
#include "fanlasso/serialize.hpp"

namespace fanlasso {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed streams derived from the run seed. Grid cells share the training
// streams on purpose: rerunning the winning cell alone reproduces the bundle.
constexpr std::uint64_t kStreamSourceSplit = 0;
constexpr std::uint64_t kStreamSourceTrain = 1;
constexpr std::uint64_t kStreamTargetSplit = 2;
constexpr std::uint64_t kStreamTargetTrain = 3;

constexpr double kZ95 = 1.959963984540054;

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n_workers = std::min(threads, count);
  pool.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  while (true) {
    const std::size_t pos = line.find(',');
    cells.push_back(line.substr(0, pos));
    if (pos == std::string_view::npos) break;
    line.remove_prefix(pos + 1);
  }
  return cells;
}

json parse_json_text(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false, /*ignore_comments=*/true);
  if (j.is_discarded()) throw DataError(what + ": not valid JSON");
  return j;
}

void write_meta(const std::string& path, json meta) { write_text_atomic(path, meta.dump(2) + "\n"); }

json input_entry(const std::string& path) {
  return json{{"path", path}, {"content_digest", content_digest(read_text_file(path))}};
}

json grid_table(const std::vector<GridCell>& cells) {
  json table = json::array();
  for (const GridCell& c : cells) {
    table.push_back(json{{"depth", c.depth},
                         {"width", c.width},
                         {"source_valid_rmse",
                          c.source_valid_rmse ? json(*c.source_valid_rmse) : json(nullptr)},
                         {"target_valid_rmse",
                          c.target_valid_rmse ? json(*c.target_valid_rmse) : json(nullptr)}});
  }
  return table;
}

// sorted, deduplicated (depth, width) cells so "smaller depth, then width"
// tie-breaking is the iteration order
std::vector<std::pair<std::size_t, std::size_t>> grid_cells(const GridSpec& grid) {
  auto depths = grid.depths;
  auto widths = grid.widths;
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  cells.reserve(depths.size() * widths.size());
  for (std::size_t d : depths) {
    for (std::size_t w : widths) cells.emplace_back(d, w);
  }
  return cells;
}

// lowest score wins; unscored cells only stay ahead while nothing is scored
std::size_t best_cell(const std::vector<std::optional<double>>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (!scores[i]) continue;
    if (!scores[best] || *scores[i] < *scores[best]) best = i;
  }
  return best;
}

struct NormalizedData {
  Matrix x;
  std::vector<double> y;
  std::vector<std::string> names;
  NormalizationRecord record;
  std::size_t dropped = 0;
  bool replayed = false;
};

NormalizedData load_with_record(const std::string& path,
                                const std::optional<std::string>& label,
                                const std::optional<NormalizationRecord>& stored,
                                NormalizeMode fallback_mode) {
  if (stored) {
    auto raw = load_csv(path, label, NormalizeMode::None);
    NormalizedData out;
    out.x = apply_record(*stored, raw.x, raw.feature_names);
    out.y = std::move(raw.y);
    out.names = std::move(raw.feature_names);
    out.record = *stored;
    out.dropped = raw.dropped_rows;
    out.replayed = true;
    return out;
  }
  auto ds = load_csv(path, label, fallback_mode);
  return NormalizedData{std::move(ds.x),    std::move(ds.y), std::move(ds.feature_names),
                        record_of(ds),      ds.dropped_rows, false};
}

std::optional<std::string> label_if_present(const std::string& path,
                                            const std::optional<std::string>& label) {
  if (!label) return std::nullopt;
  const auto header = csv_header(path);
  if (std::find(header.begin(), header.end(), *label) != header.end()) return label;
  return std::nullopt;
}

// covariate rows for a projection pool, scaled exactly like the model's data
Matrix load_pool(const std::string& path, const std::optional<std::string>& label,
                 const NormalizationRecord& record) {
  auto raw = load_csv(path, label_if_present(path, label), NormalizeMode::None);
  return apply_record(record, raw.x, raw.feature_names);
}

struct SplitBlocks {
  LabeledSet train;
  LabeledSet valid;
  Matrix x_unlabeled;
};

SplitBlocks make_blocks(const Matrix& x, const std::vector<double>& y,
                        const SplitIndices& split) {
  SplitBlocks blocks;
  blocks.train = LabeledSet{gather_rows(x, split.train), gather_labels(y, split.train)};
  blocks.valid = LabeledSet{gather_rows(x, split.valid), gather_labels(y, split.valid)};
  blocks.x_unlabeled = gather_rows(x, split.unlabeled);
  return blocks;
}

std::optional<double> valid_rmse_of(const PredictFn& predict, const LabeledSet& valid) {
  if (valid.size() == 0) return std::nullopt;
  return evaluate(predict, valid.x, valid.y).rmse;
}

std::string join_out(const std::string& out_dir, const char* name) {
  return (fs::path(out_dir) / name).string();
}

json record_json(const NormalizationRecord& record) {
  return json{{"mode", normalize_mode_name(record.mode)},
              {"feature_names", record.feature_names},
              {"shift", record.shift},
              {"scale", record.scale}};
}

template <typename RunT>
SimArtifacts emit_sim(const RunT& run, const ExperimentResult& result, const char* command,
                      const char* stem) {
  SimArtifacts artifacts;
  artifacts.result = result;
  const std::string csv = result.to_csv();
  artifacts.csv_path = join_out(run.out_dir, (std::string(stem) + ".csv").c_str());
  write_text_atomic(artifacts.csv_path, csv);
  artifacts.meta_path = join_out(run.out_dir, (std::string(stem) + ".meta.json").c_str());
  write_meta(artifacts.meta_path,
             json{{"command", command},
                  {"config", parse_json_text(to_json_text(run), "config echo")},
                  {"outputs", json{{"csv", std::string(stem) + ".csv"},
                                   {"rows", result.rows.size()},
                                   {"content_digest", content_digest(csv)}}}});
  return artifacts;
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp(path + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("write: cannot open '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("write: failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw DataError("write: cannot rename into '" + path + "': " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_results(const ExperimentResult& result, const std::string& path) {
  write_text_atomic(path, result.to_csv());
}

std::string record_to_json(const NormalizationRecord& record) {
  return record_json(record).dump(2) + "\n";
}

NormalizationRecord record_from_json(const std::string& text) {
  const json j = parse_json_text(text, "normalization record");
  if (!j.is_object()) throw DataError("normalization record: expected an object");
  for (const auto& item : j.items()) {
    if (item.key() != "mode" && item.key() != "feature_names" && item.key() != "shift" &&
        item.key() != "scale") {
      throw DataError("normalization record: unknown key '" + item.key() + "'");
    }
  }
  NormalizationRecord record;
  try {
    record.mode = parse_normalize_mode(j.at("mode").get<std::string>());
    record.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    record.shift = j.at("shift").get<std::vector<double>>();
    record.scale = j.at("scale").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("normalization record: ") + e.what());
  }
  if (record.shift.size() != record.feature_names.size() ||
      record.scale.size() != record.feature_names.size()) {
    throw DataError("normalization record: mismatched column counts");
  }
  return record;
}

std::string record_path_for(const std::string& model_path) {
  const std::string suffix = ".json";
  if (model_path.size() > suffix.size() &&
      model_path.compare(model_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return model_path.substr(0, model_path.size() - suffix.size()) + ".norm.json";
  }
  return model_path + ".norm.json";
}

SimArtifacts run_sim(const SimCovariateRun& run) {
  validate_run(run);
  return emit_sim(run, run_covariate_experiment(run.experiment, run.threads), "sim-covariate",
                  "covariate");
}

SimArtifacts run_sim(const SimPosteriorRun& run) {
  validate_run(run);
  return emit_sim(run, run_posterior_experiment(run.experiment, run.threads), "sim-posterior",
                  "posterior");
}

TrainArtifacts run_train_source(const TrainSourceRun& run) {
  validate_run(run);
  auto ds = load_csv(run.source_csv, run.label_column, run.normalize);
  const NormalizationRecord record = record_of(ds);
  const auto split =
      split_dataset(ds.size(), run.fractions, run.unlabeled_fraction, Rng::derive(run.seed, kStreamSourceSplit));
  const SplitBlocks blocks = make_blocks(ds.x, ds.y, split);

  const auto cells = grid_cells(run.grid);
  if (cells.size() > 1 && blocks.valid.size() == 0) {
    throw ValidationError(
        "train-source: a grid search needs validation rows; raise fractions.valid or shrink "
        "the grid to one cell");
  }
  const bool fast = run.source_kind == SourceKind::FastNn;
  if (fast && blocks.x_unlabeled.rows() == 0) {
    throw ValidationError(
        "train-source: the factor model needs unlabeled rows for its projection; raise "
        "unlabeled_fraction");
  }

  std::optional<Matrix> pool;
  if (run.pool_csv) pool = load_pool(*run.pool_csv, run.label_column, record);
  const Matrix* pool_ptr = pool ? &*pool : nullptr;

  TrainConfig tcfg = run.train;
  tcfg.seed = Rng::derive(run.seed, kStreamSourceTrain);

  std::vector<std::variant<FastNnModel, VanillaModel>> models(cells.size());
  std::vector<std::optional<double>> scores(cells.size());
  parallel_for(cells.size(), run.threads, [&](std::size_t i) {
    ArchConfig arch = run.arch;
    arch.depth_l = cells[i].first;
    arch.width_n = cells[i].second;
    if (fast) {
      FastNnModel model = train_source(SourceTrainData{blocks.x_unlabeled, blocks.train, blocks.valid},
                                       run.r_bar, arch, tcfg, pool_ptr);
      scores[i] = valid_rmse_of(
          [&model](std::span<const double> x) { return fast_nn_predict(model, x); },
          blocks.valid);
      models[i] = std::move(model);
    } else {
      VanillaModel model = train_vanilla(blocks.train, blocks.valid, arch, tcfg);
      scores[i] = valid_rmse_of(
          [&model](std::span<const double> x) { return vanilla_predict(model, x); },
          blocks.valid);
      models[i] = std::move(model);
    }
  });

  const std::size_t best = best_cell(scores);
  TrainArtifacts artifacts;
  artifacts.best_depth = cells[best].first;
  artifacts.best_width = cells[best].second;
  artifacts.valid_rmse = scores[best];
  for (std::size_t i = 0; i < cells.size(); ++i) {
    artifacts.grid.push_back(GridCell{cells[i].first, cells[i].second, scores[i], std::nullopt});
  }

  const std::string config_echo = to_json_text(run);
  const BundleMeta bundle_meta{tcfg.seed, content_digest(config_echo)};
  const std::string bundle =
      fast ? serialize_model(std::get<FastNnModel>(models[best]), bundle_meta)
           : serialize_model(std::get<VanillaModel>(models[best]), bundle_meta);

  artifacts.model_path = join_out(run.out_dir, "source_model.json");
  artifacts.record_path = record_path_for(artifacts.model_path);
  artifacts.meta_path = join_out(run.out_dir, "train_source.meta.json");
  write_text_atomic(artifacts.model_path, bundle);
  write_text_atomic(artifacts.record_path, record_to_json(record));

  json inputs = json{{"source_csv", input_entry(run.source_csv)}};
  if (run.pool_csv) inputs["pool_csv"] = input_entry(*run.pool_csv);
  write_meta(
      artifacts.meta_path,
      json{{"command", "train-source"},
           {"config", parse_json_text(config_echo, "config echo")},
           {"inputs", inputs},
           {"outputs",
            json{{"model", "source_model.json"},
                 {"normalization", fs::path(artifacts.record_path).filename().string()},
                 {"model_digest", content_digest(bundle)},
                 {"best", json{{"depth", artifacts.best_depth},
                               {"width", artifacts.best_width},
                               {"valid_rmse",
                                artifacts.valid_rmse ? json(*artifacts.valid_rmse) : json(nullptr)}}},
                 {"grid", grid_table(artifacts.grid)},
                 {"split", json{{"train", split.train.size()},
                                {"valid", split.valid.size()},
                                {"test", split.test.size()},
                                {"unlabeled", split.unlabeled.size()}}},
                 {"dropped_rows", ds.dropped_rows}}}});
  return artifacts;
}

FinetuneArtifacts run_finetune(const FinetuneRun& run) {
  validate_run(run);
  const bool end_to_end = run.source_csv.has_value();
  const auto cells = grid_cells(run.grid);

  // resolve the source stage and the shared normalization record
  std::optional<LoadedModel> frozen;
  std::optional<TabularDataset> source_ds;
  std::optional<NormalizationRecord> stored;
  bool fast = true;
  if (end_to_end) {
    source_ds = load_csv(*run.source_csv, run.label_column, run.normalize);
    stored = record_of(*source_ds);
    fast = run.source_kind == SourceKind::FastNn;
  } else {
    frozen = parse_model(read_text_file(*run.source_model));
    if (frozen->kind != kKindFastNnSource && frozen->kind != kKindVanillaSource) {
      throw ValidationError("finetune: expected a source bundle, got kind '" + frozen->kind +
                            "'");
    }
    fast = frozen->kind == kKindFastNnSource;
    const std::string rp = record_path_for(*run.source_model);
    if (fs::exists(rp)) stored = record_from_json(read_text_file(rp));
  }

  const NormalizedData target =
      load_with_record(run.target_csv, run.label_column, stored, run.normalize);
  const auto split_q = split_dataset(target.x.rows(), run.fractions, run.unlabeled_fraction,
                                     Rng::derive(run.seed, kStreamTargetSplit));
  const SplitBlocks target_blocks = make_blocks(target.x, target.y, split_q);
  if (cells.size() > 1 && target_blocks.valid.size() == 0) {
    throw ValidationError(
        "finetune: a grid search needs target validation rows; raise fractions.valid or "
        "shrink the grid to one cell");
  }
  if (fast && target_blocks.x_unlabeled.rows() == 0) {
    throw ValidationError(
        "finetune: the factor model needs unlabeled target rows for its projection; raise "
        "unlabeled_fraction");
  }

  TrainConfig target_cfg = run.train;
  target_cfg.seed = Rng::derive(run.seed, kStreamTargetTrain);
  TrainConfig source_cfg = run.train;
  source_cfg.seed = Rng::derive(run.seed, kStreamSourceTrain);

  // source-side blocks (end-to-end mode only)
  SplitBlocks source_blocks;
  SplitIndices split_p;
  if (end_to_end) {
    split_p = split_dataset(source_ds->size(), run.fractions, run.unlabeled_fraction,
                            Rng::derive(run.seed, kStreamSourceSplit));
    source_blocks = make_blocks(source_ds->x, source_ds->y, split_p);
    if (fast && source_blocks.x_unlabeled.rows() == 0) {
      throw ValidationError(
          "finetune: the factor model needs unlabeled source rows for its projection; raise "
          "unlabeled_fraction");
    }
  }

  // target-stage projection for the factor family: pool covariate rows from
  // the other domain under the drift rule when available
  std::optional<DiversifiedProjection> target_proj;
  if (fast) {
    std::optional<Matrix> pool;
    if (end_to_end) {
      pool = source_blocks.x_unlabeled;
    } else if (run.pool_csv) {
      pool = load_pool(*run.pool_csv, run.label_column, target.record);
    }
    if (pool && pool->rows() > 0) {
      const CovarianceBundle bundle = make_covariance_bundle(*pool, target_blocks.x_unlabeled);
      const double delta =
          default_threshold(run.r_bar, target.x.cols(), pool->rows() + target_blocks.x_unlabeled.rows());
      target_proj = transfer_projection(bundle, run.r_bar, delta);
    } else {
      target_proj = diversified_projection(sample_covariance(target_blocks.x_unlabeled),
                                           run.r_bar, CovarianceSource::Target);
    }
  }

  struct TargetModel {
    std::variant<FineTunedModel, VanillaFineTunedModel> model;
    std::optional<double> rmse;
  };

  auto finetune_cell = [&](const auto& source_model, const ArchConfig& arch) -> TargetModel {
    TargetModel out;
    using SourceT = std::decay_t<decltype(source_model)>;
    if constexpr (std::is_same_v<SourceT, FastNnModel>) {
      FineTunedModel ft = train_finetune(source_model, target_blocks.train, target_blocks.valid,
                                         *target_proj, arch, target_cfg);
      out.rmse = valid_rmse_of(
          [&ft](std::span<const double> x) { return finetune_predict(ft, x); },
          target_blocks.valid);
      out.model = std::move(ft);
    } else {
      VanillaFineTunedModel ft = train_vanilla_finetune(source_model, target_blocks.train,
                                                        target_blocks.valid, arch, target_cfg);
      out.rmse = valid_rmse_of(
          [&ft](std::span<const double> x) { return vanilla_finetune_predict(ft, x); },
          target_blocks.valid);
      out.model = std::move(ft);
    }
    return out;
  };

  auto train_source_cell = [&](const ArchConfig& arch)
      -> std::pair<std::variant<FastNnModel, VanillaModel>, std::optional<double>> {
    if (fast) {
      FastNnModel model = train_source(
          SourceTrainData{source_blocks.x_unlabeled, source_blocks.train, source_blocks.valid},
          run.r_bar, arch, source_cfg, &target_blocks.x_unlabeled);
      auto rmse = valid_rmse_of(
          [&model](std::span<const double> x) { return fast_nn_predict(model, x); },
          source_blocks.valid);
      return {std::move(model), rmse};
    }
    VanillaModel model = train_vanilla(source_blocks.train, source_blocks.valid, arch, source_cfg);
    auto rmse = valid_rmse_of(
        [&model](std::span<const double> x) { return vanilla_predict(model, x); },
        source_blocks.valid);
    return {std::move(model), rmse};
  };

  ArchConfig arch_template = run.arch;
  auto cell_arch = [&](std::size_t i) {
    ArchConfig arch = arch_template;
    arch.depth_l = cells[i].first;
    arch.width_n = cells[i].second;
    return arch;
  };

  FinetuneArtifacts artifacts;
  std::variant<FastNnModel, VanillaModel> best_source;
  std::variant<FineTunedModel, VanillaFineTunedModel> best_target;
  std::optional<double> best_source_rmse;
  std::string mode;

  if (!end_to_end) {
    mode = "frozen_source";
    std::vector<TargetModel> slots(cells.size());
    parallel_for(cells.size(), run.threads, [&](std::size_t i) {
      if (fast) {
        slots[i] = finetune_cell(std::get<FastNnModel>(frozen->model), cell_arch(i));
      } else {
        slots[i] = finetune_cell(std::get<VanillaModel>(frozen->model), cell_arch(i));
      }
    });
    std::vector<std::optional<double>> scores(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      scores[i] = slots[i].rmse;
      artifacts.grid.push_back(GridCell{cells[i].first, cells[i].second, std::nullopt, slots[i].rmse});
    }
    const std::size_t best = best_cell(scores);
    artifacts.best_depth = cells[best].first;
    artifacts.best_width = cells[best].second;
    artifacts.valid_rmse = scores[best];
    best_target = std::move(slots[best].model);
  } else if (!run.decouple) {
    mode = "joint";
    struct JointCell {
      std::variant<FastNnModel, VanillaModel> source;
      TargetModel target;
      std::optional<double> source_rmse;
    };
    std::vector<JointCell> slots(cells.size());
    parallel_for(cells.size(), run.threads, [&](std::size_t i) {
      const ArchConfig arch = cell_arch(i);
      auto [source, source_rmse] = train_source_cell(arch);
      JointCell cell;
      cell.target = std::visit([&](const auto& m) { return finetune_cell(m, arch); }, source);
      cell.source = std::move(source);
      cell.source_rmse = source_rmse;
      slots[i] = std::move(cell);
    });
    std::vector<std::optional<double>> scores(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      scores[i] = slots[i].target.rmse;
      artifacts.grid.push_back(
          GridCell{cells[i].first, cells[i].second, slots[i].source_rmse, slots[i].target.rmse});
    }
    const std::size_t best = best_cell(scores);
    artifacts.best_depth = cells[best].first;
    artifacts.best_width = cells[best].second;
    artifacts.valid_rmse = scores[best];
    best_source = std::move(slots[best].source);
    best_source_rmse = slots[best].source_rmse;
    best_target = std::move(slots[best].target.model);
  } else {
    mode = "decoupled";
    if (cells.size() > 1 && source_blocks.valid.size() == 0) {
      throw ValidationError(
          "finetune: the decoupled grid scores the source stage by validation error; raise "
          "fractions.valid or shrink the grid to one cell");
    }
    std::vector<std::variant<FastNnModel, VanillaModel>> sources(cells.size());
    std::vector<std::optional<double>> source_scores(cells.size());
    parallel_for(cells.size(), run.threads, [&](std::size_t i) {
      auto [source, rmse] = train_source_cell(cell_arch(i));
      sources[i] = std::move(source);
      source_scores[i] = rmse;
    });
    const std::size_t source_best = best_cell(source_scores);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      artifacts.grid.push_back(
          GridCell{cells[i].first, cells[i].second, source_scores[i], std::nullopt});
    }
    best_source = std::move(sources[source_best]);
    best_source_rmse = source_scores[source_best];

    std::vector<TargetModel> slots(cells.size());
    parallel_for(cells.size(), run.threads, [&](std::size_t i) {
      slots[i] = std::visit([&](const auto& m) { return finetune_cell(m, cell_arch(i)); },
                            best_source);
    });
    std::vector<std::optional<double>> scores(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      scores[i] = slots[i].rmse;
      artifacts.grid.push_back(GridCell{cells[i].first, cells[i].second, std::nullopt, slots[i].rmse});
    }
    const std::size_t best = best_cell(scores);
    artifacts.best_depth = cells[best].first;
    artifacts.best_width = cells[best].second;
    artifacts.valid_rmse = scores[best];
    best_target = std::move(slots[best].model);
  }

  // emit artifacts
  const std::string config_echo = to_json_text(run);
  const std::string config_digest = content_digest(config_echo);
  const BundleMeta target_meta{target_cfg.seed, config_digest};
  BundleMeta source_meta;
  if (end_to_end) {
    source_meta = BundleMeta{source_cfg.seed, config_digest};
  } else {
    source_meta = frozen->meta;
  }

  std::string bundle;
  if (std::holds_alternative<FineTunedModel>(best_target)) {
    bundle = serialize_model(std::get<FineTunedModel>(best_target), target_meta, source_meta);
  } else {
    bundle =
        serialize_model(std::get<VanillaFineTunedModel>(best_target), target_meta, source_meta);
  }

  artifacts.model_path = join_out(run.out_dir, "finetuned_model.json");
  artifacts.record_path = record_path_for(artifacts.model_path);
  artifacts.meta_path = join_out(run.out_dir, "finetune.meta.json");
  write_text_atomic(artifacts.model_path, bundle);
  write_text_atomic(artifacts.record_path, record_to_json(target.record));

  std::string source_bundle;
  if (end_to_end) {
    if (std::holds_alternative<FastNnModel>(best_source)) {
      source_bundle = serialize_model(std::get<FastNnModel>(best_source), source_meta);
    } else {
      source_bundle = serialize_model(std::get<VanillaModel>(best_source), source_meta);
    }
    artifacts.source_model_path = join_out(run.out_dir, "source_model.json");
    write_text_atomic(*artifacts.source_model_path, source_bundle);
    write_text_atomic(record_path_for(*artifacts.source_model_path),
                      record_to_json(target.record));
  }

  json inputs = json{{"target_csv", input_entry(run.target_csv)}};
  if (run.source_csv) inputs["source_csv"] = input_entry(*run.source_csv);
  if (run.source_model) inputs["source_model"] = input_entry(*run.source_model);
  if (run.pool_csv) inputs["pool_csv"] = input_entry(*run.pool_csv);

  json outputs =
      json{{"model", "finetuned_model.json"},
           {"normalization", fs::path(artifacts.record_path).filename().string()},
           {"model_digest", content_digest(bundle)},
           {"mode", mode},
           {"normalization_replayed", target.replayed},
           {"best", json{{"depth", artifacts.best_depth},
                         {"width", artifacts.best_width},
                         {"valid_rmse",
                          artifacts.valid_rmse ? json(*artifacts.valid_rmse) : json(nullptr)}}},
           {"grid", grid_table(artifacts.grid)},
           {"split", json{{"train", split_q.train.size()},
                          {"valid", split_q.valid.size()},
                          {"test", split_q.test.size()},
                          {"unlabeled", split_q.unlabeled.size()}}},
           {"dropped_rows", target.dropped}};
  if (end_to_end) {
    outputs["source_model"] = "source_model.json";
    outputs["source_model_digest"] = content_digest(source_bundle);
    outputs["source_valid_rmse"] = best_source_rmse ? json(*best_source_rmse) : json(nullptr);
  }
  write_meta(artifacts.meta_path, json{{"command", "finetune"},
                                       {"config", parse_json_text(config_echo, "config echo")},
                                       {"inputs", inputs},
                                       {"outputs", outputs}});
  return artifacts;
}

PredictArtifacts run_predict(const PredictRun& run) {
  validate_run(run);
  const LoadedModel loaded = parse_model(read_text_file(run.model));
  std::optional<NormalizationRecord> stored;
  const std::string rp = record_path_for(run.model);
  if (fs::exists(rp)) stored = record_from_json(read_text_file(rp));

  const auto label = label_if_present(run.data_csv, run.label_column);
  const NormalizedData data = load_with_record(run.data_csv, label, stored, run.normalize);
  if (data.x.cols() != loaded.input_dim()) {
    throw DataError("predict: model expects " + std::to_string(loaded.input_dim()) +
                    " feature columns, file has " + std::to_string(data.x.cols()));
  }

  PredictArtifacts artifacts;
  artifacts.dropped_rows = data.dropped;
  artifacts.predictions.reserve(data.x.rows());
  std::string csv = "row,prediction\n";
  for (std::size_t i = 0; i < data.x.rows(); ++i) {
    const double value = loaded.predict(data.x.row(i));
    artifacts.predictions.push_back(value);
    csv += std::to_string(i) + "," + format_double(value) + "\n";
  }

  artifacts.csv_path = join_out(run.out_dir, "predictions.csv");
  artifacts.meta_path = join_out(run.out_dir, "predict.meta.json");
  write_text_atomic(artifacts.csv_path, csv);
  write_meta(artifacts.meta_path,
             json{{"command", "predict"},
                  {"config", parse_json_text(to_json_text(run), "config echo")},
                  {"inputs", json{{"model", input_entry(run.model)},
                                  {"data_csv", input_entry(run.data_csv)}}},
                  {"outputs", json{{"csv", "predictions.csv"},
                                   {"rows", artifacts.predictions.size()},
                                   {"dropped_rows", artifacts.dropped_rows},
                                   {"normalization_replayed", data.replayed},
                                   {"content_digest", content_digest(csv)}}}});
  return artifacts;
}

EvaluateArtifacts run_evaluate(const EvaluateRun& run) {
  validate_run(run);
  const LoadedModel loaded = parse_model(read_text_file(run.model));
  std::optional<NormalizationRecord> stored;
  const std::string rp = record_path_for(run.model);
  if (fs::exists(rp)) stored = record_from_json(read_text_file(rp));

  const NormalizedData data =
      load_with_record(run.data_csv, run.label_column, stored, run.normalize);
  if (data.x.cols() != loaded.input_dim()) {
    throw DataError("evaluate: model expects " + std::to_string(loaded.input_dim()) +
                    " feature columns, file has " + std::to_string(data.x.cols()));
  }

  const EvalReport report = evaluate(
      [&loaded](std::span<const double> x) { return loaded.predict(x); }, data.x, data.y);

  EvaluateArtifacts artifacts;
  artifacts.mse = report.mse;
  artifacts.rmse = report.rmse;
  artifacts.n_eval = report.n_eval;
  artifacts.dropped_rows = data.dropped;
  artifacts.report_path = join_out(run.out_dir, "evaluation.json");
  artifacts.meta_path = join_out(run.out_dir, "evaluate.meta.json");
  write_meta(artifacts.report_path, json{{"rmse", report.rmse},
                                         {"mse", report.mse},
                                         {"n_eval", report.n_eval},
                                         {"dropped_rows", data.dropped}});
  write_meta(artifacts.meta_path,
             json{{"command", "evaluate"},
                  {"config", parse_json_text(to_json_text(run), "config echo")},
                  {"inputs", json{{"model", input_entry(run.model)},
                                  {"data_csv", input_entry(run.data_csv)}}},
                  {"outputs", json{{"report", "evaluation.json"},
                                   {"rmse", report.rmse},
                                   {"normalization_replayed", data.replayed}}}});
  return artifacts;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest = text;
    while (!rest.empty()) {
      const std::size_t pos = rest.find('\n');
      lines.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  }
  if (lines.empty()) throw DataError("results csv: empty input");
  if (trim(lines[0]) != "rep,method,n_p,n_q,metric,value,seed") {
    throw DataError("results csv: unexpected header '" + std::string(trim(lines[0])) + "'");
  }

  auto parse_count = [](std::string_view cell, std::size_t row, const char* name) {
    cell = trim(cell);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
      throw DataError("results csv: row " + std::to_string(row) + ": bad " + std::string(name) +
                      " '" + std::string(cell) + "'");
    }
    return value;
  };

  std::vector<ResultRow> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split_line(lines[li]);
    const std::size_t row = li;  // data rows count from 1
    if (cells.size() != 7) {
      throw DataError("results csv: row " + std::to_string(row) + ": expected 7 cells, got " +
                      std::to_string(cells.size()));
    }
    ResultRow out;
    out.rep = static_cast<std::size_t>(parse_count(cells[0], row, "rep"));
    out.method = std::string(trim(cells[1]));
    if (out.method.empty()) {
      throw DataError("results csv: row " + std::to_string(row) + ": empty method");
    }
    out.n_p = static_cast<std::size_t>(parse_count(cells[2], row, "n_p"));
    out.n_q = static_cast<std::size_t>(parse_count(cells[3], row, "n_q"));
    out.metric = std::string(trim(cells[4]));
    if (out.metric.empty()) {
      throw DataError("results csv: row " + std::to_string(row) + ": empty metric");
    }
    const std::string_view value_cell = trim(cells[5]);
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(value_cell.data(), value_cell.data() + value_cell.size(), value);
    if (ec != std::errc{} || ptr != value_cell.data() + value_cell.size() ||
        !std::isfinite(value)) {
      throw DataError("results csv: row " + std::to_string(row) + ": bad value '" +
                      std::string(value_cell) + "'");
    }
    out.value = value;
    out.seed = parse_count(cells[6], row, "seed");
    rows.push_back(std::move(out));
  }
  return rows;
}

std::vector<SummaryRow> summarize_rows(const std::vector<ResultRow>& rows) {
  std::map<std::tuple<std::size_t, std::size_t, std::string, std::string>, std::vector<double>>
      groups;
  for (const ResultRow& row : rows) {
    groups[{row.n_p, row.n_q, row.method, row.metric}].push_back(row.value);
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (const auto& [key, values] : groups) {
    SummaryRow s;
    s.n_p = std::get<0>(key);
    s.n_q = std::get<1>(key);
    s.method = std::get<2>(key);
    s.metric = std::get<3>(key);
    s.n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    const double half = kZ95 * sd / std::sqrt(static_cast<double>(s.n));
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    out.push_back(std::move(s));
  }
  return out;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string csv = "method,n_p,n_q,metric,n,mean,ci_low,ci_high\n";
  for (const SummaryRow& s : rows) {
    csv += s.method + "," + std::to_string(s.n_p) + "," + std::to_string(s.n_q) + "," +
           s.metric + "," + std::to_string(s.n) + "," + format_double(s.mean) + "," +
           format_double(s.ci_low) + "," + format_double(s.ci_high) + "\n";
  }
  return csv;
}

SummarizeArtifacts run_summarize(const SummarizeRun& run) {
  validate_run(run);
  const std::string text = read_text_file(run.input_csv);
  SummarizeArtifacts artifacts;
  artifacts.rows = summarize_rows(parse_results_csv(text));
  const std::string csv = summary_to_csv(artifacts.rows);
  artifacts.csv_path = join_out(run.out_dir, "summary.csv");
  artifacts.meta_path = join_out(run.out_dir, "summarize.meta.json");
  write_text_atomic(artifacts.csv_path, csv);
  write_meta(artifacts.meta_path,
             json{{"command", "summarize"},
                  {"config", parse_json_text(to_json_text(run), "config echo")},
                  {"inputs", json{{"input_csv", input_entry(run.input_csv)}}},
                  {"outputs", json{{"csv", "summary.csv"},
                                   {"groups", artifacts.rows.size()},
                                   {"content_digest", content_digest(csv)}}}});
  return artifacts;
}

}  // namespace fanlasso
