#include "fanlasso/config.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>
#include <string>

#include "fanlasso/common.hpp"

namespace fanlasso {
namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
  throw ValidationError("config: " + path + ": " + what);
}

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad_field(path.empty() ? "<root>" : path, "expected an object");
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) bad_field(join_path(path, item.key()), "unknown key");
  }
}

void read_size(const json& j, const char* key, const std::string& path, std::size_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))) {
    bad_field(join_path(path, key), "expected a nonnegative integer");
  }
  out = v.get<std::size_t>();
}

void read_u64(const json& j, const char* key, const std::string& path, std::uint64_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))) {
    bad_field(join_path(path, key), "expected a nonnegative integer");
  }
  out = v.get<std::uint64_t>();
}

void read_double(const json& j, const char* key, const std::string& path, double& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number()) bad_field(join_path(path, key), "expected a number");
  out = v.get<double>();
}

void read_bool(const json& j, const char* key, const std::string& path, bool& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_boolean()) bad_field(join_path(path, key), "expected a boolean");
  out = v.get<bool>();
}

void read_string(const json& j, const char* key, const std::string& path, std::string& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_string()) bad_field(join_path(path, key), "expected a string");
  out = v.get<std::string>();
}

void read_opt_string(const json& j, const char* key, const std::string& path,
                     std::optional<std::string>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_null()) {
    out.reset();
    return;
  }
  if (!v.is_string()) bad_field(join_path(path, key), "expected a string or null");
  out = v.get<std::string>();
}

void read_opt_double(const json& j, const char* key, const std::string& path,
                     std::optional<double>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_null()) {
    out.reset();
    return;
  }
  if (!v.is_number()) bad_field(join_path(path, key), "expected a number or null");
  out = v.get<double>();
}

// weight bound: null stands for "unbounded" (infinity)
void read_bound(const json& j, const char* key, const std::string& path, double& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_null()) {
    out = std::numeric_limits<double>::infinity();
    return;
  }
  if (!v.is_number()) bad_field(join_path(path, key), "expected a number or null");
  out = v.get<double>();
}

void read_size_vec(const json& j, const char* key, const std::string& path,
                   std::vector<std::size_t>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array()) bad_field(join_path(path, key), "expected an array");
  std::vector<std::size_t> parsed;
  parsed.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& e = v.at(i);
    if (!(e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0))) {
      bad_field(join_path(path, key) + "[" + std::to_string(i) + "]",
                "expected a nonnegative integer");
    }
    parsed.push_back(e.get<std::size_t>());
  }
  out = std::move(parsed);
}

void read_normalize(const json& j, const char* key, const std::string& path,
                    NormalizeMode& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_string()) bad_field(join_path(path, key), "expected a string");
  try {
    out = parse_normalize_mode(v.get<std::string>());
  } catch (const ValidationError&) {
    bad_field(join_path(path, key), "expected one of minmax, zscore, none");
  }
}

void read_source_kind(const json& j, const char* key, const std::string& path,
                      SourceKind& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_string()) bad_field(join_path(path, key), "expected a string");
  try {
    out = parse_source_kind(v.get<std::string>());
  } catch (const ValidationError&) {
    bad_field(join_path(path, key), "expected one of fast_nn, vanilla");
  }
}

void read_methods(const json& j, const char* key, const std::string& path,
                  std::vector<Method>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array()) bad_field(join_path(path, key), "expected an array of method names");
  std::vector<Method> parsed;
  parsed.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& e = v.at(i);
    const std::string elem_path = join_path(path, key) + "[" + std::to_string(i) + "]";
    if (!e.is_string()) bad_field(elem_path, "expected a method name");
    try {
      parsed.push_back(parse_method(e.get<std::string>()));
    } catch (const ValidationError&) {
      bad_field(elem_path, "unknown method '" + e.get<std::string>() + "'");
    }
  }
  out = std::move(parsed);
}

// ---- nested blocks ----

void read_arch(const json& j, const std::string& path, ArchConfig& out) {
  check_keys(j, path,
             {"depth_l", "width_n", "n_select", "tau", "lambda", "output_bound_m",
              "weight_bound_t", "sel_trunc_bound"});
  read_size(j, "depth_l", path, out.depth_l);
  read_size(j, "width_n", path, out.width_n);
  read_size(j, "n_select", path, out.n_select);
  read_double(j, "tau", path, out.tau);
  read_opt_double(j, "lambda", path, out.lambda);
  read_opt_double(j, "output_bound_m", path, out.output_bound_m);
  read_bound(j, "weight_bound_t", path, out.weight_bound_t);
  read_opt_double(j, "sel_trunc_bound", path, out.sel_trunc_bound);
}

void read_train(const json& j, const std::string& path, TrainConfig& out) {
  check_keys(j, path,
             {"learning_rate", "batch_size", "max_epochs", "beta1", "beta2", "epsilon", "seed",
              "full_batch", "early_stop"});
  read_double(j, "learning_rate", path, out.learning_rate);
  read_size(j, "batch_size", path, out.batch_size);
  read_size(j, "max_epochs", path, out.max_epochs);
  read_double(j, "beta1", path, out.beta1);
  read_double(j, "beta2", path, out.beta2);
  read_double(j, "epsilon", path, out.epsilon);
  read_u64(j, "seed", path, out.seed);
  read_bool(j, "full_batch", path, out.full_batch);
  read_bool(j, "early_stop", path, out.early_stop);
}

void read_fractions(const json& j, const std::string& path, SplitFractions& out) {
  check_keys(j, path, {"train", "valid", "test"});
  read_double(j, "train", path, out.train);
  read_double(j, "valid", path, out.valid);
  read_double(j, "test", path, out.test);
}

void read_grid(const json& j, const std::string& path, GridSpec& out) {
  check_keys(j, path, {"depths", "widths"});
  read_size_vec(j, "depths", path, out.depths);
  read_size_vec(j, "widths", path, out.widths);
}

void read_covariate_experiment(const json& j, const std::string& path,
                               CovariateShiftConfig& out) {
  check_keys(j, path,
             {"p", "r", "r_bar", "n_p_grid", "n_q_values", "loading_shift_scale", "replications",
              "master_seed"});
  read_size(j, "p", path, out.p);
  read_size(j, "r", path, out.r);
  read_size(j, "r_bar", path, out.r_bar);
  read_size_vec(j, "n_p_grid", path, out.n_p_grid);
  read_size_vec(j, "n_q_values", path, out.n_q_values);
  read_double(j, "loading_shift_scale", path, out.loading_shift_scale);
  read_size(j, "replications", path, out.replications);
  read_u64(j, "master_seed", path, out.master_seed);
}

void read_posterior_experiment(const json& j, const std::string& path,
                               PosteriorShiftConfig& out) {
  check_keys(j, path,
             {"p", "r", "loading_shift_scale", "n_p_train", "valid_fraction", "n_unlabeled",
              "n_test", "n_q_train_grid", "noise_sd", "replications", "master_seed", "methods",
              "r_bar", "arch", "train"});
  read_size(j, "p", path, out.p);
  read_size(j, "r", path, out.r);
  read_double(j, "loading_shift_scale", path, out.loading_shift_scale);
  read_size(j, "n_p_train", path, out.n_p_train);
  read_double(j, "valid_fraction", path, out.valid_fraction);
  read_size(j, "n_unlabeled", path, out.n_unlabeled);
  read_size(j, "n_test", path, out.n_test);
  read_size_vec(j, "n_q_train_grid", path, out.n_q_train_grid);
  read_double(j, "noise_sd", path, out.noise_sd);
  read_size(j, "replications", path, out.replications);
  read_u64(j, "master_seed", path, out.master_seed);
  read_methods(j, "methods", path, out.methods);
  read_size(j, "r_bar", path, out.r_bar);
  if (j.contains("arch")) read_arch(j.at("arch"), join_path(path, "arch"), out.arch);
  if (j.contains("train")) read_train(j.at("train"), join_path(path, "train"), out.train);
}

// ---- emit ----

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json arch_json(const ArchConfig& a) {
  return json{{"depth_l", a.depth_l},
              {"width_n", a.width_n},
              {"n_select", a.n_select},
              {"tau", a.tau},
              {"lambda", opt_json(a.lambda)},
              {"output_bound_m", opt_json(a.output_bound_m)},
              {"weight_bound_t",
               std::isinf(a.weight_bound_t) ? json(nullptr) : json(a.weight_bound_t)},
              {"sel_trunc_bound", opt_json(a.sel_trunc_bound)}};
}

json train_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate},
              {"batch_size", t.batch_size},
              {"max_epochs", t.max_epochs},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"epsilon", t.epsilon},
              {"seed", t.seed},
              {"full_batch", t.full_batch},
              {"early_stop", t.early_stop}};
}

json fractions_json(const SplitFractions& f) {
  return json{{"train", f.train}, {"valid", f.valid}, {"test", f.test}};
}

json grid_json(const GridSpec& g) {
  return json{{"depths", g.depths}, {"widths", g.widths}};
}

json covariate_json(const CovariateShiftConfig& c) {
  return json{{"p", c.p},
              {"r", c.r},
              {"r_bar", c.r_bar},
              {"n_p_grid", c.n_p_grid},
              {"n_q_values", c.n_q_values},
              {"loading_shift_scale", c.loading_shift_scale},
              {"replications", c.replications},
              {"master_seed", c.master_seed}};
}

json posterior_json(const PosteriorShiftConfig& c) {
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  return json{{"p", c.p},
              {"r", c.r},
              {"loading_shift_scale", c.loading_shift_scale},
              {"n_p_train", c.n_p_train},
              {"valid_fraction", c.valid_fraction},
              {"n_unlabeled", c.n_unlabeled},
              {"n_test", c.n_test},
              {"n_q_train_grid", c.n_q_train_grid},
              {"noise_sd", c.noise_sd},
              {"replications", c.replications},
              {"master_seed", c.master_seed},
              {"methods", methods},
              {"r_bar", c.r_bar},
              {"arch", arch_json(c.arch)},
              {"train", train_json(c.train)}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json parse_text(const std::string& text) {
  json j = json::parse(text, nullptr, false, /*ignore_comments=*/true);
  if (j.is_discarded()) throw ValidationError("config: not valid JSON");
  return j;
}

// ---- per-run readers ----

void read_run(const json& j, SimCovariateRun& run) {
  check_keys(j, "", {"experiment", "out_dir", "threads"});
  if (j.contains("experiment")) read_covariate_experiment(j.at("experiment"), "experiment", run.experiment);
  read_string(j, "out_dir", "", run.out_dir);
  read_size(j, "threads", "", run.threads);
}

void read_run(const json& j, SimPosteriorRun& run) {
  check_keys(j, "", {"experiment", "out_dir", "threads"});
  if (j.contains("experiment")) read_posterior_experiment(j.at("experiment"), "experiment", run.experiment);
  read_string(j, "out_dir", "", run.out_dir);
  read_size(j, "threads", "", run.threads);
}

void read_run(const json& j, TrainSourceRun& run) {
  check_keys(j, "",
             {"source_csv", "pool_csv", "label_column", "normalize", "fractions",
              "unlabeled_fraction", "r_bar", "source_kind", "grid", "arch", "train", "seed",
              "out_dir", "threads"});
  read_string(j, "source_csv", "", run.source_csv);
  read_opt_string(j, "pool_csv", "", run.pool_csv);
  read_string(j, "label_column", "", run.label_column);
  read_normalize(j, "normalize", "", run.normalize);
  if (j.contains("fractions")) read_fractions(j.at("fractions"), "fractions", run.fractions);
  read_double(j, "unlabeled_fraction", "", run.unlabeled_fraction);
  read_size(j, "r_bar", "", run.r_bar);
  read_source_kind(j, "source_kind", "", run.source_kind);
  if (j.contains("grid")) read_grid(j.at("grid"), "grid", run.grid);
  if (j.contains("arch")) read_arch(j.at("arch"), "arch", run.arch);
  if (j.contains("train")) read_train(j.at("train"), "train", run.train);
  read_u64(j, "seed", "", run.seed);
  read_string(j, "out_dir", "", run.out_dir);
  read_size(j, "threads", "", run.threads);
}

void read_run(const json& j, FinetuneRun& run) {
  check_keys(j, "",
             {"target_csv", "source_model", "source_csv", "pool_csv", "label_column",
              "normalize", "fractions", "unlabeled_fraction", "r_bar", "source_kind", "grid",
              "decouple", "arch", "train", "seed", "out_dir", "threads"});
  read_string(j, "target_csv", "", run.target_csv);
  read_opt_string(j, "source_model", "", run.source_model);
  read_opt_string(j, "source_csv", "", run.source_csv);
  read_opt_string(j, "pool_csv", "", run.pool_csv);
  read_string(j, "label_column", "", run.label_column);
  read_normalize(j, "normalize", "", run.normalize);
  if (j.contains("fractions")) read_fractions(j.at("fractions"), "fractions", run.fractions);
  read_double(j, "unlabeled_fraction", "", run.unlabeled_fraction);
  read_size(j, "r_bar", "", run.r_bar);
  read_source_kind(j, "source_kind", "", run.source_kind);
  if (j.contains("grid")) read_grid(j.at("grid"), "grid", run.grid);
  read_bool(j, "decouple", "", run.decouple);
  if (j.contains("arch")) read_arch(j.at("arch"), "arch", run.arch);
  if (j.contains("train")) read_train(j.at("train"), "train", run.train);
  read_u64(j, "seed", "", run.seed);
  read_string(j, "out_dir", "", run.out_dir);
  read_size(j, "threads", "", run.threads);
}

void read_run(const json& j, PredictRun& run) {
  check_keys(j, "", {"model", "data_csv", "label_column", "normalize", "out_dir"});
  read_string(j, "model", "", run.model);
  read_string(j, "data_csv", "", run.data_csv);
  read_opt_string(j, "label_column", "", run.label_column);
  read_normalize(j, "normalize", "", run.normalize);
  read_string(j, "out_dir", "", run.out_dir);
}

void read_run(const json& j, EvaluateRun& run) {
  check_keys(j, "", {"model", "data_csv", "label_column", "normalize", "out_dir"});
  read_string(j, "model", "", run.model);
  read_string(j, "data_csv", "", run.data_csv);
  read_string(j, "label_column", "", run.label_column);
  read_normalize(j, "normalize", "", run.normalize);
  read_string(j, "out_dir", "", run.out_dir);
}

void read_run(const json& j, SummarizeRun& run) {
  check_keys(j, "", {"input_csv", "out_dir"});
  read_string(j, "input_csv", "", run.input_csv);
  read_string(j, "out_dir", "", run.out_dir);
}

// ---- emit per run ----

json run_json(const SimCovariateRun& r) {
  return json{{"experiment", covariate_json(r.experiment)},
              {"out_dir", r.out_dir},
              {"threads", r.threads}};
}

json run_json(const SimPosteriorRun& r) {
  return json{{"experiment", posterior_json(r.experiment)},
              {"out_dir", r.out_dir},
              {"threads", r.threads}};
}

json run_json(const TrainSourceRun& r) {
  return json{{"source_csv", r.source_csv},
              {"pool_csv", opt_json(r.pool_csv)},
              {"label_column", r.label_column},
              {"normalize", normalize_mode_name(r.normalize)},
              {"fractions", fractions_json(r.fractions)},
              {"unlabeled_fraction", r.unlabeled_fraction},
              {"r_bar", r.r_bar},
              {"source_kind", source_kind_name(r.source_kind)},
              {"grid", grid_json(r.grid)},
              {"arch", arch_json(r.arch)},
              {"train", train_json(r.train)},
              {"seed", r.seed},
              {"out_dir", r.out_dir},
              {"threads", r.threads}};
}

json run_json(const FinetuneRun& r) {
  return json{{"target_csv", r.target_csv},
              {"source_model", opt_json(r.source_model)},
              {"source_csv", opt_json(r.source_csv)},
              {"pool_csv", opt_json(r.pool_csv)},
              {"label_column", r.label_column},
              {"normalize", normalize_mode_name(r.normalize)},
              {"fractions", fractions_json(r.fractions)},
              {"unlabeled_fraction", r.unlabeled_fraction},
              {"r_bar", r.r_bar},
              {"source_kind", source_kind_name(r.source_kind)},
              {"grid", grid_json(r.grid)},
              {"decouple", r.decouple},
              {"arch", arch_json(r.arch)},
              {"train", train_json(r.train)},
              {"seed", r.seed},
              {"out_dir", r.out_dir},
              {"threads", r.threads}};
}

json run_json(const PredictRun& r) {
  return json{{"model", r.model},
              {"data_csv", r.data_csv},
              {"label_column", opt_json(r.label_column)},
              {"normalize", normalize_mode_name(r.normalize)},
              {"out_dir", r.out_dir}};
}

json run_json(const EvaluateRun& r) {
  return json{{"model", r.model},
              {"data_csv", r.data_csv},
              {"label_column", r.label_column},
              {"normalize", normalize_mode_name(r.normalize)},
              {"out_dir", r.out_dir}};
}

json run_json(const SummarizeRun& r) {
  return json{{"input_csv", r.input_csv}, {"out_dir", r.out_dir}};
}

// ---- layered resolution ----

json assignment_patch(const std::string& key_path, const std::string& raw_value) {
  if (key_path.empty()) throw ValidationError("config: empty assignment key");
  json value = json::parse(raw_value, nullptr, false);
  if (value.is_discarded()) value = raw_value;  // bare words are strings

  // build the nested object inside-out
  json patch = value;
  std::size_t end = key_path.size();
  while (true) {
    const std::size_t dot = key_path.rfind('.', end == 0 ? 0 : end - 1);
    const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
    const std::string key = key_path.substr(start, end - start);
    if (key.empty()) throw ValidationError("config: malformed assignment key '" + key_path + "'");
    patch = json{{key, std::move(patch)}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return patch;
}

template <typename Run>
Run resolve(const ConfigLayers& layers, Run defaults,
            Run (*preset_fn)(const std::string&)) {
  Run base = std::move(defaults);
  if (layers.preset) base = preset_fn(*layers.preset);
  json tree = run_json(base);
  if (layers.file_text) tree.merge_patch(parse_text(*layers.file_text));
  for (const auto& [key, value] : layers.assignments) {
    tree.merge_patch(assignment_patch(key, value));
  }
  // read from a fresh default: keys the patches nulled out simply stay absent
  Run run{};
  read_run(tree, run);
  validate_run(run);
  return run;
}

[[noreturn]] void unknown_preset(const std::string& name) {
  throw ValidationError("config: unknown preset '" + name + "' (expected paper or desk)");
}

SimCovariateRun covariate_preset(const std::string& name) {
  SimCovariateRun run;
  if (name == "paper") {
    run.experiment = covariate_paper_preset();
  } else if (name == "desk") {
    run.experiment = covariate_desk_preset();
  } else {
    unknown_preset(name);
  }
  return run;
}

SimPosteriorRun posterior_preset(const std::string& name) {
  SimPosteriorRun run;
  if (name == "paper") {
    run.experiment = posterior_paper_preset();
  } else if (name == "desk") {
    run.experiment = posterior_desk_preset();
  } else {
    unknown_preset(name);
  }
  return run;
}

// pipeline presets: paper keeps the defaults, desk shrinks the search budget
template <typename Run>
Run pipeline_preset(const std::string& name) {
  Run run;
  if (name == "paper") return run;
  if (name == "desk") {
    run.grid.depths = {2};
    run.grid.widths = {32};
    run.train.max_epochs = 60;
    return run;
  }
  unknown_preset(name);
}

template <typename Run>
Run passthrough_preset(const std::string& name) {
  if (name != "paper" && name != "desk") unknown_preset(name);
  return Run{};
}

void check_grid(const GridSpec& grid) {
  if (grid.depths.empty() || grid.widths.empty()) {
    throw ValidationError("config: grid: depths and widths must be non-empty");
  }
  for (std::size_t d : grid.depths) {
    if (d < 1) throw ValidationError("config: grid.depths: entries must be at least 1");
  }
  for (std::size_t w : grid.widths) {
    if (w < 1) throw ValidationError("config: grid.widths: entries must be at least 1");
  }
}

void check_common_pipeline(const std::string& label_column, double unlabeled_fraction,
                           std::size_t r_bar, std::size_t threads) {
  if (label_column.empty()) throw ValidationError("config: label_column: required");
  if (!(unlabeled_fraction >= 0.0) || unlabeled_fraction >= 1.0) {
    throw ValidationError("config: unlabeled_fraction: must lie in [0, 1)");
  }
  if (r_bar < 1) throw ValidationError("config: r_bar: must be at least 1");
  if (threads < 1) throw ValidationError("config: threads: must be at least 1");
}

}  // namespace

const char* source_kind_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::FastNn:
      return "fast_nn";
    case SourceKind::Vanilla:
      return "vanilla";
  }
  throw ValidationError("source_kind_name: unknown kind");
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "fast_nn") return SourceKind::FastNn;
  if (name == "vanilla") return SourceKind::Vanilla;
  throw ValidationError("parse_source_kind: unknown kind '" + std::string(name) + "'");
}

std::string to_json_text(const SimCovariateRun& run) { return dump(run_json(run)); }
std::string to_json_text(const SimPosteriorRun& run) { return dump(run_json(run)); }
std::string to_json_text(const TrainSourceRun& run) { return dump(run_json(run)); }
std::string to_json_text(const FinetuneRun& run) { return dump(run_json(run)); }
std::string to_json_text(const PredictRun& run) { return dump(run_json(run)); }
std::string to_json_text(const EvaluateRun& run) { return dump(run_json(run)); }
std::string to_json_text(const SummarizeRun& run) { return dump(run_json(run)); }

SimCovariateRun parse_sim_covariate_run(const std::string& text) {
  SimCovariateRun run;
  read_run(parse_text(text), run);
  return run;
}

SimPosteriorRun parse_sim_posterior_run(const std::string& text) {
  SimPosteriorRun run;
  read_run(parse_text(text), run);
  return run;
}

TrainSourceRun parse_train_source_run(const std::string& text) {
  TrainSourceRun run;
  read_run(parse_text(text), run);
  return run;
}

FinetuneRun parse_finetune_run(const std::string& text) {
  FinetuneRun run;
  read_run(parse_text(text), run);
  return run;
}

PredictRun parse_predict_run(const std::string& text) {
  PredictRun run;
  read_run(parse_text(text), run);
  return run;
}

EvaluateRun parse_evaluate_run(const std::string& text) {
  EvaluateRun run;
  read_run(parse_text(text), run);
  return run;
}

SummarizeRun parse_summarize_run(const std::string& text) {
  SummarizeRun run;
  read_run(parse_text(text), run);
  return run;
}

void validate_run(const SimCovariateRun& run) {
  validate_config(run.experiment);
  if (run.out_dir.empty()) throw ValidationError("config: out_dir: required");
  if (run.threads < 1) throw ValidationError("config: threads: must be at least 1");
}

void validate_run(const SimPosteriorRun& run) {
  validate_config(run.experiment);
  if (run.out_dir.empty()) throw ValidationError("config: out_dir: required");
  if (run.threads < 1) throw ValidationError("config: threads: must be at least 1");
}

void validate_run(const TrainSourceRun& run) {
  if (run.source_csv.empty()) throw ValidationError("config: source_csv: required");
  check_common_pipeline(run.label_column, run.unlabeled_fraction, run.r_bar, run.threads);
  check_grid(run.grid);
  if (run.out_dir.empty()) throw ValidationError("config: out_dir: required");
}

void validate_run(const FinetuneRun& run) {
  if (run.target_csv.empty()) throw ValidationError("config: target_csv: required");
  if (run.source_model.has_value() == run.source_csv.has_value()) {
    throw ValidationError("config: exactly one of source_model and source_csv is required");
  }
  if (run.decouple && !run.source_csv) {
    throw ValidationError(
        "config: decouple: only meaningful when the source stage is trained here "
        "(source_csv)");
  }
  if (run.pool_csv && run.source_csv) {
    throw ValidationError(
        "config: pool_csv: only applies when fine-tuning a frozen bundle; the in-run "
        "source stage pools its own unlabeled rows");
  }
  check_common_pipeline(run.label_column, run.unlabeled_fraction, run.r_bar, run.threads);
  check_grid(run.grid);
  if (run.out_dir.empty()) throw ValidationError("config: out_dir: required");
}

void validate_run(const PredictRun& run) {
  if (run.model.empty()) throw ValidationError("config: model: required");
  if (run.data_csv.empty()) throw ValidationError("config: data_csv: required");
  if (run.out_dir.empty()) throw ValidationError("config: out_dir: required");
}

void validate_run(const EvaluateRun& run) {
  if (run.model.empty()) throw ValidationError("config: model: required");
  if (run.data_csv.empty()) throw ValidationError("config: data_csv: required");
  if (run.label_column.empty()) throw ValidationError("config: label_column: required");
  if (run.out_dir.empty()) throw ValidationError("config: out_dir: required");
}

void validate_run(const SummarizeRun& run) {
  if (run.input_csv.empty()) throw ValidationError("config: input_csv: required");
  if (run.out_dir.empty()) throw ValidationError("config: out_dir: required");
}

SimCovariateRun resolve_sim_covariate_run(const ConfigLayers& layers) {
  return resolve(layers, SimCovariateRun{}, &covariate_preset);
}

SimPosteriorRun resolve_sim_posterior_run(const ConfigLayers& layers) {
  return resolve(layers, SimPosteriorRun{}, &posterior_preset);
}

TrainSourceRun resolve_train_source_run(const ConfigLayers& layers) {
  return resolve(layers, TrainSourceRun{}, &pipeline_preset<TrainSourceRun>);
}

FinetuneRun resolve_finetune_run(const ConfigLayers& layers) {
  return resolve(layers, FinetuneRun{}, &pipeline_preset<FinetuneRun>);
}

PredictRun resolve_predict_run(const ConfigLayers& layers) {
  return resolve(layers, PredictRun{}, &passthrough_preset<PredictRun>);
}

EvaluateRun resolve_evaluate_run(const ConfigLayers& layers) {
  return resolve(layers, EvaluateRun{}, &passthrough_preset<EvaluateRun>);
}

SummarizeRun resolve_summarize_run(const ConfigLayers& layers) {
  return resolve(layers, SummarizeRun{}, &passthrough_preset<SummarizeRun>);
}

}  // namespace fanlasso
