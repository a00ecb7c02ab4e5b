#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "fanlasso/pipeline.hpp"
#include "fixture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string& scratch_dir() {
  static const std::string dir = [] {
    fs::path p = fs::temp_directory_path() / "fanlasso_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
  }();
  return dir;
}

std::string sub_dir(const std::string& name) {
  fs::path p = fs::path(scratch_dir()) / name;
  fs::create_directories(p);
  return p.string();
}

struct CommandResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  return fs::exists(path) ? fanlasso::read_text_file(path) : std::string();
}

// Runs the real binary through the shell; args is the raw argument tail.
CommandResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const std::string tag = sub_dir("streams") + "/" + std::to_string(counter++);
  const std::string command =
      env_prefix + FANLASSO_CLI_PATH " " + args + " > " + tag + ".out 2> " + tag + ".err";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(tag + ".out");
  result.err = slurp(tag + ".err");
  return result;
}

bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

json error_json(const CommandResult& result) {
  const json j = json::parse(result.err);
  return j.at("error");
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const fixture::FixturePaths& fixture_paths() {
  static const fixture::FixturePaths paths =
      fixture::write_crime_fixture(sub_dir("fixture"), fixture::FixtureSpec{});
  return paths;
}

}  // namespace

TEST_CASE("help exits zero and lists the subcommands") {
  const CommandResult result = run_cli("--help");
  CHECK(result.code == 0);
  CHECK(contains(result.out, "sim-covariate"));
  CHECK(contains(result.out, "summarize"));
  CHECK(run_cli("finetune --help").code == 0);
}

TEST_CASE("usage and data failures exit distinctly with json on stderr") {
  const CommandResult unknown_cmd = run_cli("frobnicate");
  CHECK(unknown_cmd.code == 2);
  CHECK(error_json(unknown_cmd).at("category") == "usage");

  const CommandResult bad_key = run_cli("sim-covariate --set experiment.pp=3");
  CHECK(bad_key.code == 2);
  CHECK(error_json(bad_key).at("category") == "usage");
  CHECK(contains(error_json(bad_key).at("message").get<std::string>(), "experiment.pp"));

  const CommandResult bad_set = run_cli("sim-covariate --set nonsense");
  CHECK(bad_set.code == 2);
  CHECK(contains(error_json(bad_set).at("message").get<std::string>(), "KEY=VALUE"));

  const CommandResult bad_preset = run_cli("sim-posterior --preset huge");
  CHECK(bad_preset.code == 2);

  const CommandResult missing_input = run_cli("summarize --input " + sub_dir("err") + "/no.csv");
  CHECK(missing_input.code == 3);
  CHECK(error_json(missing_input).at("category") == "data");

  fanlasso::write_text_atomic(sub_dir("err") + "/broken.json", "not a model\n");
  const CommandResult bad_model =
      run_cli("evaluate --model " + sub_dir("err") + "/broken.json --data " +
              fixture_paths().target_csv);
  CHECK(bad_model.code == 3);
  CHECK(error_json(bad_model).at("category") == "data");
}

TEST_CASE("posterior smoke run emits the expected row count") {
  const std::string out = sub_dir("posterior_smoke");
  const std::string args =
      "sim-posterior --preset desk --reps 1"
      " --set 'experiment.methods=[\"Oracle\",\"VanillaSourceOnly\"]'"
      " --set experiment.p=40 --set experiment.n_p_train=300"
      " --set 'experiment.n_q_train_grid=[60]'"
      " --set experiment.n_unlabeled=30 --set experiment.n_test=40"
      " --set experiment.r_bar=3 --set experiment.arch.depth_l=2"
      " --set experiment.arch.width_n=16 --set experiment.arch.n_select=8"
      " --set experiment.train.max_epochs=20 --out " + out;
  const CommandResult result = run_cli(args);
  REQUIRE(result.code == 0);

  // 1 rep x 1 grid point x 2 methods x 2 metrics, plus the header
  const std::string csv = fanlasso::read_text_file(out + "/posterior.csv");
  CHECK(line_count(csv) == 5);
  CHECK(csv.rfind("rep,method,n_p,n_q,metric,value,seed\n", 0) == 0);
  const auto rows = fanlasso::parse_results_csv(csv);
  for (const auto& row : rows) {
    CHECK((row.method == "Oracle" || row.method == "VanillaSourceOnly"));
    CHECK((row.metric == "rmse" || row.metric == "excess_rmse"));
  }

  // the sidecar echoes the fully resolved config
  const json meta = json::parse(fanlasso::read_text_file(out + "/posterior.meta.json"));
  CHECK(meta.at("config").at("experiment").at("p") == 40);
  CHECK(meta.at("config").at("experiment").at("replications") == 1);
}

TEST_CASE("repeated flags are last wins and env threads is a fallback") {
  const std::string base =
      "sim-covariate --set experiment.p=30 --set experiment.r=2"
      " --set 'experiment.n_p_grid=[20]' --set 'experiment.n_q_values=[5]' --reps 1";
  const std::string a = sub_dir("lastwins") + "/a";
  const CommandResult result =
      run_cli(base + " --seed 1 --seed 9 --out " + sub_dir("lastwins") + "/ignored --out " + a);
  REQUIRE(result.code == 0);
  CHECK(fs::exists(a + "/covariate.csv"));
  CHECK_FALSE(fs::exists(sub_dir("lastwins") + "/ignored/covariate.csv"));
  const json meta = json::parse(fanlasso::read_text_file(a + "/covariate.meta.json"));
  CHECK(meta.at("config").at("experiment").at("master_seed") == 9);

  const std::string b = sub_dir("lastwins") + "/b";
  REQUIRE(run_cli(base + " --out " + b, "FANLASSO_THREADS=2 ").code == 0);
  CHECK(json::parse(fanlasso::read_text_file(b + "/covariate.meta.json"))
            .at("config")
            .at("threads") == 2);

  const std::string c = sub_dir("lastwins") + "/c";
  REQUIRE(run_cli(base + " --threads 1 --out " + c, "FANLASSO_THREADS=2 ").code == 0);
  CHECK(json::parse(fanlasso::read_text_file(c + "/covariate.meta.json"))
            .at("config")
            .at("threads") == 1);
}

TEST_CASE("config files layer under command line assignments") {
  const std::string dir = sub_dir("layering");
  fanlasso::write_text_atomic(dir + "/run.jsonc",
                              "{\n"
                              "  // small projection study\n"
                              "  \"experiment\": {\"p\": 35, \"r\": 2, \"n_p_grid\": [20],\n"
                              "                   \"n_q_values\": [5], \"replications\": 1},\n"
                              "  \"out_dir\": \"" + dir + "/from_file\"\n"
                              "}\n");

  REQUIRE(run_cli("sim-covariate --config " + dir + "/run.jsonc").code == 0);
  const json file_meta =
      json::parse(fanlasso::read_text_file(dir + "/from_file/covariate.meta.json"));
  CHECK(file_meta.at("config").at("experiment").at("p") == 35);

  REQUIRE(run_cli("sim-covariate --config " + dir + "/run.jsonc --set experiment.p=30 --out " +
                  dir + "/overridden")
              .code == 0);
  const json flag_meta =
      json::parse(fanlasso::read_text_file(dir + "/overridden/covariate.meta.json"));
  CHECK(flag_meta.at("config").at("experiment").at("p") == 30);
  CHECK(flag_meta.at("config").at("experiment").at("r") == 2);
}

TEST_CASE("the csv pipeline chains train, finetune, predict and evaluate") {
  const fixture::FixturePaths& paths = fixture_paths();
  const std::string dir = sub_dir("chain");
  const std::string shrink =
      " --set 'grid.depths=[2]' --set 'grid.widths=[12]' --set arch.n_select=6"
      " --epochs 10 --r-bar 3 --label " + std::string(fixture::kLabelColumn);

  const CommandResult train = run_cli("train-source --source " + paths.source_csv + shrink +
                                      " --out " + dir + "/source");
  REQUIRE(train.code == 0);
  CHECK(contains(train.out, "best architecture"));
  const std::string model = dir + "/source/source_model.json";
  REQUIRE(fs::exists(model));

  const CommandResult finetune =
      run_cli("finetune --target " + paths.target_csv + " --source-model " + model + shrink +
              " --out " + dir + "/finetuned");
  REQUIRE(finetune.code == 0);
  REQUIRE(fs::exists(dir + "/finetuned/finetuned_model.json"));

  const CommandResult predict = run_cli("predict --model " + dir +
                                        "/finetuned/finetuned_model.json --data " +
                                        paths.target_csv + " --out " + dir + "/predictions");
  REQUIRE(predict.code == 0);
  CHECK(line_count(fanlasso::read_text_file(dir + "/predictions/predictions.csv")) == 151);

  const CommandResult evaluate = run_cli("evaluate --model " + dir +
                                         "/finetuned/finetuned_model.json --data " +
                                         paths.target_csv + " --out " + dir + "/report");
  REQUIRE(evaluate.code == 0);
  const json report = json::parse(fanlasso::read_text_file(dir + "/report/evaluation.json"));
  CHECK(report.at("n_eval") == 150);
  CHECK(std::isfinite(report.at("rmse").get<double>()));
}
