#include "doctest.h"
#include "jpo/cli.hpp"
#include "jpo/config.hpp"
#include "jpo/error.hpp"

using namespace jpo;
using namespace jpo::config;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigInvalid);
    return e.what();
  }
  FAIL("expected jpo::Error");
  return {};
}

}  // namespace

TEST_CASE("parse sections, comments and value types") {
  auto t = Table::parse(R"(
seed = 7   # top level
name = "a # not a comment"

[train]
objective = "jpo"
beta = 0.1
steps = 1_000
verbose = true
sizes = [50, 200, 800]
temps = [0.001, 0.5]
path = "C:\\data\n"
)");
  CHECK(t.get_int("seed") == 7);
  CHECK(t.get_string("name") == "a # not a comment");
  CHECK(t.get_string("train.objective") == "jpo");
  CHECK(t.get_double("train.beta") == 0.1);
  CHECK(t.get_int("train.steps") == 1000);
  CHECK(t.get_double("train.steps") == 1000.0);
  CHECK(t.get_bool("train.verbose") == true);
  CHECK(t.get_array("train.sizes") == std::vector<double>{50, 200, 800});
  CHECK(t.get_array("train.temps") == std::vector<double>{0.001, 0.5});
  CHECK(t.get_string("train.path") == "C:\\data\n");
  CHECK_FALSE(t.get_int("missing"));
}

TEST_CASE("type mismatches and syntax errors name the problem") {
  auto t = Table::parse("x = \"s\"\ny = 1.5\n");
  CHECK(message_of([&] { t.get_int("x"); }).find("x") != std::string::npos);
  message_of([&] { t.get_int("y"); });
  message_of([&] { t.get_bool("y"); });
  message_of([&] { t.get_array("x"); });
  CHECK(message_of([] { Table::parse("a = 1\nb\n"); }).find("line 2") != std::string::npos);
  CHECK(message_of([] { Table::parse("a = 1\na = 2\n"); }).find("duplicate") != std::string::npos);
  message_of([] { Table::parse("[sec\n"); });
  message_of([] { Table::parse("a = \"open\n"); });
  message_of([] { Table::parse("a = [1, \"x\"]\n"); });
  message_of([] { Table::parse("a = nope\n"); });
  message_of([] { Table::parse("bad key = 1\n"); });
  CHECK_THROWS_AS(Table::load("/nonexistent/config.toml"), Error);
}

TEST_CASE("to_toml round-trips") {
  Table t;
  t.set("seed", std::int64_t{3});
  t.set("train.beta", 0.1);
  t.set("train.step_size", 10.0);
  t.set("train.objective", std::string("dpo"));
  t.set("judge.flag", false);
  t.set("eval.temperatures", std::vector<double>{0.001, 0.5, 1.0});
  t.set("paths.data", std::string("dir with \"quotes\""));
  const std::string text = t.to_toml();
  CHECK(text.starts_with("seed = 3\n"));
  CHECK(text.find("step_size = 10.0") != std::string::npos);
  auto back = Table::parse(text);
  CHECK(back.values() == t.values());
}

TEST_CASE("run config defaults, overrides and round trip") {
  cli::RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.pref.objective == train::Objective::jpo);
  CHECK(cfg.output_dir() == cfg.data_dir);

  cfg.apply(Table::parse(R"(
seed = 11
[train]
objective = "kto"
beta = 0.25
steps = 12
set = "joint"
[scaling]
sizes = [5, 10]
[judge]
backend = "http"
model_name = "some-model"
)"));
  CHECK(cfg.seed == 11);
  CHECK(cfg.pref.objective == train::Objective::kto);
  CHECK(cfg.pref.beta == 0.25);
  CHECK(cfg.pref.steps == 12);
  CHECK(cfg.train_set == "joint");
  CHECK(cfg.scaling_sizes == std::vector<std::size_t>{5, 10});
  CHECK(cfg.judge_backend == "http");

  cli::RunConfig copy;
  copy.apply(cfg.to_table());
  CHECK(copy.to_table().to_toml() == cfg.to_table().to_toml());
  CHECK(copy.judge.model_name == "some-model");
}

TEST_CASE("run config rejects bad values") {
  auto bad = [](const std::string& toml) {
    cli::RunConfig cfg;
    CHECK_THROWS_AS(
        {
          cfg.apply(Table::parse(toml));
          cfg.validate();
        },
        Error);
  };
  bad("typo = 1\n");
  bad("[train]\nbeta = 0\n");
  bad("[train]\nobjective = \"sft\"\n");
  bad("[train]\nset = \"everything\"\n");
  bad("[train]\nsteps = \"ten\"\n");
  bad("[judge]\nbackend = \"carrier-pigeon\"\n");
  bad("[judge]\nmax_concurrency = 0\n");
  bad("[eval]\ntemperatures = [0.5, 0]\n");
  bad("[scaling]\nsizes = [1.5]\n");
  bad("seed = -1\n");
  bad("[annotation]\nport = 70000\n");
}
