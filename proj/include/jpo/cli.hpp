#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "jpo/config.hpp"
#include "jpo/eval.hpp"
#include "jpo/judge.hpp"
#include "jpo/synthetic.hpp"
#include "jpo/train.hpp"

namespace jpo::cli {

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir;  // empty: same as data_dir

  synthetic::SyntheticConfig synthetic;
  train::TrainConfig sft;
  train::TrainConfig pref;
  std::string train_set = "merged";  // merged | conditional | joint | proxy

  std::string judge_backend = "oracle";  // oracle | http
  judge::JudgeConfig judge;

  eval::EvalOptions eval;
  std::vector<std::size_t> scaling_sizes{50, 200, 800};

  std::string annotation_host = "127.0.0.1";
  int annotation_port = 8080;
  std::filesystem::path annotation_log = "annotation/events.jsonl";
  std::filesystem::path annotation_static_dir = "ui/dist";
  bool require_explanation = false;

  RunConfig();

  // Unknown keys and type mismatches throw Errc::ConfigInvalid.
  void apply(const config::Table& table);
  config::Table to_table() const;
  void validate() const;

  std::filesystem::path output_dir() const { return out_dir.empty() ? data_dir : out_dir; }
};

// Runs one subcommand. Returns the process exit code: 0 on success, 2 on a
// usage error, 1 on any other failure (with an `error: {json}` line on err).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jpo::cli
