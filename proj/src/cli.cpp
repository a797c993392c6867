#include "jpo/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

#include "jpo/annotation.hpp"
#include "jpo/corpus.hpp"
#include "jpo/error.hpp"
#include "jpo/interplay.hpp"
#include "jpo/tinylm.hpp"
#include "jpo/util.hpp"

namespace jpo::cli {

namespace fs = std::filesystem;
using corpus::ConditionalPreferenceRecord;
using corpus::InstructionResponsePair;
using corpus::JointCandidate;
using corpus::JointPreferenceRecord;
using corpus::TrainingComparison;
using corpus::TripletRecord;

namespace files {
constexpr const char* kTriplets = "triplets.jsonl";
constexpr const char* kTestSet = "test.jsonl";
constexpr const char* kDedup = "dedup_triplets.jsonl";
constexpr const char* kSingles = "singles.jsonl";
constexpr const char* kCandidates = "joint_candidates.jsonl";
constexpr const char* kConditional = "conditional_prefs.jsonl";
constexpr const char* kJoint = "joint_prefs.jsonl";
constexpr const char* kSft = "sft.ckpt";
}  // namespace files

// --- RunConfig --------------------------------------------------------------

RunConfig::RunConfig() {
  sft.objective = train::Objective::sft;
  sft.step_size = 1.0;
  sft.steps = 300;
  sft.batch_size = 32;
  pref.objective = train::Objective::jpo;
  pref.step_size = 10.0;
  pref.steps = 1000;
  pref.batch_size = 32;
  judge.model_name = "planted-rule-oracle";
  eval.max_len = 8;
}

namespace {

std::uint64_t as_u64(std::int64_t v, const std::string& key) {
  if (v < 0) throw Error(Errc::ConfigInvalid, key + " must be nonnegative");
  return static_cast<std::uint64_t>(v);
}

int as_int(std::int64_t v, const std::string& key) {
  if (v < INT32_MIN || v > INT32_MAX) throw Error(Errc::ConfigInvalid, key + " out of range");
  return static_cast<int>(v);
}

std::vector<std::size_t> as_sizes(const std::vector<double>& a, const std::string& key) {
  std::vector<std::size_t> out;
  for (double d : a) {
    if (d < 1 || d != static_cast<double>(static_cast<std::size_t>(d))) {
      throw Error(Errc::ConfigInvalid, key + " must hold positive integers");
    }
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

}  // namespace

void RunConfig::apply(const config::Table& t) {
  // Each handler consumes one key; anything left over is a typo.
  std::map<std::string, std::function<void(const std::string&)>> h;
  auto i64 = [&](const std::string& k) { return *t.get_int(k); };
  auto dbl = [&](const std::string& k) { return *t.get_double(k); };
  auto str = [&](const std::string& k) { return *t.get_string(k); };
  h["seed"] = [&](const std::string& k) { seed = as_u64(i64(k), k); };
  h["paths.data"] = [&](const std::string& k) { data_dir = str(k); };
  h["paths.out"] = [&](const std::string& k) { out_dir = str(k); };
  h["synthetic.n_triplets"] = [&](const std::string& k) { synthetic.n_triplets = as_u64(i64(k), k); };
  h["synthetic.n_test"] = [&](const std::string& k) { synthetic.n_test = as_u64(i64(k), k); };
  h["synthetic.p_key"] = [&](const std::string& k) { synthetic.p_key = dbl(k); };
  h["synthetic.p_other_key"] = [&](const std::string& k) { synthetic.p_other_key = dbl(k); };
  h["synthetic.p_dominant_filler"] = [&](const std::string& k) { synthetic.p_dominant_filler = dbl(k); };
  h["sft.steps"] = [&](const std::string& k) { sft.steps = as_int(i64(k), k); };
  h["sft.step_size"] = [&](const std::string& k) { sft.step_size = dbl(k); };
  h["sft.batch_size"] = [&](const std::string& k) { sft.batch_size = as_int(i64(k), k); };
  h["train.objective"] = [&](const std::string& k) { pref.objective = train::parse_objective(str(k)); };
  h["train.beta"] = [&](const std::string& k) { pref.beta = dbl(k); };
  h["train.step_size"] = [&](const std::string& k) { pref.step_size = dbl(k); };
  h["train.steps"] = [&](const std::string& k) { pref.steps = as_int(i64(k), k); };
  h["train.batch_size"] = [&](const std::string& k) { pref.batch_size = as_int(i64(k), k); };
  h["train.set"] = [&](const std::string& k) { train_set = str(k); };
  h["train.kto_lambda_desirable"] = [&](const std::string& k) { pref.kto.lambda_desirable = dbl(k); };
  h["train.kto_lambda_undesirable"] = [&](const std::string& k) { pref.kto.lambda_undesirable = dbl(k); };
  h["judge.backend"] = [&](const std::string& k) { judge_backend = str(k); };
  h["judge.endpoint_url"] = [&](const std::string& k) { judge.endpoint_url = str(k); };
  h["judge.model_name"] = [&](const std::string& k) { judge.model_name = str(k); };
  h["judge.api_key_env"] = [&](const std::string& k) { judge.api_key_env = str(k); };
  h["judge.request_temperature"] = [&](const std::string& k) { judge.request_temperature = dbl(k); };
  h["judge.max_retries"] = [&](const std::string& k) { judge.max_retries = as_int(i64(k), k); };
  h["judge.max_concurrency"] = [&](const std::string& k) { judge.max_concurrency = as_int(i64(k), k); };
  h["judge.timeout_seconds"] = [&](const std::string& k) { judge.timeout_seconds = as_int(i64(k), k); };
  h["judge.cache"] = [&](const std::string& k) { judge.cache_path = str(k); };
  h["eval.temperatures"] = [&](const std::string& k) { eval.temperatures = *t.get_array(k); };
  h["eval.max_len"] = [&](const std::string& k) { eval.max_len = as_u64(i64(k), k); };
  h["scaling.sizes"] = [&](const std::string& k) { scaling_sizes = as_sizes(*t.get_array(k), k); };
  h["annotation.host"] = [&](const std::string& k) { annotation_host = str(k); };
  h["annotation.port"] = [&](const std::string& k) { annotation_port = as_int(i64(k), k); };
  h["annotation.log"] = [&](const std::string& k) { annotation_log = str(k); };
  h["annotation.static_dir"] = [&](const std::string& k) { annotation_static_dir = str(k); };
  h["annotation.require_explanation"] = [&](const std::string& k) { require_explanation = *t.get_bool(k); };
  for (const auto& [key, value] : t.values()) {
    auto it = h.find(key);
    if (it == h.end()) throw Error(Errc::ConfigInvalid, "unknown config key " + key);
    it->second(key);
  }
}

config::Table RunConfig::to_table() const {
  config::Table t;
  auto i = [](auto v) { return config::Value(static_cast<std::int64_t>(v)); };
  t.set("seed", i(seed));
  t.set("paths.data", data_dir.string());
  t.set("paths.out", output_dir().string());
  t.set("synthetic.n_triplets", i(synthetic.n_triplets));
  t.set("synthetic.n_test", i(synthetic.n_test));
  t.set("synthetic.p_key", synthetic.p_key);
  t.set("synthetic.p_other_key", synthetic.p_other_key);
  t.set("synthetic.p_dominant_filler", synthetic.p_dominant_filler);
  t.set("sft.steps", i(sft.steps));
  t.set("sft.step_size", sft.step_size);
  t.set("sft.batch_size", i(sft.batch_size));
  t.set("train.objective", std::string(train::to_string(pref.objective)));
  t.set("train.beta", pref.beta);
  t.set("train.step_size", pref.step_size);
  t.set("train.steps", i(pref.steps));
  t.set("train.batch_size", i(pref.batch_size));
  t.set("train.set", train_set);
  t.set("train.kto_lambda_desirable", pref.kto.lambda_desirable);
  t.set("train.kto_lambda_undesirable", pref.kto.lambda_undesirable);
  t.set("judge.backend", judge_backend);
  t.set("judge.endpoint_url", judge.endpoint_url);
  t.set("judge.model_name", judge.model_name);
  t.set("judge.api_key_env", judge.api_key_env);
  t.set("judge.request_temperature", judge.request_temperature);
  t.set("judge.max_retries", i(judge.max_retries));
  t.set("judge.max_concurrency", i(judge.max_concurrency));
  t.set("judge.timeout_seconds", i(judge.timeout_seconds));
  t.set("judge.cache", judge.cache_path.string());
  t.set("eval.temperatures", eval.temperatures);
  t.set("eval.max_len", i(eval.max_len));
  std::vector<double> sizes(scaling_sizes.begin(), scaling_sizes.end());
  t.set("scaling.sizes", sizes);
  t.set("annotation.host", annotation_host);
  t.set("annotation.port", i(annotation_port));
  t.set("annotation.log", annotation_log.string());
  t.set("annotation.static_dir", annotation_static_dir.string());
  t.set("annotation.require_explanation", require_explanation);
  return t;
}

void RunConfig::validate() const {
  synthetic.validate();
  sft.validate();
  pref.validate();
  judge.validate();
  if (pref.objective == train::Objective::sft) {
    throw Error(Errc::ConfigInvalid, "train.objective must be dpo, jpo or kto");
  }
  if (judge_backend != "oracle" && judge_backend != "http") {
    throw Error(Errc::ConfigInvalid, "judge.backend must be oracle or http");
  }
  static const std::set<std::string> sets{"merged", "conditional", "joint", "proxy"};
  if (!sets.contains(train_set)) throw Error(Errc::ConfigInvalid, "train.set must be merged, conditional, joint or proxy");
  if (eval.temperatures.empty()) throw Error(Errc::ConfigInvalid, "eval.temperatures is empty");
  for (double t : eval.temperatures) {
    if (!(t > 0)) throw Error(Errc::ConfigInvalid, "eval temperatures must be positive");
  }
  if (eval.max_len == 0) throw Error(Errc::ConfigInvalid, "eval.max_len must be positive");
  if (annotation_port < 0 || annotation_port > 65535) throw Error(Errc::ConfigInvalid, "annotation.port out of range");
}

// --- subcommands --------------------------------------------------------------

namespace {

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::string command;

  fs::path input(const std::string& name) const {
    fs::path p = cfg.data_dir / name;
    if (!fs::exists(p)) throw Error(Errc::MissingInput, "missing input " + p.string());
    return p;
  }
  fs::path output(const std::string& name) const { return cfg.output_dir() / name; }

  void write_resolved_config() const {
    write_file_atomic(output(command + ".resolved.toml"), cfg.to_table().to_toml());
  }
};

fs::path explicit_or(const std::string& given, const Context& ctx, const std::string& fallback) {
  if (given.empty()) return ctx.input(fallback);
  if (!fs::exists(given)) throw Error(Errc::MissingInput, "missing input " + given);
  return given;
}

std::unique_ptr<judge::ChatClient> make_client(const RunConfig& cfg) {
  if (cfg.judge_backend == "http") return std::make_unique<judge::HttpChatClient>();
  return std::make_unique<synthetic::PlantedRuleClient>();
}

std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// step,loss,smoothed_loss. The smoothed value is the mean batch loss of the
// epoch the step falls in; a trailing partial epoch is averaged on its own.
std::string training_log_csv(const std::vector<train::TrainLogEntry>& log, std::size_t dataset_size,
                             int batch_size) {
  const std::size_t per_epoch =
      std::max<std::size_t>(1, dataset_size / std::min<std::size_t>(dataset_size, static_cast<std::size_t>(batch_size)));
  std::string out = "step,loss,smoothed_loss\n";
  for (std::size_t begin = 0; begin < log.size(); begin += per_epoch) {
    const std::size_t end = std::min(log.size(), begin + per_epoch);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += log[i].loss;
    const double mean = sum / static_cast<double>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      out += std::to_string(log[i].step) + "," + format_number(log[i].loss) + "," + format_number(mean) + "\n";
    }
  }
  return out;
}

std::vector<std::string> texts_of(const std::vector<ConditionalPreferenceRecord>& c,
                                  const std::vector<JointPreferenceRecord>& j,
                                  const std::vector<InstructionResponsePair>& test) {
  std::vector<std::string> texts;
  for (const auto& r : c) {
    texts.push_back(r.instruction);
    texts.push_back(r.response_a);
    texts.push_back(r.response_b);
  }
  for (const auto& r : j) {
    for (const auto* p : {&r.pair_a, &r.pair_b}) {
      texts.push_back(p->instruction);
      texts.push_back(p->response);
    }
  }
  for (const auto& r : test) {
    texts.push_back(r.instruction);
    texts.push_back(r.response);
  }
  return texts;
}

template <typename T>
std::vector<T> read_optional(const Context& ctx, const std::string& name) {
  const fs::path p = ctx.cfg.data_dir / name;
  if (!fs::exists(p)) return {};
  return corpus::read_jsonl<T>(p);
}

std::vector<TrainingComparison> training_set(const Context& ctx, const std::string& which) {
  auto cond = corpus::read_jsonl<ConditionalPreferenceRecord>(ctx.input(files::kConditional));
  if (which == "proxy") return corpus::cross_pair_proxy(cond, derive_seed(ctx.cfg.seed, 3));
  if (which == "conditional") return corpus::to_training_set(corpus::merge_preference_sets(cond, {}));
  auto joint = corpus::read_jsonl<JointPreferenceRecord>(ctx.input(files::kJoint));
  if (which == "joint") return corpus::to_training_set(joint);
  return corpus::to_training_set(corpus::merge_preference_sets(cond, joint));
}

void cmd_gen_synthetic(Context& ctx) {
  auto sc = ctx.cfg.synthetic;
  sc.seed = ctx.cfg.seed;
  auto corpus = synthetic::generate(sc);
  corpus::write_jsonl<TripletRecord>(ctx.output(files::kTriplets), corpus.triplets);
  corpus::write_jsonl<InstructionResponsePair>(ctx.output(files::kTestSet), corpus.test_set);
  ctx.out << "wrote " << corpus.triplets.size() << " triplets and " << corpus.test_set.size() << " test items\n";
}

void cmd_build_data(Context& ctx, const std::string& input) {
  auto triplets = corpus::read_jsonl<TripletRecord>(explicit_or(input, ctx, files::kTriplets));
  auto dedup = corpus::dedupe_instructions(triplets);
  auto singles = corpus::select_single_responses(dedup, derive_seed(ctx.cfg.seed, 1));
  auto candidates = corpus::pair_for_joint(singles, derive_seed(ctx.cfg.seed, 2));
  corpus::write_jsonl<TripletRecord>(ctx.output(files::kDedup), dedup);
  corpus::write_jsonl<InstructionResponsePair>(ctx.output(files::kSingles), singles);
  corpus::write_jsonl<JointCandidate>(ctx.output(files::kCandidates), candidates);
  ctx.out << "kept " << dedup.size() << " of " << triplets.size() << " triplets; " << candidates.size()
          << " joint candidates\n";
}

void cmd_annotate_ai(Context& ctx, const std::string& mode) {
  auto client = make_client(ctx.cfg);
  judge::Judge j(*client, ctx.cfg.judge);
  const bool all = mode.empty();
  if (!all) judge::parse_mode(mode);
  if (all || mode == "conditional") {
    auto triplets = corpus::read_jsonl<TripletRecord>(ctx.input(files::kDedup));
    auto prefs = judge::annotate_conditional(triplets, j);
    corpus::write_jsonl<ConditionalPreferenceRecord>(ctx.output(files::kConditional), prefs);
    ctx.out << "conditional: " << prefs.size() << " records\n";
  }
  if (all || mode == "joint") {
    auto candidates = corpus::read_jsonl<JointCandidate>(ctx.input(files::kCandidates));
    auto prefs = judge::annotate_joint(candidates, j);
    corpus::write_jsonl<JointPreferenceRecord>(ctx.output(files::kJoint), prefs);
    ctx.out << "joint: " << prefs.size() << " records\n";
  }
  ctx.out << "judge requests: " << j.request_count() << ", cache hits: " << j.cache_hits() << "\n";
}

void cmd_train_sft(Context& ctx) {
  auto cond = corpus::read_jsonl<ConditionalPreferenceRecord>(ctx.input(files::kConditional));
  auto joint = read_optional<JointPreferenceRecord>(ctx, files::kJoint);
  auto test = read_optional<InstructionResponsePair>(ctx, files::kTestSet);
  auto sft_data = corpus::build_sft_from_conditional(cond);
  auto texts = texts_of(cond, joint, test);
  lm::PolicyModel init(lm::Vocabulary::from_texts(texts), {}, ctx.cfg.seed);
  auto cfg = ctx.cfg.sft;
  cfg.seed = ctx.cfg.seed;
  auto result = train::sft_train(init, sft_data, cfg);
  lm::save_checkpoint(result.model, ctx.output(files::kSft));
  write_file_atomic(ctx.output("sft_train_log.csv"), training_log_csv(result.log, sft_data.size(), cfg.batch_size));
  ctx.out << "sft on " << sft_data.size() << " pairs; loss " << result.log.front().loss << " -> "
          << result.log.back().loss << "\n";
}

std::string pref_stem(const RunConfig& cfg) {
  return "pref_" + std::string(train::to_string(cfg.pref.objective)) + "_" + cfg.train_set;
}

void cmd_train_pref(Context& ctx) {
  auto sft_model = lm::load_checkpoint(ctx.input(files::kSft));
  auto data = training_set(ctx, ctx.cfg.train_set);
  auto cfg = ctx.cfg.pref;
  cfg.seed = ctx.cfg.seed;
  auto result = train::pref_train(sft_model, data, cfg);
  const std::string stem = pref_stem(ctx.cfg);
  lm::save_checkpoint(result.model, ctx.output(stem + ".ckpt"));
  write_file_atomic(ctx.output(stem + "_train_log.csv"), training_log_csv(result.log, data.size(), cfg.batch_size));
  ctx.out << train::to_string(cfg.objective) << " on " << data.size() << " comparisons; loss "
          << result.log.front().loss << " -> " << result.log.back().loss << "\n";
}

void cmd_interplay(Context& ctx) {
  auto cond = corpus::read_jsonl<ConditionalPreferenceRecord>(ctx.input(files::kConditional));
  auto joint = corpus::read_jsonl<JointPreferenceRecord>(ctx.input(files::kJoint));
  auto labels = interplay::assign_conditional_labels(cond);
  auto report = interplay::interplay_report(labels, joint);
  interplay::emit_report(report, ctx.output("interplay"));
  ctx.out << "interplay: " << report.included() << " included, " << report.excluded << " excluded\n";
}

eval::EvalOptions eval_options(const RunConfig& cfg) {
  auto o = cfg.eval;
  o.seed = derive_seed(cfg.seed, 4);
  return o;
}

void cmd_eval(Context& ctx, const std::string& checkpoint) {
  if (checkpoint.empty()) throw Error(Errc::MissingInput, "--checkpoint is required");
  if (!fs::exists(checkpoint)) throw Error(Errc::MissingInput, "missing input " + checkpoint);
  auto model = lm::load_checkpoint(checkpoint);
  auto test = corpus::read_jsonl<InstructionResponsePair>(ctx.input(files::kTestSet));
  auto client = make_client(ctx.cfg);
  judge::Judge j(*client, ctx.cfg.judge);
  const std::string stem = fs::path(checkpoint).stem().string();
  auto report = eval::run_eval(model, test, j, eval_options(ctx.cfg), stem);
  write_file_atomic(ctx.output("winrate_" + stem + ".json"), eval::to_json(report).dump(2) + "\n");
  ctx.out << stem << ": averaged win-rate " << report.averaged << "\n";
}

void cmd_scaling(Context& ctx) {
  auto sft_model = lm::load_checkpoint(ctx.input(files::kSft));
  auto data = training_set(ctx, ctx.cfg.train_set);
  auto test = corpus::read_jsonl<InstructionResponsePair>(ctx.input(files::kTestSet));
  auto client = make_client(ctx.cfg);
  judge::Judge j(*client, ctx.cfg.judge);
  auto cfg = ctx.cfg.pref;
  cfg.seed = ctx.cfg.seed;
  auto curve = eval::scaling_run(ctx.cfg.scaling_sizes, sft_model, data, test, cfg, j, eval_options(ctx.cfg),
                                 derive_seed(ctx.cfg.seed, 5));
  write_file_atomic(ctx.output("scaling.json"), eval::to_json(curve).dump(2) + "\n");
  write_file_atomic(ctx.output("scaling.csv"), eval::scaling_csv(curve));
  for (const auto& p : curve.points) ctx.out << "size " << p.size << ": " << p.win_rate << "\n";
}

void cmd_ablation(Context& ctx) {
  auto sft_model = lm::load_checkpoint(ctx.input(files::kSft));
  auto cond = training_set(ctx, "conditional");
  auto joint = training_set(ctx, "joint");
  auto test = corpus::read_jsonl<InstructionResponsePair>(ctx.input(files::kTestSet));
  auto client = make_client(ctx.cfg);
  judge::Judge j(*client, ctx.cfg.judge);
  auto cfg = ctx.cfg.pref;
  cfg.seed = ctx.cfg.seed;
  auto report = eval::ablation_suite(sft_model, cond, joint, test, cfg, j, eval_options(ctx.cfg),
                                     derive_seed(ctx.cfg.seed, 6));
  write_file_atomic(ctx.output("ablation.json"), eval::to_json(report).dump(2) + "\n");
  for (const auto& a : report.arms) ctx.out << a.name << ": " << a.report.averaged << "\n";
}

void cmd_serve(Context& ctx, const std::string& mode, const std::string& input) {
  fs::path log = ctx.cfg.annotation_log;
  if (log.is_relative()) log = ctx.cfg.output_dir() / log;
  annotation::AnnotationStore store(log, {ctx.cfg.require_explanation, 2});
  if (!input.empty()) {
    if (!fs::exists(input)) throw Error(Errc::MissingInput, "missing input " + input);
    if (mode.empty()) throw Error(Errc::ConfigInvalid, "--mode is required with --input");
    std::size_t added = 0;
    if (judge::parse_mode(mode) == judge::Mode::conditional) {
      for (auto& t : corpus::read_jsonl<TripletRecord>(input)) added += store.add_task(t.id, t);
    } else {
      for (auto& c : corpus::read_jsonl<JointCandidate>(input)) {
        added += store.add_task("j-" + c.first.id + "-" + c.second.id, c);
      }
    }
    ctx.out << "added " << added << " tasks\n";
  }
  annotation::AnnotationServer server(
      store, {ctx.cfg.annotation_host, ctx.cfg.annotation_port, ctx.cfg.annotation_static_dir});
  ctx.out << "serving " << store.size() << " tasks on " << ctx.cfg.annotation_host << ":" << ctx.cfg.annotation_port
          << std::endl;
  server.run();
}

void print_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << "error: " << nlohmann::json{{"code", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint preference optimization toolkit", "jpo"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, data_dir, objective, mode, sizes, checkpoint, input, set;
  std::uint64_t seed = 0;
  double beta = 0;
  int steps = 0;
  auto* o_seed = app.add_option("--seed", seed, "Random seed");
  app.add_option("--config", config_path, "TOML config file");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--data", data_dir, "Input data directory");

  std::map<std::string, CLI::App*> subs;
  auto sub = [&](const std::string& name, const std::string& help) { return subs[name] = app.add_subcommand(name, help); };
  sub("gen-synthetic", "Generate the planted-rule corpus and gold test set");
  sub("build-data", "Deduplicate triplets and build single-response and joint candidate sets")
      ->add_option("--input", input, "Triplet JSONL (default: <data>/triplets.jsonl)");
  sub("annotate-ai", "Label conditional and/or joint comparisons with the AI judge")
      ->add_option("--mode", mode, "conditional or joint (default: both)");
  sub("train-sft", "Supervised finetuning on chosen responses");
  auto* tp = sub("train-pref", "Preference training from the SFT checkpoint");
  auto* o_objective = tp->add_option("--objective", objective, "dpo, jpo or kto");
  auto* o_beta = tp->add_option("--beta", beta, "Preference temperature");
  auto* o_steps = tp->add_option("--steps", steps, "Gradient steps");
  auto* o_set = tp->add_option("--set", set, "merged, conditional, joint or proxy");
  sub("interplay-report", "Bucket joint verdicts by conditional labels");
  sub("eval-winrate", "Win-rate of a checkpoint against gold responses")
      ->add_option("--checkpoint", checkpoint, "Model checkpoint");
  auto* sr = sub("scaling-run", "Win-rate as a function of training-set size");
  auto* o_sizes = sr->add_option("--sizes", sizes, "Comma-separated sizes");
  auto* o_set2 = sr->add_option("--set", set, "merged, conditional, joint or proxy");
  auto* o_objective2 = sr->add_option("--objective", objective, "dpo, jpo or kto");
  auto* o_steps2 = sr->add_option("--steps", steps, "Gradient steps");
  auto* ab = sub("ablation-suite", "Conditional-only, joint-only and mixed arms");
  auto* o_objective3 = ab->add_option("--objective", objective, "dpo, jpo or kto");
  auto* o_steps3 = ab->add_option("--steps", steps, "Gradient steps");
  auto* sv = sub("serve-annotation", "Serve the human annotation API");
  sv->add_option("--mode", mode, "Task mode for --input");
  sv->add_option("--input", input, "Task JSONL to load (triplets or joint candidates)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply(config::Table::load(config_path));
    if (*o_seed) cfg.seed = seed;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (o_objective->count() || o_objective2->count() || o_objective3->count()) {
      cfg.pref.objective = train::parse_objective(objective);
    }
    if (o_beta->count()) cfg.pref.beta = beta;
    if (o_steps->count() || o_steps2->count() || o_steps3->count()) cfg.pref.steps = steps;
    if (o_set->count() || o_set2->count()) cfg.train_set = set;
    if (o_sizes->count()) {
      std::vector<double> parsed;
      std::stringstream ss(sizes);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size()) {
          throw Error(Errc::ConfigInvalid, "--sizes must be comma-separated integers");
        }
        parsed.push_back(static_cast<double>(v));
      }
      cfg.scaling_sizes = as_sizes(parsed, "--sizes");
    }
    cfg.validate();

    Context ctx{cfg, out, command};
    ctx.write_resolved_config();
    if (command == "gen-synthetic") cmd_gen_synthetic(ctx);
    else if (command == "build-data") cmd_build_data(ctx, input);
    else if (command == "annotate-ai") cmd_annotate_ai(ctx, mode);
    else if (command == "train-sft") cmd_train_sft(ctx);
    else if (command == "train-pref") cmd_train_pref(ctx);
    else if (command == "interplay-report") cmd_interplay(ctx);
    else if (command == "eval-winrate") cmd_eval(ctx, checkpoint);
    else if (command == "scaling-run") cmd_scaling(ctx);
    else if (command == "ablation-suite") cmd_ablation(ctx);
    else if (command == "serve-annotation") cmd_serve(ctx, mode, input);
    return 0;
  } catch (const Error& e) {
    print_error(err, errc_name(e.code()), command + ": " + e.what());
  } catch (const std::exception& e) {
    print_error(err, "Internal", command + ": " + e.what());
  }
  return 1;
}

}  // namespace jpo::cli
