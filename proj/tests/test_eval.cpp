#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "jpo/error.hpp"
#include "jpo/eval.hpp"
#include "jpo/synthetic.hpp"
#include "jpo/util.hpp"

using namespace jpo;
using namespace jpo::eval;
using corpus::InstructionResponsePair;
using corpus::TrainingComparison;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected jpo::Error");
  return Errc::IoFailure;
}

judge::JudgeConfig judge_config(int concurrency = 1) {
  judge::JudgeConfig c;
  c.model_name = "oracle";
  c.max_concurrency = concurrency;
  return c;
}

// A small planted-rule world shared by the runner tests.
struct World {
  synthetic::SyntheticCorpus corpus;
  PreferenceData data;
  lm::PolicyModel sft;
  train::TrainConfig pref;
  EvalOptions options;

  World() : sft(synthetic::vocabulary(), {}, 0) {
    synthetic::SyntheticConfig sc;
    sc.n_triplets = 120;
    sc.n_test = 20;
    sc.seed = 4;
    corpus = synthetic::generate(sc);
    synthetic::PlantedRuleClient client;
    judge::Judge j(client, judge_config());
    data = build_preference_data(corpus.triplets, j, 4);
    train::TrainConfig sc_cfg;
    sc_cfg.objective = train::Objective::sft;
    sc_cfg.steps = 40;
    sc_cfg.batch_size = 16;
    sft = train::sft_train(lm::PolicyModel(synthetic::vocabulary(), {}, 0), data.sft, sc_cfg).model;
    pref.objective = train::Objective::jpo;
    pref.steps = 30;
    pref.step_size = 5.0;
    pref.batch_size = 16;
    options.seed = 99;
  }
};

const World& world() {
  static const World w;
  return w;
}

}  // namespace

TEST_CASE("win_rate arithmetic") {
  using O = Outcome;
  CHECK(win_rate(std::vector<O>(7, O::Win)) == 1.0);
  CHECK(win_rate(std::vector<O>(7, O::Tie)) == 0.5);
  CHECK(win_rate(std::vector<O>(7, O::Loss)) == 0.0);
  std::vector<O> mixed;
  mixed.insert(mixed.end(), 10, O::Win);
  mixed.insert(mixed.end(), 5, O::Loss);
  mixed.insert(mixed.end(), 5, O::Tie);
  CHECK(win_rate(mixed) == 0.625);
  CHECK(code_of([] { win_rate(std::vector<O>{}); }) == Errc::EmptyOutcomes);
}

TEST_CASE("win_rate stays in [0, 1] and is order free") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Outcome> o(1 + rng.uniform_index(50));
    std::size_t w = 0, t = 0;
    for (auto& x : o) {
      x = static_cast<Outcome>(rng.uniform_index(3));
      w += x == Outcome::Win;
      t += x == Outcome::Tie;
    }
    const double r = win_rate(o);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    CHECK(r == doctest::Approx((w + 0.5 * t) / o.size()).epsilon(1e-15));
    rng.shuffle(std::span<Outcome>(o));
    CHECK(win_rate(o) == doctest::Approx(r).epsilon(1e-15));
  }
}

TEST_CASE("a judge that always prefers gold gives zero at every temperature") {
  const auto& w = world();
  std::vector<InstructionResponsePair> test;
  for (const auto& g : w.corpus.test_set) test.push_back({g.id, g.instruction, "GOLD " + g.response});
  judge::CallbackClient gold_lover([](const std::string& p) {
    auto c = judge::parse_prompt(p);
    return c->output_a.starts_with("GOLD") ? std::string("Output (a)") : std::string("Output (b)");
  });
  judge::Judge j(gold_lover, judge_config(3));
  auto r = run_eval(w.sft, test, j, w.options, "sft");
  REQUIRE(r.per_temperature.size() == 3);
  for (const auto& t : r.per_temperature) {
    CHECK(t.win_rate == 0.0);
    CHECK(t.wins + t.losses + t.ties == test.size());
  }
  CHECK(r.averaged == 0.0);
  CHECK(r.total == 3 * test.size());
  CHECK(r.wins + r.losses + r.ties == r.total);
  CHECK(r.model_id == "sft");
  CHECK(r.judge_id == "ai:oracle");
  CHECK(r.per_temperature[0].temperature == 0.001);
  CHECK(r.per_temperature[2].temperature == 1.0);
}

TEST_CASE("averaged win-rate is the mean over temperatures and evaluation is pure") {
  const auto& w = world();
  synthetic::PlantedRuleClient client;
  judge::Judge j(client, judge_config(4));
  EvalOptions opts = w.options;
  opts.temperatures = {0.25, 0.5, 1.0, 2.0};
  auto r = run_eval(w.sft, w.corpus.test_set, j, opts);
  double sum = 0.0;
  for (const auto& t : r.per_temperature) {
    sum += t.win_rate;
    CHECK(t.win_rate >= 0.0);
    CHECK(t.win_rate <= 1.0);
  }
  CHECK(std::abs(r.averaged - sum / 4.0) < 1e-12);
  CHECK(r.wins + r.losses + r.ties == r.total);

  judge::Judge again(client, judge_config(1));
  CHECK(run_eval(w.sft, w.corpus.test_set, again, opts) == r);
}

TEST_CASE("empty samples lose without a judge call") {
  const auto& w = world();
  lm::PolicyModel mute(synthetic::vocabulary(), {}, 0);
  mute.mutable_parameters()[mute.bias_index(lm::Vocabulary::kEos)] = 60.0;
  std::atomic<int> calls{0};
  judge::CallbackClient client([&](const std::string&) {
    ++calls;
    return "Output (a)";
  });
  judge::Judge j(client, judge_config());
  auto r = run_eval(mute, w.corpus.test_set, j, w.options);
  CHECK(calls == 0);
  CHECK(r.averaged == 0.0);
  CHECK(r.losses == r.total);
}

TEST_CASE("run_eval input errors") {
  const auto& w = world();
  synthetic::PlantedRuleClient client;
  judge::Judge j(client, judge_config());
  CHECK(code_of([&] { run_eval(w.sft, std::vector<InstructionResponsePair>{}, j, w.options); }) == Errc::EmptyDataset);
  EvalOptions none = w.options;
  none.temperatures.clear();
  CHECK(code_of([&] { run_eval(w.sft, w.corpus.test_set, j, none); }) == Errc::ConfigInvalid);
  EvalOptions bad = w.options;
  bad.temperatures = {0.0};
  CHECK(code_of([&] { run_eval(w.sft, w.corpus.test_set, j, bad); }) == Errc::InvalidTemperature);
}

TEST_CASE("nested subsamples") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::vector<std::size_t> prev;
    for (std::size_t size : {0u, 5u, 17u, 40u, 100u}) {
      auto s = nested_subsample(100, size, seed);
      CHECK(s.size() == size);
      CHECK(std::is_sorted(s.begin(), s.end()));
      CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == size);
      CHECK(std::includes(s.begin(), s.end(), prev.begin(), prev.end()));
      for (std::size_t i : s) CHECK(i < 100);
      prev = s;
    }
    CHECK(prev == [] {
      std::vector<std::size_t> all(100);
      std::iota(all.begin(), all.end(), std::size_t{0});
      return all;
    }());
  }
  CHECK(nested_subsample(100, 30, 1) != nested_subsample(100, 30, 2));
  CHECK(code_of([] { nested_subsample(10, 11, 0); }) == Errc::SizeExceedsCorpus);
}

TEST_CASE("preference data sets are consistent") {
  const auto& d = world().data;
  CHECK(d.triplets.size() == 120);
  CHECK(d.conditional.size() == 120);
  CHECK(d.singles.size() == 120);
  CHECK(d.joint.size() == 120);
  std::size_t decisive_c = 0, decisive_j = 0;
  for (const auto& c : d.conditional) decisive_c += c.verdict != corpus::ConditionalVerdict::Equal;
  for (const auto& j : d.joint) decisive_j += j.verdict != corpus::JointVerdict::Equal;
  CHECK(d.sft.size() == decisive_c);
  CHECK(d.conditional_only.size() == decisive_c);
  CHECK(d.joint_only.size() == decisive_j);
  CHECK(d.merged.size() == decisive_c + decisive_j);
  for (const auto& c : d.conditional_only) CHECK(c.winner.instruction == c.loser.instruction);
  for (const auto& c : d.merged) {
    CHECK(synthetic::rule_score(c.winner.instruction, c.winner.response) >
          synthetic::rule_score(c.loser.instruction, c.loser.response));
  }
}

TEST_CASE("scaling_run") {
  const auto& w = world();
  synthetic::PlantedRuleClient client;
  judge::Judge j(client, judge_config(2));
  const auto& corpus = w.data.merged;

  SUBCASE("full-size point reproduces a direct run") {
    const std::vector<std::size_t> sizes{corpus.size()};
    auto curve = scaling_run(sizes, w.sft, corpus, w.corpus.test_set, w.pref, j, w.options, 5);
    REQUIRE(curve.points.size() == 1);
    auto direct = train::pref_train(w.sft, corpus, w.pref);
    auto report = run_eval(direct.model, w.corpus.test_set, j, w.options, curve.points[0].report.model_id);
    CHECK(curve.points[0].report == report);
    CHECK(curve.points[0].win_rate == report.averaged);
  }
  SUBCASE("repeat runs agree") {
    const std::vector<std::size_t> sizes{10, 40, 80};
    auto a = scaling_run(sizes, w.sft, corpus, w.corpus.test_set, w.pref, j, w.options, 5);
    auto b = scaling_run(sizes, w.sft, corpus, w.corpus.test_set, w.pref, j, w.options, 5);
    CHECK(a == b);
    REQUIRE(a.points.size() == 3);
    CHECK(a.points[1].size == 40);
    const std::string csv = scaling_csv(a);
    CHECK(csv.starts_with("size,win_rate\n10,"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    auto js = to_json(a);
    CHECK(js["points"].size() == 3);
    CHECK(js["points"][2]["win_rate"] == a.points[2].win_rate);
  }
  SUBCASE("invalid size lists") {
    CHECK(code_of([&] {
            scaling_run(std::vector<std::size_t>{corpus.size() + 1}, w.sft, corpus, w.corpus.test_set, w.pref, j,
                        w.options, 5);
          }) == Errc::SizeExceedsCorpus);
    CHECK(code_of([&] {
            scaling_run(std::vector<std::size_t>{20, 10}, w.sft, corpus, w.corpus.test_set, w.pref, j, w.options, 5);
          }) == Errc::ConfigInvalid);
    CHECK(code_of([&] {
            scaling_run(std::vector<std::size_t>{0, 10}, w.sft, corpus, w.corpus.test_set, w.pref, j, w.options, 5);
          }) == Errc::ConfigInvalid);
  }
}

TEST_CASE("ablation arms have the declared sizes and sources") {
  std::vector<TrainingComparison> cond, joint;
  for (int i = 0; i < 9; ++i) cond.push_back({{"c", "I", "w" + std::to_string(i)}, {"c", "I", "l"}});
  for (int i = 0; i < 14; ++i) joint.push_back({{"j", "J", "w" + std::to_string(i)}, {"j", "K", "l"}});
  auto d = ablation_data(cond, joint, 3);
  CHECK(d.arm_size == 9);
  CHECK(d.conditional_only.size() == 9);
  CHECK(d.joint_only.size() == 9);
  REQUIRE(d.mixed.size() == 9);
  std::size_t from_cond = 0;
  for (const auto& c : d.mixed) from_cond += c.winner.id == "c";
  CHECK(from_cond == 5);
  for (const auto& c : d.conditional_only) CHECK(c.winner.id == "c");
  for (const auto& c : d.joint_only) CHECK(c.winner.id == "j");
  std::set<std::string> distinct;
  for (const auto& c : d.joint_only) distinct.insert(c.winner.response);
  CHECK(distinct.size() == 9);

  CHECK(code_of([&] { ablation_data(std::span(cond).first(1), joint, 3); }) == Errc::InsufficientData);
  CHECK(code_of([&] { ablation_data(cond, std::vector<TrainingComparison>{}, 3); }) == Errc::InsufficientData);
}

TEST_CASE("ablation suite runs three complete arms; conditional-only tracks DPO") {
  const auto& w = world();
  synthetic::PlantedRuleClient client;
  judge::Judge j(client, judge_config(2));
  auto report =
      ablation_suite(w.sft, w.data.conditional_only, w.data.joint_only, w.corpus.test_set, w.pref, j, w.options, 8);
  REQUIRE(report.arms.size() == 3);
  CHECK(report.arms[0].name == "conditional-only");
  CHECK(report.arms[1].name == "joint-only");
  CHECK(report.arms[2].name == "mixed-50-50");
  const std::size_t n = std::min(w.data.conditional_only.size(), w.data.joint_only.size());
  CHECK(report.arm_size == n);
  CHECK(report.arms[2].conditional_count + report.arms[2].joint_count == n);
  for (const auto& arm : report.arms) {
    CHECK(arm.report.per_temperature.size() == w.options.temperatures.size());
    CHECK(arm.report.total == w.corpus.test_set.size() * w.options.temperatures.size());
  }
  auto js = to_json(report);
  CHECK(js["arms"].size() == 3);

  // The conditional arm is trained with JPO on same-instruction data; a DPO run
  // on the same set must follow the same trajectory.
  auto data = ablation_data(w.data.conditional_only, w.data.joint_only, 8);
  auto jpo_run = train::pref_train(w.sft, data.conditional_only, w.pref);
  auto dpo_cfg = w.pref;
  dpo_cfg.objective = train::Objective::dpo;
  auto dpo_run = train::pref_train(w.sft, data.conditional_only, dpo_cfg);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < jpo_run.model.parameter_count(); ++i) {
    max_diff = std::max(max_diff, std::abs(jpo_run.model.parameters()[i] - dpo_run.model.parameters()[i]));
  }
  CHECK(max_diff < 1e-9);
  CHECK(run_eval(jpo_run.model, w.corpus.test_set, j, w.options, "conditional-only") == report.arms[0].report);
}

TEST_CASE("win-rate report JSON") {
  WinRateReport r;
  r.model_id = "m";
  r.judge_id = "ai:j";
  r.per_temperature = {{0.5, 3, 1, 0, 0.75}};
  r.averaged = 0.75;
  r.wins = 3;
  r.losses = 1;
  r.total = 4;
  auto j = to_json(r);
  CHECK(j["model"] == "m");
  CHECK(j["averaged_win_rate"] == 0.75);
  CHECK(j["per_temperature"][0]["wins"] == 3);
  CHECK(j["total"] == 4);
}
