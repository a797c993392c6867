#include <set>

#include "doctest.h"
#include "jpo/error.hpp"
#include "jpo/synthetic.hpp"
#include "jpo/util.hpp"

using namespace jpo;
using namespace jpo::synthetic;

namespace {

bool is_key(const std::string& t) { return t.size() >= 2 && t[0] == 'k' && std::isdigit(static_cast<unsigned char>(t[1])); }

const std::set<std::string> kVerbs{"find", "list", "show", "count", "name", "give"};
const std::set<std::string> kAdjectives{"big", "small", "red", "blue", "old", "new", "fast", "slow"};

}  // namespace

TEST_CASE("vocabulary holds the reserved symbols and 38 content symbols") {
  auto v = vocabulary();
  CHECK(v.size() == 3 + 6 + 8 + 16 + 8);
  CHECK_NOTHROW(v.id("k15"));
  CHECK_NOTHROW(v.id("f7"));
  CHECK_NOTHROW(v.id("slow"));
}

TEST_CASE("rule_score counts own keys minus other keys") {
  CHECK(rule_score("find k3", "k3") == 1);
  CHECK(rule_score("find red k3", "k3 k3 f0") == 2);
  CHECK(rule_score("find k3", "k3 k1 f0") == 0);
  CHECK(rule_score("find k3", "k1 k12") == -2);
  CHECK(rule_score("find k3", "f0 f1") == 0);
  CHECK(rule_score("", "k3") == 0);
  // "k13" is not "k3".
  CHECK(rule_score("show k3", "k13") == -1);
}

TEST_CASE("generated corpus respects the instruction grammar") {
  SyntheticConfig cfg;
  cfg.n_triplets = 600;
  cfg.n_test = 200;
  cfg.seed = 5;
  auto c = generate(cfg);
  REQUIRE(c.triplets.size() == 600);
  REQUIRE(c.test_set.size() == 200);
  auto vocab = vocabulary();
  std::set<std::string> train_instr, test_instr;
  for (std::size_t i = 0; i < c.triplets.size(); ++i) {
    const auto& t = c.triplets[i];
    CHECK(t.id == "t" + std::to_string(i));
    auto toks = split_whitespace(t.instruction);
    REQUIRE(toks.size() >= 2);
    REQUIRE(toks.size() <= 4);
    CHECK(kVerbs.contains(toks.front()));
    CHECK(is_key(toks.back()));
    std::set<std::string> adjs(toks.begin() + 1, toks.end() - 1);
    CHECK(adjs.size() == toks.size() - 2);
    for (const auto& a : adjs) CHECK(kAdjectives.contains(a));
    CHECK(t.response_a != t.response_b);
    for (const auto* r : {&t.response_a, &t.response_b}) {
      auto rt = split_whitespace(*r);
      CHECK(rt.size() >= cfg.min_response_len);
      CHECK(rt.size() <= cfg.max_response_len);
      CHECK_NOTHROW(vocab.encode(*r));
    }
    train_instr.insert(t.instruction);
  }
  CHECK(train_instr.size() == 600);
  for (const auto& g : c.test_set) {
    CHECK(rule_score(g.instruction, g.response) == 1);
    CHECK_FALSE(train_instr.contains(g.instruction));
    test_instr.insert(g.instruction);
    auto gt = split_whitespace(g.response);
    CHECK(gt.size() >= 2);
    CHECK(gt.size() <= 3);
  }
  CHECK(test_instr.size() == 200);
}

TEST_CASE("instruction space holds 6240 instructions") {
  // 16 keys x 6 verbs x (1 + 8 + 8*7) adjective choices.
  SyntheticConfig cfg;
  cfg.n_triplets = 6000;
  cfg.n_test = 240;
  CHECK(generate(cfg).test_set.size() == 240);
  cfg.n_test = 241;
  CHECK_THROWS_AS(generate(cfg), Error);
}

TEST_CASE("response mixture roughly follows its parameters") {
  SyntheticConfig cfg;
  cfg.n_triplets = 3000;
  cfg.n_test = 0;
  cfg.seed = 9;
  auto c = generate(cfg);
  std::size_t own = 0, other = 0, f0 = 0, total = 0;
  for (const auto& t : c.triplets) {
    const std::string key = split_whitespace(t.instruction).back();
    for (const auto* r : {&t.response_a, &t.response_b}) {
      for (const auto& tok : split_whitespace(*r)) {
        ++total;
        if (tok == key) ++own;
        else if (is_key(tok)) ++other;
        else if (tok == "f0") ++f0;
      }
    }
  }
  // The a != b redraw skews these slightly; bounds are loose on purpose.
  const double n = static_cast<double>(total);
  CHECK(own / n == doctest::Approx(cfg.p_key).epsilon(0.15));
  CHECK(other / n == doctest::Approx(cfg.p_other_key).epsilon(0.15));
  CHECK(f0 / n == doctest::Approx((1 - cfg.p_key - cfg.p_other_key) * cfg.p_dominant_filler).epsilon(0.15));
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticConfig cfg;
  cfg.seed = 17;
  auto a = generate(cfg);
  auto b = generate(cfg);
  CHECK(a.triplets == b.triplets);
  CHECK(a.test_set == b.test_set);
  cfg.seed = 18;
  CHECK(generate(cfg).triplets != a.triplets);
}

TEST_CASE("config validation") {
  SyntheticConfig cfg;
  cfg.n_triplets = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.max_response_len = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.p_key = 0.9;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("planted-rule oracle answers by the rule under the order flip") {
  PlantedRuleClient client;
  judge::JudgeConfig jc;
  jc.model_name = "oracle";
  jc.max_concurrency = 1;
  judge::Judge j(client, jc);
  SyntheticConfig cfg;
  cfg.seed = 2;
  auto c = generate(cfg);
  for (const auto& t : c.triplets) {
    const int a = rule_score(t.instruction, t.response_a);
    const int b = rule_score(t.instruction, t.response_b);
    auto v = j.adjudicate(judge::conditional_comparison(t.instruction, t.response_a, t.response_b));
    const auto want = a > b ? judge::Choice::ResponseA : a < b ? judge::Choice::ResponseB : judge::Choice::Equal;
    CHECK(v.choice == want);
  }
  // Joint comparisons score each side against its own instruction.
  const corpus::InstructionResponsePair p{"p", "find k1", "k1 f0"};
  const corpus::InstructionResponsePair q{"q", "list k2", "k1 f0"};
  CHECK(j.adjudicate(judge::joint_comparison(p, q)).choice == judge::Choice::ResponseA);
  CHECK(j.adjudicate(judge::joint_comparison(q, p)).choice == judge::Choice::ResponseB);
  CHECK(client.complete("not a prompt", jc) == "unrecognized prompt");
}
