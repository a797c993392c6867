#include "jpo/synthetic.hpp"

#include <array>
#include <cctype>

#include "jpo/error.hpp"
#include "jpo/util.hpp"

namespace jpo::synthetic {

namespace {

constexpr std::array<std::string_view, 6> kVerbs{"find", "list", "show", "count", "name", "give"};
constexpr std::array<std::string_view, 8> kAdjectives{"big", "small", "red", "blue", "old", "new", "fast", "slow"};
constexpr std::size_t kKeys = 16;
constexpr std::size_t kFillers = 8;

std::string key_token(std::size_t i) { return "k" + std::to_string(i); }
std::string filler_token(std::size_t i) { return "f" + std::to_string(i); }

bool is_key(std::string_view tok) { return tok.size() >= 2 && tok[0] == 'k' && std::isdigit(static_cast<unsigned char>(tok[1])); }

struct Instruction {
  std::string text;
  std::size_t key;
};

// Every verb/adjective/key combination, in a fixed enumeration order.
std::vector<Instruction> instruction_space() {
  std::vector<Instruction> out;
  for (std::size_t k = 0; k < kKeys; ++k) {
    for (auto verb : kVerbs) {
      const std::string tail = " " + key_token(k);
      out.push_back({std::string(verb) + tail, k});
      for (auto a1 : kAdjectives) {
        out.push_back({std::string(verb) + " " + std::string(a1) + tail, k});
        for (auto a2 : kAdjectives) {
          if (a1 == a2) continue;
          out.push_back({std::string(verb) + " " + std::string(a1) + " " + std::string(a2) + tail, k});
        }
      }
    }
  }
  return out;
}

std::string raw_response(const SyntheticConfig& cfg, std::size_t key, Rng& rng) {
  const std::size_t len = cfg.min_response_len + rng.uniform_index(cfg.max_response_len - cfg.min_response_len + 1);
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < len; ++i) {
    const double u = rng.uniform01();
    if (u < cfg.p_key) {
      toks.push_back(key_token(key));
    } else if (u < cfg.p_key + cfg.p_other_key) {
      std::size_t other = rng.uniform_index(kKeys - 1);
      if (other >= key) ++other;
      toks.push_back(key_token(other));
    } else if (rng.uniform01() < cfg.p_dominant_filler) {
      toks.push_back(filler_token(0));
    } else {
      toks.push_back(filler_token(1 + rng.uniform_index(kFillers - 1)));
    }
  }
  return join(toks, " ");
}

std::string gold_response(std::size_t key, Rng& rng) {
  std::vector<std::string> toks{key_token(key)};
  const std::size_t extra = 1 + rng.uniform_index(2);
  for (std::size_t i = 0; i < extra; ++i) toks.push_back(filler_token(rng.uniform_index(kFillers)));
  return join(toks, " ");
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_triplets == 0) throw Error(Errc::ConfigInvalid, "n_triplets must be positive");
  if (min_response_len == 0 || max_response_len < min_response_len) {
    throw Error(Errc::ConfigInvalid, "invalid response length range");
  }
  if (p_key < 0 || p_other_key < 0 || p_key + p_other_key > 1 || p_dominant_filler < 0 || p_dominant_filler > 1) {
    throw Error(Errc::ConfigInvalid, "response mixture probabilities out of range");
  }
}

lm::Vocabulary vocabulary() {
  std::vector<std::string> symbols;
  for (auto v : kVerbs) symbols.emplace_back(v);
  for (auto a : kAdjectives) symbols.emplace_back(a);
  for (std::size_t k = 0; k < kKeys; ++k) symbols.push_back(key_token(k));
  for (std::size_t f = 0; f < kFillers; ++f) symbols.push_back(filler_token(f));
  return lm::Vocabulary(std::move(symbols));
}

SyntheticCorpus generate(const SyntheticConfig& config) {
  config.validate();
  auto space = instruction_space();
  if (config.n_triplets + config.n_test > space.size()) {
    throw Error(Errc::ConfigInvalid, "requested more instructions than the space holds (" +
                                         std::to_string(space.size()) + ")");
  }
  Rng order(derive_seed(config.seed, 1));
  order.shuffle(std::span<Instruction>(space));

  SyntheticCorpus out;
  Rng rng(derive_seed(config.seed, 2));
  for (std::size_t i = 0; i < config.n_triplets; ++i) {
    const auto& ins = space[i];
    std::string a = raw_response(config, ins.key, rng);
    std::string b = raw_response(config, ins.key, rng);
    while (b == a) b = raw_response(config, ins.key, rng);
    out.triplets.push_back({"t" + std::to_string(i), ins.text, std::move(a), std::move(b)});
  }
  Rng gold(derive_seed(config.seed, 3));
  for (std::size_t i = 0; i < config.n_test; ++i) {
    const auto& ins = space[config.n_triplets + i];
    out.test_set.push_back({"g" + std::to_string(i), ins.text, gold_response(ins.key, gold)});
  }
  return out;
}

int rule_score(std::string_view instruction, std::string_view response) {
  const auto itoks = split_whitespace(instruction);
  if (itoks.empty()) return 0;
  const std::string& key = itoks.back();
  int score = 0;
  for (const auto& t : split_whitespace(response)) {
    if (t == key) {
      ++score;
    } else if (is_key(t)) {
      --score;
    }
  }
  return score;
}

std::string PlantedRuleClient::complete(const std::string& prompt, const judge::JudgeConfig&) {
  auto c = judge::parse_prompt(prompt);
  if (!c) return "unrecognized prompt";
  const std::string& instruction_b = c->mode == judge::Mode::joint ? c->instruction_b : c->instruction_a;
  const int a = rule_score(c->instruction_a, c->output_a);
  const int b = rule_score(instruction_b, c->output_b);
  return b > a ? "Output (b)" : "Output (a)";
}

}  // namespace jpo::synthetic
