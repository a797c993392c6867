#pragma once

// Desk-scale corpus with a planted preference rule. An instruction is a verb,
// up to two adjectives and a key token (always last). A response scores +1 for
// every copy of the instruction's key and -1 for every other key; higher wins.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jpo/corpus.hpp"
#include "jpo/judge.hpp"
#include "jpo/tinylm.hpp"

namespace jpo::synthetic {

struct SyntheticConfig {
  std::size_t n_triplets = 600;
  std::size_t n_test = 100;
  std::uint64_t seed = 0;
  // Per-token mixture of raw responses. The remainder is filler, most of it
  // the single dominant filler "f0".
  double p_key = 0.2;
  double p_other_key = 0.15;
  double p_dominant_filler = 0.6;  // share of filler draws that are f0
  std::size_t min_response_len = 2;
  std::size_t max_response_len = 4;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<corpus::TripletRecord> triplets;
  // Unseen instructions with gold responses scoring exactly 1.
  std::vector<corpus::InstructionResponsePair> test_set;
};

lm::Vocabulary vocabulary();

SyntheticCorpus generate(const SyntheticConfig& config);

int rule_score(std::string_view instruction, std::string_view response);

// Judges rendered prompts by the planted rule. On equal scores it always
// answers "Output (a)", so the order flip turns ties into Equal.
class PlantedRuleClient : public judge::ChatClient {
 public:
  std::string complete(const std::string& prompt, const judge::JudgeConfig& config) override;
};

}  // namespace jpo::synthetic
