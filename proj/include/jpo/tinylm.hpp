#pragma once

// A compact autoregressive language model with exact sequence likelihoods.
//
// Next-token logits are a log-linear function of three features of the
// prefix: the previous token, the position inside the current segment
// (segments start after BOS and after SEP), and the set of distinct tokens
// seen so far in the instruction. The set feature is what lets a response
// depend on which words the instruction contained. Every sequence is laid out as
//
//     BOS instruction... SEP response... EOS
//
// so joint and conditional log-probabilities factor exactly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace jpo::lm {

using Token = std::uint32_t;

class Vocabulary {
 public:
  static constexpr Token kBos = 0;
  static constexpr Token kEos = 1;
  static constexpr Token kSep = 2;
  static constexpr std::string_view kBosSymbol = "<bos>";
  static constexpr std::string_view kEosSymbol = "<eos>";
  static constexpr std::string_view kSepSymbol = "<sep>";

  Vocabulary();  // reserved symbols only; not a usable model vocabulary

  // Reserved symbols come first; content symbols keep their given order and
  // must be distinct from each other and from the reserved ones.
  explicit Vocabulary(std::vector<std::string> content_symbols);

  // Sorted distinct whitespace tokens of the given texts.
  static Vocabulary from_texts(std::span<const std::string> texts);

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& symbol(Token t) const;

  // Throws Errc::UnknownToken.
  Token id(std::string_view symbol) const;
  std::vector<Token> encode(std::string_view text) const;
  std::string decode(std::span<const Token> tokens) const;

  bool operator==(const Vocabulary& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, Token> index_;
};

struct Architecture {
  // Segment positions at or beyond this share one embedding row.
  std::size_t max_segment_position = 12;

  bool operator==(const Architecture&) const = default;
};

class PolicyModel {
 public:
  // All-zero parameters: the uniform distribution at every context.
  PolicyModel(Vocabulary vocab, Architecture arch, std::uint64_t seed);

  // Gaussian parameters with the given standard deviation.
  static PolicyModel random(Vocabulary vocab, Architecture arch, std::uint64_t seed,
                            double scale);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const Architecture& architecture() const noexcept { return arch_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> mutable_parameters() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  // Parameter layout: bias | previous-token table | position table | bag table.
  std::size_t bias_index(Token next) const;
  std::size_t prev_index(Token prev, Token next) const;
  std::size_t position_index(std::size_t segment_position, Token next) const;
  std::size_t bag_index(Token present, Token next) const;

  // Log-probabilities of the next token after a prefix that starts with BOS.
  std::vector<double> next_token_logprobs(std::span<const Token> prefix) const;
  std::vector<double> next_token_logits(std::span<const Token> prefix) const;

  // Sum of log p(seq[t] | seq[<t]) for t >= first_scored. seq[0] must be BOS.
  // When grad is non-empty, adds scale * d(sum)/d(parameters) into it.
  double score(std::span<const Token> seq, std::size_t first_scored, std::span<double> grad = {},
               double scale = 1.0) const;

  // SHA-256 over the raw parameter bytes.
  std::string checksum() const;

 private:
  Vocabulary vocab_;
  Architecture arch_;
  std::uint64_t seed_;
  std::vector<double> params_;
};

// Full token layouts used project-wide.
std::vector<Token> instruction_prefix(std::span<const Token> instruction);  // BOS I SEP
std::vector<Token> full_sequence(std::span<const Token> instruction,
                                 std::span<const Token> response);          // BOS I SEP R EOS

// sum_t log p(token_t | BOS, token_<t)
double sequence_logprob(const PolicyModel& model, std::span<const Token> tokens);
// log p(R, EOS | BOS I SEP)
double conditional_logprob(const PolicyModel& model, std::span<const Token> instruction,
                           std::span<const Token> response);
// log p(I, SEP) from the start of sequence
double prefix_logprob(const PolicyModel& model, std::span<const Token> instruction);
// log p(I, SEP, R, EOS) = prefix_logprob + conditional_logprob
double joint_logprob(const PolicyModel& model, std::span<const Token> instruction,
                     std::span<const Token> response);

// Samples response tokens (EOS excluded) from softmax(logits / temperature)
// until EOS or max_len tokens. Throws Errc::InvalidTemperature.
std::vector<Token> sample(const PolicyModel& model, std::span<const Token> instruction,
                          double temperature, std::size_t max_len, std::uint64_t seed);

// Versioned binary checkpoint.
void save_checkpoint(const PolicyModel& model, const std::filesystem::path& path);
PolicyModel load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const PolicyModel& model);
PolicyModel deserialize_checkpoint(std::string_view bytes);

}  // namespace jpo::lm
