#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <string>

#include "jpo/error.hpp"
#include "jpo/tinylm.hpp"
#include "jpo/util.hpp"

namespace jpo::lm {

// --- Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> content_symbols) {
  symbols_ = {std::string(kBosSymbol), std::string(kEosSymbol), std::string(kSepSymbol)};
  symbols_.insert(symbols_.end(), std::make_move_iterator(content_symbols.begin()),
                  std::make_move_iterator(content_symbols.end()));
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw Error(Errc::InvalidRecord, "vocabulary symbols must be nonempty");
    if (!index_.emplace(symbols_[i], static_cast<Token>(i)).second) {
      throw Error(Errc::InvalidRecord, "duplicate vocabulary symbol '" + symbols_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::from_texts(std::span<const std::string> texts) {
  std::set<std::string> distinct;
  for (const auto& text : texts) {
    for (auto& tok : split_whitespace(text)) {
      if (tok != kBosSymbol && tok != kEosSymbol && tok != kSepSymbol) distinct.insert(std::move(tok));
    }
  }
  return Vocabulary(std::vector<std::string>(distinct.begin(), distinct.end()));
}

const std::string& Vocabulary::symbol(Token t) const {
  if (t >= symbols_.size()) throw Error(Errc::UnknownToken, "token id " + std::to_string(t) + " out of range");
  return symbols_[t];
}

Token Vocabulary::id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw Error(Errc::UnknownToken, "unknown token '" + std::string(symbol) + "'");
  return it->second;
}

std::vector<Token> Vocabulary::encode(std::string_view text) const {
  std::vector<Token> out;
  for (const auto& tok : split_whitespace(text)) out.push_back(id(tok));
  return out;
}

std::string Vocabulary::decode(std::span<const Token> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += symbol(tokens[i]);
  }
  return out;
}

// --- PolicyModel --------------------------------------------------------------

namespace {

std::size_t param_count_for(std::size_t v, const Architecture& arch) {
  return v + v * v + arch.max_segment_position * v + v * v;
}

void log_softmax_inplace(std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (double& l : logits) l -= lse;
}

}  // namespace

PolicyModel::PolicyModel(Vocabulary vocab, Architecture arch, std::uint64_t seed)
    : vocab_(std::move(vocab)), arch_(arch), seed_(seed) {
  if (vocab_.size() < 4) throw Error(Errc::InvalidRecord, "vocabulary needs at least one content symbol");
  if (arch_.max_segment_position == 0) throw Error(Errc::InvalidRecord, "max_segment_position must be > 0");
  params_.assign(param_count_for(vocab_.size(), arch_), 0.0);
}

PolicyModel PolicyModel::random(Vocabulary vocab, Architecture arch, std::uint64_t seed,
                                double scale) {
  PolicyModel m(std::move(vocab), arch, seed);
  Rng rng(seed);
  for (double& p : m.params_) p = scale * rng.normal();
  return m;
}

std::size_t PolicyModel::bias_index(Token next) const { return next; }

std::size_t PolicyModel::prev_index(Token prev, Token next) const {
  const std::size_t v = vocab_.size();
  return v + static_cast<std::size_t>(prev) * v + next;
}

std::size_t PolicyModel::position_index(std::size_t segment_position, Token next) const {
  const std::size_t v = vocab_.size();
  const std::size_t pos = std::min(segment_position, arch_.max_segment_position - 1);
  return v + v * v + pos * v + next;
}

std::size_t PolicyModel::bag_index(Token present, Token next) const {
  const std::size_t v = vocab_.size();
  return v + v * v + arch_.max_segment_position * v + static_cast<std::size_t>(present) * v + next;
}

namespace {

// Incrementally maintained prefix features.
struct PrefixState {
  std::vector<char> seen;
  std::vector<Token> instruction_set;  // distinct instruction tokens, first-seen order
  std::size_t length = 0;
  std::size_t last_boundary = 0;
  bool in_instruction = true;

  explicit PrefixState(std::size_t vocab_size) : seen(vocab_size, 0) {}

  void push(Token t) {
    if (t == Vocabulary::kSep) in_instruction = false;
    if (in_instruction && t != Vocabulary::kBos && !seen[t]) {
      seen[t] = 1;
      instruction_set.push_back(t);
    }
    if (t == Vocabulary::kBos || t == Vocabulary::kSep) last_boundary = length;
    ++length;
  }
  std::size_t segment_position() const { return length - 1 - last_boundary; }
};

void check_tokens(std::span<const Token> seq, std::size_t vocab_size) {
  for (Token t : seq) {
    if (t >= vocab_size) throw Error(Errc::UnknownToken, "token id " + std::to_string(t) + " out of range");
  }
}

}  // namespace

namespace detail {

void logits_from_state(const PolicyModel& m, const PrefixState& st, Token prev,
                       std::vector<double>& logits) {
  const std::size_t v = m.vocab().size();
  const auto p = m.parameters();
  logits.assign(v, 0.0);
  const double* bias = &p[m.bias_index(0)];
  const double* prev_row = &p[m.prev_index(prev, 0)];
  const double* pos_row = &p[m.position_index(st.segment_position(), 0)];
  for (std::size_t j = 0; j < v; ++j) logits[j] = bias[j] + prev_row[j] + pos_row[j];
  for (Token u : st.instruction_set) {
    const double* bag_row = &p[m.bag_index(u, 0)];
    for (std::size_t j = 0; j < v; ++j) logits[j] += bag_row[j];
  }
}

}  // namespace detail

std::vector<double> PolicyModel::next_token_logits(std::span<const Token> prefix) const {
  if (prefix.empty() || prefix.front() != Vocabulary::kBos) {
    throw Error(Errc::EmptySequence, "prefix must start with BOS");
  }
  check_tokens(prefix, vocab_.size());
  PrefixState st(vocab_.size());
  for (Token t : prefix) st.push(t);
  std::vector<double> logits;
  detail::logits_from_state(*this, st, prefix.back(), logits);
  return logits;
}

std::vector<double> PolicyModel::next_token_logprobs(std::span<const Token> prefix) const {
  auto logits = next_token_logits(prefix);
  log_softmax_inplace(logits);
  return logits;
}

double PolicyModel::score(std::span<const Token> seq, std::size_t first_scored,
                          std::span<double> grad, double scale) const {
  if (seq.size() < 2) throw Error(Errc::EmptySequence, "nothing to score");
  if (seq.front() != Vocabulary::kBos) throw Error(Errc::EmptySequence, "sequence must start with BOS");
  check_tokens(seq, vocab_.size());
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != params_.size()) {
    throw Error(Errc::LengthMismatch, "gradient buffer size mismatch");
  }
  first_scored = std::max<std::size_t>(first_scored, 1);

  const std::size_t v = vocab_.size();
  PrefixState st(v);
  std::vector<double> logits;
  double total = 0.0;
  st.push(seq[0]);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    if (t >= first_scored) {
      detail::logits_from_state(*this, st, seq[t - 1], logits);
      log_softmax_inplace(logits);
      const Token target = seq[t];
      total += logits[target];
      if (want_grad) {
        // d log p(target) / d logit_j = [j == target] - p_j
        std::vector<double>& g = logits;
        for (std::size_t j = 0; j < v; ++j) g[j] = -scale * std::exp(g[j]);
        g[target] += scale;
        double* gb = &grad[bias_index(0)];
        double* gp = &grad[prev_index(seq[t - 1], 0)];
        double* gs = &grad[position_index(st.segment_position(), 0)];
        for (std::size_t j = 0; j < v; ++j) {
          gb[j] += g[j];
          gp[j] += g[j];
          gs[j] += g[j];
        }
        for (Token u : st.instruction_set) {
          double* gbag = &grad[bag_index(u, 0)];
          for (std::size_t j = 0; j < v; ++j) gbag[j] += g[j];
        }
      }
    }
    st.push(seq[t]);
  }
  return total;
}

std::string PolicyModel::checksum() const {
  return sha256_hex(std::string_view(reinterpret_cast<const char*>(params_.data()),
                                     params_.size() * sizeof(double)));
}

// --- log-probabilities ------------------------------------------------------

std::vector<Token> instruction_prefix(std::span<const Token> instruction) {
  std::vector<Token> seq;
  seq.reserve(instruction.size() + 2);
  seq.push_back(Vocabulary::kBos);
  seq.insert(seq.end(), instruction.begin(), instruction.end());
  seq.push_back(Vocabulary::kSep);
  return seq;
}

std::vector<Token> full_sequence(std::span<const Token> instruction, std::span<const Token> response) {
  auto seq = instruction_prefix(instruction);
  seq.insert(seq.end(), response.begin(), response.end());
  seq.push_back(Vocabulary::kEos);
  return seq;
}

namespace {

void require_nonempty(std::span<const Token> tokens, const char* what) {
  if (tokens.empty()) throw Error(Errc::EmptySequence, std::string(what) + " is empty");
}

}  // namespace

double sequence_logprob(const PolicyModel& model, std::span<const Token> tokens) {
  require_nonempty(tokens, "sequence");
  std::vector<Token> seq;
  seq.reserve(tokens.size() + 1);
  seq.push_back(Vocabulary::kBos);
  seq.insert(seq.end(), tokens.begin(), tokens.end());
  return model.score(seq, 1);
}

double conditional_logprob(const PolicyModel& model, std::span<const Token> instruction,
                           std::span<const Token> response) {
  require_nonempty(instruction, "instruction");
  require_nonempty(response, "response");
  auto seq = full_sequence(instruction, response);
  return model.score(seq, instruction.size() + 2);
}

double prefix_logprob(const PolicyModel& model, std::span<const Token> instruction) {
  require_nonempty(instruction, "instruction");
  auto seq = instruction_prefix(instruction);
  return model.score(seq, 1);
}

double joint_logprob(const PolicyModel& model, std::span<const Token> instruction,
                     std::span<const Token> response) {
  require_nonempty(instruction, "instruction");
  require_nonempty(response, "response");
  auto seq = full_sequence(instruction, response);
  return model.score(seq, 1);
}

std::vector<Token> sample(const PolicyModel& model, std::span<const Token> instruction,
                          double temperature, std::size_t max_len, std::uint64_t seed) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::InvalidTemperature, "temperature must be finite and > 0");
  }
  require_nonempty(instruction, "instruction");
  check_tokens(instruction, model.vocab().size());
  Rng rng(seed);
  const std::size_t v = model.vocab().size();
  PrefixState st(v);
  auto prefix = instruction_prefix(instruction);
  for (Token t : prefix) st.push(t);
  Token prev = prefix.back();
  std::vector<Token> out;
  std::vector<double> logits, probs(v);
  while (out.size() < max_len) {
    detail::logits_from_state(model, st, prev, logits);
    double mx = -INFINITY;
    for (double& l : logits) {
      l /= temperature;
      mx = std::max(mx, l);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < v; ++j) sum += probs[j] = std::exp(logits[j] - mx);
    double u = rng.uniform01() * sum;
    Token next = Vocabulary::kEos;
    for (std::size_t j = 0; j < v; ++j) {
      if (probs[j] <= 0.0) continue;
      next = static_cast<Token>(j);
      if (u < probs[j]) break;
      u -= probs[j];
    }
    if (next == Vocabulary::kEos) break;
    out.push_back(next);
    st.push(next);
    prev = next;
  }
  return out;
}

}  // namespace jpo::lm
