#pragma once

// AI feedback: prompt rendering, verdict parsing, the order-flip tie rule,
// a persistent completion cache and bounded-parallel annotation.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jpo/corpus.hpp"

namespace jpo::judge {

enum class Choice { ResponseA, ResponseB, Equal };
enum class ParsedChoice { A, B };

std::string_view to_string(Choice c);

struct JudgeVerdict {
  Choice choice = Choice::Equal;
  std::string raw_first;
  std::string raw_swapped;
  bool degraded = false;  // a sub-query stayed unparsable after retries
};

struct JudgeConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-3.5-turbo-0125";
  std::string api_key_env = "JPO_JUDGE_API_KEY";
  double request_temperature = 0.0;
  int max_retries = 2;
  std::filesystem::path cache_path;  // empty disables the cache
  int max_concurrency = 4;
  int timeout_seconds = 60;

  void validate() const;
};

enum class Mode { conditional, joint };

std::string_view to_string(Mode m);
// Throws Errc::ConfigInvalid.
Mode parse_mode(std::string_view name);

// Conditional comparisons use instruction_a only.
struct Comparison {
  Mode mode = Mode::conditional;
  std::string instruction_a;
  std::string output_a;
  std::string instruction_b;
  std::string output_b;
};

Comparison conditional_comparison(std::string instruction, std::string output_a,
                                  std::string output_b);
Comparison joint_comparison(const corpus::InstructionResponsePair& a,
                            const corpus::InstructionResponsePair& b);
Comparison swapped(const Comparison& c);

// Throw Errc::EmptyField when a slot is empty.
std::string render_conditional_prompt(std::string_view instruction, std::string_view output_a,
                                      std::string_view output_b);
std::string render_joint_prompt(std::string_view instruction_a, std::string_view output_a,
                                std::string_view instruction_b, std::string_view output_b);
std::string render_prompt(const Comparison& c);

// Recovers the slots from a rendered prompt; nullopt when it is not one of ours.
std::optional<Comparison> parse_prompt(std::string_view prompt);

// Throws Errc::ParseFailure on absent or ambiguous markers.
ParsedChoice parse_choice(std::string_view completion);

// first: verdict in the given order; swapped_raw: verdict as printed for the
// swapped query (before remapping). Equal stands for an unusable sub-query.
Choice resolve_order_flip(Choice first, Choice swapped_raw);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the completion text. Throws Errc::JudgeUnavailable on transport
  // failure. Must be safe to call concurrently.
  virtual std::string complete(const std::string& prompt, const JudgeConfig& config) = 0;
};

class CallbackClient : public ChatClient {
 public:
  using Fn = std::function<std::string(const std::string&)>;
  explicit CallbackClient(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt, const JudgeConfig&) override { return fn_(prompt); }

 private:
  Fn fn_;
};

// Chat-completions over HTTP(S). The bearer token is read from
// config.api_key_env when that variable is set.
class HttpChatClient : public ChatClient {
 public:
  std::string complete(const std::string& prompt, const JudgeConfig& config) override;
};

// Append-only JSONL {prompt_hash, completion, timestamp}.
class CompletionCache {
 public:
  CompletionCache() = default;
  explicit CompletionCache(std::filesystem::path path);

  static std::string key(std::string_view model_name, std::string_view prompt);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& completion);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
};

class Judge {
 public:
  Judge(ChatClient& client, JudgeConfig config);

  JudgeVerdict adjudicate(const Comparison& c);
  // Runs up to max_concurrency adjudications at once; output order matches
  // input. The first failure by index is rethrown after all workers stop.
  std::vector<JudgeVerdict> adjudicate_all(std::span<const Comparison> items);

  const JudgeConfig& config() const { return config_; }
  std::string annotator_tag() const { return "ai:" + config_.model_name; }
  std::size_t request_count() const { return requests_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  // nullopt when the completion never parsed.
  std::optional<ParsedChoice> query(const std::string& prompt, std::string& raw);

  ChatClient& client_;
  JudgeConfig config_;
  CompletionCache cache_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

// Throw Errc::EmptyDataset on empty input.
std::vector<corpus::ConditionalPreferenceRecord> annotate_conditional(
    std::span<const corpus::TripletRecord> records, Judge& judge);
std::vector<corpus::JointPreferenceRecord> annotate_joint(
    std::span<const corpus::JointCandidate> candidates, Judge& judge);

}  // namespace jpo::judge
