#pragma once

// Instruction-response records and the construction of every preference
// dataset used for training: deduplicated triplets, single-response sets,
// joint pairings, merged sets and de-tied training comparisons.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace jpo::corpus {

struct TripletRecord {
  std::string id;
  std::string instruction;
  std::string response_a;
  std::string response_b;

  bool operator==(const TripletRecord&) const = default;
};

struct InstructionResponsePair {
  std::string id;
  std::string instruction;
  std::string response;

  bool operator==(const InstructionResponsePair&) const = default;
};

enum class ConditionalVerdict { A, B, Equal };
enum class JointVerdict { PairA, PairB, Equal };

struct ConditionalPreferenceRecord {
  std::string triplet_id;
  std::string instruction;
  std::string response_a;
  std::string response_b;
  ConditionalVerdict verdict = ConditionalVerdict::Equal;
  std::string annotator;
  std::optional<std::string> explanation;

  bool operator==(const ConditionalPreferenceRecord&) const = default;
};

struct JointPreferenceRecord {
  InstructionResponsePair pair_a;
  InstructionResponsePair pair_b;
  JointVerdict verdict = JointVerdict::Equal;
  std::string annotator;
  std::optional<std::string> explanation;

  bool operator==(const JointPreferenceRecord&) const = default;
};

// A de-tied comparison: never built from an Equal verdict.
struct TrainingComparison {
  InstructionResponsePair winner;
  InstructionResponsePair loser;

  bool operator==(const TrainingComparison&) const = default;
};

using JointCandidate = std::pair<InstructionResponsePair, InstructionResponsePair>;

std::string_view to_string(ConditionalVerdict v);
std::string_view to_string(JointVerdict v);
std::optional<ConditionalVerdict> parse_conditional_verdict(std::string_view s);
std::optional<JointVerdict> parse_joint_verdict(std::string_view s);

// Stable 16-hex-digit content id used when an input record carries no id.
std::string content_id(std::string_view instruction, std::string_view response);

// --- construction operations -------------------------------------------

std::vector<TripletRecord> dedupe_instructions(std::span<const TripletRecord> records);

std::vector<InstructionResponsePair> build_sft_from_conditional(
    std::span<const ConditionalPreferenceRecord> prefs);

std::vector<InstructionResponsePair> select_single_responses(
    std::span<const TripletRecord> records, std::uint64_t seed);

// Throws Errc::NoValidPairing when fewer than two pairs are given.
std::vector<JointCandidate> pair_for_joint(std::span<const InstructionResponsePair> pairs,
                                           std::uint64_t seed);

JointPreferenceRecord conditional_to_joint(const ConditionalPreferenceRecord& record);

std::vector<JointPreferenceRecord> merge_preference_sets(
    std::span<const ConditionalPreferenceRecord> conditional,
    std::span<const JointPreferenceRecord> joint);

std::vector<TrainingComparison> to_training_set(std::span<const JointPreferenceRecord> records);

// Chosen pair of one record against the rejected pair of a different record.
std::vector<TrainingComparison> cross_pair_proxy(
    std::span<const ConditionalPreferenceRecord> prefs, std::uint64_t seed);

// --- JSONL ----------------------------------------------------------------

void to_json(nlohmann::json& j, const TripletRecord& r);
void from_json(const nlohmann::json& j, TripletRecord& r);
void to_json(nlohmann::json& j, const InstructionResponsePair& r);
void from_json(const nlohmann::json& j, InstructionResponsePair& r);
void to_json(nlohmann::json& j, const ConditionalPreferenceRecord& r);
void from_json(const nlohmann::json& j, ConditionalPreferenceRecord& r);
void to_json(nlohmann::json& j, const JointPreferenceRecord& r);
void from_json(const nlohmann::json& j, JointPreferenceRecord& r);
void to_json(nlohmann::json& j, const TrainingComparison& r);
void from_json(const nlohmann::json& j, TrainingComparison& r);

nlohmann::json candidate_to_json(const JointCandidate& c);
JointCandidate candidate_from_json(const nlohmann::json& j);

// Parses one JSON object per non-empty line. Errors name the offending line.
template <typename T>
std::vector<T> parse_jsonl(std::string_view text);

template <typename T>
std::string to_jsonl(std::span<const T> records);

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path);

template <typename T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> records);

}  // namespace jpo::corpus
