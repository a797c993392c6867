#include "jpo/corpus.hpp"

#include <unordered_set>

#include "jpo/error.hpp"
#include "jpo/util.hpp"

namespace jpo::corpus {

using nlohmann::json;

std::string_view to_string(ConditionalVerdict v) {
  switch (v) {
    case ConditionalVerdict::A: return "A";
    case ConditionalVerdict::B: return "B";
    case ConditionalVerdict::Equal: return "Equal";
  }
  return "Equal";
}

std::string_view to_string(JointVerdict v) {
  switch (v) {
    case JointVerdict::PairA: return "PairA";
    case JointVerdict::PairB: return "PairB";
    case JointVerdict::Equal: return "Equal";
  }
  return "Equal";
}

std::optional<ConditionalVerdict> parse_conditional_verdict(std::string_view s) {
  if (s == "A") return ConditionalVerdict::A;
  if (s == "B") return ConditionalVerdict::B;
  if (s == "Equal") return ConditionalVerdict::Equal;
  return std::nullopt;
}

std::optional<JointVerdict> parse_joint_verdict(std::string_view s) {
  if (s == "PairA") return JointVerdict::PairA;
  if (s == "PairB") return JointVerdict::PairB;
  if (s == "Equal") return JointVerdict::Equal;
  return std::nullopt;
}

std::string content_id(std::string_view instruction, std::string_view response) {
  std::string key;
  key.reserve(instruction.size() + response.size() + 1);
  key.append(instruction);
  key.push_back('\x1f');
  key.append(response);
  return sha256_hex(key).substr(0, 16);
}

std::vector<TripletRecord> dedupe_instructions(std::span<const TripletRecord> records) {
  std::unordered_set<std::string_view> seen;
  std::vector<TripletRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (seen.insert(r.instruction).second) out.push_back(r);
  }
  return out;
}

std::vector<InstructionResponsePair> build_sft_from_conditional(
    std::span<const ConditionalPreferenceRecord> prefs) {
  std::vector<InstructionResponsePair> out;
  for (const auto& p : prefs) {
    if (p.verdict == ConditionalVerdict::Equal) continue;
    const std::string& chosen = p.verdict == ConditionalVerdict::A ? p.response_a : p.response_b;
    out.push_back({content_id(p.instruction, chosen), p.instruction, chosen});
  }
  return out;
}

std::vector<InstructionResponsePair> select_single_responses(
    std::span<const TripletRecord> records, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<InstructionResponsePair> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const std::string& picked = rng.coin() ? r.response_a : r.response_b;
    out.push_back({content_id(r.instruction, picked), r.instruction, picked});
  }
  return out;
}

std::vector<JointCandidate> pair_for_joint(std::span<const InstructionResponsePair> pairs,
                                           std::uint64_t seed) {
  if (pairs.size() < 2) {
    throw Error(Errc::NoValidPairing, "joint pairing needs at least 2 instruction-response pairs");
  }
  Rng rng(seed);
  auto perm = random_derangement(pairs.size(), rng);
  std::vector<JointCandidate> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out.emplace_back(pairs[i], pairs[perm[i]]);
  return out;
}

JointPreferenceRecord conditional_to_joint(const ConditionalPreferenceRecord& record) {
  JointPreferenceRecord out;
  out.pair_a = {content_id(record.instruction, record.response_a), record.instruction,
                record.response_a};
  out.pair_b = {content_id(record.instruction, record.response_b), record.instruction,
                record.response_b};
  switch (record.verdict) {
    case ConditionalVerdict::A: out.verdict = JointVerdict::PairA; break;
    case ConditionalVerdict::B: out.verdict = JointVerdict::PairB; break;
    case ConditionalVerdict::Equal: out.verdict = JointVerdict::Equal; break;
  }
  out.annotator = record.annotator;
  out.explanation = record.explanation;
  return out;
}

std::vector<JointPreferenceRecord> merge_preference_sets(
    std::span<const ConditionalPreferenceRecord> conditional,
    std::span<const JointPreferenceRecord> joint) {
  std::vector<JointPreferenceRecord> out;
  out.reserve(conditional.size() + joint.size());
  for (const auto& c : conditional) out.push_back(conditional_to_joint(c));
  out.insert(out.end(), joint.begin(), joint.end());
  return out;
}

std::vector<TrainingComparison> to_training_set(std::span<const JointPreferenceRecord> records) {
  std::vector<TrainingComparison> out;
  for (const auto& r : records) {
    if (r.verdict == JointVerdict::PairA) out.push_back({r.pair_a, r.pair_b});
    else if (r.verdict == JointVerdict::PairB) out.push_back({r.pair_b, r.pair_a});
  }
  return out;
}

std::vector<TrainingComparison> cross_pair_proxy(
    std::span<const ConditionalPreferenceRecord> prefs, std::uint64_t seed) {
  std::vector<TrainingComparison> decisive;
  for (const auto& p : prefs) {
    auto j = conditional_to_joint(p);
    auto t = to_training_set(std::span<const JointPreferenceRecord>(&j, 1));
    if (!t.empty()) decisive.push_back(std::move(t.front()));
  }
  if (decisive.size() < 2) {
    throw Error(Errc::NoValidPairing, "proxy pairing needs at least 2 decisive records");
  }
  Rng rng(seed);
  auto perm = random_derangement(decisive.size(), rng);
  std::vector<TrainingComparison> out;
  out.reserve(decisive.size());
  for (std::size_t i = 0; i < decisive.size(); ++i) {
    out.push_back({decisive[i].winner, decisive[perm[i]].loser});
  }
  return out;
}

// --- JSON -------------------------------------------------------------------

namespace {

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(Errc::InvalidRecord, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(Errc::InvalidRecord, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

void require_instruction(const std::string& instruction) {
  if (instruction.empty()) throw Error(Errc::InvalidRecord, "instruction must be nonempty");
}

}  // namespace

void to_json(json& j, const TripletRecord& r) {
  j = json{{"id", r.id},
           {"instruction", r.instruction},
           {"response_a", r.response_a},
           {"response_b", r.response_b}};
}

void from_json(const json& j, TripletRecord& r) {
  r.instruction = required_string(j, "instruction");
  r.response_a = required_string(j, "response_a");
  r.response_b = required_string(j, "response_b");
  require_instruction(r.instruction);
  if (r.response_a == r.response_b) throw Error(Errc::InvalidRecord, "triplet responses must differ");
  auto id = optional_string(j, "id");
  r.id = id ? *id : content_id(r.instruction, r.response_a + '\x1f' + r.response_b);
}

void to_json(json& j, const InstructionResponsePair& r) {
  j = json{{"id", r.id}, {"instruction", r.instruction}, {"response", r.response}};
}

void from_json(const json& j, InstructionResponsePair& r) {
  r.instruction = required_string(j, "instruction");
  r.response = required_string(j, "response");
  require_instruction(r.instruction);
  auto id = optional_string(j, "id");
  r.id = id ? *id : content_id(r.instruction, r.response);
}

void to_json(json& j, const ConditionalPreferenceRecord& r) {
  j = json{{"id", r.triplet_id},
           {"instruction", r.instruction},
           {"response_a", r.response_a},
           {"response_b", r.response_b},
           {"verdict", to_string(r.verdict)},
           {"annotator", r.annotator}};
  if (r.explanation) j["explanation"] = *r.explanation;
}

void from_json(const json& j, ConditionalPreferenceRecord& r) {
  TripletRecord t = j.get<TripletRecord>();
  r.triplet_id = t.id;
  r.instruction = std::move(t.instruction);
  r.response_a = std::move(t.response_a);
  r.response_b = std::move(t.response_b);
  auto v = parse_conditional_verdict(required_string(j, "verdict"));
  if (!v) throw Error(Errc::InvalidRecord, "conditional verdict must be A, B or Equal");
  r.verdict = *v;
  r.annotator = required_string(j, "annotator");
  r.explanation = optional_string(j, "explanation");
}

void to_json(json& j, const JointPreferenceRecord& r) {
  j = json{{"pair_a", r.pair_a},
           {"pair_b", r.pair_b},
           {"verdict", to_string(r.verdict)},
           {"annotator", r.annotator}};
  if (r.explanation) j["explanation"] = *r.explanation;
}

void from_json(const json& j, JointPreferenceRecord& r) {
  if (!j.contains("pair_a") || !j.contains("pair_b")) {
    throw Error(Errc::InvalidRecord, "joint record needs pair_a and pair_b");
  }
  r.pair_a = j.at("pair_a").get<InstructionResponsePair>();
  r.pair_b = j.at("pair_b").get<InstructionResponsePair>();
  if (r.pair_a.id == r.pair_b.id) throw Error(Errc::InvalidRecord, "joint record pairs must differ");
  auto v = parse_joint_verdict(required_string(j, "verdict"));
  if (!v) throw Error(Errc::InvalidRecord, "joint verdict must be PairA, PairB or Equal");
  r.verdict = *v;
  r.annotator = required_string(j, "annotator");
  r.explanation = optional_string(j, "explanation");
}

void to_json(json& j, const TrainingComparison& r) {
  j = json{{"winner", r.winner}, {"loser", r.loser}};
}

void from_json(const json& j, TrainingComparison& r) {
  r.winner = j.at("winner").get<InstructionResponsePair>();
  r.loser = j.at("loser").get<InstructionResponsePair>();
  if (r.winner.id == r.loser.id) throw Error(Errc::InvalidRecord, "comparison sides must differ");
}

json candidate_to_json(const JointCandidate& c) {
  return json{{"pair_a", c.first}, {"pair_b", c.second}};
}

JointCandidate candidate_from_json(const json& j) {
  return {j.at("pair_a").get<InstructionResponsePair>(),
          j.at("pair_b").get<InstructionResponsePair>()};
}

template <typename T>
std::vector<T> parse_jsonl(std::string_view text) {
  std::vector<T> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json j = json::parse(line);
      if constexpr (std::is_same_v<T, JointCandidate>) {
        out.push_back(candidate_from_json(j));
      } else {
        out.push_back(j.get<T>());
      }
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidRecord, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
std::string to_jsonl(std::span<const T> records) {
  std::string out;
  for (const auto& r : records) {
    if constexpr (std::is_same_v<T, JointCandidate>) {
      out += candidate_to_json(r).dump();
    } else {
      out += json(r).dump();
    }
    out.push_back('\n');
  }
  return out;
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  try {
    return parse_jsonl<T>(read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::MissingInput) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> records) {
  write_file_atomic(path, to_jsonl(records));
}

#define JPO_INSTANTIATE_JSONL(T)                                          \
  template std::vector<T> parse_jsonl<T>(std::string_view);               \
  template std::string to_jsonl<T>(std::span<const T>);                   \
  template std::vector<T> read_jsonl<T>(const std::filesystem::path&);    \
  template void write_jsonl<T>(const std::filesystem::path&, std::span<const T>);

JPO_INSTANTIATE_JSONL(TripletRecord)
JPO_INSTANTIATE_JSONL(InstructionResponsePair)
JPO_INSTANTIATE_JSONL(ConditionalPreferenceRecord)
JPO_INSTANTIATE_JSONL(JointPreferenceRecord)
JPO_INSTANTIATE_JSONL(TrainingComparison)
JPO_INSTANTIATE_JSONL(JointCandidate)

#undef JPO_INSTANTIATE_JSONL

}  // namespace jpo::corpus
