#pragma once

// Agreement between annotators and the conditional-vs-joint interplay
// analysis: joint comparisons bucketed by the conditional labels of their
// two sides.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpo/corpus.hpp"

namespace jpo::interplay {

enum class PreferenceLabel { Chosen, Reject, Equal };

std::string_view to_string(PreferenceLabel l);

struct LabelMap {
  // (instruction, response) -> label
  std::map<std::pair<std::string, std::string>, PreferenceLabel> labels;
  std::size_t conflicts = 0;  // later records disagreeing with the kept label

  std::optional<PreferenceLabel> find(const std::string& instruction, const std::string& response) const;
};

// Duplicates keep the first label seen.
LabelMap assign_conditional_labels(std::span<const corpus::ConditionalPreferenceRecord> prefs);

enum class BucketId { CC, RR, CR, EC, ER, EE };
inline constexpr std::array<BucketId, 6> kBuckets{BucketId::CC, BucketId::RR, BucketId::CR,
                                                   BucketId::EC, BucketId::ER, BucketId::EE};
std::string_view to_string(BucketId b);

// Left/right refer to the oriented pair: CR puts the Chosen side left, the
// E* buckets put the Equal side left, CC/RR/EE keep the record's order.
struct Bucket {
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t equal = 0;

  std::size_t count() const { return left + right + equal; }
  // Absent when the bucket is empty.
  std::optional<std::array<double, 3>> fractions() const;

  bool operator==(const Bucket&) const = default;
};

struct InterplayReport {
  std::array<Bucket, kBuckets.size()> buckets{};
  std::size_t total = 0;
  std::size_t excluded = 0;  // a side had no conditional label
  std::size_t label_conflicts = 0;

  const Bucket& bucket(BucketId b) const { return buckets[static_cast<std::size_t>(b)]; }
  Bucket& bucket(BucketId b) { return buckets[static_cast<std::size_t>(b)]; }
  std::size_t included() const { return total - excluded; }

  // CC and RR pooled: (decisive, equal) fractions.
  std::optional<std::array<double, 2>> cc_rr_decisiveness() const;
  // Fraction of CR comparisons where the chosen side was not preferred.
  std::optional<double> cr_chosen_not_preferred() const;

  bool operator==(const InterplayReport&) const = default;
};

InterplayReport interplay_report(const LabelMap& labels, std::span<const corpus::JointPreferenceRecord> joints);

// Fraction of positions with identical verdicts; Equal is its own category.
// Throws Errc::LengthMismatch, Errc::EmptyDataset.
double agreement(std::span<const corpus::ConditionalVerdict> a, std::span<const corpus::ConditionalVerdict> b);
double agreement(std::span<const corpus::JointVerdict> a, std::span<const corpus::JointVerdict> b);

struct AgreementEntry {
  std::string dataset;
  std::string protocol;  // e.g. "conditional", "joint"
  std::string pairing;   // e.g. "H-H", "H-AI"
  double fraction = 0.0;
  std::size_t comparisons = 0;
};

struct AgreementReport {
  std::vector<AgreementEntry> entries;
  // Unweighted mean over entries, per pairing.
  std::map<std::string, double> average_by_pairing;
  double overall_average = 0.0;
};

AgreementReport agreement_report(std::vector<AgreementEntry> entries);
nlohmann::json to_json(const AgreementReport& r);

nlohmann::json to_json(const InterplayReport& r);
InterplayReport interplay_from_json(const nlohmann::json& j);
// bucket,left_preferred,right_preferred,equal,count with one row per bucket.
std::string to_csv(const InterplayReport& r);

// Writes <stem>.json and <stem>.csv.
void emit_report(const InterplayReport& r, const std::filesystem::path& stem);

}  // namespace jpo::interplay
