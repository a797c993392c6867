#include "jpo/interplay.hpp"

#include <charconv>

#include "jpo/error.hpp"
#include "jpo/util.hpp"

namespace jpo::interplay {

std::string_view to_string(PreferenceLabel l) {
  switch (l) {
    case PreferenceLabel::Chosen: return "Chosen";
    case PreferenceLabel::Reject: return "Reject";
    case PreferenceLabel::Equal: return "Equal";
  }
  return "Equal";
}

std::string_view to_string(BucketId b) {
  switch (b) {
    case BucketId::CC: return "CC";
    case BucketId::RR: return "RR";
    case BucketId::CR: return "CR";
    case BucketId::EC: return "EC";
    case BucketId::ER: return "ER";
    case BucketId::EE: return "EE";
  }
  return "?";
}

std::optional<PreferenceLabel> LabelMap::find(const std::string& instruction, const std::string& response) const {
  auto it = labels.find({instruction, response});
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

LabelMap assign_conditional_labels(std::span<const corpus::ConditionalPreferenceRecord> prefs) {
  LabelMap m;
  auto put = [&](const std::string& i, const std::string& r, PreferenceLabel l) {
    auto [it, inserted] = m.labels.emplace(std::make_pair(i, r), l);
    if (!inserted && it->second != l) ++m.conflicts;
  };
  for (const auto& p : prefs) {
    switch (p.verdict) {
      case corpus::ConditionalVerdict::A:
        put(p.instruction, p.response_a, PreferenceLabel::Chosen);
        put(p.instruction, p.response_b, PreferenceLabel::Reject);
        break;
      case corpus::ConditionalVerdict::B:
        put(p.instruction, p.response_a, PreferenceLabel::Reject);
        put(p.instruction, p.response_b, PreferenceLabel::Chosen);
        break;
      case corpus::ConditionalVerdict::Equal:
        put(p.instruction, p.response_a, PreferenceLabel::Equal);
        put(p.instruction, p.response_b, PreferenceLabel::Equal);
        break;
    }
  }
  return m;
}

std::optional<std::array<double, 3>> Bucket::fractions() const {
  const std::size_t n = count();
  if (n == 0) return std::nullopt;
  const double d = static_cast<double>(n);
  return std::array<double, 3>{left / d, right / d, equal / d};
}

std::optional<std::array<double, 2>> InterplayReport::cc_rr_decisiveness() const {
  const Bucket& cc = bucket(BucketId::CC);
  const Bucket& rr = bucket(BucketId::RR);
  const std::size_t n = cc.count() + rr.count();
  if (n == 0) return std::nullopt;
  const double d = static_cast<double>(n);
  const std::size_t decisive = cc.left + cc.right + rr.left + rr.right;
  return std::array<double, 2>{decisive / d, (cc.equal + rr.equal) / d};
}

std::optional<double> InterplayReport::cr_chosen_not_preferred() const {
  const Bucket& cr = bucket(BucketId::CR);
  if (cr.count() == 0) return std::nullopt;
  return static_cast<double>(cr.right + cr.equal) / static_cast<double>(cr.count());
}

namespace {

enum class Side { Left, Right, Equal };

Side verdict_side(corpus::JointVerdict v, bool flipped) {
  if (v == corpus::JointVerdict::Equal) return Side::Equal;
  const bool a_wins = v == corpus::JointVerdict::PairA;
  return a_wins != flipped ? Side::Left : Side::Right;
}

void add(Bucket& b, Side s) {
  if (s == Side::Left) ++b.left;
  if (s == Side::Right) ++b.right;
  if (s == Side::Equal) ++b.equal;
}

}  // namespace

InterplayReport interplay_report(const LabelMap& labels, std::span<const corpus::JointPreferenceRecord> joints) {
  using L = PreferenceLabel;
  InterplayReport r;
  r.total = joints.size();
  r.label_conflicts = labels.conflicts;
  for (const auto& j : joints) {
    auto la = labels.find(j.pair_a.instruction, j.pair_a.response);
    auto lb = labels.find(j.pair_b.instruction, j.pair_b.response);
    if (!la || !lb) {
      ++r.excluded;
      continue;
    }
    BucketId id;
    bool flipped = false;
    if (*la == *lb) {
      id = *la == L::Chosen ? BucketId::CC : *la == L::Reject ? BucketId::RR : BucketId::EE;
    } else if (*la != L::Equal && *lb != L::Equal) {
      id = BucketId::CR;
      flipped = *la == L::Reject;
    } else {
      const L other = *la == L::Equal ? *lb : *la;
      id = other == L::Chosen ? BucketId::EC : BucketId::ER;
      flipped = *lb == L::Equal;
    }
    add(r.bucket(id), verdict_side(j.verdict, flipped));
  }
  return r;
}

namespace {

template <typename V>
double agreement_impl(std::span<const V> a, std::span<const V> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::LengthMismatch,
                "verdict lists differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw Error(Errc::EmptyDataset, "agreement over no comparisons");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

// Shortest representation that reads back to the same double.
std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

double agreement(std::span<const corpus::ConditionalVerdict> a, std::span<const corpus::ConditionalVerdict> b) {
  return agreement_impl(a, b);
}

double agreement(std::span<const corpus::JointVerdict> a, std::span<const corpus::JointVerdict> b) {
  return agreement_impl(a, b);
}

AgreementReport agreement_report(std::vector<AgreementEntry> entries) {
  AgreementReport r;
  r.entries = std::move(entries);
  std::map<std::string, std::pair<double, std::size_t>> sums;
  double total = 0.0;
  for (const auto& e : r.entries) {
    auto& s = sums[e.pairing];
    s.first += e.fraction;
    s.second += 1;
    total += e.fraction;
  }
  for (const auto& [k, s] : sums) r.average_by_pairing[k] = s.first / static_cast<double>(s.second);
  if (!r.entries.empty()) r.overall_average = total / static_cast<double>(r.entries.size());
  return r;
}

nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"dataset", e.dataset},
                       {"protocol", e.protocol},
                       {"pairing", e.pairing},
                       {"agreement", e.fraction},
                       {"comparisons", e.comparisons}});
  }
  return {{"version", 1}, {"entries", entries}, {"average_by_pairing", r.average_by_pairing},
          {"overall_average", r.overall_average}};
}

nlohmann::json to_json(const InterplayReport& r) {
  nlohmann::json buckets = nlohmann::json::array();
  for (BucketId id : kBuckets) {
    const Bucket& b = r.bucket(id);
    nlohmann::json jb{{"bucket", to_string(id)},
                      {"left_count", b.left},
                      {"right_count", b.right},
                      {"equal_count", b.equal},
                      {"count", b.count()}};
    if (auto f = b.fractions()) {
      jb["left_preferred"] = (*f)[0];
      jb["right_preferred"] = (*f)[1];
      jb["equal"] = (*f)[2];
    }
    buckets.push_back(jb);
  }
  nlohmann::json out{{"version", 1},
                     {"total", r.total},
                     {"included", r.included()},
                     {"excluded", r.excluded},
                     {"label_conflicts", r.label_conflicts},
                     {"buckets", buckets}};
  if (auto d = r.cc_rr_decisiveness()) out["cc_rr"] = {{"decisive", (*d)[0]}, {"equal", (*d)[1]}};
  if (auto c = r.cr_chosen_not_preferred()) out["cr_chosen_not_preferred"] = *c;
  return out;
}

InterplayReport interplay_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw Error(Errc::ParseFailure, "unsupported interplay report version");
    InterplayReport r;
    r.total = j.at("total").get<std::size_t>();
    r.excluded = j.at("excluded").get<std::size_t>();
    r.label_conflicts = j.at("label_conflicts").get<std::size_t>();
    for (const auto& jb : j.at("buckets")) {
      const auto name = jb.at("bucket").get<std::string>();
      bool found = false;
      for (BucketId id : kBuckets) {
        if (to_string(id) != name) continue;
        Bucket& b = r.bucket(id);
        b.left = jb.at("left_count").get<std::size_t>();
        b.right = jb.at("right_count").get<std::size_t>();
        b.equal = jb.at("equal_count").get<std::size_t>();
        found = true;
      }
      if (!found) throw Error(Errc::ParseFailure, "unknown bucket '" + name + "'");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseFailure, std::string("interplay report: ") + e.what());
  }
}

std::string to_csv(const InterplayReport& r) {
  std::string out = "bucket,left_preferred,right_preferred,equal,count\n";
  for (BucketId id : kBuckets) {
    const Bucket& b = r.bucket(id);
    out += to_string(id);
    if (auto f = b.fractions()) {
      for (double x : *f) out += "," + format_double(x);
    } else {
      out += ",,,";
    }
    out += "," + std::to_string(b.count()) + "\n";
  }
  return out;
}

void emit_report(const InterplayReport& r, const std::filesystem::path& stem) {
  auto json_path = stem;
  json_path += ".json";
  auto csv_path = stem;
  csv_path += ".csv";
  write_file_atomic(json_path, to_json(r).dump(2) + "\n");
  write_file_atomic(csv_path, to_csv(r));
}

}  // namespace jpo::interplay
