#include "jpo/judge.hpp"

#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "jpo/error.hpp"
#include "jpo/util.hpp"

namespace jpo::judge {

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::ResponseA: return "ResponseA";
    case Choice::ResponseB: return "ResponseB";
    case Choice::Equal: return "Equal";
  }
  return "Equal";
}

std::string_view to_string(Mode m) { return m == Mode::conditional ? "conditional" : "joint"; }

Mode parse_mode(std::string_view name) {
  if (name == "conditional") return Mode::conditional;
  if (name == "joint") return Mode::joint;
  throw Error(Errc::ConfigInvalid, "unknown mode '" + std::string(name) + "'");
}

void JudgeConfig::validate() const {
  if (model_name.empty()) throw Error(Errc::ConfigInvalid, "judge model_name is empty");
  if (max_retries < 0) throw Error(Errc::ConfigInvalid, "max_retries must be >= 0");
  if (max_concurrency < 1) throw Error(Errc::ConfigInvalid, "max_concurrency must be >= 1");
  if (timeout_seconds < 1) throw Error(Errc::ConfigInvalid, "timeout_seconds must be >= 1");
}

Comparison conditional_comparison(std::string instruction, std::string output_a, std::string output_b) {
  Comparison c;
  c.mode = Mode::conditional;
  c.instruction_a = std::move(instruction);
  c.output_a = std::move(output_a);
  c.output_b = std::move(output_b);
  return c;
}

Comparison joint_comparison(const corpus::InstructionResponsePair& a,
                            const corpus::InstructionResponsePair& b) {
  return {Mode::joint, a.instruction, a.response, b.instruction, b.response};
}

Comparison swapped(const Comparison& c) {
  Comparison s = c;
  std::swap(s.output_a, s.output_b);
  if (c.mode == Mode::joint) std::swap(s.instruction_a, s.instruction_b);
  return s;
}

Choice resolve_order_flip(Choice first, Choice swapped_raw) {
  Choice mapped = swapped_raw;
  if (swapped_raw == Choice::ResponseA) mapped = Choice::ResponseB;
  if (swapped_raw == Choice::ResponseB) mapped = Choice::ResponseA;
  return first == mapped ? first : Choice::Equal;
}

// --- cache ------------------------------------------------------------------

CompletionCache::CompletionCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      entries_.emplace(j.at("prompt_hash").get<std::string>(), j.at("completion").get<std::string>());
    } catch (const nlohmann::json::exception&) {
      // A crash mid-append can leave a torn final line; anything else is corruption.
      if (in.peek() == EOF) break;
      throw Error(Errc::ParseFailure, path_.string() + " line " + std::to_string(lineno) + ": bad cache entry");
    }
  }
}

std::string CompletionCache::key(std::string_view model_name, std::string_view prompt) {
  std::string material(model_name);
  material += '\x1f';
  material += prompt;
  return sha256_hex(material);
}

std::optional<std::string> CompletionCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CompletionCache::store(const std::string& key, const std::string& completion) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(key, completion).second) return;
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  nlohmann::json j{{"prompt_hash", key}, {"completion", completion}, {"timestamp", utc_timestamp()}};
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "cannot append to " + path_.string());
}

std::size_t CompletionCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// --- judge ------------------------------------------------------------------

Judge::Judge(ChatClient& client, JudgeConfig config)
    : client_(client), config_(std::move(config)), cache_(config_.cache_path) {
  config_.validate();
}

std::optional<ParsedChoice> Judge::query(const std::string& prompt, std::string& raw) {
  const std::string key = CompletionCache::key(config_.model_name, prompt);
  if (auto hit = cache_.lookup(key)) {
    cache_hits_++;
    raw = *hit;
    return parse_choice(raw);
  }
  std::exception_ptr transport_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    requests_++;
    try {
      raw = client_.complete(prompt, config_);
    } catch (const Error& e) {
      if (e.code() != Errc::JudgeUnavailable) throw;
      transport_error = std::current_exception();
      continue;
    }
    transport_error = nullptr;
    try {
      ParsedChoice c = parse_choice(raw);
      cache_.store(key, raw);
      return c;
    } catch (const Error& e) {
      if (e.code() != Errc::ParseFailure) throw;
    }
  }
  if (transport_error) std::rethrow_exception(transport_error);
  return std::nullopt;
}

JudgeVerdict Judge::adjudicate(const Comparison& c) {
  JudgeVerdict v;
  auto first = query(render_prompt(c), v.raw_first);
  auto second = query(render_prompt(swapped(c)), v.raw_swapped);
  auto as_choice = [](const std::optional<ParsedChoice>& p) {
    if (!p) return Choice::Equal;
    return *p == ParsedChoice::A ? Choice::ResponseA : Choice::ResponseB;
  };
  v.degraded = !first || !second;
  v.choice = resolve_order_flip(as_choice(first), as_choice(second));
  return v;
}

std::vector<JudgeVerdict> Judge::adjudicate_all(std::span<const Comparison> items) {
  std::vector<JudgeVerdict> out(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= items.size()) return;
      try {
        out[i] = adjudicate(items[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        // Stop handing out new work; in-flight items still finish.
        next = items.size();
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_concurrency), items.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<corpus::ConditionalPreferenceRecord> annotate_conditional(
    std::span<const corpus::TripletRecord> records, Judge& judge) {
  if (records.empty()) throw Error(Errc::EmptyDataset, "no triplets to annotate");
  std::vector<Comparison> items;
  items.reserve(records.size());
  for (const auto& r : records) items.push_back(conditional_comparison(r.instruction, r.response_a, r.response_b));
  auto verdicts = judge.adjudicate_all(items);
  std::vector<corpus::ConditionalPreferenceRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    corpus::ConditionalPreferenceRecord p{r.id, r.instruction, r.response_a, r.response_b,
                                          corpus::ConditionalVerdict::Equal, judge.annotator_tag(), {}};
    if (verdicts[i].choice == Choice::ResponseA) p.verdict = corpus::ConditionalVerdict::A;
    if (verdicts[i].choice == Choice::ResponseB) p.verdict = corpus::ConditionalVerdict::B;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<corpus::JointPreferenceRecord> annotate_joint(std::span<const corpus::JointCandidate> candidates,
                                                          Judge& judge) {
  if (candidates.empty()) throw Error(Errc::EmptyDataset, "no joint candidates to annotate");
  std::vector<Comparison> items;
  items.reserve(candidates.size());
  for (const auto& [a, b] : candidates) items.push_back(joint_comparison(a, b));
  auto verdicts = judge.adjudicate_all(items);
  std::vector<corpus::JointPreferenceRecord> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    corpus::JointPreferenceRecord p{candidates[i].first, candidates[i].second, corpus::JointVerdict::Equal,
                                    judge.annotator_tag(), {}};
    if (verdicts[i].choice == Choice::ResponseA) p.verdict = corpus::JointVerdict::PairA;
    if (verdicts[i].choice == Choice::ResponseB) p.verdict = corpus::JointVerdict::PairB;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace jpo::judge
