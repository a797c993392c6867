#include <algorithm>
#include <mutex>

#include "jpo/annotation.hpp"
#include "jpo/error.hpp"
#include "jpo/util.hpp"

namespace jpo::annotation {

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::open: return "open";
    case TaskStatus::partially_labeled: return "partially_labeled";
    case TaskStatus::complete: return "complete";
  }
  return "open";
}

TaskStatus AnnotationTask::status(std::size_t cap) const {
  if (verdicts.empty()) return TaskStatus::open;
  return verdicts.size() >= cap ? TaskStatus::complete : TaskStatus::partially_labeled;
}

namespace {

nlohmann::json payload_to_json(const TaskPayload& p) {
  if (const auto* t = std::get_if<corpus::TripletRecord>(&p)) return nlohmann::json(*t);
  return corpus::candidate_to_json(std::get<corpus::JointCandidate>(p));
}

TaskPayload payload_from_json(Mode mode, const nlohmann::json& j) {
  if (mode == Mode::conditional) return j.get<corpus::TripletRecord>();
  return corpus::candidate_from_json(j);
}

bool valid_choice(Mode mode, const std::string& choice) {
  if (mode == Mode::conditional) return corpus::parse_conditional_verdict(choice).has_value();
  return corpus::parse_joint_verdict(choice).has_value();
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

bool has_verdict(const AnnotationTask& t, const std::string& annotator) {
  return std::any_of(t.verdicts.begin(), t.verdicts.end(),
                     [&](const AnnotationVerdict& v) { return v.annotator_id == annotator; });
}

}  // namespace

nlohmann::json to_json(const AnnotationTask& t, std::size_t cap) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : t.verdicts) verdicts.push_back({{"annotator_id", v.annotator_id}, {"choice", v.choice}});
  return {{"task_id", t.task_id},
          {"mode", judge::to_string(t.mode())},
          {"payload", payload_to_json(t.payload)},
          {"assignments", t.assignments},
          {"verdicts", verdicts},
          {"status", to_string(t.status(cap))}};
}

AnnotationStore::AnnotationStore(std::filesystem::path log_path, StoreOptions options)
    : log_path_(std::move(log_path)), options_(options) {
  if (options_.annotators_per_task == 0) throw Error(Errc::ConfigInvalid, "annotators_per_task must be positive");
  if (log_path_.empty()) return;
  if (std::ifstream in(log_path_); in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json ev;
      try {
        ev = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        // Only a torn final append is tolerated.
        if (in.peek() == EOF) break;
        throw Error(Errc::ParseFailure, log_path_.string() + " line " + std::to_string(lineno) + ": bad event");
      }
      apply(ev);
    }
  }
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  log_.open(log_path_, std::ios::app | std::ios::binary);
  if (!log_) throw Error(Errc::IoFailure, "cannot open event log " + log_path_.string());
}

void AnnotationStore::append(const nlohmann::json& event) {
  if (!log_.is_open()) return;
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) throw Error(Errc::IoFailure, "event log append failed");
}

void AnnotationStore::apply(const nlohmann::json& ev) {
  const std::string type = ev.at("event").get<std::string>();
  const std::string id = ev.at("task_id").get<std::string>();
  if (type == "task") {
    const Mode mode = judge::parse_mode(ev.at("mode").get<std::string>());
    index_.emplace(id, tasks_.size());
    tasks_.push_back({id, payload_from_json(mode, ev.at("payload")), {}, {}});
    return;
  }
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(Errc::ParseFailure, "event for unknown task " + id);
  AnnotationTask& t = tasks_[it->second];
  const std::string annotator = ev.at("annotator").get<std::string>();
  if (type == "assign") {
    t.assignments.push_back(annotator);
  } else if (type == "release") {
    std::erase(t.assignments, annotator);
  } else if (type == "verdict") {
    AnnotationVerdict v{id, annotator, ev.at("choice").get<std::string>(), std::nullopt,
                        ev.value("timestamp", std::string())};
    if (ev.contains("explanation")) v.explanation = ev.at("explanation").get<std::string>();
    t.verdicts.push_back(std::move(v));
  } else {
    throw Error(Errc::ParseFailure, "unknown event type " + type);
  }
}

bool AnnotationStore::add_task(std::string task_id, TaskPayload payload) {
  std::unique_lock lock(mu_);
  if (index_.contains(task_id)) return false;
  const Mode mode = std::holds_alternative<corpus::TripletRecord>(payload) ? Mode::conditional : Mode::joint;
  nlohmann::json ev{{"event", "task"}, {"task_id", task_id}, {"mode", judge::to_string(mode)},
                    {"payload", payload_to_json(payload)}};
  append(ev);
  apply(ev);
  return true;
}

std::optional<AnnotationTask> AnnotationStore::next_task(const std::string& annotator, std::optional<Mode> mode) {
  std::unique_lock lock(mu_);
  auto matches = [&](const AnnotationTask& t) { return !mode || t.mode() == *mode; };
  for (const auto& t : tasks_) {
    if (matches(t) && contains(t.assignments, annotator) && !has_verdict(t, annotator)) return t;
  }
  for (auto& t : tasks_) {
    if (!matches(t) || contains(t.assignments, annotator) || has_verdict(t, annotator)) continue;
    if (t.assignments.size() >= options_.annotators_per_task) continue;
    nlohmann::json ev{{"event", "assign"}, {"task_id", t.task_id}, {"annotator", annotator}};
    append(ev);
    apply(ev);
    return t;
  }
  return std::nullopt;
}

SubmitResult AnnotationStore::submit(const std::string& task_id, const std::string& annotator,
                                     const std::string& choice, std::optional<std::string> explanation) {
  std::unique_lock lock(mu_);
  auto it = index_.find(task_id);
  if (it == index_.end()) return SubmitResult::unknown_task;
  const AnnotationTask& t = tasks_[it->second];
  if (has_verdict(t, annotator)) return SubmitResult::duplicate;
  if (!contains(t.assignments, annotator)) return SubmitResult::not_assigned;
  if (!valid_choice(t.mode(), choice)) return SubmitResult::invalid_choice;
  if (options_.require_explanation && (!explanation || explanation->empty())) {
    return SubmitResult::missing_explanation;
  }
  nlohmann::json ev{{"event", "verdict"},
                    {"task_id", task_id},
                    {"annotator", annotator},
                    {"choice", choice},
                    {"timestamp", utc_timestamp()}};
  if (explanation && !explanation->empty()) ev["explanation"] = *explanation;
  append(ev);
  apply(ev);
  return SubmitResult::ok;
}

SubmitResult AnnotationStore::release(const std::string& task_id, const std::string& annotator) {
  std::unique_lock lock(mu_);
  auto it = index_.find(task_id);
  if (it == index_.end()) return SubmitResult::unknown_task;
  const AnnotationTask& t = tasks_[it->second];
  if (!contains(t.assignments, annotator) || has_verdict(t, annotator)) return SubmitResult::not_assigned;
  nlohmann::json ev{{"event", "release"}, {"task_id", task_id}, {"annotator", annotator}};
  append(ev);
  apply(ev);
  return SubmitResult::ok;
}

std::optional<AnnotationTask> AnnotationStore::task(const std::string& task_id) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(task_id);
  if (it == index_.end()) return std::nullopt;
  return tasks_[it->second];
}

std::vector<AnnotationTask> AnnotationStore::tasks() const {
  std::shared_lock lock(mu_);
  return tasks_;
}

std::size_t AnnotationStore::size() const {
  std::shared_lock lock(mu_);
  return tasks_.size();
}

bool AnnotationStore::exportable(const AnnotationTask& t, bool include_partial) const {
  const TaskStatus s = t.status(options_.annotators_per_task);
  return s == TaskStatus::complete || (include_partial && s == TaskStatus::partially_labeled);
}

std::vector<corpus::ConditionalPreferenceRecord> AnnotationStore::export_conditional(bool include_partial) const {
  std::shared_lock lock(mu_);
  std::vector<corpus::ConditionalPreferenceRecord> out;
  for (const auto& t : tasks_) {
    if (t.mode() != Mode::conditional || !exportable(t, include_partial)) continue;
    const auto& tr = std::get<corpus::TripletRecord>(t.payload);
    for (const auto& v : t.verdicts) {
      out.push_back({tr.id, tr.instruction, tr.response_a, tr.response_b,
                     *corpus::parse_conditional_verdict(v.choice), "human:" + v.annotator_id, v.explanation});
    }
  }
  return out;
}

std::vector<corpus::JointPreferenceRecord> AnnotationStore::export_joint(bool include_partial) const {
  std::shared_lock lock(mu_);
  std::vector<corpus::JointPreferenceRecord> out;
  for (const auto& t : tasks_) {
    if (t.mode() != Mode::joint || !exportable(t, include_partial)) continue;
    const auto& c = std::get<corpus::JointCandidate>(t.payload);
    for (const auto& v : t.verdicts) {
      out.push_back({c.first, c.second, *corpus::parse_joint_verdict(v.choice), "human:" + v.annotator_id,
                     v.explanation});
    }
  }
  return out;
}

std::string AnnotationStore::export_jsonl(Mode mode, bool include_partial) const {
  if (mode == Mode::conditional) {
    auto records = export_conditional(include_partial);
    return corpus::to_jsonl<corpus::ConditionalPreferenceRecord>(records);
  }
  auto records = export_joint(include_partial);
  return corpus::to_jsonl<corpus::JointPreferenceRecord>(records);
}

}  // namespace jpo::annotation
