#pragma once

// Human preference collection: a task store with sticky two-annotator
// assignment, persisted as an append-only JSONL event log, and the HTTP
// front end the browser UI talks to.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpo/corpus.hpp"
#include "jpo/judge.hpp"

namespace jpo::annotation {

using judge::Mode;

enum class TaskStatus { open, partially_labeled, complete };
std::string_view to_string(TaskStatus s);

using TaskPayload = std::variant<corpus::TripletRecord, corpus::JointCandidate>;

struct AnnotationVerdict {
  std::string task_id;
  std::string annotator_id;
  std::string choice;  // "A"/"B"/"Equal" or "PairA"/"PairB"/"Equal"
  std::optional<std::string> explanation;
  std::string timestamp;
};

struct AnnotationTask {
  std::string task_id;
  TaskPayload payload;
  std::vector<std::string> assignments;  // at most annotators_per_task
  std::vector<AnnotationVerdict> verdicts;

  Mode mode() const { return std::holds_alternative<corpus::TripletRecord>(payload) ? Mode::conditional : Mode::joint; }
  TaskStatus status(std::size_t cap) const;
};

nlohmann::json to_json(const AnnotationTask& t, std::size_t cap);

struct StoreOptions {
  bool require_explanation = false;
  std::size_t annotators_per_task = 2;
};

enum class SubmitResult { ok, unknown_task, duplicate, not_assigned, invalid_choice, missing_explanation };

class AnnotationStore {
 public:
  // Replays an existing log; an empty path keeps everything in memory.
  explicit AnnotationStore(std::filesystem::path log_path = {}, StoreOptions options = {});

  // Returns false when the id already exists.
  bool add_task(std::string task_id, TaskPayload payload);

  // Sticky: an annotator with an unsubmitted assignment gets it back. The
  // mode filter is optional.
  std::optional<AnnotationTask> next_task(const std::string& annotator, std::optional<Mode> mode = std::nullopt);

  SubmitResult submit(const std::string& task_id, const std::string& annotator, const std::string& choice,
                      std::optional<std::string> explanation);

  // Operator action: drops an unsubmitted assignment. Returns unknown_task,
  // not_assigned or ok.
  SubmitResult release(const std::string& task_id, const std::string& annotator);

  std::optional<AnnotationTask> task(const std::string& task_id) const;
  std::vector<AnnotationTask> tasks() const;
  std::size_t size() const;
  const StoreOptions& options() const { return options_; }

  // One record per (task, annotator) verdict, annotator tagged "human:<id>".
  std::vector<corpus::ConditionalPreferenceRecord> export_conditional(bool include_partial) const;
  std::vector<corpus::JointPreferenceRecord> export_joint(bool include_partial) const;
  std::string export_jsonl(Mode mode, bool include_partial) const;

 private:
  void apply(const nlohmann::json& event);
  void append(const nlohmann::json& event);
  bool exportable(const AnnotationTask& t, bool include_partial) const;

  std::filesystem::path log_path_;
  StoreOptions options_;
  mutable std::shared_mutex mu_;
  std::ofstream log_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> index_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;  // UI bundle; skipped when empty or absent
};

class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, ServerOptions options);
  ~AnnotationServer();

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Blocks until stop() is called from elsewhere.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace jpo::annotation
