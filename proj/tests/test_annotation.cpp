#include <httplib.h>

#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "doctest.h"
#include "jpo/annotation.hpp"
#include "jpo/error.hpp"
#include "jpo/interplay.hpp"
#include "jpo/util.hpp"
#include "test_support.hpp"

using namespace jpo;
using namespace jpo::annotation;
using corpus::InstructionResponsePair;
using corpus::JointCandidate;
using corpus::TripletRecord;

namespace {

TripletRecord triplet(int i) {
  const std::string s = std::to_string(i);
  return {"t" + s, "instruction " + s, "first " + s, "second " + s};
}

JointCandidate candidate(int i) {
  const std::string s = std::to_string(i);
  return {{"a" + s, "instr a" + s, "resp a" + s}, {"b" + s, "instr b" + s, "resp b" + s}};
}

// Half conditional, half joint, interleaved.
void fill_mixed(AnnotationStore& store, int n) {
  for (int i = 0; i < n; ++i) {
    if (i % 2) store.add_task("j" + std::to_string(i), candidate(i));
    else store.add_task("c" + std::to_string(i), triplet(i));
  }
}

struct LiveServer {
  AnnotationServer server;
  int port;
  httplib::Client client;

  explicit LiveServer(AnnotationStore& store, std::filesystem::path static_dir = {})
      : server(store, {"127.0.0.1", 0, std::move(static_dir)}), port(server.start()), client("127.0.0.1", port) {}

  httplib::Result next(const std::string& annotator, const std::string& mode = "") {
    std::string path = "/tasks/next?annotator=" + annotator;
    if (!mode.empty()) path += "&mode=" + mode;
    return client.Get(path);
  }
  httplib::Result verdict(const std::string& task, nlohmann::json body) {
    return client.Post("/tasks/" + task + "/verdict", body.dump(), "application/json");
  }
};

}  // namespace

TEST_CASE("one task, two annotators, then 204") {
  AnnotationStore store;
  store.add_task("t1", triplet(1));
  LiveServer s(store);
  auto a = s.next("alice");
  REQUIRE(a);
  CHECK(a->status == 200);
  CHECK(nlohmann::json::parse(a->body)["task_id"] == "t1");
  auto b = s.next("bob");
  REQUIRE(b);
  CHECK(b->status == 200);
  CHECK(s.next("carol")->status == 204);

  // Nothing new for alice after she submits.
  CHECK(s.verdict("t1", {{"annotator_id", "alice"}, {"choice", "A"}})->status == 200);
  CHECK(s.next("alice")->status == 204);
}

TEST_CASE("assignment is sticky until submission") {
  AnnotationStore store;
  fill_mixed(store, 4);
  LiveServer s(store);
  auto first = nlohmann::json::parse(s.next("alice")->body);
  auto again = nlohmann::json::parse(s.next("alice")->body);
  CHECK(first["task_id"] == again["task_id"]);
  CHECK(first["mode"] == "conditional");
  CHECK(first["payload"]["instruction"] == "instruction 0");
  CHECK(s.verdict(first["task_id"], {{"annotator_id", "alice"}, {"choice", "B"}})->status == 200);
  auto next = nlohmann::json::parse(s.next("alice")->body);
  CHECK(next["task_id"] != first["task_id"]);

  // Mode filter.
  auto joint = nlohmann::json::parse(s.next("bob", "joint")->body);
  CHECK(joint["mode"] == "joint");
  CHECK(joint["payload"].contains("pair_a"));
}

TEST_CASE("verdict status codes") {
  AnnotationStore store;
  store.add_task("c1", triplet(1));
  store.add_task("j1", candidate(1));
  LiveServer s(store);
  s.next("alice", "joint");
  s.next("bob", "joint");
  s.next("alice", "conditional");

  SUBCASE("joint verdicts advance status") {
    auto r = s.verdict("j1", {{"annotator_id", "alice"}, {"choice", "PairA"}, {"explanation", "clearer"}});
    CHECK(r->status == 200);
    CHECK(nlohmann::json::parse(r->body)["status"] == "partially_labeled");
    CHECK(s.verdict("j1", {{"annotator_id", "alice"}, {"choice", "PairB"}})->status == 409);
    auto done = s.verdict("j1", {{"annotator_id", "bob"}, {"choice", "Equal"}});
    CHECK(done->status == 200);
    CHECK(nlohmann::json::parse(done->body)["status"] == "complete");
    auto task = nlohmann::json::parse(s.client.Get("/tasks/j1")->body);
    CHECK(task["verdicts"].size() == 2);
  }
  SUBCASE("mode mismatch is 422") {
    CHECK(s.verdict("c1", {{"annotator_id", "alice"}, {"choice", "PairA"}})->status == 422);
    CHECK(s.verdict("j1", {{"annotator_id", "alice"}, {"choice", "A"}})->status == 422);
  }
  SUBCASE("unknown task, unassigned annotator, malformed body") {
    CHECK(s.verdict("nope", {{"annotator_id", "alice"}, {"choice", "A"}})->status == 404);
    CHECK(s.verdict("c1", {{"annotator_id", "mallory"}, {"choice", "A"}})->status == 409);
    CHECK(s.client.Post("/tasks/c1/verdict", "{not json", "application/json")->status == 400);
    CHECK(s.verdict("c1", {{"choice", "A"}})->status == 400);
    CHECK(s.client.Get("/tasks/nope")->status == 404);
  }
  SUBCASE("missing parameters") {
    CHECK(s.client.Get("/tasks/next")->status == 400);
    CHECK(s.next("alice", "sideways")->status == 400);
    CHECK(s.client.Get("/export")->status == 400);
  }
}

TEST_CASE("required explanations") {
  AnnotationStore store({}, {true, 2});
  store.add_task("c1", triplet(1));
  LiveServer s(store);
  s.next("alice");
  CHECK(s.verdict("c1", {{"annotator_id", "alice"}, {"choice", "A"}})->status == 422);
  CHECK(s.verdict("c1", {{"annotator_id", "alice"}, {"choice", "A"}, {"explanation", ""}})->status == 422);
  CHECK(s.verdict("c1", {{"annotator_id", "alice"}, {"choice", "A"}, {"explanation", "on topic"}})->status == 200);
  auto records = store.export_conditional(true);
  REQUIRE(records.size() == 1);
  CHECK(records[0].explanation == std::optional<std::string>("on topic"));
}

TEST_CASE("operator release frees a stuck assignment") {
  AnnotationStore store;
  store.add_task("c1", triplet(1));
  LiveServer s(store);
  s.next("alice");
  s.next("bob");
  CHECK(s.next("carol")->status == 204);
  CHECK(s.client.Post("/admin/tasks/c1/release?annotator=bob", "", "text/plain")->status == 200);
  CHECK(s.client.Post("/admin/tasks/c1/release?annotator=bob", "", "text/plain")->status == 409);
  CHECK(s.client.Post("/admin/tasks/zz/release?annotator=bob", "", "text/plain")->status == 404);
  CHECK(s.client.Post("/admin/tasks/c1/release", "", "text/plain")->status == 400);
  CHECK(s.next("carol")->status == 200);
  CHECK(s.verdict("c1", {{"annotator_id", "bob"}, {"choice", "A"}})->status == 409);
}

TEST_CASE("export streams JSONL records tagged human") {
  AnnotationStore store;
  LiveServer s(store);
  auto empty = s.client.Get("/export?mode=conditional");
  CHECK(empty->status == 200);
  CHECK(empty->body.empty());

  store.add_task("c1", triplet(1));
  store.add_task("c2", triplet(2));
  for (const char* who : {"alice", "bob"}) {
    s.next(who);
    s.verdict("c1", {{"annotator_id", who}, {"choice", "B"}});
  }
  s.next("alice");
  s.verdict("c2", {{"annotator_id", "alice"}, {"choice", "Equal"}});

  auto complete = corpus::parse_jsonl<corpus::ConditionalPreferenceRecord>(s.client.Get("/export?mode=conditional")->body);
  REQUIRE(complete.size() == 2);
  CHECK(complete[0].annotator == "human:alice");
  CHECK(complete[1].annotator == "human:bob");
  CHECK(complete[0].triplet_id == "t1");
  CHECK(complete[0].verdict == corpus::ConditionalVerdict::B);
  auto partial = s.client.Get("/export?mode=conditional&include_partial=true");
  CHECK(partial->get_header_value("Content-Type") == "application/x-ndjson");
  CHECK(corpus::parse_jsonl<corpus::ConditionalPreferenceRecord>(partial->body).size() == 3);
  CHECK(s.client.Get("/export?mode=joint")->body.empty());
}

TEST_CASE("restart replays the event log exactly") {
  ScratchDir dir("annotation_log");
  const auto log = dir / "events.jsonl";
  std::vector<AnnotationTask> before;
  {
    AnnotationStore store(log);
    fill_mixed(store, 6);
    CHECK_FALSE(store.add_task("c0", triplet(9)));
    auto t = store.next_task("alice");
    REQUIRE(t);
    CHECK(store.submit(t->task_id, "alice", "A", "because") == SubmitResult::ok);
    store.next_task("alice");
    store.next_task("bob");
    store.release(store.next_task("carol")->task_id, "carol");
    before = store.tasks();
  }
  AnnotationStore replayed(log);
  auto after = replayed.tasks();
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < after.size(); ++i) {
    CHECK(after[i].task_id == before[i].task_id);
    CHECK(after[i].payload == before[i].payload);
    CHECK(after[i].assignments == before[i].assignments);
    REQUIRE(after[i].verdicts.size() == before[i].verdicts.size());
    for (std::size_t k = 0; k < after[i].verdicts.size(); ++k) {
      CHECK(after[i].verdicts[k].choice == before[i].verdicts[k].choice);
      CHECK(after[i].verdicts[k].explanation == before[i].verdicts[k].explanation);
      CHECK(after[i].verdicts[k].timestamp == before[i].verdicts[k].timestamp);
    }
  }
  // Sticky assignments survive the restart too.
  CHECK(replayed.next_task("alice")->task_id == before[1].task_id);
  CHECK(replayed.submit("c0", "alice", "B", {}) == SubmitResult::duplicate);

  // A torn final line is dropped; corruption earlier is an error.
  { std::ofstream(log, std::ios::app) << "{\"event\":\"verd"; }
  CHECK(AnnotationStore(log).size() == 6);
  ScratchDir dir2("annotation_bad");
  { std::ofstream(dir2 / "events.jsonl") << "garbage\n{}\n"; }
  CHECK_THROWS_AS(AnnotationStore(dir2 / "events.jsonl"), Error);
}

TEST_CASE("verdict log is append-only") {
  ScratchDir dir("annotation_append");
  const auto log = dir / "events.jsonl";
  AnnotationStore store(log);
  store.add_task("c1", triplet(1));
  std::string prev = read_file(log);
  store.next_task("a");
  store.submit("c1", "a", "A", {});
  store.submit("c1", "a", "B", {});  // duplicate, rejected
  store.next_task("b");
  store.submit("c1", "b", "Equal", {});
  const std::string now = read_file(log);
  CHECK(now.starts_with(prev));
  CHECK(std::count(now.begin(), now.end(), '\n') == 5);
  CHECK(store.task("c1")->verdicts.at(0).choice == "A");
}

TEST_CASE("concurrent drain of a 50-task mixed queue") {
  ScratchDir dir("annotation_drain");
  AnnotationStore store(dir / "events.jsonl");
  fill_mixed(store, 50);
  LiveServer s(store);

  // Each simulated annotator answers from a private seeded stream; the
  // ground-truth agreement comes from these simulated choices.
  std::map<std::string, std::map<std::string, std::string>> truth;
  std::mutex truth_mu;
  auto annotator = [&](const std::string& name, std::uint64_t seed) {
    httplib::Client c("127.0.0.1", s.port);
    Rng rng(seed);
    for (;;) {
      auto r = c.Get("/tasks/next?annotator=" + name);
      REQUIRE(r);
      if (r->status == 204) return;
      REQUIRE(r->status == 200);
      auto task = nlohmann::json::parse(r->body);
      const bool joint = task["mode"] == "joint";
      const std::string choices[3] = {joint ? "PairA" : "A", joint ? "PairB" : "B", "Equal"};
      const std::string choice = choices[rng.uniform_index(3)];
      const std::string id = task["task_id"];
      auto v = c.Post("/tasks/" + id + "/verdict", nlohmann::json{{"annotator_id", name}, {"choice", choice}}.dump(),
                      "application/json");
      REQUIRE(v);
      REQUIRE(v->status == 200);
      std::lock_guard lock(truth_mu);
      truth[name][id] = choice;
    }
  };
  std::thread t1(annotator, "ann1", 101);
  std::thread t2(annotator, "ann2", 202);
  t1.join();
  t2.join();

  for (const auto& t : store.tasks()) {
    CHECK(t.status(2) == TaskStatus::complete);
    CHECK(t.verdicts.size() == 2);
    CHECK(t.assignments.size() == 2);
  }
  CHECK(s.next("ann3")->status == 204);

  auto cond = corpus::parse_jsonl<corpus::ConditionalPreferenceRecord>(s.client.Get("/export?mode=conditional")->body);
  auto joint = corpus::parse_jsonl<corpus::JointPreferenceRecord>(s.client.Get("/export?mode=joint")->body);
  CHECK(cond.size() + joint.size() == 100);
  CHECK(cond.size() == 50);

  // H-H agreement from exported records, aligned by task.
  std::map<std::string, std::map<std::string, corpus::ConditionalVerdict>> by_task;
  for (const auto& r : cond) by_task[r.triplet_id][r.annotator] = r.verdict;
  std::map<std::string, std::map<std::string, corpus::JointVerdict>> by_pair;
  for (const auto& r : joint) by_pair[r.pair_a.id][r.annotator] = r.verdict;
  std::vector<corpus::ConditionalVerdict> c1, c2;
  for (const auto& [id, m] : by_task) {
    c1.push_back(m.at("human:ann1"));
    c2.push_back(m.at("human:ann2"));
  }
  std::vector<corpus::JointVerdict> j1, j2;
  for (const auto& [id, m] : by_pair) {
    j1.push_back(m.at("human:ann1"));
    j2.push_back(m.at("human:ann2"));
  }

  std::size_t same_c = 0, same_j = 0;
  for (const auto& [id, choice] : truth["ann1"]) {
    const bool same = truth["ann2"].at(id) == choice;
    (id[0] == 'c' ? same_c : same_j) += same;
  }
  CHECK(interplay::agreement(c1, c2) == static_cast<double>(same_c) / 25.0);
  CHECK(interplay::agreement(j1, j2) == static_cast<double>(same_j) / 25.0);
}

TEST_CASE("cap holds under many concurrent annotators") {
  AnnotationStore store;
  fill_mixed(store, 10);
  std::vector<std::thread> pool;
  for (int a = 0; a < 16; ++a) {
    pool.emplace_back([&store, a] {
      const std::string name = "w" + std::to_string(a);
      while (auto t = store.next_task(name)) store.submit(t->task_id, name, "Equal", {});
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& t : store.tasks()) {
    CHECK(t.verdicts.size() == 2);
    std::set<std::string> who;
    for (const auto& v : t.verdicts) who.insert(v.annotator_id);
    CHECK(who.size() == 2);
  }
}

TEST_CASE("static UI bundle is served when present") {
  ScratchDir dir("annotation_static");
  { std::ofstream(dir / "index.html") << "<html>ui</html>"; }
  AnnotationStore store;
  LiveServer s(store, dir.path());
  auto r = s.client.Get("/index.html");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->body == "<html>ui</html>");
}
