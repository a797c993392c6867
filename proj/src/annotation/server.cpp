#include <httplib.h>

#include <thread>

#include "jpo/annotation.hpp"
#include "jpo/error.hpp"

namespace jpo::annotation {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

std::optional<Mode> mode_param(const httplib::Request& req, httplib::Response& res, bool& bad) {
  bad = false;
  if (!req.has_param("mode") || req.get_param_value("mode").empty()) return std::nullopt;
  try {
    return judge::parse_mode(req.get_param_value("mode"));
  } catch (const Error&) {
    bad = true;
    send_error(res, 400, "bad_request", "mode must be conditional or joint");
    return std::nullopt;
  }
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationStore& store;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(AnnotationStore& s, ServerOptions o) : store(s), options(std::move(o)) { routes(); }

  void routes() {
    const std::size_t cap = store.options().annotators_per_task;

    server.Get("/tasks/next", [this, cap](const httplib::Request& req, httplib::Response& res) {
      const std::string annotator = req.get_param_value("annotator");
      if (annotator.empty()) return send_error(res, 400, "bad_request", "annotator is required");
      bool bad = false;
      auto mode = mode_param(req, res, bad);
      if (bad) return;
      auto task = store.next_task(annotator, mode);
      if (!task) {
        res.status = 204;
        return;
      }
      send_json(res, 200, to_json(*task, cap));
    });

    server.Get(R"(/tasks/([^/]+))", [this, cap](const httplib::Request& req, httplib::Response& res) {
      auto task = store.task(req.matches[1]);
      if (!task) return send_error(res, 404, "not_found", "unknown task");
      send_json(res, 200, to_json(*task, cap));
    });

    server.Post(R"(/tasks/([^/]+)/verdict)", [this, cap](const httplib::Request& req, httplib::Response& res) {
      const std::string task_id = req.matches[1];
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        return send_error(res, 400, "bad_request", "body must be JSON");
      }
      if (!body.is_object() || !body.contains("annotator_id") || !body["annotator_id"].is_string() ||
          !body.contains("choice") || !body["choice"].is_string()) {
        return send_error(res, 400, "bad_request", "annotator_id and choice are required strings");
      }
      std::optional<std::string> explanation;
      if (body.contains("explanation") && body["explanation"].is_string()) {
        explanation = body["explanation"].get<std::string>();
      }
      switch (store.submit(task_id, body["annotator_id"], body["choice"], explanation)) {
        case SubmitResult::ok: {
          auto task = store.task(task_id);
          return send_json(res, 200, {{"task_id", task_id}, {"status", to_string(task->status(cap))}});
        }
        case SubmitResult::unknown_task: return send_error(res, 404, "not_found", "unknown task");
        case SubmitResult::duplicate: return send_error(res, 409, "duplicate", "verdict already submitted");
        case SubmitResult::not_assigned: return send_error(res, 409, "not_assigned", "task not assigned to annotator");
        case SubmitResult::invalid_choice: return send_error(res, 422, "invalid_choice", "choice not valid for task mode");
        case SubmitResult::missing_explanation:
          return send_error(res, 422, "missing_explanation", "an explanation is required");
      }
    });

    server.Post(R"(/admin/tasks/([^/]+)/release)", [this](const httplib::Request& req, httplib::Response& res) {
      std::string annotator = req.get_param_value("annotator");
      if (annotator.empty()) return send_error(res, 400, "bad_request", "annotator is required");
      switch (store.release(req.matches[1], annotator)) {
        case SubmitResult::ok: return send_json(res, 200, {{"released", true}});
        case SubmitResult::unknown_task: return send_error(res, 404, "not_found", "unknown task");
        default: return send_error(res, 409, "not_assigned", "no open assignment to release");
      }
    });

    server.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
      bool bad = false;
      auto mode = mode_param(req, res, bad);
      if (bad) return;
      if (!mode) return send_error(res, 400, "bad_request", "mode is required");
      const std::string partial = req.get_param_value("include_partial");
      const bool include_partial = partial == "1" || partial == "true";
      res.status = 200;
      res.set_content(store.export_jsonl(*mode, include_partial), "application/x-ndjson");
    });

    if (!options.static_dir.empty() && std::filesystem::is_directory(options.static_dir)) {
      server.set_mount_point("/", options.static_dir.string());
    }
  }
};

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(Errc::IoFailure, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void AnnotationServer::run() {
  start();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable() && impl_->thread.get_id() != std::this_thread::get_id()) impl_->thread.join();
}

}  // namespace jpo::annotation
