#include "idsel/service.hpp"

#include <chrono>
#include <random>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "idsel/errors.hpp"
#include "idsel/selectors.hpp"

namespace idsel {

using nlohmann::json;
using nlohmann::ordered_json;

enum class Phase { pending, ready, failed };

struct AnnotationService::Session {
  std::string id;
  std::string created_at;
  std::string corpus_name;
  std::string embeddings_name;
  std::shared_ptr<const Corpus> corpus;
  SessionConfig config;

  std::mutex mutex;
  Phase phase = Phase::pending;
  std::string failure;
  std::optional<SessionState> state;
};

namespace {

Reply json_reply(int status, const ordered_json& body) { return {status, body.dump(), "application/json"}; }

Reply error_reply(int status, std::string_view code, std::string_view message) {
  return json_reply(status, ordered_json{{"code", code}, {"message", message}});
}

Reply not_found(std::string_view session_id) {
  return error_reply(404, "not_found", "unknown session '" + std::string(session_id) + "'");
}

std::string now_utc() {
  const auto now = std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}Z", now);
}

ordered_json progress_of(const SessionState& state) {
  const auto summary = session_summary(state);
  ordered_json p = {
      {"counts", summary["per_class_counts"]},
      {"n_shots", state.config().n_shots},
      {"n_classes", state.label_set().n_classes()},
      {"annotations", state.annotated().size()},
      {"theta_so_far", theta_so_far(state)},
      {"cursor", state.cursor()},
      {"order_size", state.order().ranked_ids.size()},
  };
  if (state.status() == SessionStatus::exhausted) {
    ordered_json deficit = ordered_json::object();
    for (const auto& [label, missing] : coverage_deficit(state)) deficit[label] = missing;
    p["deficit"] = deficit;
  }
  return p;
}

SelectorConfig selector_from_request(Method method, const json& params, std::size_t n_docs) {
  SelectorConfig cfg;
  cfg.method = method;
  if (params.is_null()) return cfg;
  if (!params.is_object()) throw ValidationError("params must be an object");
  cfg.seed = params.value("seed", std::uint64_t{0});
  cfg.beta = params.value("beta", kDefaultBeta);
  if (params.contains("lls_mode")) cfg.lls_mode = parse_lls_mode(params["lls_mode"].get<std::string>());
  if (params.contains("max_ngram")) cfg.lexical.max_ngram = params["max_ngram"].get<int>();
  if (params.contains("smoothing")) {
    const auto s = params["smoothing"].get<std::string>();
    if (s == "none") {
      cfg.lexical.smoothing = Smoothing::none;
    } else if (s == "add_epsilon") {
      cfg.lexical.smoothing = Smoothing::add_epsilon;
    } else {
      throw ValidationError("unknown smoothing '" + s + "'");
    }
  }
  if (params.contains("min_cluster_size") || params.contains("min_samples")) {
    ClusterParams cp = ClusterParams::defaults_for(n_docs);
    cp.min_cluster_size = params.value("min_cluster_size", cp.min_cluster_size);
    cp.min_samples = params.value("min_samples", cp.min_samples);
    cfg.cluster = cp;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

AnnotationService::AnnotationService(ServiceOptions options) : options_(std::move(options)) {
  std::random_device rd;
  id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
             static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
}

AnnotationService::~AnnotationService() {
  wait_idle();
  flush();
}

void AnnotationService::add_corpus(std::string name, std::shared_ptr<const Corpus> corpus) {
  corpora_[std::move(name)] = std::move(corpus);
}

void AnnotationService::add_embeddings(std::string name, std::shared_ptr<const EmbeddingSet> embeddings) {
  embeddings_[std::move(name)] = std::move(embeddings);
}

std::string AnnotationService::new_session_id() {
  for (;;) {
    std::uint64_t x = id_salt_ + 0x9E3779B97F4A7C15ULL * (++id_counter_);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    x ^= x >> 31;
    std::string id = fmt::format("s{:016x}", x);
    std::shared_lock lock(sessions_mutex_);
    if (!sessions_.contains(id)) return id;
  }
}

std::shared_ptr<AnnotationService::Session> AnnotationService::find(std::string_view session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

void AnnotationService::journal_append(const std::string& line) {
  std::lock_guard lock(journal_mutex_);
  if (!journal_.is_open()) return;
  journal_ << line << '\n';
  journal_.flush();
  if (!journal_) throw IoError("journal write failed");
}

void AnnotationService::flush() {
  std::lock_guard lock(journal_mutex_);
  if (journal_.is_open()) journal_.flush();
}

std::size_t AnnotationService::recover() {
  if (options_.journal.empty()) return 0;
  std::size_t restored = 0;
  if (std::filesystem::exists(options_.journal)) {
    std::ifstream in(options_.journal, std::ios::binary);
    if (!in) throw IoError("cannot read journal " + options_.journal.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error&) {
        // A torn final line from a crash mid-write is dropped.
        if (in.peek() == EOF) {
          spdlog::warn("journal: ignoring incomplete last line {}", line_no);
          break;
        }
        throw ParseError("journal line " + std::to_string(line_no) + " is not valid JSON");
      }
      const std::string type = rec.at("type").get<std::string>();
      const std::string sid = rec.at("session_id").get<std::string>();
      if (type == "create") {
        auto corpus_it = corpora_.find(rec.at("corpus").get<std::string>());
        if (corpus_it == corpora_.end()) {
          throw ValidationError("journal references unknown corpus '" + rec.at("corpus").get<std::string>() + "'");
        }
        auto session = std::make_shared<Session>();
        session->id = sid;
        session->created_at = rec.at("created_at").get<std::string>();
        session->corpus_name = corpus_it->first;
        session->embeddings_name = rec.value("embeddings", "");
        session->corpus = corpus_it->second;
        session->config.n_shots = rec.at("n_shots").get<std::size_t>();
        session->config.label_set = LabelSet(rec.at("labels").get<std::vector<std::string>>());
        session->config.allow_new_labels = rec.at("allow_new_labels").get<bool>();
        SelectionOrder order;
        order.method = parse_method(rec.at("method").get<std::string>());
        order.params_fingerprint = rec.at("fingerprint").get<std::string>();
        order.truncated = rec.at("truncated").get<bool>();
        order.ranked_ids = rec.at("ranked_ids").get<std::vector<std::string>>();
        session->state.emplace(session->config, std::move(order));
        session->phase = Phase::ready;
        std::unique_lock lock(sessions_mutex_);
        sessions_[sid] = std::move(session);
        ++restored;
      } else if (type == "annotation") {
        auto session = find(sid);
        if (!session || !session->state) throw ParseError("journal annotation for unknown session " + sid);
        const auto rank = rec.at("rank").get<std::size_t>();
        if (rank != session->state->cursor()) {
          throw ParseError("journal rank " + std::to_string(rank) + " out of sequence for session " + sid);
        }
        session->state->apply(rec.at("id").get<std::string>(), rec.at("label").get<std::string>());
      } else {
        throw ParseError("journal line " + std::to_string(line_no) + " has unknown type '" + type + "'");
      }
    }
  }
  std::lock_guard lock(journal_mutex_);
  journal_.open(options_.journal, std::ios::binary | std::ios::app);
  if (!journal_) throw IoError("cannot open journal " + options_.journal.string());
  return restored;
}

void AnnotationService::finish_creation(const std::shared_ptr<Session>& session, SelectionOrder order) {
  ordered_json labels = ordered_json::array();
  for (const auto& l : session->config.label_set.labels()) labels.push_back(l);
  const ordered_json rec = {
      {"type", "create"},
      {"session_id", session->id},
      {"created_at", session->created_at},
      {"corpus", session->corpus_name},
      {"embeddings", session->embeddings_name},
      {"method", to_string(order.method)},
      {"fingerprint", order.params_fingerprint},
      {"truncated", order.truncated},
      {"n_shots", session->config.n_shots},
      {"labels", labels},
      {"allow_new_labels", session->config.allow_new_labels},
      {"ranked_ids", order.ranked_ids},
  };
  std::lock_guard lock(session->mutex);
  journal_append(rec.dump());
  session->state.emplace(session->config, std::move(order));
  session->phase = Phase::ready;
}

Reply AnnotationService::create_session(std::string_view body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_reply(400, "invalid_request", std::string("malformed JSON: ") + e.what());
  }
  auto session = std::make_shared<Session>();
  SelectorConfig selector;
  std::shared_ptr<const EmbeddingSet> embeddings;
  try {
    if (!req.is_object()) throw ValidationError("request body must be a JSON object");
    const std::string corpus_name = req.value("corpus", "default");
    auto corpus_it = corpora_.find(corpus_name);
    if (corpus_it == corpora_.end()) throw ValidationError("unknown corpus '" + corpus_name + "'");
    if (!req.contains("method")) throw ValidationError("method is required");
    const Method method = parse_method(req["method"].get<std::string>());
    selector = selector_from_request(method, req.value("params", json()), corpus_it->second->size());
    if (!req.contains("n_shots")) throw ValidationError("n_shots is required");
    const auto n_shots = req["n_shots"].get<std::int64_t>();
    if (n_shots < 1) throw ValidationError("n_shots must be >= 1");
    session->config.n_shots = static_cast<std::size_t>(n_shots);
    session->config.label_set = LabelSet(req.value("labels", std::vector<std::string>{}));
    session->config.allow_new_labels = req.value("allow_new_labels", false);
    session->config.validate();
    if (method == Method::rss || method == Method::oc) {
      const std::string emb_name = req.value("embeddings", "default");
      auto emb_it = embeddings_.find(emb_name);
      if (emb_it == embeddings_.end()) {
        throw ValidationError("embeddings required for method " + std::string(to_string(method)) + ": '" + emb_name +
                              "' is not loaded");
      }
      embeddings = emb_it->second;
      session->embeddings_name = emb_name;
    }
    session->corpus_name = corpus_name;
    session->corpus = corpus_it->second;
  } catch (const json::exception& e) {
    return error_reply(400, "invalid_request", e.what());
  } catch (const Error& e) {
    return error_reply(400, "invalid_request", e.what());
  }

  session->id = new_session_id();
  session->created_at = now_utc();
  {
    std::unique_lock lock(sessions_mutex_);
    sessions_[session->id] = session;
  }

  auto compute = [this, session, selector, embeddings] {
    return select_order(*session->corpus, embeddings.get(), selector, options_.threads);
  };
  const bool background = session->corpus->size() > options_.background_threshold;
  if (background) {
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, session, compute] {
      try {
        finish_creation(session, compute());
      } catch (const std::exception& e) {
        std::lock_guard lock(session->mutex);
        session->phase = Phase::failed;
        session->failure = e.what();
        spdlog::error("session {}: ordering failed: {}", session->id, e.what());
      }
    });
    return json_reply(202, ordered_json{{"session_id", session->id},
                                        {"status", "pending"},
                                        {"created_at", session->created_at}});
  }
  try {
    finish_creation(session, compute());
  } catch (const Error& e) {
    std::unique_lock lock(sessions_mutex_);
    sessions_.erase(session->id);
    return error_reply(dynamic_cast<const ValidationError*>(&e) ? 400 : 500,
                       dynamic_cast<const ValidationError*>(&e) ? "invalid_request" : "internal", e.what());
  }
  std::lock_guard lock(session->mutex);
  return json_reply(201, ordered_json{{"session_id", session->id},
                                      {"status", to_string(session->state->status())},
                                      {"cursor", session->state->cursor()},
                                      {"created_at", session->created_at},
                                      {"method", to_string(session->state->order().method)},
                                      {"params_fingerprint", session->state->order().params_fingerprint},
                                      {"order_size", session->state->order().ranked_ids.size()}});
}

Reply AnnotationService::get_session(std::string_view session_id) {
  auto session = find(session_id);
  if (!session) return not_found(session_id);
  std::lock_guard lock(session->mutex);
  ordered_json out = {{"session_id", session->id}, {"created_at", session->created_at}, {"corpus", session->corpus_name}};
  switch (session->phase) {
    case Phase::pending:
      out["status"] = "pending";
      break;
    case Phase::failed:
      out["status"] = "failed";
      out["message"] = session->failure;
      break;
    case Phase::ready:
      out["status"] = to_string(session->state->status());
      out["params_fingerprint"] = session->state->order().params_fingerprint;
      out["truncated"] = session->state->order().truncated;
      out["summary"] = session_summary(*session->state);
      break;
  }
  return json_reply(200, out);
}

Reply AnnotationService::get_next(std::string_view session_id) {
  auto session = find(session_id);
  if (!session) return not_found(session_id);
  std::lock_guard lock(session->mutex);
  if (session->phase == Phase::pending) return json_reply(202, ordered_json{{"status", "pending"}});
  if (session->phase == Phase::failed) return error_reply(500, "failed", session->failure);
  const SessionState& state = *session->state;
  ordered_json out = {{"status", to_string(state.status())}};
  if (state.status() == SessionStatus::active) {
    const std::string& id = next_document(state);
    out["document"] = ordered_json{{"id", id}, {"text", session->corpus->at(id).text}, {"rank", state.cursor()}};
  } else {
    out["theta"] = state.annotated().size() == 0 ? 0.0 : overannotation_rate(state);
  }
  out["progress"] = progress_of(state);
  return json_reply(200, out);
}

Reply AnnotationService::post_annotation(std::string_view session_id, std::string_view body) {
  auto session = find(session_id);
  if (!session) return not_found(session_id);
  std::string doc_id, label;
  try {
    const json req = json::parse(body);
    doc_id = req.at("doc_id").get<std::string>();
    label = req.at("label").get<std::string>();
  } catch (const json::exception& e) {
    return error_reply(400, "invalid_request", std::string("expected {\"doc_id\", \"label\"}: ") + e.what());
  }

  std::lock_guard lock(session->mutex);
  if (session->phase == Phase::pending) return error_reply(409, "pending", "selection order is still being computed");
  if (session->phase == Phase::failed) return error_reply(500, "failed", session->failure);
  SessionState next = *session->state;
  try {
    next.apply(doc_id, label);
  } catch (const StateError& e) {
    return error_reply(409, "conflict", e.what());
  } catch (const ValidationError& e) {
    return error_reply(400, "invalid_label", e.what());
  }
  const auto& rec = next.annotated().records().back();
  try {
    journal_append(ordered_json{{"type", "annotation"},
                                {"session_id", session->id},
                                {"rank", rec.rank},
                                {"id", rec.id},
                                {"label", rec.label}}
                       .dump());
  } catch (const Error& e) {
    return error_reply(500, "internal", e.what());
  }
  *session->state = std::move(next);
  const SessionState& state = *session->state;
  ordered_json out = {{"status", to_string(state.status())}, {"cursor", state.cursor()}};
  if (state.status() != SessionStatus::active) out["theta"] = overannotation_rate(state);
  out["progress"] = progress_of(state);
  return json_reply(200, out);
}

Reply AnnotationService::export_session(std::string_view session_id) {
  auto session = find(session_id);
  if (!session) return not_found(session_id);
  std::lock_guard lock(session->mutex);
  if (session->phase != Phase::ready) return error_reply(409, "pending", "session has no order yet");
  std::ostringstream out;
  write_session_export(*session->state, out);
  return {200, out.str(), "application/x-ndjson"};
}

Reply AnnotationService::health() const {
  std::shared_lock lock(sessions_mutex_);
  return json_reply(200, ordered_json{{"status", "ok"}, {"sessions", sessions_.size()}});
}

void AnnotationService::wait_idle() {
  std::vector<std::jthread> done;
  {
    std::lock_guard lock(workers_mutex_);
    done.swap(workers_);
  }
  done.clear();
}

void install_routes(httplib::Server& server, AnnotationService& service,
                    const std::optional<std::filesystem::path>& ui_dir) {
  auto send = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  server.Get("/healthz", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.health());
  });
  server.Post("/sessions", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.create_session(req.body));
  });
  server.Get(R"(/sessions/([^/]+)/next)", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.get_next(req.matches[1].str()));
  });
  server.Post(R"(/sessions/([^/]+)/annotations)",
              [&service, send](const httplib::Request& req, httplib::Response& res) {
                send(res, service.post_annotation(req.matches[1].str(), req.body));
              });
  server.Get(R"(/sessions/([^/]+)/export)", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.export_session(req.matches[1].str()));
  });
  server.Get(R"(/sessions/([^/]+))", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.get_session(req.matches[1].str()));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "unexpected error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(ordered_json{{"code", "internal"}, {"message", message}}.dump(), "application/json");
  });
  if (ui_dir) {
    if (!server.set_mount_point("/", ui_dir->string())) {
      throw IoError("UI directory not found: " + ui_dir->string());
    }
  }
}

}  // namespace idsel
