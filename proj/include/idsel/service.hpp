#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "idsel/annotation.hpp"
#include "idsel/corpus.hpp"
#include "idsel/geometry.hpp"

namespace httplib {
class Server;
}

namespace idsel {

struct ServiceOptions {
  // Append-only session journal; empty disables persistence.
  std::filesystem::path journal;
  // Corpora with more documents than this are ordered on a worker thread and
  // the session reports "pending" until the order is ready.
  std::size_t background_threshold = 5000;
  unsigned threads = 1;
};

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Transport-independent implementation of the annotation HTTP API. All
// methods are thread-safe; mutations of one session are serialized and
// distinct sessions proceed independently.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions options = {});
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  void add_corpus(std::string name, std::shared_ptr<const Corpus> corpus);
  void add_embeddings(std::string name, std::shared_ptr<const EmbeddingSet> embeddings);

  // Replays the journal (if any) and opens it for appending. Returns the
  // number of sessions restored. Must be called before serving requests
  // when persistence is enabled.
  std::size_t recover();

  Reply create_session(std::string_view body);
  Reply get_session(std::string_view session_id);
  Reply get_next(std::string_view session_id);
  Reply post_annotation(std::string_view session_id, std::string_view body);
  Reply export_session(std::string_view session_id);
  Reply health() const;

  // Blocks until no background ordering is running.
  void wait_idle();
  void flush();

 private:
  struct Session;

  std::shared_ptr<Session> find(std::string_view session_id) const;
  std::string new_session_id();
  void journal_append(const std::string& line);
  void finish_creation(const std::shared_ptr<Session>& session, SelectionOrder order);

  ServiceOptions options_;
  std::map<std::string, std::shared_ptr<const Corpus>, std::less<>> corpora_;
  std::map<std::string, std::shared_ptr<const EmbeddingSet>, std::less<>> embeddings_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>, std::less<>> sessions_;

  std::mutex journal_mutex_;
  std::ofstream journal_;

  std::mutex workers_mutex_;
  std::vector<std::jthread> workers_;
  std::atomic<std::uint64_t> id_counter_{0};
  std::uint64_t id_salt_;
};

// Registers the JSON endpoints on a cpp-httplib server; serves static files
// from ui_dir at / when given.
void install_routes(httplib::Server& server, AnnotationService& service,
                    const std::optional<std::filesystem::path>& ui_dir = std::nullopt);

}  // namespace idsel
