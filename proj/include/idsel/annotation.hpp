#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "idsel/corpus.hpp"
#include "idsel/selection.hpp"

namespace idsel {

enum class SessionStatus { active, complete, exhausted };

std::string_view to_string(SessionStatus status);
SessionStatus parse_status(std::string_view name);

struct SessionConfig {
  // Target annotated documents per class.
  std::size_t n_shots = 1;
  LabelSet label_set;
  // When set, annotating an unseen label adds it to the label set. The
  // initial set may then have fewer than two labels; a session still needs
  // two classes to complete.
  bool allow_new_labels = false;

  // Throws ValidationError.
  void validate() const;
};

struct AnnotationRecord {
  std::size_t rank = 0;
  std::string id;
  std::string label;

  bool operator==(const AnnotationRecord&) const = default;
};

// Append-only list of annotations with per-class counts.
class AnnotatedSet {
 public:
  // Throws ValidationError if the id was already annotated.
  void add(AnnotationRecord record);

  std::span<const AnnotationRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool contains(std::string_view id) const { return ids_.contains(std::string(id)); }
  std::size_t count(std::string_view label) const;
  const std::map<std::string, std::size_t, std::less<>>& per_class_counts() const { return counts_; }

 private:
  std::vector<AnnotationRecord> records_;
  std::map<std::string, std::size_t, std::less<>> counts_;
  std::unordered_set<std::string> ids_;
};

// State of one annotation run over a selection order.
class SessionState {
 public:
  // Throws ValidationError for an invalid config or an order with duplicate
  // ids. An empty order starts out exhausted.
  SessionState(SessionConfig config, SelectionOrder order);

  const SessionConfig& config() const { return config_; }
  const LabelSet& label_set() const { return config_.label_set; }
  const SelectionOrder& order() const { return order_; }
  std::size_t cursor() const { return cursor_; }
  const AnnotatedSet& annotated() const { return annotated_; }
  SessionStatus status() const { return status_; }

  // Annotates the current head in place. Throws StateError when the session
  // is not active or doc_id is not the head, ValidationError for a label
  // outside the set (unless new labels are allowed). Leaves the state
  // untouched on error.
  void apply(std::string_view doc_id, std::string_view label);

 private:
  void update_status();

  SessionConfig config_;
  SelectionOrder order_;
  std::size_t cursor_ = 0;
  AnnotatedSet annotated_;
  SessionStatus status_ = SessionStatus::active;
};

// Peeks the head of the order. Throws StateError unless active.
const std::string& next_document(const SessionState& state);

SessionState annotate(SessionState state, std::string_view doc_id, std::string_view label);

// |records| / (n_classes * n_shots) for a terminated session. Throws
// StateError if the session is active or has no annotations.
double overannotation_rate(const SessionState& state);

// Same ratio at any point of the session; 0 before the first annotation.
double theta_so_far(const SessionState& state);

// label -> number of annotations still missing, only for classes under target.
std::map<std::string, std::size_t> coverage_deficit(const SessionState& state);

struct SimulationResult {
  SessionState state;
  double theta;
  std::map<std::string, std::size_t> deficit;
};

// Replays the order, revealing gold labels, until complete or exhausted.
// Throws ValidationError naming any ranked document without a gold label.
SimulationResult simulate(const Corpus& corpus, const SelectionOrder& order, const SessionConfig& config);

// {method, n_shots, n_classes, labels, total_annotations, theta, status,
//  per_class_counts, cursor}; theta is theta_so_far for active sessions.
nlohmann::ordered_json session_summary(const SessionState& state);

// One {"rank","id","label"} line per record followed by {"summary": ...}.
void write_session_export(const SessionState& state, std::ostream& out);

struct SessionExport {
  std::vector<AnnotationRecord> records;
  nlohmann::json summary;
};

// Throws ParseError.
SessionExport read_session_export(std::istream& in);

// Rebuilds a session from exported records against its order. Throws if
// the records are not a gapless prefix of the order.
SessionState replay_export(const SessionExport& exported, const SelectionOrder& order);

struct SweepRow {
  Method method = Method::random;
  std::size_t n_shots = 0;
  std::vector<double> thetas;  // one per run, in seed order
  std::size_t exhausted_runs = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // method-major, then n_shots in grid order
};

// mean, sample standard deviation and mean -/+ 1.96 sd / sqrt(runs).
struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};
Summary summarize(std::span<const double> values);

// Simulates every order of every method at every n_shots. Label set comes
// from the corpus gold labels. Parallel over runs; output does not depend on
// the thread count.
SweepReport sweep(const Corpus& corpus, std::span<const MethodRuns> runs,
                  std::span<const std::size_t> n_shots_grid, unsigned threads = 1);

nlohmann::ordered_json to_json(const SweepReport& report);
std::string to_text(const SweepReport& report);

}  // namespace idsel
