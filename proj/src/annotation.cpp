#include "idsel/annotation.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>

#include "idsel/errors.hpp"
#include "idsel/parallel.hpp"

namespace idsel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::active: return "active";
    case SessionStatus::complete: return "complete";
    case SessionStatus::exhausted: return "exhausted";
  }
  return "unknown";
}

SessionStatus parse_status(std::string_view name) {
  if (name == "active") return SessionStatus::active;
  if (name == "complete") return SessionStatus::complete;
  if (name == "exhausted") return SessionStatus::exhausted;
  throw ParseError("unknown session status '" + std::string(name) + "'");
}

void SessionConfig::validate() const {
  if (n_shots < 1) throw ValidationError("n_shots must be >= 1");
  if (!allow_new_labels) label_set.require_min_classes();
}

void AnnotatedSet::add(AnnotationRecord record) {
  if (!ids_.insert(record.id).second) throw ValidationError("document '" + record.id + "' already annotated");
  ++counts_[record.label];
  records_.push_back(std::move(record));
}

std::size_t AnnotatedSet::count(std::string_view label) const {
  auto it = counts_.find(label);
  return it == counts_.end() ? 0 : it->second;
}

SessionState::SessionState(SessionConfig config, SelectionOrder order)
    : config_(std::move(config)), order_(std::move(order)) {
  config_.validate();
  std::unordered_set<std::string_view> seen;
  for (const auto& id : order_.ranked_ids) {
    if (!seen.insert(id).second) throw ValidationError("selection order repeats id '" + id + "'");
  }
  update_status();
}

void SessionState::update_status() {
  const auto& labels = config_.label_set;
  bool complete = labels.n_classes() >= 2;
  for (const auto& label : labels.labels()) {
    if (annotated_.count(label) < config_.n_shots) {
      complete = false;
      break;
    }
  }
  if (complete) {
    status_ = SessionStatus::complete;
  } else if (cursor_ >= order_.ranked_ids.size()) {
    status_ = SessionStatus::exhausted;
  } else {
    status_ = SessionStatus::active;
  }
}

void SessionState::apply(std::string_view doc_id, std::string_view label) {
  if (status_ != SessionStatus::active) {
    throw StateError("session is " + std::string(to_string(status_)));
  }
  const std::string& head = order_.ranked_ids[cursor_];
  if (doc_id != head) {
    throw StateError("document '" + std::string(doc_id) + "' is not the current head '" + head + "'");
  }
  const bool known = config_.label_set.contains(label);
  if (!known && !config_.allow_new_labels) {
    throw ValidationError("label '" + std::string(label) + "' is not in the label set");
  }
  if (label.empty()) throw ValidationError("label must be non-empty");
  if (!known) config_.label_set.add(std::string(label));
  annotated_.add({cursor_, head, std::string(label)});
  ++cursor_;
  update_status();
}

const std::string& next_document(const SessionState& state) {
  if (state.status() != SessionStatus::active) {
    throw StateError("session is " + std::string(to_string(state.status())));
  }
  return state.order().ranked_ids[state.cursor()];
}

SessionState annotate(SessionState state, std::string_view doc_id, std::string_view label) {
  state.apply(doc_id, label);
  return state;
}

double theta_so_far(const SessionState& state) {
  const std::size_t classes = state.label_set().n_classes();
  if (classes == 0) return 0.0;
  return static_cast<double>(state.annotated().size()) /
         static_cast<double>(classes * state.config().n_shots);
}

double overannotation_rate(const SessionState& state) {
  if (state.status() == SessionStatus::active) throw StateError("session is still active");
  if (state.annotated().size() == 0) throw StateError("session has no annotations");
  return theta_so_far(state);
}

std::map<std::string, std::size_t> coverage_deficit(const SessionState& state) {
  std::map<std::string, std::size_t> deficit;
  const std::size_t target = state.config().n_shots;
  for (const auto& label : state.label_set().labels()) {
    const std::size_t have = state.annotated().count(label);
    if (have < target) deficit.emplace(label, target - have);
  }
  return deficit;
}

SimulationResult simulate(const Corpus& corpus, const SelectionOrder& order, const SessionConfig& config) {
  for (const auto& id : order.ranked_ids) {
    const Document& doc = corpus.at(id);
    if (!doc.gold_label) throw ValidationError("document '" + id + "' has no gold label");
  }
  SessionState state(config, order);
  while (state.status() == SessionStatus::active) {
    const std::string& id = next_document(state);
    state.apply(id, *corpus.at(id).gold_label);
  }
  const double theta = state.annotated().size() == 0 ? 0.0 : overannotation_rate(state);
  auto deficit = coverage_deficit(state);
  return {std::move(state), theta, std::move(deficit)};
}

ordered_json session_summary(const SessionState& state) {
  ordered_json counts = ordered_json::object();
  for (const auto& label : state.label_set().labels()) counts[label] = state.annotated().count(label);
  ordered_json labels = ordered_json::array();
  for (const auto& label : state.label_set().labels()) labels.push_back(label);
  return ordered_json{
      {"method", to_string(state.order().method)},
      {"n_shots", state.config().n_shots},
      {"n_classes", state.label_set().n_classes()},
      {"labels", labels},
      {"total_annotations", state.annotated().size()},
      {"theta", theta_so_far(state)},
      {"status", to_string(state.status())},
      {"per_class_counts", counts},
      {"cursor", state.cursor()},
  };
}

void write_session_export(const SessionState& state, std::ostream& out) {
  for (const auto& r : state.annotated().records()) {
    out << ordered_json{{"rank", r.rank}, {"id", r.id}, {"label", r.label}}.dump() << '\n';
  }
  out << ordered_json{{"summary", session_summary(state)}}.dump() << '\n';
}

SessionExport read_session_export(std::istream& in) {
  SessionExport result;
  bool have_summary = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (have_summary) throw ParseError("line " + std::to_string(line_no) + ": data after summary");
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (obj.contains("summary")) {
      result.summary = obj["summary"];
      have_summary = true;
      continue;
    }
    try {
      result.records.push_back({obj.at("rank").get<std::size_t>(), obj.at("id").get<std::string>(),
                                obj.at("label").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_summary) throw ParseError("session export has no summary line");
  return result;
}

SessionState replay_export(const SessionExport& exported, const SelectionOrder& order) {
  SessionConfig config;
  try {
    config.n_shots = exported.summary.at("n_shots").get<std::size_t>();
    config.label_set = LabelSet(exported.summary.at("labels").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid session summary: ") + e.what());
  }
  // The exported label set is final, so labels added live need no special
  // handling. A set smaller than two only occurs with new labels enabled.
  config.allow_new_labels = config.label_set.n_classes() < 2;
  SessionState state(std::move(config), order);
  for (const auto& r : exported.records) {
    if (r.rank != state.cursor()) {
      throw ValidationError("export record for '" + r.id + "' has rank " + std::to_string(r.rank) +
                            ", expected " + std::to_string(state.cursor()));
    }
    state.apply(r.id, r.label);
  }
  return state;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(sq / (n - 1.0));
  }
  const double half = 1.96 * s.sd / std::sqrt(n);
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

SweepReport sweep(const Corpus& corpus, std::span<const MethodRuns> runs,
                  std::span<const std::size_t> n_shots_grid, unsigned threads) {
  if (n_shots_grid.empty()) throw ValidationError("n_shots grid must not be empty");
  const LabelSet labels = label_set_of(corpus);

  struct Job {
    std::size_t method;
    std::size_t run;
  };
  std::vector<Job> jobs;
  for (std::size_t m = 0; m < runs.size(); ++m) {
    if (runs[m].orders.empty()) throw ValidationError("method " + std::string(to_string(runs[m].method)) + " has no orders");
    for (std::size_t r = 0; r < runs[m].orders.size(); ++r) jobs.push_back({m, r});
  }
  // results[job][grid index] = (theta, exhausted)
  std::vector<std::vector<std::pair<double, bool>>> results(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const SelectionOrder& order = runs[jobs[j].method].orders[jobs[j].run];
    auto& out = results[j];
    out.reserve(n_shots_grid.size());
    for (std::size_t shots : n_shots_grid) {
      SessionConfig config{shots, labels, false};
      const SimulationResult sim = simulate(corpus, order, config);
      out.emplace_back(sim.theta, sim.state.status() == SessionStatus::exhausted);
    }
  });

  SweepReport report;
  std::size_t j = 0;
  std::vector<std::size_t> first_job(runs.size());
  for (std::size_t m = 0; m < runs.size(); ++m) {
    first_job[m] = j;
    j += runs[m].orders.size();
  }
  for (std::size_t m = 0; m < runs.size(); ++m) {
    for (std::size_t g = 0; g < n_shots_grid.size(); ++g) {
      SweepRow row;
      row.method = runs[m].method;
      row.n_shots = n_shots_grid[g];
      for (std::size_t r = 0; r < runs[m].orders.size(); ++r) {
        const auto& [theta, exhausted] = results[first_job[m] + r][g];
        row.thetas.push_back(theta);
        row.exhausted_runs += exhausted ? 1 : 0;
      }
      const Summary s = summarize(row.thetas);
      row.mean = s.mean;
      row.sd = s.sd;
      row.ci_low = s.ci_low;
      row.ci_high = s.ci_high;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

ordered_json to_json(const SweepReport& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : report.rows) {
    rows.push_back(ordered_json{
        {"method", to_string(row.method)},
        {"n_shots", row.n_shots},
        {"runs", row.thetas.size()},
        {"mean", row.mean},
        {"sd", row.sd},
        {"ci_low", row.ci_low},
        {"ci_high", row.ci_high},
        {"exhausted_runs", row.exhausted_runs},
        {"thetas", row.thetas},
    });
  }
  return rows;
}

std::string to_text(const SweepReport& report) {
  std::string out = fmt::format("{:<8} {:>7} {:>5} {:>10} {:>10} {:>10} {:>10} {:>9}\n", "method",
                                "n_shots", "runs", "mean", "sd", "ci_low", "ci_high", "exhausted");
  for (const auto& row : report.rows) {
    out += fmt::format("{:<8} {:>7} {:>5} {:>10.4f} {:>10.4f} {:>10.4f} {:>10.4f} {:>9}\n",
                       to_string(row.method), row.n_shots, row.thetas.size(), row.mean, row.sd,
                       row.ci_low, row.ci_high, row.exhausted_runs);
  }
  return out;
}

}  // namespace idsel
