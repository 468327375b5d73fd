#include "idsel/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "idsel/errors.hpp"
#include "idsel/parallel.hpp"

namespace idsel {

using nlohmann::ordered_json;

CentroidClassifier::CentroidClassifier(std::vector<std::string> labels,
                                       std::vector<std::vector<double>> centroids) {
  if (labels.empty() || labels.size() != centroids.size()) {
    throw ValidationError("classifier needs one centroid per label");
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  dim_ = centroids.front().size();
  for (std::size_t k : order) {
    if (centroids[k].size() != dim_) throw ValidationError("centroid dimensions differ");
    if (!labels_.empty() && labels_.back() == labels[k]) throw ValidationError("duplicate label '" + labels[k] + "'");
    labels_.push_back(std::move(labels[k]));
    centroids_.push_back(std::move(centroids[k]));
  }
}

std::span<const double> CentroidClassifier::centroid(std::string_view label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) throw ValidationError("no centroid for label '" + std::string(label) + "'");
  return centroids_[static_cast<std::size_t>(it - labels_.begin())];
}

const std::string& CentroidClassifier::predict(std::span<const double> v) const {
  std::size_t best = 0;
  double best_sim = cosine(v, centroids_[0]);
  for (std::size_t k = 1; k < centroids_.size(); ++k) {
    const double s = cosine(v, centroids_[k]);
    if (s > best_sim) {
      best_sim = s;
      best = k;
    }
  }
  return labels_[best];
}

CentroidClassifier fit(const AnnotatedSet& train, const EmbeddingSet& embeddings) {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> sums;
  std::vector<std::size_t> counts;
  for (const auto& [label, count] : train.per_class_counts()) {
    if (count == 0) throw ValidationError("class '" + label + "' has no training example");
    labels.push_back(label);
  }
  if (labels.empty()) throw ValidationError("cannot fit a classifier without training examples");
  sums.assign(labels.size(), std::vector<double>(embeddings.dim(), 0.0));
  counts.assign(labels.size(), 0);
  for (const auto& record : train.records()) {
    const auto v = embeddings.vector(record.id);
    const auto k = static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), record.label) - labels.begin());
    for (std::size_t d = 0; d < v.size(); ++d) sums[k][d] += v[d];
    ++counts[k];
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    for (double& x : sums[k]) x /= static_cast<double>(counts[k]);
  }
  return CentroidClassifier(std::move(labels), std::move(sums));
}

CentroidClassifier fit(const AnnotatedSet& train, const EmbeddingSet& embeddings, const LabelSet& required) {
  for (const auto& label : required.labels()) {
    if (train.count(label) == 0) throw ValidationError("class '" + label + "' has no training example");
  }
  return fit(train, embeddings);
}

std::map<std::string, std::string> predict(const CentroidClassifier& model, const EmbeddingSet& embeddings,
                                           std::span<const std::string> ids) {
  std::map<std::string, std::string> out;
  for (const auto& id : ids) out.emplace(id, model.predict(embeddings.vector(id)));
  return out;
}

EvalReport evaluate(const std::map<std::string, std::string>& predictions, const Corpus& gold,
                    const std::optional<LabelSet>& labels) {
  EvalReport report;
  LabelSet set;
  if (labels) {
    set = *labels;
  } else {
    for (const auto& doc : gold.documents()) {
      if (doc.gold_label && predictions.contains(doc.id) && !set.contains(*doc.gold_label)) set.add(*doc.gold_label);
    }
  }
  const std::size_t k = set.n_classes();
  report.labels.assign(set.labels().begin(), set.labels().end());
  report.confusion.assign(k, std::vector<std::size_t>(k, 0));

  std::size_t correct = 0;
  for (const auto& [id, predicted] : predictions) {
    const Document& doc = gold.at(id);
    if (!doc.gold_label) throw ValidationError("document '" + id + "' has no gold label");
    const auto g = set.index_of(*doc.gold_label);
    if (!g) throw ValidationError("gold label '" + *doc.gold_label + "' of '" + id + "' is not in the label set");
    const auto p = set.index_of(predicted);
    if (!p) throw ValidationError("predicted label '" + predicted + "' for '" + id + "' is not in the label set");
    ++report.confusion[*g][*p];
    if (*g == *p) ++correct;
  }
  if (predictions.empty()) throw ValidationError("nothing to evaluate");
  report.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());

  double f1_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = report.confusion[c][c];
    std::size_t gold_total = 0, predicted_total = 0;
    for (std::size_t o = 0; o < k; ++o) {
      gold_total += report.confusion[c][o];
      predicted_total += report.confusion[o][c];
    }
    const double precision = predicted_total == 0 ? 0.0 : static_cast<double>(tp) / predicted_total;
    const double recall = gold_total == 0 ? 0.0 : static_cast<double>(tp) / gold_total;
    const double f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    report.per_class_f1[report.labels[c]] = f1;
    report.support[report.labels[c]] = gold_total;
    f1_sum += f1;
  }
  report.macro_f1 = k == 0 ? 0.0 : f1_sum / static_cast<double>(k);
  return report;
}

Rq2Report rq2_experiment(const Corpus& pool, const Corpus& test, const EmbeddingSet& embeddings,
                         std::span<const MethodRuns> runs, std::span<const std::size_t> n_shots_grid,
                         unsigned threads) {
  if (n_shots_grid.empty()) throw ValidationError("n_shots grid must not be empty");
  const LabelSet labels = label_set_of(pool);
  for (const auto& doc : test.documents()) {
    if (!doc.gold_label) throw ValidationError("test document '" + doc.id + "' has no gold label");
    if (!labels.contains(*doc.gold_label)) {
      throw ValidationError("test label '" + *doc.gold_label + "' does not occur in the selection pool");
    }
    if (pool.contains(doc.id)) throw ValidationError("test document '" + doc.id + "' also occurs in the selection pool");
  }
  const std::vector<std::string> test_ids = test.ids();

  struct Job {
    std::size_t method;
    std::size_t run;
  };
  struct Cell {
    double accuracy;
    double macro_f1;
    double theta;
  };
  std::vector<Job> jobs;
  for (std::size_t m = 0; m < runs.size(); ++m) {
    for (std::size_t r = 0; r < runs[m].orders.size(); ++r) jobs.push_back({m, r});
  }
  std::vector<std::vector<Cell>> results(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const SelectionOrder& order = runs[jobs[j].method].orders[jobs[j].run];
    for (std::size_t shots : n_shots_grid) {
      const SimulationResult sim = simulate(pool, order, SessionConfig{shots, labels, false});
      const CentroidClassifier model = fit(sim.state.annotated(), embeddings);
      const EvalReport eval = evaluate(predict(model, embeddings, test_ids), test, labels);
      results[j].push_back({eval.accuracy, eval.macro_f1, sim.theta});
    }
  });

  Rq2Report report;
  std::size_t first = 0;
  for (std::size_t m = 0; m < runs.size(); ++m) {
    for (std::size_t g = 0; g < n_shots_grid.size(); ++g) {
      Rq2Row row;
      row.method = runs[m].method;
      row.n_shots = n_shots_grid[g];
      for (std::size_t r = 0; r < runs[m].orders.size(); ++r) {
        const Cell& cell = results[first + r][g];
        row.accuracy.push_back(cell.accuracy);
        row.macro_f1.push_back(cell.macro_f1);
        row.theta.push_back(cell.theta);
      }
      const Summary acc = summarize(row.accuracy);
      const Summary f1 = summarize(row.macro_f1);
      row.accuracy_mean = acc.mean;
      row.accuracy_sd = acc.sd;
      row.macro_f1_mean = f1.mean;
      row.macro_f1_sd = f1.sd;
      row.theta_mean = summarize(row.theta).mean;
      report.rows.push_back(std::move(row));
    }
    first += runs[m].orders.size();
  }
  return report;
}

ordered_json to_json(const Rq2Report& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : report.rows) {
    rows.push_back(ordered_json{
        {"method", to_string(row.method)},
        {"n_shots", row.n_shots},
        {"runs", row.accuracy.size()},
        {"accuracy_mean", row.accuracy_mean},
        {"accuracy_sd", row.accuracy_sd},
        {"macro_f1_mean", row.macro_f1_mean},
        {"macro_f1_sd", row.macro_f1_sd},
        {"theta_mean", row.theta_mean},
        {"accuracy", row.accuracy},
        {"macro_f1", row.macro_f1},
    });
  }
  return rows;
}

std::string to_text(const Rq2Report& report) {
  std::string out = fmt::format("{:<8} {:>7} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}\n", "method", "n_shots",
                                "runs", "acc_mean", "acc_sd", "f1_mean", "f1_sd", "theta");
  for (const auto& row : report.rows) {
    out += fmt::format("{:<8} {:>7} {:>5} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f}\n",
                       to_string(row.method), row.n_shots, row.accuracy.size(), row.accuracy_mean,
                       row.accuracy_sd, row.macro_f1_mean, row.macro_f1_sd, row.theta_mean);
  }
  return out;
}

}  // namespace idsel
