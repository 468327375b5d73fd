#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "idsel/annotation.hpp"
#include "idsel/corpus.hpp"
#include "idsel/geometry.hpp"
#include "idsel/selection.hpp"

namespace idsel {

// Nearest-centroid classifier over frozen embeddings.
class CentroidClassifier {
 public:
  CentroidClassifier(std::vector<std::string> labels, std::vector<std::vector<double>> centroids);

  std::size_t dim() const { return dim_; }
  // Sorted ascending, so ties in predict() resolve to the smaller label.
  std::span<const std::string> labels() const { return labels_; }
  std::span<const double> centroid(std::string_view label) const;
  // Label whose centroid has the largest cosine similarity to v.
  const std::string& predict(std::span<const double> v) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<double>> centroids_;
  std::size_t dim_ = 0;
};

// Per-class arithmetic mean of the training vectors. Throws
// ValidationError for a missing embedding or a class with no example.
CentroidClassifier fit(const AnnotatedSet& train, const EmbeddingSet& embeddings);
// As above, and every label in `required` must have an example.
CentroidClassifier fit(const AnnotatedSet& train, const EmbeddingSet& embeddings, const LabelSet& required);

std::map<std::string, std::string> predict(const CentroidClassifier& model, const EmbeddingSet& embeddings,
                                           std::span<const std::string> ids);

struct EvalReport {
  std::vector<std::string> labels;  // evaluation label set, in order
  // confusion[gold][predicted], indexed like labels
  std::vector<std::vector<std::size_t>> confusion;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, double> per_class_f1;
  std::map<std::string, std::size_t> support;
};

// Accuracy and one-vs-rest F1 (0 when precision + recall = 0), macro
// averaged over the label set. The label set defaults to the gold labels of
// the evaluated documents in first-appearance order; predictions outside it
// are an error.
EvalReport evaluate(const std::map<std::string, std::string>& predictions, const Corpus& gold,
                    const std::optional<LabelSet>& labels = std::nullopt);

struct Rq2Row {
  Method method = Method::random;
  std::size_t n_shots = 0;
  std::vector<double> accuracy;  // one per run
  std::vector<double> macro_f1;
  std::vector<double> theta;
  double accuracy_mean = 0.0;
  double accuracy_sd = 0.0;
  double macro_f1_mean = 0.0;
  double macro_f1_sd = 0.0;
  double theta_mean = 0.0;
};

struct Rq2Report {
  std::vector<Rq2Row> rows;
};

// For every method run and n_shots: simulate annotation on the pool, fit on
// the annotated set (classes never reached are left out of the model) and
// evaluate on the test corpus over the pool's label set.
Rq2Report rq2_experiment(const Corpus& pool, const Corpus& test, const EmbeddingSet& embeddings,
                         std::span<const MethodRuns> runs, std::span<const std::size_t> n_shots_grid,
                         unsigned threads = 1);

nlohmann::ordered_json to_json(const Rq2Report& report);
std::string to_text(const Rq2Report& report);

}  // namespace idsel
