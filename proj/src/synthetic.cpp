#include "idsel/synthetic.hpp"

#include <cmath>

#include <fmt/format.h>

#include "idsel/errors.hpp"
#include "idsel/rng.hpp"

namespace idsel {

namespace {

struct Draft {
  std::size_t label;
  std::vector<double> vector;
  std::string text;
};

}  // namespace

void BlobSpec::validate() const {
  if (class_counts.size() < 2) throw ValidationError("need at least 2 classes");
  if (!test_counts.empty() && test_counts.size() != class_counts.size()) {
    throw ValidationError("test_counts must have one entry per class");
  }
  if (dim == 0) throw ValidationError("dim must be positive");
  if (!(spread > 0.0) || !(separation > 0.0)) throw ValidationError("spread and separation must be positive");
  if (class_vocabulary == 0 || shared_vocabulary == 0) throw ValidationError("vocabularies must be non-empty");
  if (!(class_word_rate >= 0.0 && class_word_rate <= 1.0)) throw ValidationError("class_word_rate must be in [0, 1]");
}

SyntheticData make_blobs(const BlobSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t k = spec.class_counts.size();

  std::vector<std::vector<double>> means(k, std::vector<double>(spec.dim));
  for (auto& mean : means) {
    double norm = 0.0;
    for (double& x : mean) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : mean) x *= spec.separation / norm;
  }

  auto draft = [&](std::size_t label) {
    Draft d{label, std::vector<double>(spec.dim), {}};
    for (std::size_t j = 0; j < spec.dim; ++j) d.vector[j] = means[label][j] + spec.spread * rng.normal();
    const std::size_t words = 8 + static_cast<std::size_t>(rng.below(9));
    for (std::size_t w = 0; w < words; ++w) {
      if (w != 0) d.text += ' ';
      if (rng.uniform() < spec.class_word_rate) {
        d.text += fmt::format("c{}w{}", label, rng.below(spec.class_vocabulary));
      } else {
        d.text += fmt::format("w{}", rng.below(spec.shared_vocabulary));
      }
    }
    return d;
  };

  auto build = [&](const std::vector<std::size_t>& counts, char prefix, EmbeddingSet& emb) {
    std::vector<Draft> drafts;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      for (std::size_t i = 0; i < counts[c]; ++i) drafts.push_back(draft(c));
    }
    rng.shuffle(drafts);
    std::vector<Document> docs;
    docs.reserve(drafts.size());
    for (std::size_t i = 0; i < drafts.size(); ++i) {
      std::string id = fmt::format("{}{:04d}", prefix, i);
      // Stored as f32 so the in-memory set equals a save/load round trip.
      std::vector<float> narrowed(drafts[i].vector.begin(), drafts[i].vector.end());
      emb.add(id, std::span<const float>(narrowed));
      docs.push_back({std::move(id), std::move(drafts[i].text), fmt::format("c{}", drafts[i].label)});
    }
    return docs;
  };

  EmbeddingSet embeddings(spec.dim);
  auto pool_docs = build(spec.class_counts, 'd', embeddings);
  std::vector<Document> test_docs;
  if (!spec.test_counts.empty()) test_docs = build(spec.test_counts, 't', embeddings);
  return {Corpus(std::move(pool_docs)), Corpus(std::move(test_docs)), std::move(embeddings)};
}

}  // namespace idsel
