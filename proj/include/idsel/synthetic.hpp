#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "idsel/corpus.hpp"
#include "idsel/geometry.hpp"

namespace idsel {

// Labeled Gaussian blobs with matching bag-of-words texts, for experiments
// without an external dataset.
struct BlobSpec {
  std::vector<std::size_t> class_counts;  // selection pool, one entry per class
  std::vector<std::size_t> test_counts;   // held-out split; empty for none
  std::size_t dim = 16;
  double separation = 4.0;  // norm of each class mean
  double spread = 1.0;      // per-coordinate standard deviation
  std::size_t class_vocabulary = 30;
  std::size_t shared_vocabulary = 60;
  double class_word_rate = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  Corpus pool;
  Corpus test;
  EmbeddingSet embeddings;  // vectors for pool and test documents
};

// Pool ids are d0000, d0001, ... and test ids t0000, ...; documents are
// shuffled so ids carry no class information. Labels are c0, c1, ...
SyntheticData make_blobs(const BlobSpec& spec);

}  // namespace idsel
