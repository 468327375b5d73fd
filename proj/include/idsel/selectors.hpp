#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "idsel/clustering.hpp"
#include "idsel/corpus.hpp"
#include "idsel/geometry.hpp"
#include "idsel/lexical.hpp"
#include "idsel/selection.hpp"

namespace idsel {

enum class LlsMode {
  previous_only,  // compare with the most recently kept document
  all_kept,       // compare with every kept document, take the maximum
};

std::string_view to_string(LlsMode mode);
// Accepts "previous", "previous_only", "all" and "all_kept".
LlsMode parse_lls_mode(std::string_view name);

// Seeded Fisher-Yates shuffle of the corpus ids.
SelectionOrder random_order(const Corpus& corpus, std::uint64_t seed);

// Farthest-point traversal in similarity space. Starts with the least
// similar pair (smaller id first), then repeatedly emits the document whose
// maximum similarity to the already emitted ones is smallest. Every tie goes
// to the ascending id.
SelectionOrder rss_order(const Corpus& corpus, const SimilarityMatrix& sim);

// Round-robin over clusters from largest to smallest, with noise visited last
// in every round; each visit pops the member with the lowest membership
// probability (ties by ascending id).
SelectionOrder oc_order(const Corpus& corpus, const ClusterModel& model);

// Walks a seeded shuffle once and drops every candidate whose lexical score
// against the reference exceeds beta (see LlsMode).
SelectionOrder lls_order(const Corpus& corpus, double beta, const LexicalParams& params,
                         std::uint64_t seed, LlsMode mode = LlsMode::previous_only);
SelectionOrder lls_order(const Corpus& corpus, double beta, const LexicalComparator& compare,
                         std::uint64_t seed, LlsMode mode, std::string_view comparator_fingerprint);

inline constexpr double kDefaultBeta = 0.4;

struct SelectorConfig {
  Method method = Method::random;
  std::uint64_t seed = 0;
  double beta = kDefaultBeta;
  LlsMode lls_mode = LlsMode::previous_only;
  LexicalParams lexical;
  // Defaults to ClusterParams::defaults_for(corpus size) when unset.
  std::optional<ClusterParams> cluster;

  // Throws ValidationError.
  void validate() const;
};

// Runs the configured selector. rss and oc need embeddings for every corpus
// document and throw ValidationError("embeddings required") without them.
SelectionOrder select_order(const Corpus& corpus, const EmbeddingSet* embeddings,
                            const SelectorConfig& config, unsigned threads = 1);

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace idsel
