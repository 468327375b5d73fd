#include "idsel/selectors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <vector>

#include "idsel/errors.hpp"
#include "idsel/rng.hpp"

namespace idsel {

namespace {

// Corpus positions sorted by ascending id.
std::vector<std::size_t> positions_by_id(const Corpus& corpus) {
  std::vector<std::size_t> pos(corpus.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  std::sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
  return pos;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string_view to_string(LlsMode mode) {
  return mode == LlsMode::previous_only ? "previous" : "all";
}

LlsMode parse_lls_mode(std::string_view name) {
  if (name == "previous" || name == "previous_only") return LlsMode::previous_only;
  if (name == "all" || name == "all_kept") return LlsMode::all_kept;
  throw ValidationError("unknown LLS mode '" + std::string(name) + "' (expected previous or all)");
}

SelectionOrder random_order(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw ValidationError("random selection needs a non-empty corpus");
  SelectionOrder order;
  order.method = Method::random;
  order.ranked_ids = corpus.ids();
  Rng rng(seed);
  rng.shuffle(order.ranked_ids);
  order.params_fingerprint = "random;seed=" + std::to_string(seed);
  return order;
}

SelectionOrder rss_order(const Corpus& corpus, const SimilarityMatrix& sim) {
  const std::size_t n = corpus.size();
  if (n < 2) throw ValidationError("rss needs at least 2 documents");
  const std::vector<std::size_t> by_id = positions_by_id(corpus);
  // sorted rank -> matrix index
  std::vector<std::size_t> mx(n);
  for (std::size_t k = 0; k < n; ++k) mx[k] = sim.index_of(corpus[by_id[k]].id);

  std::size_t first = 0, second = 1;
  double least = sim(mx[0], mx[1]);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = sim(mx[a], mx[b]);
      if (s < least) {
        least = s;
        first = a;
        second = b;
      }
    }
  }

  SelectionOrder order;
  order.method = Method::rss;
  order.params_fingerprint = "rss;similarity=cosine";
  order.ranked_ids.reserve(n);
  std::vector<bool> taken(n, false);
  std::vector<double> closest(n, -2.0);  // max similarity to the emitted set
  auto emit = [&](std::size_t k) {
    taken[k] = true;
    order.ranked_ids.push_back(corpus[by_id[k]].id);
    for (std::size_t j = 0; j < n; ++j) {
      if (!taken[j]) closest[j] = std::max(closest[j], sim(mx[j], mx[k]));
    }
  };
  emit(first);
  emit(second);
  while (order.ranked_ids.size() < n) {
    std::size_t pick = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!taken[j] && (pick == n || closest[j] < closest[pick])) pick = j;
    }
    emit(pick);
  }
  return order;
}

SelectionOrder oc_order(const Corpus& corpus, const ClusterModel& model) {
  struct Member {
    double membership;
    const std::string* id;
  };
  const std::vector<int> cluster_order = order_clusters(model);
  // Slot per cluster in visiting order, noise last.
  std::vector<std::size_t> slot(model.n_clusters());
  for (std::size_t k = 0; k < cluster_order.size(); ++k) slot[cluster_order[k]] = k;
  std::vector<std::vector<Member>> groups(model.n_clusters() + 1);
  for (const auto& doc : corpus.documents()) {
    if (!model.contains(doc.id)) throw ValidationError("document '" + doc.id + "' has no cluster assignment");
    const int c = model.assignment(doc.id);
    const std::size_t g = c == kNoise ? model.n_clusters() : slot[c];
    groups[g].push_back({model.membership(doc.id), &doc.id});
  }
  for (auto& group : groups) {
    // Reversed so the next member to emit sits at the back.
    std::sort(group.begin(), group.end(), [](const Member& a, const Member& b) {
      if (a.membership != b.membership) return a.membership > b.membership;
      return *a.id > *b.id;
    });
  }

  SelectionOrder order;
  order.method = Method::oc;
  order.params_fingerprint = "oc;clusters=" + std::to_string(model.n_clusters()) +
                             ";noise=" + std::to_string(model.noise_count());
  order.ranked_ids.reserve(corpus.size());
  while (order.ranked_ids.size() < corpus.size()) {
    for (auto& group : groups) {
      if (group.empty()) continue;
      order.ranked_ids.push_back(*group.back().id);
      group.pop_back();
    }
  }
  return order;
}

SelectionOrder lls_order(const Corpus& corpus, double beta, const LexicalComparator& compare,
                         std::uint64_t seed, LlsMode mode, std::string_view comparator_fingerprint) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must be in [0, 1]");
  if (corpus.empty()) throw ValidationError("lls selection needs a non-empty corpus");
  std::vector<std::size_t> shuffled(corpus.size());
  std::iota(shuffled.begin(), shuffled.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(shuffled);

  SelectionOrder order;
  order.method = Method::lls;
  order.params_fingerprint = "lls;seed=" + std::to_string(seed) + ";beta=" + format_double(beta) +
                             ";mode=" + std::string(to_string(mode)) + ";" + std::string(comparator_fingerprint);
  std::vector<std::size_t> kept{shuffled.front()};
  for (std::size_t k = 1; k < shuffled.size(); ++k) {
    const Document& candidate = corpus[shuffled[k]];
    bool discard = false;
    if (mode == LlsMode::previous_only) {
      discard = compare(candidate, corpus[kept.back()]) > beta;
    } else {
      for (std::size_t ref : kept) {
        if (compare(candidate, corpus[ref]) > beta) {
          discard = true;
          break;
        }
      }
    }
    if (!discard) kept.push_back(shuffled[k]);
  }
  order.ranked_ids.reserve(kept.size());
  for (std::size_t pos : kept) order.ranked_ids.push_back(corpus[pos].id);
  order.truncated = kept.size() < corpus.size();
  return order;
}

SelectionOrder lls_order(const Corpus& corpus, double beta, const LexicalParams& params,
                         std::uint64_t seed, LlsMode mode) {
  return lls_order(corpus, beta, bleu_comparator(params), seed, mode, "bleu:" + params.fingerprint());
}

void SelectorConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must be in [0, 1]");
  lexical.validate();
  if (cluster) cluster->validate();
}

SelectionOrder select_order(const Corpus& corpus, const EmbeddingSet* embeddings,
                            const SelectorConfig& config, unsigned threads) {
  config.validate();
  const bool needs_embeddings = config.method == Method::rss || config.method == Method::oc;
  if (needs_embeddings) {
    if (embeddings == nullptr) throw ValidationError("embeddings required for method " + std::string(to_string(config.method)));
    for (const auto& doc : corpus.documents()) {
      if (!embeddings->contains(doc.id)) throw ValidationError("embeddings required: no vector for document '" + doc.id + "'");
    }
  }
  switch (config.method) {
    case Method::random:
      return random_order(corpus, config.seed);
    case Method::rss: {
      const auto ids = corpus.ids();
      return rss_order(corpus, similarity_matrix(*embeddings, ids, threads));
    }
    case Method::oc: {
      const auto ids = corpus.ids();
      const ClusterParams params = config.cluster.value_or(ClusterParams::defaults_for(corpus.size()));
      SelectionOrder order = oc_order(corpus, hdbscan(*embeddings, ids, params, threads));
      order.params_fingerprint += ";" + params.fingerprint();
      return order;
    }
    case Method::lls:
      return lls_order(corpus, config.beta, config.lexical, config.seed, config.lls_mode);
  }
  throw ValidationError("unknown method");
}

}  // namespace idsel
