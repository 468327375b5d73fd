#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "idsel/errors.hpp"
#include "idsel/selectors.hpp"
#include "support/oracles.hpp"

using namespace idsel;

namespace {

Corpus make_corpus(const std::vector<std::string>& ids) {
  std::vector<Document> docs;
  for (const auto& id : ids) docs.push_back({id, "text of " + id, std::nullopt});
  return Corpus(docs);
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

SimilarityMatrix matrix_of(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& s) {
  SquareMatrix m(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) m(i, j) = s[i][j];
  return SimilarityMatrix(ids, m);
}

std::vector<std::string> shuffled_ids(std::size_t n, std::mt19937_64& gen) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::string(1, static_cast<char>('a' + i)) + std::to_string(gen() % 7));
  std::shuffle(ids.begin(), ids.end(), gen);
  return ids;
}

}  // namespace

TEST_CASE("random order is deterministic and uniform at the head") {
  const Corpus c = make_corpus({"a", "b", "c", "d", "e"});
  CHECK(random_order(c, 7) == random_order(c, 7));
  CHECK(random_order(make_corpus({"solo"}), 3).ranked_ids == std::vector<std::string>{"solo"});
  CHECK_THROWS_AS(random_order(Corpus{}, 1), ValidationError);

  std::map<std::string, int> first;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) ++first[random_order(c, seed).ranked_ids.front()];
  for (const auto& id : c.ids()) CHECK(std::abs(first[id] / 10000.0 - 0.2) <= 0.02);
}

TEST_CASE("rss with two documents emits the smaller id first") {
  const Corpus c = make_corpus({"z", "m"});
  const auto order = rss_order(c, matrix_of({"z", "m"}, {{1, 0.3}, {0.3, 1}}));
  CHECK(order.ranked_ids == std::vector<std::string>{"m", "z"});
  CHECK_THROWS_AS(rss_order(make_corpus({"a"}), matrix_of({"a"}, {{1}})), ValidationError);
}

TEST_CASE("rss on three directions at 0, 5 and 90 degrees") {
  const double pi = std::acos(-1.0);
  EmbeddingSet e(2);
  for (auto [id, deg] : std::vector<std::pair<std::string, double>>{{"a", 0}, {"b", 5}, {"c", 90}}) {
    e.add(id, std::vector<double>{std::cos(deg * pi / 180), std::sin(deg * pi / 180)});
  }
  const Corpus c = make_corpus({"a", "b", "c"});
  const auto ids = c.ids();
  const auto order = rss_order(c, similarity_matrix(e, ids));
  CHECK(order.ranked_ids == std::vector<std::string>{"a", "c", "b"});
}

TEST_CASE("rss matches the brute-force greedy oracle step for step") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + gen() % 8;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("k" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), gen);
    std::vector<std::vector<double>> s(n, std::vector<double>(n, 1.0));
    const bool ties = t % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = ties ? std::round(u(gen) * 2) / 2 : u(gen);
        s[i][j] = s[j][i] = v;
      }
    }
    // Corpus order differs from matrix order on purpose.
    auto corpus_ids = ids;
    std::shuffle(corpus_ids.begin(), corpus_ids.end(), gen);
    const auto order = rss_order(make_corpus(corpus_ids), matrix_of(ids, s));
    CHECK(order.ranked_ids == oracle::greedy_rss(ids, s));
  }
}

TEST_CASE("rss prefix max similarity never decreases") {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + gen() % 20;
    auto rows = oracle::random_unit_rows(n, 3, gen);
    EmbeddingSet e(3);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("r" + std::to_string(i));
      e.add(ids.back(), rows[i]);
    }
    const auto order = rss_order(make_corpus(ids), similarity_matrix(e, ids));
    double prev = -2.0;
    for (std::size_t k = 2; k <= n; ++k) {
      double mx = -2.0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
          mx = std::max(mx, oracle::scalar_cosine(rows[std::stoul(order.ranked_ids[i].substr(1))],
                                                  rows[std::stoul(order.ranked_ids[j].substr(1))]));
      CHECK(mx >= prev - 1e-12);
      prev = mx;
    }
  }
}

TEST_CASE("oc pops one document per cluster per round") {
  const ClusterModel m({"x", "y", "z"}, {0, 0, 1}, {0.2, 0.9, 0.5});
  CHECK(oc_order(make_corpus({"x", "y", "z"}), m).ranked_ids == std::vector<std::string>{"x", "z", "y"});
}

TEST_CASE("oc with only noise is ascending id order") {
  const ClusterModel m({"c", "a", "b"}, {kNoise, kNoise, kNoise}, {0, 0, 0});
  CHECK(oc_order(make_corpus({"c", "a", "b"}), m).ranked_ids == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("oc rejects documents without an assignment") {
  const ClusterModel m({"a"}, {0}, {1.0});
  CHECK_THROWS_AS(oc_order(make_corpus({"a", "b"}), m), ValidationError);
}

TEST_CASE("oc matches the round-robin oracle and its structural properties") {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> quarter(0, 4);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + gen() % 12;
    auto ids = shuffled_ids(n, gen);
    std::vector<int> assign;
    std::vector<double> mem;
    std::vector<oracle::Member> members;
    // Three clusters plus noise; the coarse grid makes membership ties common.
    for (std::size_t i = 0; i < n; ++i) {
      const int c = static_cast<int>(gen() % 4) - 1;
      const double p = c == kNoise ? 0.0 : quarter(gen) / 4.0;
      assign.push_back(c);
      mem.push_back(p);
    }
    // Keep cluster indices dense.
    std::map<int, int> remap;
    for (int& a : assign)
      if (a != kNoise) a = remap.emplace(a, static_cast<int>(remap.size())).first->second;
    for (std::size_t i = 0; i < n; ++i) members.push_back({ids[i], assign[i], mem[i]});

    const ClusterModel m(ids, assign, mem);
    const auto order = oc_order(make_corpus(ids), m);
    REQUIRE(order.ranked_ids == oracle::round_robin(members));
    CHECK(sorted(order.ranked_ids) == sorted(ids));

    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i) pos[ids[i]] = i;
    std::map<int, double> last_mem;
    for (const auto& id : order.ranked_ids) {
      const int c = assign[pos[id]];
      if (last_mem.count(c)) CHECK(mem[pos[id]] >= last_mem[c]);
      last_mem[c] = mem[pos[id]];
    }
  }
}

TEST_CASE("lls with beta one keeps the seeded shuffle") {
  const Corpus c = make_corpus({"a", "b", "c", "d", "e", "f"});
  const auto o = lls_order(c, 1.0, LexicalParams{}, 5);
  CHECK(o.ranked_ids == random_order(c, 5).ranked_ids);
  CHECK_FALSE(o.truncated);
}

TEST_CASE("lls on identical texts keeps only the first shuffled document") {
  std::vector<Document> docs;
  for (int i = 0; i < 8; ++i) docs.push_back({"d" + std::to_string(i), "same words in every line", std::nullopt});
  const Corpus c(docs);
  const auto o = lls_order(c, 0.5, LexicalParams{}, 9);
  CHECK(o.ranked_ids == std::vector<std::string>{random_order(c, 9).ranked_ids.front()});
  CHECK(o.truncated);
}

TEST_CASE("lls kept set matches a manual replay on a six document fixture") {
  const Corpus c({{"a", "the cat sat on the mat", std::nullopt},
                  {"b", "the cat is on the mat", std::nullopt},
                  {"c", "a dog ran in the park", std::nullopt},
                  {"d", "the cat sat on the mat", std::nullopt},
                  {"e", "birds fly south every winter", std::nullopt},
                  {"f", "the cat is on the mat today", std::nullopt}});
  LexicalParams p;
  p.max_ngram = 3;
  for (double beta : {0.0, 0.45, 0.6, 0.99}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto walk = random_order(c, seed).ranked_ids;
      for (auto mode : {LlsMode::previous_only, LlsMode::all_kept}) {
        std::vector<std::string> kept{walk.front()};
        for (std::size_t k = 1; k < walk.size(); ++k) {
          double g = 0.0;
          if (mode == LlsMode::previous_only) {
            g = bleu(c.at(walk[k]), c.at(kept.back()), p);
          } else {
            for (const auto& r : kept) g = std::max(g, bleu(c.at(walk[k]), c.at(r), p));
          }
          if (!(g > beta)) kept.push_back(walk[k]);
        }
        const auto o = lls_order(c, beta, p, seed, mode);
        CHECK(o.ranked_ids == kept);
        CHECK(o.truncated == (kept.size() < c.size()));
        if (mode == LlsMode::previous_only) {
          for (std::size_t k = 1; k < kept.size(); ++k) CHECK(bleu(c.at(kept[k]), c.at(kept[k - 1]), p) <= beta);
        }
      }
    }
  }
}

TEST_CASE("lls rejects invalid beta and empty corpus") {
  const Corpus c = make_corpus({"a"});
  CHECK_THROWS_AS(lls_order(c, -0.1, LexicalParams{}, 0), ValidationError);
  CHECK_THROWS_AS(lls_order(c, 1.1, LexicalParams{}, 0), ValidationError);
  CHECK_THROWS_AS(lls_order(Corpus{}, 0.5, LexicalParams{}, 0), ValidationError);
}

TEST_CASE("select_order validates embeddings and is deterministic") {
  std::mt19937_64 gen(3);
  auto rows = oracle::random_unit_rows(30, 4, gen);
  EmbeddingSet e(4);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ids.push_back("e" + std::to_string(i));
    e.add(ids.back(), rows[i]);
  }
  const Corpus c = make_corpus(ids);
  for (Method m : {Method::random, Method::rss, Method::oc, Method::lls}) {
    SelectorConfig cfg;
    cfg.method = m;
    cfg.seed = 4;
    const auto a = select_order(c, &e, cfg, 1);
    CHECK(a == select_order(c, &e, cfg, 3));
    if (m != Method::lls) CHECK(sorted(a.ranked_ids) == sorted(ids));
    CHECK(a.params_fingerprint.rfind(std::string(to_string(m)), 0) == 0);
  }
  SelectorConfig oc;
  oc.method = Method::oc;
  try {
    select_order(c, nullptr, oc);
    FAIL("expected a validation error");
  } catch (const ValidationError& err) {
    CHECK(std::string(err.what()).find("embeddings required") != std::string::npos);
  }
}

TEST_CASE("method and mode names round trip") {
  for (Method m : {Method::random, Method::rss, Method::oc, Method::lls}) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("kmeans"), ValidationError);
  CHECK(parse_lls_mode("all") == LlsMode::all_kept);
  CHECK_THROWS_AS(parse_lls_mode("some"), ValidationError);
}
