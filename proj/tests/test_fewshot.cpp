#include <doctest.h>

#include <cmath>
#include <random>

#include "idsel/errors.hpp"
#include "idsel/fewshot.hpp"
#include "idsel/selectors.hpp"
#include "idsel/synthetic.hpp"
#include "support/oracles.hpp"

using namespace idsel;

namespace {

AnnotatedSet train_of(const std::vector<std::pair<std::string, std::string>>& rows) {
  AnnotatedSet s;
  std::size_t rank = 0;
  for (const auto& [id, label] : rows) s.add({rank++, id, label});
  return s;
}

Corpus gold_of(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::vector<Document> docs;
  for (const auto& [id, label] : rows) docs.push_back({id, "t", label});
  return Corpus(docs);
}

std::vector<MethodRuns> runs_for(const Corpus& pool, const EmbeddingSet& emb) {
  MethodRuns random{Method::random, {}, {}};
  for (std::uint64_t s = 0; s < 3; ++s) {
    random.seeds.push_back(s);
    random.orders.push_back(random_order(pool, s));
  }
  SelectorConfig rss;
  rss.method = Method::rss;
  MethodRuns r{Method::rss, {0}, {select_order(pool, &emb, rss)}};
  return {random, r};
}

}  // namespace

TEST_CASE("centroids are per-class means") {
  EmbeddingSet e(2);
  e.add("a", std::vector<double>{1, 0});
  e.add("b", std::vector<double>{0, 1});
  e.add("c", std::vector<double>{-1, -1});
  const auto model = fit(train_of({{"a", "x"}, {"b", "x"}, {"c", "y"}}), e);
  const auto cx = model.centroid("x");
  CHECK(cx[0] == 0.5);
  CHECK(cx[1] == 0.5);
  CHECK(model.centroid("y")[0] == -1.0);
  CHECK_THROWS_AS(fit(train_of({{"a", "x"}, {"zz", "y"}}), e), ValidationError);
  CHECK_THROWS_AS(fit(train_of({{"a", "x"}}), e, LabelSet({"x", "y"})), ValidationError);
}

TEST_CASE("prediction picks the most similar centroid, ties to the smaller label") {
  EmbeddingSet e(2);
  e.add("pa", std::vector<double>{1, 0});
  e.add("pb", std::vector<double>{0, 1});
  e.add("mid", std::vector<double>{1, 1});
  const auto model = fit(train_of({{"pb", "b"}, {"pa", "a"}}), e);
  const std::vector<std::string> ids{"pa", "pb", "mid"};
  const auto pred = predict(model, e, ids);
  CHECK(pred.at("pa") == "a");
  CHECK(pred.at("pb") == "b");
  CHECK(pred.at("mid") == "a");
}

TEST_CASE("hand confusion matrix for the two-class example") {
  const Corpus gold = gold_of({{"1", "x"}, {"2", "x"}, {"3", "y"}, {"4", "y"}});
  const std::map<std::string, std::string> pred{{"1", "x"}, {"2", "y"}, {"3", "y"}, {"4", "y"}};
  const EvalReport r = evaluate(pred, gold);
  CHECK(r.accuracy == 0.75);
  CHECK(std::abs(r.per_class_f1.at("x") - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(r.per_class_f1.at("y") - 0.8) <= 1e-12);
  CHECK(std::abs(r.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0) <= 1e-12);
  CHECK(std::abs(r.macro_f1 - 0.7333333333333333) <= 1e-12);
  CHECK(r.support.at("x") == 2);
}

TEST_CASE("all correct gives ones") {
  const Corpus gold = gold_of({{"1", "x"}, {"2", "y"}});
  const EvalReport r = evaluate({{"1", "x"}, {"2", "y"}}, gold);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);
}

TEST_CASE("predicted labels outside the label set are errors unless declared") {
  const Corpus gold = gold_of({{"1", "x"}, {"2", "y"}});
  const std::map<std::string, std::string> pred{{"1", "x"}, {"2", "z"}};
  CHECK_THROWS_AS(evaluate(pred, gold), ValidationError);
  const EvalReport r = evaluate(pred, gold, LabelSet({"x", "y", "z"}));
  CHECK(r.per_class_f1.at("z") == 0.0);
  CHECK(r.per_class_f1.at("y") == 0.0);
  CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("missing gold label is an error") {
  std::vector<Document> docs{{"1", "t", std::nullopt}, {"2", "t", "y"}};
  const Corpus gold(docs);
  CHECK_THROWS_AS(evaluate({{"1", "y"}}, gold, LabelSet({"x", "y"})), ValidationError);
}

TEST_CASE("macro F1 recomputed from the confusion matrix and relabeling invariance") {
  std::mt19937_64 gen(5);
  const std::vector<std::string> labels{"p", "q", "r", "s"};
  for (int t = 0; t < 100; ++t) {
    std::vector<std::pair<std::string, std::string>> rows;
    std::map<std::string, std::string> pred, pred_renamed;
    std::vector<std::pair<std::string, std::string>> rows_renamed;
    auto rename = [](const std::string& l) { return "_" + l + "_"; };
    for (int i = 0; i < 30; ++i) {
      const std::string id = "d" + std::to_string(i);
      rows.emplace_back(id, labels[gen() % 4]);
      rows_renamed.emplace_back(id, rename(rows.back().second));
      pred[id] = labels[gen() % 4];
      pred_renamed[id] = rename(pred[id]);
    }
    const EvalReport r = evaluate(pred, gold_of(rows), LabelSet(labels));
    CHECK(std::abs(r.macro_f1 - oracle::macro_f1_from_confusion(r.confusion)) <= 1e-12);
    double mean = 0.0;
    for (auto& [l, f] : r.per_class_f1) mean += f;
    CHECK(std::abs(r.macro_f1 - mean / 4.0) <= 1e-12);
    std::vector<std::string> renamed_labels;
    for (auto& l : labels) renamed_labels.push_back(rename(l));
    const EvalReport rr = evaluate(pred_renamed, gold_of(rows_renamed), LabelSet(renamed_labels));
    CHECK(rr.accuracy == r.accuracy);
  }
}

TEST_CASE("predictions match a scalar nearest-centroid loop and ignore positive scaling") {
  BlobSpec spec;
  spec.class_counts = {40, 30, 20};
  spec.test_counts = {20, 20, 20};
  spec.dim = 6;
  spec.separation = 2.0;
  spec.seed = 3;
  const SyntheticData data = make_blobs(spec);
  AnnotatedSet train;
  std::size_t rank = 0;
  for (const auto& d : data.pool.documents()) train.add({rank++, d.id, *d.gold_label});
  const auto model = fit(train, data.embeddings);
  const auto test_ids = data.test.ids();
  const auto pred = predict(model, data.embeddings, test_ids);

  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, double> counts;
  for (const auto& d : data.pool.documents()) {
    auto v = data.embeddings.vector(d.id);
    auto& s = sums[*d.gold_label];
    s.resize(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) s[i] += v[i];
    counts[*d.gold_label] += 1.0;
  }
  EmbeddingSet scaled(spec.dim);
  for (const auto& id : data.embeddings.ids()) {
    auto v = data.embeddings.vector(id);
    std::vector<double> w(v.begin(), v.end());
    for (auto& x : w) x *= 37.5;
    scaled.add(id, w);
  }
  for (const auto& id : test_ids) {
    auto v = data.embeddings.vector(id);
    const std::vector<double> x(v.begin(), v.end());
    std::string best;
    double best_sim = -2.0;
    for (auto& [label, s] : sums) {
      std::vector<double> c = s;
      for (auto& ci : c) ci /= counts[label];
      const double sim = oracle::scalar_cosine(x, c);
      if (sim > best_sim) {
        best_sim = sim;
        best = label;
      }
    }
    CHECK(pred.at(id) == best);
  }
  CHECK(predict(fit(train, scaled), scaled, test_ids) == pred);
}

TEST_CASE("far-apart blobs are classified perfectly by every selector") {
  BlobSpec spec;
  spec.class_counts = {60, 20, 10};
  spec.test_counts = {10, 10, 10};
  spec.dim = 8;
  spec.separation = 40.0;
  spec.seed = 8;
  const SyntheticData data = make_blobs(spec);
  const auto runs = runs_for(data.pool, data.embeddings);
  const std::vector<std::size_t> grid{1, 4};
  const Rq2Report rep = rq2_experiment(data.pool, data.test, data.embeddings, runs, grid, 2);
  REQUIRE(rep.rows.size() == 4);
  for (const auto& row : rep.rows) {
    for (double a : row.accuracy) CHECK(a == 1.0);
  }
  CHECK(rep.rows[2].accuracy_sd == 0.0);
  CHECK(to_json(rep) == to_json(rq2_experiment(data.pool, data.test, data.embeddings, runs, grid, 1)));
}

TEST_CASE("rq2 rejects leakage between pool and test") {
  BlobSpec spec;
  spec.class_counts = {10, 10};
  spec.test_counts = {5, 5};
  spec.dim = 4;
  spec.seed = 1;
  const SyntheticData data = make_blobs(spec);
  const auto runs = runs_for(data.pool, data.embeddings);
  const std::vector<std::size_t> grid{1};
  CHECK_THROWS_AS(rq2_experiment(data.pool, data.pool, data.embeddings, runs, grid), ValidationError);
}
