#include <doctest.h>

#include <cmath>
#include <random>

#include "idsel/errors.hpp"
#include "idsel/lexical.hpp"

using namespace idsel;

namespace {

using Tokens = std::vector<std::string>;

Document doc(std::string id, std::string text) { return Document{std::move(id), std::move(text), std::nullopt}; }

LexicalParams params(int max_ngram, Smoothing s = Smoothing::none) {
  LexicalParams p;
  p.max_ngram = max_ngram;
  p.smoothing = s;
  return p;
}

// Hand counts for "the cat sat on the mat" against "the cat is on the mat":
// unigrams 5/6, bigrams 3/5, trigrams 1/4, 4-grams 0/3, equal lengths.
constexpr double kMatched[4] = {5, 3, 1, 0};
constexpr double kTotal[4] = {6, 5, 4, 3};

double hand_bleu(int max_n, bool epsilon) {
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    double m = kMatched[n];
    if (m == 0) {
      if (!epsilon) return 0.0;
      m = 1e-9;
    }
    log_sum += std::log(m / kTotal[n]);
  }
  return std::exp(log_sum / max_n);
}

}  // namespace

TEST_CASE("tokenize definition examples") {
  CHECK(tokenize("The cat, sat.") == Tokens{"the", "cat", "sat"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  a  a ") == Tokens{"a", "a"});
}

TEST_CASE("tokenize keeps inner punctuation and drops bare punctuation") {
  CHECK(tokenize("don't -- (stop)! e.g.") == Tokens{"don't", "stop", "e.g"});
  CHECK(tokenize("\"quoted\"\t\nnext") == Tokens{"quoted", "next"});
}

TEST_CASE("tokenize splits on non-ASCII whitespace and folds case outside ASCII") {
  // U+00A0 no-break space, U+2003 em space, U+3000 ideographic space.
  CHECK(tokenize("x\xc2\xa0y\xe2\x80\x83z\xe3\x80\x80w") == Tokens{"x", "y", "z", "w"});
  CHECK(tokenize("\xc3\x89\x43OLE") == Tokens{"\xc3\xa9\x63ole"});              // ÉCOLE
  CHECK(tokenize("\xce\x91\xce\x92\xce\x93") == Tokens{"\xce\xb1\xce\xb2\xce\xb3"});  // ΑΒΓ
  CHECK(tokenize("\xd0\x9f\xd1\x80\xd0\xb8") == Tokens{"\xd0\xbf\xd1\x80\xd0\xb8"});  // При
  CHECK(tokenize("\xc2\xab\xc5\x81\xc3\xb3\x64\xc5\xba\xc2\xbb") == Tokens{"\xc5\x82\xc3\xb3\x64\xc5\xba"});  // «Łódź»
}

TEST_CASE("fixture pair against hand-derived precisions") {
  const auto a = doc("a", "the cat sat on the mat");
  const auto b = doc("b", "the cat is on the mat");
  CHECK(bleu(a, b, params(4)) == 0.0);
  for (int n = 1; n <= 3; ++n) CHECK(std::abs(bleu(a, b, params(n)) - hand_bleu(n, false)) <= 1e-9);
  CHECK(std::abs(bleu(a, b, params(3)) - 0.5) <= 1e-9);
  CHECK(std::abs(bleu(a, b, params(4, Smoothing::add_epsilon)) - hand_bleu(4, true)) <= 1e-9);
}

TEST_CASE("brevity penalty and clipping") {
  // c = 2, r = 4: BP = exp(1 - 2), precisions 1.
  CHECK(std::abs(bleu(doc("c", "the cat"), doc("r", "the cat sat on"), params(2)) - std::exp(-1.0)) <= 1e-9);
  // Longer candidate: BP 1, p1 = 2/6, p2 = 1/5.
  CHECK(std::abs(bleu(doc("c", "the cat sat on the mat"), doc("r", "the cat"), params(2)) - std::sqrt(1.0 / 15.0)) <=
        1e-9);
  // "the" clipped to its reference count 1 of 4 candidate tokens.
  CHECK(std::abs(bleu(doc("c", "the the the the"), doc("r", "the cat"), params(1)) - 0.25) <= 1e-9);
}

TEST_CASE("identical documents score one and disjoint ones zero") {
  const auto d = doc("d", "one two three four five");
  CHECK(bleu(d, d, params(4)) == 1.0);
  CHECK(bleu(doc("x", "alpha beta"), doc("y", "gamma delta"), params(1)) == 0.0);
}

TEST_CASE("empty token lists are a domain error") {
  CHECK_THROWS_AS(bleu(doc("x", "..."), doc("y", "word"), params(1)), DomainError);
}

TEST_CASE("exceeds_threshold is strict") {
  const auto d = doc("d", "a b c d e");
  CHECK(exceeds_threshold(d, d, 0.9, params(4)));
  CHECK_FALSE(exceeds_threshold(doc("x", "alpha beta"), doc("y", "gamma delta"), 0.0, params(4)));
  const auto a = doc("a", "the cat sat on the mat");
  const auto b = doc("b", "the cat is on the mat");
  CHECK(exceeds_threshold(a, b, 0.4999, params(3)));
  CHECK_FALSE(exceeds_threshold(a, b, 0.5001, params(3)));
  CHECK_THROWS_AS(exceeds_threshold(a, b, 1.5, params(3)), ValidationError);
}

TEST_CASE("params validation") {
  CHECK_THROWS_AS(params(0).validate(), ValidationError);
  CHECK(params(4).fingerprint() != params(3).fingerprint());
}

TEST_CASE("scores stay in [0, 1] and self-similarity is one") {
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  std::mt19937_64 gen(31);
  for (int t = 0; t < 300; ++t) {
    auto sentence = [&] {
      std::string s;
      const std::size_t len = 1 + gen() % 10;
      for (std::size_t i = 0; i < len; ++i) s += vocab[gen() % vocab.size()] + " ";
      return s;
    };
    const auto x = doc("x", sentence()), y = doc("y", sentence());
    for (auto sm : {Smoothing::none, Smoothing::add_epsilon}) {
      const double v = bleu(x, y, params(4, sm));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (tokenize(x.text).size() >= 4) CHECK(bleu(x, x, params(4)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("comparator scores token-less documents as zero") {
  const auto g = bleu_comparator(params(2));
  CHECK(g(doc("x", "!!"), doc("y", "word word")) == 0.0);
  CHECK(g(doc("x", "a b c"), doc("y", "a b c")) == 1.0);
}
