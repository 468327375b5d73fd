#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idsel/corpus.hpp"

namespace idsel {

enum class Smoothing { none, add_epsilon };
enum class Tokenizer { whitespace_lower };

struct LexicalParams {
  int max_ngram = 4;
  Smoothing smoothing = Smoothing::none;
  Tokenizer tokenizer = Tokenizer::whitespace_lower;

  // Throws ValidationError.
  void validate() const;
  std::string fingerprint() const;
};

// Numerator used for zero n-gram matches under add_epsilon smoothing.
inline constexpr double kBleuEpsilon = 1e-9;

// Lowercases, splits on Unicode whitespace and strips leading/trailing
// punctuation from each token; empty tokens are dropped. Case folding covers
// ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
std::vector<std::string> tokenize(std::string_view text);

// Single-reference sentence BLEU: geometric mean of clipped n-gram
// precisions for n = 1..max_ngram times min(1, exp(1 - r / c)).
// Throws DomainError when either side has no tokens.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            const LexicalParams& params);
double bleu(const Document& candidate, const Document& reference, const LexicalParams& params);

// bleu(a, b) > beta. beta must lie in [0, 1].
bool exceeds_threshold(const Document& a, const Document& b, double beta, const LexicalParams& params);

// g(candidate, reference) in [0, 1]. Other comparison functions (ROUGE, ...)
// can be plugged into the LLS selector through this type.
using LexicalComparator = std::function<double(const Document& candidate, const Document& reference)>;

// BLEU as a comparator. A document without any token scores 0 against
// everything. The returned object caches tokenizations and must not be
// shared between threads.
LexicalComparator bleu_comparator(LexicalParams params);

}  // namespace idsel
