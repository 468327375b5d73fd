#include "idsel/lexical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <unordered_map>

#include "idsel/errors.hpp"

namespace idsel {

namespace {

// Decodes one UTF-8 code point starting at pos and advances pos. Invalid
// bytes decode as themselves so text is never lost.
char32_t decode(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    pos += 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      pos += 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      pos += 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      pos += 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  pos += 1;
  return b0;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB ||
         c == 0xBF || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0xFF01 && c <= 0xFF0F);
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0x80) return c;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;               // Latin-1
  if (c >= 0x100 && c <= 0x17F) {                                         // Latin Extended-A
    if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x130 || c == 0x131 || c == 0x138 || c == 0x149 || c == 0x17F) return c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;             // Greek
  if (c >= 0x410 && c <= 0x42F) return c + 32;                            // Cyrillic
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

using NgramCounts = std::unordered_map<std::string, int>;

NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t order) {
  NgramCounts counts;
  if (tokens.size() < order) return counts;
  std::string key;
  for (std::size_t start = 0; start + order <= tokens.size(); ++start) {
    key.clear();
    for (std::size_t k = 0; k < order; ++k) {
      if (k != 0) key.push_back('\x1f');
      key += tokens[start + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

void LexicalParams::validate() const {
  if (max_ngram < 1) throw ValidationError("max_ngram must be >= 1");
}

std::string LexicalParams::fingerprint() const {
  return "max_ngram=" + std::to_string(max_ngram) +
         ";smoothing=" + (smoothing == Smoothing::none ? "none" : "add_epsilon") +
         ";tokenizer=whitespace_lower";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<char32_t> word;
  auto flush = [&] {
    std::size_t begin = 0, end = word.size();
    while (begin < end && is_punct(word[begin])) ++begin;
    while (end > begin && is_punct(word[end - 1])) --end;
    if (begin < end) {
      std::string token;
      for (std::size_t k = begin; k < end; ++k) encode(to_lower(word[k]), token);
      tokens.push_back(std::move(token));
    }
    word.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = decode(text, pos);
    if (is_space(cp)) {
      flush();
    } else {
      word.push_back(cp);
    }
  }
  flush();
  return tokens;
}

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            const LexicalParams& params) {
  params.validate();
  if (candidate.empty() || reference.empty()) throw DomainError("bleu needs at least one token on each side");

  double log_sum = 0.0;
  for (int order = 1; order <= params.max_ngram; ++order) {
    const auto cand = count_ngrams(candidate, static_cast<std::size_t>(order));
    const auto ref = count_ngrams(reference, static_cast<std::size_t>(order));
    int total = 0;
    int matched = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(count, it->second);
    }
    double precision;
    if (matched == 0) {
      if (params.smoothing == Smoothing::none) return 0.0;
      precision = kBleuEpsilon / std::max(total, 1);
    } else {
      precision = static_cast<double>(matched) / total;
    }
    log_sum += std::log(precision);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = std::min(1.0, std::exp(1.0 - r / c));
  const double score = brevity * std::exp(log_sum / params.max_ngram);
  return std::clamp(score, 0.0, 1.0);
}

double bleu(const Document& candidate, const Document& reference, const LexicalParams& params) {
  const auto c = tokenize(candidate.text);
  const auto r = tokenize(reference.text);
  if (c.empty()) throw DomainError("document '" + candidate.id + "' has no tokens");
  if (r.empty()) throw DomainError("document '" + reference.id + "' has no tokens");
  return bleu(c, r, params);
}

bool exceeds_threshold(const Document& a, const Document& b, double beta, const LexicalParams& params) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must be in [0, 1]");
  return bleu(a, b, params) > beta;
}

LexicalComparator bleu_comparator(LexicalParams params) {
  params.validate();
  // Token lists are cached by text; LLS calls the comparator O(n) times over
  // the same documents.
  auto cache = std::make_shared<std::unordered_map<std::string, std::vector<std::string>>>();
  return [params, cache](const Document& candidate, const Document& reference) {
    auto tokens_of = [&](const Document& d) -> const std::vector<std::string>& {
      auto it = cache->find(d.text);
      if (it == cache->end()) it = cache->emplace(d.text, tokenize(d.text)).first;
      return it->second;
    };
    const auto& c = tokens_of(candidate);
    const auto& r = tokens_of(reference);
    if (c.empty() || r.empty()) return 0.0;
    return bleu(c, r, params);
  };
}

}  // namespace idsel
