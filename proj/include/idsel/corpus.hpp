#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "idsel/selection.hpp"

namespace idsel {

struct Document {
  std::string id;
  std::string text;
  std::optional<std::string> gold_label;

  bool operator==(const Document&) const = default;
};

// Immutable, ordered collection of documents with unique ids.
class Corpus {
 public:
  Corpus() = default;
  // Throws ValidationError on duplicate ids or blank text.
  explicit Corpus(std::vector<Document> documents,
                  std::optional<std::string> provenance = std::nullopt);

  std::span<const Document> documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  bool contains(std::string_view id) const;
  // Throws ValidationError for an unknown id.
  const Document& at(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::vector<std::string> ids() const;

  const std::optional<std::string>& provenance() const { return provenance_; }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<std::string> provenance_;
};

// Distinct class names in a stable order.
class LabelSet {
 public:
  LabelSet() = default;
  // Throws ValidationError on duplicate or empty labels. Does not enforce a
  // minimum size; see require_min_classes().
  explicit LabelSet(std::vector<std::string> labels);

  std::span<const std::string> labels() const { return labels_; }
  std::size_t n_classes() const { return labels_.size(); }
  bool contains(std::string_view label) const;
  std::optional<std::size_t> index_of(std::string_view label) const;
  void add(std::string label);

  // Throws ValidationError when fewer than two classes are present.
  void require_min_classes() const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::istream& in, std::optional<std::string> provenance = std::nullopt);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

// Distinct gold labels in first-appearance order; needs >= 2 classes.
LabelSet label_set_of(const Corpus& corpus);

void save_selection(const SelectionOrder& order, const std::filesystem::path& path);
void write_selection(const SelectionOrder& order, std::ostream& out);
// Returns the ranked ids; ranks must be 0, 1, 2, ... in file order.
std::vector<std::string> load_selection(const std::filesystem::path& path);

}  // namespace idsel
