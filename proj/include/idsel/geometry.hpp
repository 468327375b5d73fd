#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace idsel {

// Dense row-major n x n matrix of doubles.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), values_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * n_, n_}; }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

// One fixed-width vector per document id. Vectors are finite and non-zero.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::size_t dim);

  // Throws ValidationError on dimension mismatch, duplicate id, non-finite
  // component or zero vector.
  void add(std::string id, std::span<const double> vector);
  void add(std::string id, std::span<const float> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool contains(std::string_view id) const;
  // Throws ValidationError for an unknown id.
  std::span<const double> vector(std::string_view id) const;
  // Ids in insertion order.
  std::span<const std::string> ids() const { return ids_; }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binary layout: "IDSEL1", u32 LE row count, u32 LE dim, then per row a
// u16 LE id length, the UTF-8 id bytes and dim f32 LE components.
EmbeddingSet load_embeddings(const std::filesystem::path& path);
EmbeddingSet read_embeddings(std::istream& in);
void save_embeddings(const EmbeddingSet& embeddings, const std::filesystem::path& path);
void write_embeddings(const EmbeddingSet& embeddings, std::ostream& out);

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws DomainError for zero
// norm or mismatched lengths.
double cosine(std::span<const double> a, std::span<const double> b);

// Pairwise cosine similarities over an ordered id list.
class SimilarityMatrix {
 public:
  SimilarityMatrix(std::vector<std::string> ids, SquareMatrix values);

  std::size_t size() const { return ids_.size(); }
  std::span<const std::string> ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  // Throws ValidationError for an unknown id.
  std::size_t index_of(std::string_view id) const;
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const SquareMatrix& values() const { return values_; }

 private:
  std::vector<std::string> ids_;
  SquareMatrix values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Upper triangle computed (rows in parallel), lower triangle mirrored, so the
// result is exactly symmetric and independent of the thread count.
SimilarityMatrix similarity_matrix(const EmbeddingSet& embeddings,
                                   std::span<const std::string> ids,
                                   unsigned threads = 1);

}  // namespace idsel
