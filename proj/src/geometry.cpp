#include "idsel/geometry.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "idsel/errors.hpp"
#include "idsel/parallel.hpp"

namespace idsel {

namespace {

constexpr std::array<char, 6> kMagic = {'I', 'D', 'S', 'E', 'L', '1'};

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

template <typename T>
T read_le(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ParseError(std::string("embedding file truncated while reading ") + what);
  }
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum;
}

double cosine_with_norms(std::span<const double> a, std::span<const double> b, double norm_a,
                         double norm_b) {
  return std::clamp(dot(a, b) / (norm_a * norm_b), -1.0, 1.0);
}

}  // namespace

EmbeddingSet::EmbeddingSet(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingSet::add(std::string id, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw ValidationError("embedding '" + id + "' has length " + std::to_string(vector.size()) +
                          ", expected " + std::to_string(dim_));
  }
  bool nonzero = false;
  for (double v : vector) {
    if (!std::isfinite(v)) throw ValidationError("embedding '" + id + "' has a non-finite component");
    nonzero = nonzero || v != 0.0;
  }
  if (!nonzero) throw ValidationError("embedding '" + id + "' is a zero vector");
  if (index_.contains(id)) throw ValidationError("duplicate embedding id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), vector.begin(), vector.end());
}

void EmbeddingSet::add(std::string id, std::span<const float> vector) {
  std::vector<double> widened(vector.begin(), vector.end());
  add(std::move(id), std::span<const double>(widened));
}

bool EmbeddingSet::contains(std::string_view id) const { return index_.contains(std::string(id)); }

std::span<const double> EmbeddingSet::vector(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ValidationError("no embedding for id '" + std::string(id) + "'");
  return {data_.data() + it->second * dim_, dim_};
}

EmbeddingSet read_embeddings(std::istream& in) {
  std::array<char, 6> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ParseError("not an IDSEL1 embedding file (bad magic)");
  }
  const auto rows = read_le<std::uint32_t>(in, "row count");
  const auto dim = read_le<std::uint32_t>(in, "dimension");
  EmbeddingSet out(dim);
  std::vector<float> components(dim);
  for (std::uint32_t r = 0; r < rows; ++r) {
    const auto id_len = read_le<std::uint16_t>(in, "id length");
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) {
      throw ParseError("embedding file truncated in row " + std::to_string(r) + " of " +
                       std::to_string(rows));
    }
    if (!in.read(reinterpret_cast<char*>(components.data()),
                 static_cast<std::streamsize>(dim * sizeof(float)))) {
      throw ParseError("embedding file truncated in row " + std::to_string(r) + " of " +
                       std::to_string(rows));
    }
    out.add(std::move(id), std::span<const float>(components));
  }
  return out;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  return read_embeddings(in);
}

void write_embeddings(const EmbeddingSet& embeddings, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  write_le(out, static_cast<std::uint32_t>(embeddings.size()));
  write_le(out, static_cast<std::uint32_t>(embeddings.dim()));
  for (const auto& id : embeddings.ids()) {
    if (id.size() > UINT16_MAX) throw ValidationError("id too long for embedding file: " + id);
    write_le(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (double v : embeddings.vector(id)) write_le(out, static_cast<float>(v));
  }
}

void save_embeddings(const EmbeddingSet& embeddings, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_embeddings(embeddings, out);
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("cosine of vectors with different lengths");
  const double norm_a = std::sqrt(dot(a, a));
  const double norm_b = std::sqrt(dot(b, b));
  if (norm_a == 0.0 || norm_b == 0.0) throw DomainError("cosine of a zero vector");
  return cosine_with_norms(a, b, norm_a, norm_b);
}

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> ids, SquareMatrix values)
    : ids_(std::move(ids)), values_(std::move(values)) {
  if (values_.size() != ids_.size()) throw ValidationError("similarity matrix size does not match id count");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw ValidationError("duplicate id '" + ids_[i] + "' in similarity matrix");
  }
}

std::size_t SimilarityMatrix::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ValidationError("id '" + std::string(id) + "' not in similarity matrix");
  return it->second;
}

SimilarityMatrix similarity_matrix(const EmbeddingSet& embeddings, std::span<const std::string> ids,
                                   unsigned threads) {
  const std::size_t n = ids.size();
  std::vector<std::span<const double>> rows;
  rows.reserve(n);
  for (const auto& id : ids) rows.push_back(embeddings.vector(id));
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(rows[i], rows[i]));

  SquareMatrix values(n);
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j) values(i, j) = cosine_with_norms(rows[i], rows[j], norms[i], norms[j]);
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) values(i, j) = values(j, i);
  }
  return SimilarityMatrix({ids.begin(), ids.end()}, std::move(values));
}

}  // namespace idsel
