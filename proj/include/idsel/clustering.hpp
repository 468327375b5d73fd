#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "idsel/geometry.hpp"

namespace idsel {

inline constexpr int kNoise = -1;

struct ClusterParams {
  std::size_t min_cluster_size = 5;
  // Core distance of a point is the distance to its min_samples-th closest
  // point, the point itself included (min_samples = 1 gives single linkage).
  std::size_t min_samples = 5;
  // Lets excess-of-mass pick the root, so data without any split still
  // yields one cluster. Points of a root cluster are members only if they
  // persist to the root's largest lambda.
  bool allow_single_cluster = true;

  // min_cluster_size = max(5, n / 100), min_samples = 5.
  static ClusterParams defaults_for(std::size_t n);
  // Throws ValidationError.
  void validate() const;
  std::string fingerprint() const;
};

// One edge of the condensed tree. Points are numbered 0..n-1 in input id
// order; condensed clusters are numbered from n (the root) upwards.
struct CondensedEdge {
  std::size_t parent;
  std::size_t child;
  double lambda;  // 1 / distance at which child leaves parent; may be +inf
  std::size_t size;
};

struct WeightedEdge {
  std::size_t a;
  std::size_t b;
  double weight;
};

class ClusterModel {
 public:
  // assignments[i] is a cluster index in [0, k) or kNoise. Throws
  // ValidationError when memberships are outside [0, 1] or noise points have
  // non-zero membership.
  ClusterModel(std::vector<std::string> ids, std::vector<int> assignments,
               std::vector<double> membership, std::vector<CondensedEdge> condensed_tree = {});

  std::span<const std::string> ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t n_clusters() const { return cluster_sizes_.size(); }
  std::span<const int> assignments() const { return assignments_; }
  std::span<const double> memberships() const { return membership_; }
  std::span<const std::size_t> cluster_sizes() const { return cluster_sizes_; }
  std::size_t noise_count() const;
  const std::vector<CondensedEdge>& condensed_tree() const { return condensed_tree_; }

  bool contains(std::string_view id) const;
  // Throw ValidationError for an unknown id.
  int assignment(std::string_view id) const;
  double membership(std::string_view id) const;

 private:
  std::size_t position(std::string_view id) const;

  std::vector<std::string> ids_;
  std::vector<int> assignments_;
  std::vector<double> membership_;
  std::vector<std::size_t> cluster_sizes_;
  std::vector<CondensedEdge> condensed_tree_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Pipeline stages, exposed for testing.
SquareMatrix cosine_distances(const EmbeddingSet& embeddings, std::span<const std::string> ids,
                              unsigned threads = 1);
std::vector<double> core_distances(const SquareMatrix& distances, std::size_t min_samples);
SquareMatrix mutual_reachability(const SquareMatrix& distances, std::span<const double> core);
// Prim's algorithm on a dense graph; ties go to the lower vertex index.
std::vector<WeightedEdge> minimum_spanning_tree(const SquareMatrix& weights);

// Density-based hierarchical clustering on 1 - cosine distances.
// Cluster indices are canonical: ordered by the smallest member id.
ClusterModel hdbscan(const EmbeddingSet& embeddings, std::span<const std::string> ids,
                     const ClusterParams& params, unsigned threads = 1);

// Cluster indices by member count descending, ties by ascending index.
std::vector<int> order_clusters(const ClusterModel& model);

// JSON lines {"parent","child","lambda","size"}; infinite lambda is null.
void write_condensed_tree(const ClusterModel& model, std::ostream& out);

}  // namespace idsel
