#include "idsel/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>

#include <json.hpp>

#include "idsel/errors.hpp"
#include "idsel/parallel.hpp"

namespace idsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Merge {
  std::size_t left;
  std::size_t right;
  double distance;
  std::size_t size;
};

// Single-linkage dendrogram from MST edges in the scipy linkage layout:
// merge k creates node n + k.
std::vector<Merge> single_linkage(std::vector<WeightedEdge> mst, std::size_t n) {
  std::stable_sort(mst.begin(), mst.end(),
                   [](const WeightedEdge& x, const WeightedEdge& y) { return x.weight < y.weight; });
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<std::size_t> size(2 * n - 1, 1);
  auto find = [&](std::size_t x) {
    std::size_t root = x;
    while (parent[root] != root) root = parent[root];
    while (parent[x] != root) x = std::exchange(parent[x], root);
    return root;
  };
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  std::size_t next = n;
  for (const auto& e : mst) {
    const std::size_t ra = find(e.a);
    const std::size_t rb = find(e.b);
    merges.push_back({ra, rb, e.weight, size[ra] + size[rb]});
    parent[ra] = parent[rb] = next;
    size[next] = size[ra] + size[rb];
    ++next;
  }
  return merges;
}

void collect_points(const std::vector<Merge>& merges, std::size_t n, std::size_t node,
                    std::vector<std::size_t>& out) {
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    if (cur < n) {
      out.push_back(cur);
    } else {
      stack.push_back(merges[cur - n].right);
      stack.push_back(merges[cur - n].left);
    }
  }
}

// Runt-prunes the dendrogram: splits where both sides have at least
// min_cluster_size points create two new clusters; otherwise the smaller
// side's points fall out of the continuing cluster.
std::vector<CondensedEdge> condense(const std::vector<Merge>& merges, std::size_t n,
                                    std::size_t min_cluster_size) {
  std::vector<CondensedEdge> out;
  out.reserve(2 * n);
  const std::size_t root = 2 * n - 2;
  std::vector<std::size_t> relabel(2 * n - 1, 0);
  relabel[root] = n;
  std::size_t next_label = n + 1;
  auto size_of = [&](std::size_t node) { return node < n ? std::size_t{1} : merges[node - n].size; };

  std::deque<std::size_t> queue{root};
  std::vector<std::size_t> fallen;
  while (!queue.empty()) {
    const std::size_t node = queue.front();
    queue.pop_front();
    const Merge& m = merges[node - n];
    const double lambda = m.distance > 0.0 ? 1.0 / m.distance : kInf;
    const std::size_t lc = size_of(m.left);
    const std::size_t rc = size_of(m.right);
    const bool left_big = lc >= min_cluster_size;
    const bool right_big = rc >= min_cluster_size;
    auto drop = [&](std::size_t sub) {
      fallen.clear();
      collect_points(merges, n, sub, fallen);
      for (std::size_t p : fallen) out.push_back({relabel[node], p, lambda, 1});
    };
    if (left_big && right_big) {
      relabel[m.left] = next_label++;
      out.push_back({relabel[node], relabel[m.left], lambda, lc});
      relabel[m.right] = next_label++;
      out.push_back({relabel[node], relabel[m.right], lambda, rc});
      queue.push_back(m.left);
      queue.push_back(m.right);
    } else if (!left_big && !right_big) {
      drop(m.left);
      drop(m.right);
    } else if (!left_big) {
      relabel[m.right] = relabel[node];
      drop(m.left);
      queue.push_back(m.right);
    } else {
      relabel[m.left] = relabel[node];
      drop(m.right);
      queue.push_back(m.left);
    }
  }
  return out;
}

double excess(double lambda, double birth) {
  // A cluster born and dying at distance zero contributes nothing.
  if (std::isinf(lambda) && std::isinf(birth)) return 0.0;
  return lambda - birth;
}

}  // namespace

ClusterParams ClusterParams::defaults_for(std::size_t n) {
  ClusterParams p;
  p.min_cluster_size = std::max<std::size_t>(5, n / 100);
  p.min_samples = 5;
  return p;
}

void ClusterParams::validate() const {
  if (min_cluster_size < 2) throw ValidationError("min_cluster_size must be >= 2");
  if (min_samples < 1) throw ValidationError("min_samples must be >= 1");
  if (min_samples > min_cluster_size) throw ValidationError("min_samples must not exceed min_cluster_size");
}

std::string ClusterParams::fingerprint() const {
  return "min_cluster_size=" + std::to_string(min_cluster_size) +
         ";min_samples=" + std::to_string(min_samples) +
         ";allow_single_cluster=" + (allow_single_cluster ? "1" : "0");
}

ClusterModel::ClusterModel(std::vector<std::string> ids, std::vector<int> assignments,
                           std::vector<double> membership, std::vector<CondensedEdge> condensed_tree)
    : ids_(std::move(ids)),
      assignments_(std::move(assignments)),
      membership_(std::move(membership)),
      condensed_tree_(std::move(condensed_tree)) {
  if (assignments_.size() != ids_.size() || membership_.size() != ids_.size()) {
    throw ValidationError("cluster model arrays must match the id count");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw ValidationError("duplicate id '" + ids_[i] + "' in cluster model");
    const int a = assignments_[i];
    const double p = membership_[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("membership of '" + ids_[i] + "' outside [0, 1]");
    if (a == kNoise) {
      if (p != 0.0) throw ValidationError("noise point '" + ids_[i] + "' must have membership 0");
      continue;
    }
    if (a < 0) throw ValidationError("invalid cluster index for '" + ids_[i] + "'");
    if (static_cast<std::size_t>(a) >= cluster_sizes_.size()) cluster_sizes_.resize(a + 1, 0);
    ++cluster_sizes_[a];
  }
  for (std::size_t c = 0; c < cluster_sizes_.size(); ++c) {
    if (cluster_sizes_[c] == 0) throw ValidationError("cluster " + std::to_string(c) + " has no members");
  }
}

std::size_t ClusterModel::noise_count() const {
  return static_cast<std::size_t>(std::count(assignments_.begin(), assignments_.end(), kNoise));
}

bool ClusterModel::contains(std::string_view id) const { return index_.contains(std::string(id)); }

std::size_t ClusterModel::position(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ValidationError("id '" + std::string(id) + "' has no cluster assignment");
  return it->second;
}

int ClusterModel::assignment(std::string_view id) const { return assignments_[position(id)]; }
double ClusterModel::membership(std::string_view id) const { return membership_[position(id)]; }

SquareMatrix cosine_distances(const EmbeddingSet& embeddings, std::span<const std::string> ids,
                              unsigned threads) {
  const SimilarityMatrix sim = similarity_matrix(embeddings, ids, threads);
  const std::size_t n = sim.size();
  SquareMatrix dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist(i, j) = i == j ? 0.0 : std::max(0.0, 1.0 - sim(i, j));
    }
  }
  return dist;
}

std::vector<double> core_distances(const SquareMatrix& distances, std::size_t min_samples) {
  const std::size_t n = distances.size();
  if (min_samples < 1 || min_samples > n) {
    throw ValidationError("min_samples must be in [1, " + std::to_string(n) + "]");
  }
  std::vector<double> core(n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.assign(distances.row(i).begin(), distances.row(i).end());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(min_samples - 1), row.end());
    core[i] = row[min_samples - 1];
  }
  return core;
}

SquareMatrix mutual_reachability(const SquareMatrix& distances, std::span<const double> core) {
  const std::size_t n = distances.size();
  SquareMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = distances(i, j);
      if (!std::isfinite(d)) throw DomainError("non-finite distance between points " + std::to_string(i) + " and " + std::to_string(j));
      out(i, j) = std::max({core[i], core[j], d});
    }
  }
  return out;
}

std::vector<WeightedEdge> minimum_spanning_tree(const SquareMatrix& weights) {
  const std::size_t n = weights.size();
  std::vector<WeightedEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);
  std::vector<double> best(n, kInf);
  std::vector<std::size_t> via(n, 0);
  std::vector<bool> in_tree(n, false);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t pick = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = weights(current, v);
      if (w < best[v]) {
        best[v] = w;
        via[v] = current;
      }
      if (pick == n || best[v] < best[pick]) pick = v;
    }
    in_tree[pick] = true;
    edges.push_back({via[pick], pick, best[pick]});
    current = pick;
  }
  return edges;
}

ClusterModel hdbscan(const EmbeddingSet& embeddings, std::span<const std::string> ids,
                     const ClusterParams& params, unsigned threads) {
  params.validate();
  const std::size_t n = ids.size();
  if (n < params.min_cluster_size) {
    throw ValidationError("hdbscan needs at least min_cluster_size = " +
                          std::to_string(params.min_cluster_size) + " points, got " + std::to_string(n));
  }

  const SquareMatrix dist = cosine_distances(embeddings, ids, threads);
  const std::vector<double> core = core_distances(dist, params.min_samples);
  const SquareMatrix reach = mutual_reachability(dist, core);
  const std::vector<Merge> merges = single_linkage(minimum_spanning_tree(reach), n);
  std::vector<CondensedEdge> tree = condense(merges, n, params.min_cluster_size);

  // Condensed cluster ids are n .. n + n_nodes - 1, children after parents.
  std::size_t n_nodes = 1;
  for (const auto& e : tree) n_nodes = std::max(n_nodes, e.child >= n ? e.child - n + 1 : 0);
  auto node_at = [n](std::size_t label) { return label - n; };

  std::vector<double> birth(n_nodes, 0.0);
  std::vector<double> point_lambda(n, 0.0);
  std::vector<std::size_t> point_parent(n, 0);
  std::vector<std::size_t> node_parent(n_nodes, 0);
  std::vector<std::vector<std::size_t>> node_children(n_nodes);
  std::vector<double> max_lambda(n_nodes, 0.0);
  for (const auto& e : tree) {
    const std::size_t p = node_at(e.parent);
    max_lambda[p] = std::max(max_lambda[p], e.lambda);
    if (e.child < n) {
      point_lambda[e.child] = e.lambda;
      point_parent[e.child] = p;
    } else {
      const std::size_t c = node_at(e.child);
      birth[c] = e.lambda;
      node_parent[c] = p;
      node_children[p].push_back(c);
    }
  }

  std::vector<double> stability(n_nodes, 0.0);
  for (const auto& e : tree) {
    const std::size_t p = node_at(e.parent);
    stability[p] += excess(e.lambda, birth[p]) * static_cast<double>(e.size);
  }

  // Excess of mass, bottom-up. Children always carry larger ids.
  std::vector<bool> selected(n_nodes, false);
  const std::size_t lowest = params.allow_single_cluster ? 0 : 1;
  for (std::size_t node = n_nodes; node-- > lowest;) {
    double subtree = 0.0;
    for (std::size_t c : node_children[node]) subtree += stability[c];
    if (!node_children[node].empty() && subtree > stability[node]) {
      stability[node] = subtree;
    } else {
      selected[node] = true;
      std::vector<std::size_t> stack(node_children[node]);
      while (!stack.empty()) {
        const std::size_t c = stack.back();
        stack.pop_back();
        selected[c] = false;
        stack.insert(stack.end(), node_children[c].begin(), node_children[c].end());
      }
    }
  }

  // Nearest selected ancestor (or self) of every condensed node.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> owner(n_nodes, kNone);
  for (std::size_t node = 0; node < n_nodes; ++node) {
    if (selected[node]) {
      owner[node] = node;
    } else if (node > 0) {
      owner[node] = owner[node_parent[node]];
    }
  }
  const std::size_t selected_count = static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));

  std::vector<std::size_t> point_owner(n, kNone);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t o = owner[point_parent[p]];
    if (o == kNone) continue;
    if (o == 0) {
      // Root as the only cluster: keep only points that persist to the
      // root's largest lambda.
      if (selected_count == 1 && point_lambda[p] >= max_lambda[0]) point_owner[p] = 0;
      continue;
    }
    point_owner[p] = o;
  }

  // Canonical cluster numbering by smallest member id.
  std::vector<std::size_t> chosen;
  for (std::size_t node = 0; node < n_nodes; ++node) {
    if (selected[node]) chosen.push_back(node);
  }
  std::vector<const std::string*> smallest(n_nodes, nullptr);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t o = point_owner[p];
    if (o != kNone && (smallest[o] == nullptr || ids[p] < *smallest[o])) smallest[o] = &ids[p];
  }
  std::erase_if(chosen, [&](std::size_t node) { return smallest[node] == nullptr; });
  std::sort(chosen.begin(), chosen.end(),
            [&](std::size_t a, std::size_t b) { return *smallest[a] < *smallest[b]; });
  std::vector<int> cluster_index(n_nodes, kNoise);
  for (std::size_t k = 0; k < chosen.size(); ++k) cluster_index[chosen[k]] = static_cast<int>(k);

  std::vector<int> assignments(n, kNoise);
  std::vector<double> membership(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t o = point_owner[p];
    if (o == kNone) continue;
    assignments[p] = cluster_index[o];
    const double top = max_lambda[o];
    const double lambda = point_lambda[p];
    if (top == 0.0 || std::isinf(lambda)) {
      membership[p] = 1.0;
    } else {
      membership[p] = std::min(lambda, top) / top;
    }
  }

  return ClusterModel({ids.begin(), ids.end()}, std::move(assignments), std::move(membership), std::move(tree));
}

std::vector<int> order_clusters(const ClusterModel& model) {
  std::vector<int> order(model.n_clusters());
  std::iota(order.begin(), order.end(), 0);
  const auto sizes = model.cluster_sizes();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
  return order;
}

void write_condensed_tree(const ClusterModel& model, std::ostream& out) {
  for (const auto& e : model.condensed_tree()) {
    nlohmann::ordered_json row = {{"parent", e.parent}, {"child", e.child}};
    if (std::isinf(e.lambda)) {
      row["lambda"] = nullptr;
    } else {
      row["lambda"] = e.lambda;
    }
    row["size"] = e.size;
    out << row.dump() << '\n';
  }
}

}  // namespace idsel
