#pragma once

// Reference implementations used as test oracles. They are deliberately
// naive and share no code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double scalar_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double c = dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b)));
  return std::clamp(c, -1.0, 1.0);
}

// Farthest-point greedy over a similarity matrix indexed like `ids`, written
// as a literal search over all candidates at every step.
inline std::vector<std::string> greedy_rss(const std::vector<std::string>& ids,
                                           const std::vector<std::vector<double>>& sim) {
  const std::size_t n = ids.size();
  std::vector<std::string> out;
  if (n < 2) return out;
  // Seed pair: global minimum, ties by (smaller id, larger id) lexicographic.
  std::size_t bi = 0, bj = 1;
  bool have = false;
  auto key = [&](std::size_t i, std::size_t j) {
    return std::make_pair(std::min(ids[i], ids[j]), std::max(ids[i], ids[j]));
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!have || sim[i][j] < sim[bi][bj] || (sim[i][j] == sim[bi][bj] && key(i, j) < key(bi, bj))) {
        bi = i;
        bj = j;
        have = true;
      }
    }
  }
  std::vector<bool> used(n, false);
  if (ids[bj] < ids[bi]) std::swap(bi, bj);
  out.push_back(ids[bi]);
  out.push_back(ids[bj]);
  used[bi] = used[bj] = true;
  while (out.size() < n) {
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < n; ++s) {
        if (used[s]) worst = std::max(worst, sim[c][s]);
      }
      if (best == n || worst < best_score || (worst == best_score && ids[c] < ids[best])) {
        best = c;
        best_score = worst;
      }
    }
    used[best] = true;
    out.push_back(ids[best]);
  }
  return out;
}

struct Member {
  std::string id;
  int cluster;  // -1 for noise
  double membership;
};

// Round-robin pops: clusters by size descending (ties by index), noise last,
// lowest membership first within a cluster (ties by id).
inline std::vector<std::string> round_robin(std::vector<Member> members) {
  std::map<int, std::vector<Member>> groups;
  for (auto& m : members) groups[m.cluster].push_back(m);
  std::vector<int> order;
  for (auto& [c, g] : groups) {
    if (c >= 0) order.push_back(c);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return groups[a].size() > groups[b].size(); });
  if (groups.count(-1)) order.push_back(-1);
  std::vector<std::string> out;
  bool any = true;
  while (any) {
    any = false;
    for (int c : order) {
      auto& g = groups[c];
      if (g.empty()) continue;
      auto it = std::min_element(g.begin(), g.end(), [](const Member& a, const Member& b) {
        return a.membership < b.membership || (a.membership == b.membership && a.id < b.id);
      });
      out.push_back(it->id);
      g.erase(it);
      any = true;
    }
  }
  return out;
}

// Kruskal with union-find; returns the total weight.
inline double kruskal_weight(const std::vector<std::vector<double>>& w) {
  const std::size_t n = w.size();
  std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(w[i][j], i, j);
  }
  std::sort(edges.begin(), edges.end());
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  double total = 0.0;
  std::size_t taken = 0;
  for (auto& [wt, a, b] : edges) {
    auto ra = find(a), rb = find(b);
    if (ra == rb) continue;
    parent[ra] = rb;
    total += wt;
    if (++taken + 1 == n) break;
  }
  return total;
}

// Best agreement between two labelings over all injective relabelings of the
// first onto the second (noise is a label like any other).
inline double partition_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> la(a.begin(), a.end()), lb(b.begin(), b.end());
  std::sort(la.begin(), la.end());
  la.erase(std::unique(la.begin(), la.end()), la.end());
  std::sort(lb.begin(), lb.end());
  lb.erase(std::unique(lb.begin(), lb.end()), lb.end());
  while (lb.size() < la.size()) lb.push_back(std::numeric_limits<int>::min() + static_cast<int>(lb.size()));
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) ++joint[{a[i], b[i]}];
  std::vector<int> perm = lb;
  std::sort(perm.begin(), perm.end());
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t k = 0; k < la.size(); ++k) {
      auto it = joint.find({la[k], perm[k]});
      if (it != joint.end()) hit += it->second;
    }
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return a.empty() ? 1.0 : static_cast<double>(best) / static_cast<double>(a.size());
}

// Straight-line replay of the stopping rule over a label sequence.
inline std::size_t annotations_until_done(const std::vector<std::string>& labels_in_order,
                                          const std::set<std::string>& classes, std::size_t n_shots) {
  std::map<std::string, std::size_t> counts;
  std::size_t used = 0;
  for (const auto& l : labels_in_order) {
    ++used;
    ++counts[l];
    bool done = true;
    for (const auto& c : classes) {
      if (counts[c] < n_shots) done = false;
    }
    if (done) return used;
  }
  return used;
}

inline double macro_f1_from_confusion(const std::vector<std::vector<std::size_t>>& cm) {
  const std::size_t k = cm.size();
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = static_cast<double>(cm[c][c]);
    double fp = 0.0, fn = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      if (r != c) {
        fp += static_cast<double>(cm[r][c]);
        fn += static_cast<double>(cm[c][r]);
      }
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return k == 0 ? 0.0 : sum / static_cast<double>(k);
}

inline std::vector<std::vector<double>> random_unit_rows(std::size_t n, std::size_t dim, std::mt19937_64& gen) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
  for (auto& r : rows) {
    double norm = 0.0;
    do {
      for (auto& x : r) x = nd(gen);
      norm = std::sqrt(dot(r, r));
    } while (norm < 1e-6);
  }
  return rows;
}

}  // namespace oracle
