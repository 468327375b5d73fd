#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idsel/errors.hpp"
#include "idsel/geometry.hpp"

namespace fixture {

inline std::string path(const std::string& name) { return std::string(IDSEL_FIXTURES) + "/" + name; }

// Offline reference clustering stored next to each embedding fixture.
struct ClusterReference {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> probabilities;
  std::size_t min_cluster_size = 0;
  std::size_t min_samples = 0;
};

inline ClusterReference cluster_reference(const std::string& name) {
  std::ifstream in(path(name + ".ref.json"));
  if (!in) throw idsel::IoError("missing fixture " + name);
  const auto j = nlohmann::json::parse(in);
  ClusterReference r;
  r.ids = j.at("ids").get<std::vector<std::string>>();
  r.labels = j.at("labels").get<std::vector<int>>();
  r.probabilities = j.at("probabilities").get<std::vector<double>>();
  r.min_cluster_size = j.at("params").at("min_cluster_size").get<std::size_t>();
  r.min_samples = j.at("params").at("min_samples").get<std::size_t>();
  return r;
}

inline idsel::EmbeddingSet embeddings(const std::string& name) { return idsel::load_embeddings(path(name + ".emb")); }

}  // namespace fixture
