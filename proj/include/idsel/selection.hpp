#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace idsel {

enum class Method { random, rss, oc, lls };

std::string_view to_string(Method method);
// Throws ValidationError for unknown names.
Method parse_method(std::string_view name);
// random and lls depend on a seed; rss and oc are deterministic.
bool is_stochastic(Method method);

// An ordering of document ids produced by one of the selectors.
struct SelectionOrder {
  Method method = Method::random;
  std::vector<std::string> ranked_ids;
  // Compact description of every input that influenced the order
  // (seed, beta, clustering parameters, ...).
  std::string params_fingerprint;
  // Only LLS can drop documents; true iff it did.
  bool truncated = false;

  bool operator==(const SelectionOrder&) const = default;
};

}  // namespace idsel

namespace idsel {

// All orders produced for one method in an experiment: a single order for
// deterministic methods, one per repeat (seed) for stochastic ones.
struct MethodRuns {
  Method method = Method::random;
  std::vector<std::uint64_t> seeds;
  std::vector<SelectionOrder> orders;
};

}  // namespace idsel
