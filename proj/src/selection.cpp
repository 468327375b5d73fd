#include "idsel/selection.hpp"

#include <string>

#include "idsel/errors.hpp"

namespace idsel {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::random: return "random";
    case Method::rss: return "rss";
    case Method::oc: return "oc";
    case Method::lls: return "lls";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "random") return Method::random;
  if (name == "rss") return Method::rss;
  if (name == "oc") return Method::oc;
  if (name == "lls") return Method::lls;
  throw ValidationError("unknown method '" + std::string(name) +
                        "' (expected random, rss, oc or lls)");
}

bool is_stochastic(Method method) {
  return method == Method::random || method == Method::lls;
}

}  // namespace idsel
