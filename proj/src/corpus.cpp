#include "idsel/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "idsel/errors.hpp"

namespace idsel {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError("line " + std::to_string(line_no) + ": missing \"" + key + "\"");
  }
  if (!it->is_string()) {
    throw ParseError("line " + std::to_string(line_no) + ": \"" + key + "\" must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus::Corpus(std::vector<Document> documents, std::optional<std::string> provenance)
    : documents_(std::move(documents)), provenance_(std::move(provenance)) {
  index_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    const auto& doc = documents_[i];
    if (doc.id.empty()) throw ValidationError("document at position " + std::to_string(i) + " has an empty id");
    if (is_blank(doc.text)) throw ValidationError("document '" + doc.id + "' has empty text");
    if (!index_.emplace(doc.id, i).second) throw ValidationError("duplicate document id '" + doc.id + "'");
  }
}

bool Corpus::contains(std::string_view id) const { return index_of(id).has_value(); }

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Document& Corpus::at(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) throw ValidationError("unknown document id '" + std::string(id) + "'");
  return documents_[*idx];
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) out.push_back(d.id);
  return out;
}

LabelSet::LabelSet(std::vector<std::string> labels) {
  for (auto& label : labels) add(std::move(label));
}

bool LabelSet::contains(std::string_view label) const { return index_of(label).has_value(); }

std::optional<std::size_t> LabelSet::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

void LabelSet::add(std::string label) {
  if (label.empty()) throw ValidationError("labels must be non-empty strings");
  if (contains(label)) throw ValidationError("duplicate label '" + label + "'");
  labels_.push_back(std::move(label));
}

void LabelSet::require_min_classes() const {
  if (labels_.size() < 2) {
    throw ValidationError("a label set needs at least 2 classes, got " + std::to_string(labels_.size()));
  }
}

Corpus parse_corpus(std::istream& in, std::optional<std::string> provenance) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
    Document doc;
    doc.id = require_string(obj, "id", line_no);
    doc.text = require_string(obj, "text", line_no);
    if (obj.contains("label") && !obj["label"].is_null()) doc.gold_label = require_string(obj, "label", line_no);
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs), std::move(provenance));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  return parse_corpus(in, path.string());
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.documents()) {
    ordered_json obj = {{"id", doc.id}, {"text", doc.text}};
    if (doc.gold_label) obj["label"] = *doc.gold_label;
    out << obj.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_corpus(corpus, out);
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

LabelSet label_set_of(const Corpus& corpus) {
  LabelSet labels;
  std::vector<std::string> missing;
  for (const auto& doc : corpus.documents()) {
    if (!doc.gold_label) {
      missing.push_back(doc.id);
    } else if (!labels.contains(*doc.gold_label)) {
      labels.add(*doc.gold_label);
    }
  }
  if (!missing.empty()) {
    std::string msg = "documents without gold label:";
    for (const auto& id : missing) msg += " " + id;
    throw ValidationError(msg);
  }
  labels.require_min_classes();
  return labels;
}

void write_selection(const SelectionOrder& order, std::ostream& out) {
  for (std::size_t rank = 0; rank < order.ranked_ids.size(); ++rank) {
    out << ordered_json{{"rank", rank}, {"id", order.ranked_ids[rank]}}.dump() << '\n';
  }
}

void save_selection(const SelectionOrder& order, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_selection(order, out);
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

std::vector<std::string> load_selection(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open selection file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.contains("rank") || !obj["rank"].is_number_unsigned() || obj["rank"].get<std::size_t>() != ids.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected rank " + std::to_string(ids.size()));
    }
    ids.push_back(require_string(obj, "id", line_no));
  }
  return ids;
}

}  // namespace idsel
