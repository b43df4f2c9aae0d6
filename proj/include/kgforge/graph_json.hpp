#pragma once

#include <string>

#include <json.hpp>

#include "kgforge/core.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

// Canonical graph JSON: {"dimension", "entities", "relations"} with arrays
// in insertion order, object keys in the documented order, UTF-8, and LF
// line endings. Byte-stable for identical graphs.
inline std::string emit_graph_json(const KnowledgeGraph& graph, bool include_embeddings = false,
                                   bool include_provenance = true) {
  nlohmann::ordered_json doc;
  doc["dimension"] = graph.dimension();
  doc["entities"] = nlohmann::ordered_json::array();
  for (const Entity& e : graph.entities()) {
    nlohmann::ordered_json je;
    je["name"] = e.name;
    je["key"] = e.key;
    if (e.label.empty()) {
      je["label"] = nullptr;
    } else {
      je["label"] = e.label;
    }
    if (include_provenance) {
      je["provenance"] = std::vector<std::string>(e.provenance.begin(), e.provenance.end());
    }
    if (include_embeddings && !e.embedding.empty()) je["embedding"] = e.embedding;
    doc["entities"].push_back(std::move(je));
  }
  doc["relations"] = nlohmann::ordered_json::array();
  for (const Relation& r : graph.relations()) {
    nlohmann::ordered_json jr;
    jr["subject"] = r.subject_key;
    jr["predicate"] = r.predicate;
    jr["predicate_key"] = r.predicate_key;
    jr["object"] = r.object_key;
    if (include_provenance) {
      jr["provenance"] = std::vector<std::string>(r.provenance.begin(), r.provenance.end());
    }
    if (include_embeddings && !r.embedding.empty()) jr["embedding"] = r.embedding;
    doc["relations"].push_back(std::move(jr));
  }
  return doc.dump(2) + "\n";
}

// Parses and invariant-checks a canonical graph JSON document.
inline KnowledgeGraph parse_graph_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ParseError("graph file is not a JSON object");
  if (!doc.contains("dimension") || !doc["dimension"].is_number_integer()) {
    throw ParseError("graph file is missing an integer \"dimension\"");
  }
  int dimension = doc["dimension"].get<int>();
  if (dimension <= 0) throw ParseError("graph dimension must be positive");
  KnowledgeGraph graph(dimension);
  for (const auto& je : doc.value("entities", nlohmann::json::array())) {
    if (!je.is_object() || !je.contains("name")) throw ParseError("malformed entity object");
    Entity e;
    e.name = je["name"].get<std::string>();
    e.key = je.value("key", canonicalize(e.name));
    if (je.contains("label") && !je["label"].is_null()) e.label = je["label"].get<std::string>();
    if (je.contains("provenance")) {
      for (const auto& p : je["provenance"]) e.provenance.insert(p.get<std::string>());
    }
    if (je.contains("embedding")) e.embedding = je["embedding"].get<EmbeddingVector>();
    if (e.key != canonicalize(e.name)) {
      throw ParseError("entity key '" + e.key + "' does not match canonicalize(name)");
    }
    bool inserted = false;
    graph.insert_entity(std::move(e), &inserted);
    if (!inserted) throw ParseError("duplicate entity key in graph file");
  }
  for (const auto& jr : doc.value("relations", nlohmann::json::array())) {
    if (!jr.is_object()) throw ParseError("malformed relation object");
    Relation r;
    r.subject_key = jr.value("subject", std::string{});
    r.predicate = jr.value("predicate", std::string{});
    r.predicate_key = jr.value("predicate_key", canonicalize(r.predicate));
    r.object_key = jr.value("object", std::string{});
    if (r.subject_key.empty() || r.predicate_key.empty() || r.object_key.empty()) {
      throw ParseError("relation with empty key component");
    }
    if (jr.contains("provenance")) {
      for (const auto& p : jr["provenance"]) r.provenance.insert(p.get<std::string>());
    }
    if (jr.contains("embedding")) r.embedding = jr["embedding"].get<EmbeddingVector>();
    bool inserted = false;
    try {
      graph.insert_relation(std::move(r), &inserted);
    } catch (const DanglingEndpointError& err) {
      throw ParseError(std::string("graph file violates referential integrity: ") + err.what());
    }
    if (!inserted) throw ParseError("duplicate relation key triple in graph file");
  }
  graph.validate();
  return graph;
}

}  // namespace kgforge
