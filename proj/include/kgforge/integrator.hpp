#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "kgforge/core.hpp"
#include "kgforge/errors.hpp"
#include "kgforge/graph_json.hpp"

namespace kgforge {

struct ExportOptions {
  enum class Format { cypher, graph_json };
  Format format = Format::graph_json;
  bool include_embeddings = false;  // graph_json only
  bool include_provenance = true;

  void validate() const {
    if (include_embeddings && format != Format::graph_json) {
      throw ConfigError("embeddings can only be included in graph JSON exports");
    }
  }
};

namespace detail {

inline std::string cypher_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\' || c == '"') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

// Relationship type: predicate uppercased, every non-alphanumeric byte
// replaced by an underscore. Guarded against empty or digit-leading results
// so the statement stays parseable.
inline std::string relationship_type(const std::string& predicate) {
  std::string out;
  out.reserve(predicate.size());
  for (char c : predicate) {
    if (c >= 'a' && c <= 'z') {
      out.push_back(static_cast<char>(c - 'a' + 'A'));
    } else if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) {
      out.push_back(c);
    } else {
      out.push_back('_');
    }
  }
  if (out.empty()) return "RELATED_TO";
  if (out.front() >= '0' && out.front() <= '9') out.insert(out.begin(), '_');
  return out;
}

}  // namespace detail

// Neo4j statement file: one statement per line, LF endings, all node MERGEs
// first (sorted by entity key) then relationship statements (sorted by key
// triple). Matching is by the name property.
inline std::string emit_cypher(const KnowledgeGraph& graph) {
  std::vector<const Entity*> entities;
  entities.reserve(graph.entities().size());
  for (const Entity& e : graph.entities()) entities.push_back(&e);
  std::sort(entities.begin(), entities.end(),
            [](const Entity* a, const Entity* b) { return a->key < b->key; });

  std::vector<const Relation*> relations;
  relations.reserve(graph.relations().size());
  for (const Relation& r : graph.relations()) relations.push_back(&r);
  std::sort(relations.begin(), relations.end(), [](const Relation* a, const Relation* b) {
    return std::tie(a->subject_key, a->predicate_key, a->object_key) <
           std::tie(b->subject_key, b->predicate_key, b->object_key);
  });

  std::string out;
  for (const Entity* e : entities) {
    out += "MERGE (:Entity {name: \"" + detail::cypher_escape(e->name) + "\"";
    if (!e->label.empty()) out += ", category: \"" + detail::cypher_escape(e->label) + "\"";
    out += "});\n";
  }
  for (const Relation* r : relations) {
    const Entity* subject = graph.find_entity(r->subject_key);
    const Entity* object = graph.find_entity(r->object_key);
    out += "MATCH (a:Entity {name: \"" + detail::cypher_escape(subject->name) + "\"}) ";
    out += "MATCH (b:Entity {name: \"" + detail::cypher_escape(object->name) + "\"}) ";
    out += "MERGE (a)-[:" + detail::relationship_type(r->predicate) + "]->(b);\n";
  }
  return out;
}

inline std::string export_graph(const KnowledgeGraph& graph, const ExportOptions& options) {
  options.validate();
  if (options.format == ExportOptions::Format::cypher) return emit_cypher(graph);
  return emit_graph_json(graph, options.include_embeddings, options.include_provenance);
}

}  // namespace kgforge
