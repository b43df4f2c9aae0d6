#pragma once

#include <future>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kgforge/backend.hpp"
#include "kgforge/canonical.hpp"
#include "kgforge/core.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

// The extraction schema: an ordered key map directing what the distiller
// pulls out of each document. Not an ontology; concept-flagged keys also
// seed fixed HAS_<KEY> relations.
struct BlueprintField {
  FieldKind kind = FieldKind::text;  // text or text-list
  std::string description;
  bool required = false;
  bool concept_key = false;
};

struct Blueprint {
  std::string name;
  std::vector<std::pair<std::string, BlueprintField>> keys;

  void validate() const {
    if (keys.empty()) throw ConfigError("blueprint '" + name + "' has no keys");
    std::set<std::string> seen;
    for (const auto& [key, field] : keys) {
      if (trim(key).empty()) throw ConfigError("blueprint key names must be non-empty");
      if (!seen.insert(key).second) throw ConfigError("duplicate blueprint key: " + key);
      if (field.kind == FieldKind::record_list) {
        throw ConfigError("blueprint key '" + key + "' must be text or text-list");
      }
    }
  }

  const BlueprintField* find(const std::string& key) const {
    for (const auto& [k, f] : keys) {
      if (k == key) return &f;
    }
    return nullptr;
  }

  std::vector<std::pair<std::string, FieldSpec>> output_schema() const {
    std::vector<std::pair<std::string, FieldSpec>> schema;
    schema.reserve(keys.size());
    for (const auto& [key, field] : keys) {
      schema.emplace_back(key, FieldSpec{field.kind, field.description, field.required});
    }
    return schema;
  }

  // File format: {"name": ..., "keys": {key: {kind, description, required, concept}}}
  static Blueprint from_json(const nlohmann::ordered_json& doc) {
    if (!doc.is_object() || !doc.contains("keys") || !doc["keys"].is_object()) {
      throw ParseError("blueprint file must be an object with a \"keys\" map");
    }
    Blueprint bp;
    bp.name = doc.value("name", std::string{"blueprint"});
    for (const auto& [key, spec] : doc["keys"].items()) {
      BlueprintField field;
      if (spec.is_object()) {
        field.kind = field_kind_from_string(spec.value("kind", std::string{"text"}));
        field.description = spec.value("description", std::string{});
        field.required = spec.value("required", false);
        field.concept_key = spec.value("concept", false);
      } else if (spec.is_string()) {
        field.description = spec.get<std::string>();
      } else {
        throw ParseError("blueprint key '" + key + "' has an invalid spec");
      }
      bp.keys.emplace_back(key, std::move(field));
    }
    bp.validate();
    return bp;
  }
};

// One document rewritten into schema-shaped sections. List-valued keys
// contribute one (key, item) section per item, in blueprint key order.
struct SemanticBlock {
  std::string document_id;
  int ordinal = 0;
  std::vector<std::pair<std::string, std::string>> sections;

  bool empty() const { return sections.empty(); }

  std::string text() const {
    std::string out;
    for (const auto& [key, value] : sections) {
      out += key;
      out += ": ";
      out += value;
      out += "\n";
    }
    return out;
  }
};

struct SkippedDocument {
  std::string id;
  std::string reason;
};

struct DistillReport {
  int processed = 0;
  std::vector<SkippedDocument> skipped;
  std::vector<std::string> warnings;
};

struct DistillOptions {
  int max_retries = kDefaultMaxRetries;
  bool split_keys = false;  // one block per filled key instead of per document
};

namespace detail {

inline std::string distill_instruction(const Blueprint& bp) {
  std::string out =
      "Rewrite the document into the fields below. Respond with a single JSON "
      "object using only the listed keys. Omit any key whose information is "
      "absent from the document; never invent values.\nFields:\n";
  for (const auto& [key, field] : bp.keys) {
    out += "- " + key + " (" + to_string(field.kind) + "): " + field.description + "\n";
  }
  return out;
}

// Source document id of a chunk: the part before '#'.
inline std::string source_id(const std::string& chunk_id) {
  auto hash = chunk_id.find('#');
  return hash == std::string::npos ? chunk_id : chunk_id.substr(0, hash);
}

// Runs fn over 0..n-1 with at most `limit` tasks in flight, preserving
// result order. Exceptions from tasks propagate to the caller.
template <typename Fn>
void bounded_parallel_for(std::size_t n, int limit, Fn&& fn) {
  if (limit <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> window;
  for (std::size_t i = 0; i < n; ++i) {
    window.push_back(std::async(std::launch::async, [&fn, i] { fn(i); }));
    if (window.size() >= static_cast<std::size_t>(limit)) {
      window.front().get();
      window.erase(window.begin());
    }
  }
  for (auto& f : window) f.get();
}

}  // namespace detail

// Module 1: rewrites documents into semantic blocks. Chunks sharing a
// source id ("doc#0", "doc#1") aggregate into one block, sections grouped
// per key in chunk order. Extraction failure or an empty extraction skips
// the document (recorded in the report); the run continues.
inline std::pair<std::vector<SemanticBlock>, DistillReport> distill(
    const std::vector<Document>& documents, const Blueprint& blueprint, LlmBackend& backend,
    const DistillOptions& options = {}) {
  blueprint.validate();
  validate_documents(documents);

  struct DocOutcome {
    ExtractionResult result;
    bool failed = false;
    std::string failure;
  };
  std::vector<DocOutcome> outcomes(documents.size());
  const auto schema = blueprint.output_schema();
  detail::bounded_parallel_for(documents.size(), backend.max_parallel(), [&](std::size_t i) {
    ExtractionRequest request{detail::distill_instruction(blueprint), documents[i].text, schema,
                              "distill/" + documents[i].id};
    try {
      outcomes[i].result = extract_structured(backend, request, options.max_retries);
    } catch (const ExtractionFailedError& err) {
      outcomes[i].failed = true;
      outcomes[i].failure = err.what();
    }
  });

  // Group chunk results by source document, preserving first-chunk order.
  struct SourceAccum {
    int ordinal = 0;
    std::vector<const ExtractionResult*> results;
  };
  std::vector<std::string> source_order;
  std::map<std::string, SourceAccum> sources;
  DistillReport report;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (outcomes[i].failed) {
      report.skipped.push_back({documents[i].id, outcomes[i].failure});
      continue;
    }
    std::string src = detail::source_id(documents[i].id);
    auto [it, fresh] = sources.try_emplace(src);
    if (fresh) {
      it->second.ordinal = documents[i].ordinal;
      source_order.push_back(src);
    }
    it->second.results.push_back(&outcomes[i].result);
  }

  std::vector<SemanticBlock> blocks;
  for (const std::string& src : source_order) {
    const SourceAccum& accum = sources[src];
    SemanticBlock block{src, accum.ordinal, {}};
    for (const auto& [key, field] : blueprint.keys) {
      bool filled = false;
      for (const ExtractionResult* result : accum.results) {
        const FieldValue* value = result->find(key);
        if (!value) continue;
        filled = true;
        if (const auto* text = std::get_if<std::string>(value)) {
          block.sections.emplace_back(key, *text);
        } else if (const auto* list = std::get_if<std::vector<std::string>>(value)) {
          for (const std::string& item : *list) block.sections.emplace_back(key, item);
        }
      }
      if (!filled && field.required) {
        report.warnings.push_back("document " + src + " is missing required key '" + key + "'");
      }
    }
    if (block.sections.empty()) {
      report.skipped.push_back({src, "no blueprint information found"});
      continue;
    }
    if (options.split_keys) {
      for (const auto& [key, value] : block.sections) {
        blocks.push_back({src, accum.ordinal, {{key, value}}});
      }
    } else {
      blocks.push_back(std::move(block));
    }
    ++report.processed;
  }
  return {std::move(blocks), std::move(report)};
}

// Uppercased ASCII form of a blueprint key for fixed relation predicates:
// "title" -> "HAS_TITLE".
inline std::string concept_predicate(const std::string& key) {
  std::string out = "HAS_";
  for (char c : key) {
    if (c >= 'a' && c <= 'z') {
      out.push_back(static_cast<char>(c - 'a' + 'A'));
    } else if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) {
      out.push_back(c);
    } else {
      out.push_back('_');
    }
  }
  return out;
}

struct SeedTriple {
  std::string subject;
  std::string predicate;
  std::string object;
};

// Fixed relations for concept-flagged keys: one (document root, HAS_<KEY>,
// value) seed per filled section. The root entity is named after the
// document id.
inline std::vector<SeedTriple> render_concept_relations(const SemanticBlock& block,
                                                        const Blueprint& blueprint) {
  std::vector<SeedTriple> seeds;
  for (const auto& [key, value] : block.sections) {
    const BlueprintField* field = blueprint.find(key);
    if (field && field->concept_key && !trim(value).empty()) {
      seeds.push_back({block.document_id, concept_predicate(key), value});
    }
  }
  return seeds;
}

}  // namespace kgforge
