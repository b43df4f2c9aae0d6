#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kgforge/backend.hpp"
#include "kgforge/core.hpp"
#include "kgforge/distiller.hpp"
#include "kgforge/entity_matcher.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

// Which entity set is handed to the model as extraction context: the full
// global set (richer graph, more speculative triples) or only the block's
// matched entities (directly stated triples only).
enum class RelationContextMode { global, local };

inline const char* to_string(RelationContextMode m) {
  return m == RelationContextMode::global ? "global" : "local";
}

inline RelationContextMode relation_mode_from_string(const std::string& s) {
  if (s == "global") return RelationContextMode::global;
  if (s == "local") return RelationContextMode::local;
  throw ConfigError("unknown relation mode: " + s + " (expected global|local)");
}

// What to do with a triple endpoint that is not in the entity set: drop the
// triple outright, try a similarity match first and drop on miss, or insert
// the endpoint as a new entity on miss.
enum class EndpointPolicy { drop, match_then_drop, match_then_insert };

inline const char* to_string(EndpointPolicy p) {
  switch (p) {
    case EndpointPolicy::drop: return "drop";
    case EndpointPolicy::match_then_drop: return "match_then_drop";
    case EndpointPolicy::match_then_insert: return "match_then_insert";
  }
  return "?";
}

inline EndpointPolicy endpoint_policy_from_string(const std::string& s) {
  if (s == "drop") return EndpointPolicy::drop;
  if (s == "match_then_drop") return EndpointPolicy::match_then_drop;
  if (s == "match_then_insert") return EndpointPolicy::match_then_insert;
  throw ConfigError("unknown endpoint policy: " + s);
}

struct RawTriple {
  std::string subject;
  std::string predicate;
  std::string object;
  std::string document_id;
};

enum class EndpointOutcome { exact, merged, inserted, dropped };

inline const char* to_string(EndpointOutcome o) {
  switch (o) {
    case EndpointOutcome::exact: return "exact";
    case EndpointOutcome::merged: return "merged";
    case EndpointOutcome::inserted: return "inserted";
    case EndpointOutcome::dropped: return "dropped";
  }
  return "?";
}

struct EndpointResolution {
  std::string name;
  EndpointOutcome outcome = EndpointOutcome::dropped;
  std::string target_key;  // empty when dropped
  std::optional<double> similarity;
};

enum class RelationOutcome { exact, merged, inserted, dropped };

inline const char* to_string(RelationOutcome o) {
  switch (o) {
    case RelationOutcome::exact: return "exact";
    case RelationOutcome::merged: return "merged";
    case RelationOutcome::inserted: return "inserted";
    case RelationOutcome::dropped: return "dropped";
  }
  return "?";
}

// Entity-decision shape plus the endpoint resolutions that led here.
struct RelationDecision {
  RawTriple triple;
  RelationOutcome outcome = RelationOutcome::dropped;
  RelationKey target;  // empty components when dropped
  std::optional<double> similarity;
  std::vector<EndpointResolution> endpoints;
  std::string note;
};

namespace detail {

inline std::string relation_instruction(RelationContextMode mode) {
  std::string out =
      "Extract relation triples from the text as a JSON object {\"relations\": "
      "[{\"subject\": ..., \"predicate\": ..., \"object\": ...}]}. Use only the "
      "listed entities as subjects and objects. ";
  if (mode == RelationContextMode::global) {
    out += "Include relations directly stated by the text and relations it "
           "implies about the listed entities.";
  } else {
    out += "Include only relations directly stated by the text.";
  }
  return out;
}

inline std::string render_entity_context(const std::vector<const Entity*>& entities) {
  std::string out = "Entities:\n";
  for (const Entity* e : entities) {
    out += "- " + e->name;
    if (!e->label.empty()) out += " (" + e->label + ")";
    out += "\n";
  }
  return out;
}

}  // namespace detail

// Module 3 extraction step. The backend is untrusted: the prompt restricts
// endpoints to the context entities, but enforcement happens later in
// resolve_relations. Returns triples with non-empty components only.
inline std::vector<RawTriple> extract_block_relations(const SemanticBlock& block,
                                                      const std::vector<const Entity*>& context,
                                                      LlmBackend& llm, RelationContextMode mode,
                                                      int max_retries = kDefaultMaxRetries) {
  ExtractionRequest request{
      detail::relation_instruction(mode),
      detail::render_entity_context(context) + "\nText:\n" + block.text(),
      {{"relations",
        FieldSpec{FieldKind::record_list, "subject/predicate/object triples", true}}},
      std::string("relations-") + to_string(mode) + "/" + block.document_id};
  ExtractionResult result = extract_structured(llm, request, max_retries);
  std::vector<RawTriple> triples;
  const FieldValue* value = result.find("relations");
  if (!value) return triples;
  const auto* records = std::get_if<std::vector<RecordValue>>(value);
  if (!records) return triples;
  for (const RecordValue& record : *records) {
    auto field = [&record](const char* key) -> std::string {
      auto it = record.find(key);
      return it == record.end() ? std::string{} : trim(it->second);
    };
    RawTriple t{field("subject"), field("predicate"), field("object"), block.document_id};
    if (t.subject.empty() || t.predicate.empty() || t.object.empty()) continue;
    triples.push_back(std::move(t));
  }
  return triples;
}

namespace detail {

// Resolves one endpoint name against the entity set: exact canonical key,
// then (policy permitting) best cosine at or above the threshold, then
// either drop or insert. A freshly inserted endpoint named after its source
// document is labeled "Document" (the synthesized document root).
inline EndpointResolution resolve_endpoint(const std::string& name, const std::string& document_id,
                                           KnowledgeGraph& graph, const MatcherConfig& config,
                                           EndpointPolicy policy, EmbeddingBackend& embedder) {
  std::string key = canonicalize(name);
  if (key.empty()) return {name, EndpointOutcome::dropped, "", std::nullopt};
  if (auto ordinal = graph.entity_ordinal(key)) {
    graph.extend_entity_provenance(*ordinal, {document_id});
    return {name, EndpointOutcome::exact, key, std::nullopt};
  }
  if (policy == EndpointPolicy::drop) {
    return {name, EndpointOutcome::dropped, "", std::nullopt};
  }
  std::string display = trim(name);
  EmbeddingVector vec =
      embedder.embed_batch({render_embed_text(config.embed_entity_as, display, "")})[0];
  double best = -1.0;
  std::optional<std::size_t> best_index;
  const auto& globals = graph.entities();
  for (std::size_t i = 0; i < globals.size(); ++i) {
    if (globals[i].embedding.empty()) continue;
    double sim = cosine(vec, globals[i].embedding);
    if (sim > best) {
      best = sim;
      best_index = i;
    }
  }
  if (best_index && best >= config.threshold) {
    graph.extend_entity_provenance(*best_index, {document_id});
    return {name, EndpointOutcome::merged, graph.entities()[*best_index].key, best};
  }
  if (policy == EndpointPolicy::match_then_insert) {
    std::string label = display == document_id ? "Document" : "";
    graph.insert_entity(Entity(display, label, std::move(vec), {document_id}));
    return {name, EndpointOutcome::inserted, key, best};
  }
  return {name, EndpointOutcome::dropped, "", best};
}

}  // namespace detail

// Incremental relation resolution. Per triple, in order: endpoints resolve
// to entity keys (per policy); an exact key triple merges provenance; else
// the predicate embedding is compared against relations sharing both
// endpoints and merges into the best match at or above the threshold
// (earliest-inserted wins ties); else the triple is appended as new.
// Predicate similarity never crosses endpoint pairs.
inline std::vector<RelationDecision> resolve_relations(const std::vector<RawTriple>& raw,
                                                       KnowledgeGraph& graph,
                                                       const MatcherConfig& config,
                                                       EndpointPolicy policy,
                                                       EmbeddingBackend& embedder) {
  std::vector<RelationDecision> decisions;
  decisions.reserve(raw.size());
  for (const RawTriple& triple : raw) {
    RelationDecision decision;
    decision.triple = triple;

    EndpointResolution subject = detail::resolve_endpoint(triple.subject, triple.document_id,
                                                          graph, config, policy, embedder);
    decision.endpoints.push_back(subject);
    if (subject.outcome == EndpointOutcome::dropped) {
      decision.outcome = RelationOutcome::dropped;
      decision.note = "unresolved subject endpoint";
      decisions.push_back(std::move(decision));
      continue;
    }
    EndpointResolution object = detail::resolve_endpoint(triple.object, triple.document_id, graph,
                                                         config, policy, embedder);
    decision.endpoints.push_back(object);
    if (object.outcome == EndpointOutcome::dropped) {
      decision.outcome = RelationOutcome::dropped;
      decision.note = "unresolved object endpoint";
      decisions.push_back(std::move(decision));
      continue;
    }

    std::string predicate_key = canonicalize(triple.predicate);
    RelationKey key{subject.target_key, predicate_key, object.target_key};
    if (graph.find_relation(key)) {
      graph.insert_relation(
          Relation(key.subject_key, triple.predicate, key.object_key, {}, {triple.document_id}));
      decision.outcome = RelationOutcome::exact;
      decision.target = key;
      decisions.push_back(std::move(decision));
      continue;
    }

    EmbeddingVector vec = embedder.embed_batch({triple.predicate})[0];
    double best = -1.0;
    std::optional<std::size_t> best_index;
    for (std::size_t i : graph.relations_between(key.subject_key, key.object_key)) {
      const Relation& candidate = graph.relations()[i];
      if (candidate.embedding.empty()) continue;
      double sim = cosine(vec, candidate.embedding);
      if (sim > best) {
        best = sim;
        best_index = i;
      }
    }
    if (best_index && best >= config.threshold) {
      graph.extend_relation_provenance(*best_index, {triple.document_id});
      const Relation& winner = graph.relations()[*best_index];
      decision.outcome = RelationOutcome::merged;
      decision.target = {winner.subject_key, winner.predicate_key, winner.object_key};
      decision.similarity = best;
    } else {
      graph.insert_relation(Relation(key.subject_key, triple.predicate, key.object_key,
                                     std::move(vec), {triple.document_id}));
      decision.outcome = RelationOutcome::inserted;
      decision.target = key;
      decision.similarity = best;
    }
    decisions.push_back(std::move(decision));
  }
  return decisions;
}

struct RelationStageResult {
  std::vector<RelationDecision> decisions;
  std::vector<SkippedDocument> skipped;
  int raw_count = 0;
  int dropped = 0;
};

// Runs relation extraction and resolution over all blocks in document
// order. Concept-seed triples from the distiller are injected ahead of the
// model's triples for each block; a block whose relation extraction fails
// still contributes its seeds.
inline RelationStageResult build_global_relations(
    const std::vector<SemanticBlock>& blocks,
    const std::vector<std::vector<std::string>>& per_block_matched,
    const std::vector<std::vector<SeedTriple>>& per_block_seeds, KnowledgeGraph& graph,
    LlmBackend& llm, EmbeddingBackend& embedder, const MatcherConfig& config,
    RelationContextMode mode, EndpointPolicy policy) {
  RelationStageResult stage;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const SemanticBlock& block = blocks[b];
    std::vector<const Entity*> context;
    if (mode == RelationContextMode::global) {
      for (const Entity& e : graph.entities()) context.push_back(&e);
    } else if (b < per_block_matched.size()) {
      for (const std::string& key : per_block_matched[b]) {
        if (const Entity* e = graph.find_entity(key)) context.push_back(e);
      }
    }
    std::vector<RawTriple> triples;
    if (b < per_block_seeds.size()) {
      for (const SeedTriple& seed : per_block_seeds[b]) {
        triples.push_back({seed.subject, seed.predicate, seed.object, block.document_id});
      }
    }
    try {
      std::vector<RawTriple> extracted =
          extract_block_relations(block, context, llm, mode, config.max_retries);
      triples.insert(triples.end(), extracted.begin(), extracted.end());
    } catch (const ExtractionFailedError& err) {
      stage.skipped.push_back({block.document_id, err.what()});
    }
    stage.raw_count += static_cast<int>(triples.size());
    std::vector<RelationDecision> decisions =
        resolve_relations(triples, graph, config, policy, embedder);
    for (const RelationDecision& d : decisions) {
      if (d.outcome == RelationOutcome::dropped) ++stage.dropped;
    }
    stage.decisions.insert(stage.decisions.end(), std::make_move_iterator(decisions.begin()),
                           std::make_move_iterator(decisions.end()));
  }
  return stage;
}

}  // namespace kgforge
