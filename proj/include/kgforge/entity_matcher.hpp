#pragma once

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kgforge/backend.hpp"
#include "kgforge/core.hpp"
#include "kgforge/distiller.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

// Matching knobs. The pipeline validates threshold into (0, 1]; the library
// accepts any value so boundary behavior (threshold > 1 disables similarity
// merging, threshold = -1 merges everything non-exact) stays testable.
struct MatcherConfig {
  double threshold = 0.7;
  bool strict_first_block = true;
  std::string embed_entity_as = "{name}";  // or "{name} ({label})"
  int max_retries = kDefaultMaxRetries;
};

// Text handed to the embedder for an entity. When the template references
// {label} but the entity has none, falls back to the name alone.
inline std::string render_embed_text(const std::string& tmpl, const std::string& name,
                                     const std::string& label) {
  if (tmpl.find("{label}") != std::string::npos && label.empty()) return name;
  std::string out = tmpl;
  auto replace_all = [&out](const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = out.find(from, pos)) != std::string::npos; pos += to.size()) {
      out.replace(pos, from.size(), to);
    }
  };
  replace_all("{name}", name);
  replace_all("{label}", label);
  return out;
}

namespace detail {

inline std::string entity_instruction() {
  return "List the distinct entities mentioned in the text. Each entity must "
         "describe exactly one concept; never combine two concepts into one "
         "entity. Respond with a JSON object {\"entities\": [{\"name\": ..., "
         "\"label\": ...}]} where label is a short category.";
}

}  // namespace detail

// Extracts one block's local entities: canonicalized, within-block exact-key
// duplicates collapsed (first mention wins), provenance set to the block's
// document, embeddings attached in one batch.
inline std::vector<Entity> extract_local_entities(const SemanticBlock& block, LlmBackend& llm,
                                                  EmbeddingBackend& embedder,
                                                  const MatcherConfig& config) {
  ExtractionRequest request{detail::entity_instruction(),
                            block.text(),
                            {{"entities", FieldSpec{FieldKind::record_list,
                                                    "entities with name and label", true}}},
                            "entities/" + block.document_id};
  ExtractionResult result = extract_structured(llm, request, config.max_retries);
  std::vector<Entity> locals;
  std::set<std::string> seen;
  const FieldValue* value = result.find("entities");
  if (!value) return locals;
  const auto* records = std::get_if<std::vector<RecordValue>>(value);
  if (!records) return locals;
  for (const RecordValue& record : *records) {
    auto name_it = record.find("name");
    if (name_it == record.end() || trim(name_it->second).empty()) continue;
    std::string label;
    if (auto label_it = record.find("label"); label_it != record.end()) label = label_it->second;
    Entity entity(name_it->second, label, {}, {block.document_id});
    if (!seen.insert(entity.key).second) continue;
    locals.push_back(std::move(entity));
  }
  if (!locals.empty()) {
    std::vector<std::string> texts;
    texts.reserve(locals.size());
    for (const Entity& e : locals) {
      texts.push_back(render_embed_text(config.embed_entity_as, e.name, e.label));
    }
    std::vector<EmbeddingVector> vectors = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < locals.size(); ++i) locals[i].embedding = std::move(vectors[i]);
  }
  return locals;
}

struct MatchResult {
  std::vector<std::string> matched_keys;  // one per local entity, in order
  std::vector<MatchDecision> decisions;
};

// The incremental matching step. For each local entity, in order: exact
// canonical-key hit wins outright; otherwise the best-cosine global entity
// at or above the threshold absorbs it; otherwise it joins the global set.
// Ties on maximum similarity resolve to the earliest-inserted global entity.
inline MatchResult match_entities(const std::vector<Entity>& local, KnowledgeGraph& graph,
                                  const MatcherConfig& config) {
  for (const Entity& e : local) {
    if (e.embedding.size() != static_cast<std::size_t>(graph.dimension())) {
      throw DimensionMismatchError("local entity '" + e.name + "' has embedding dimension " +
                                   std::to_string(e.embedding.size()) + ", graph expects " +
                                   std::to_string(graph.dimension()));
    }
  }
  MatchResult result;
  for (const Entity& e : local) {
    if (auto ordinal = graph.entity_ordinal(e.key)) {
      graph.extend_entity_provenance(*ordinal, e.provenance);
      result.matched_keys.push_back(e.key);
      result.decisions.push_back({e.name, MatchOutcome::exact, e.key, std::nullopt});
      continue;
    }
    // -1 is the cosine floor: the max over an empty candidate set.
    double best = -1.0;
    std::optional<std::size_t> best_index;
    const auto& globals = graph.entities();
    for (std::size_t i = 0; i < globals.size(); ++i) {
      if (globals[i].embedding.empty()) continue;
      double sim = cosine(e.embedding, globals[i].embedding);
      if (sim > best) {
        best = sim;
        best_index = i;
      }
    }
    if (best_index && best >= config.threshold) {
      graph.extend_entity_provenance(*best_index, e.provenance);
      const std::string& key = graph.entities()[*best_index].key;
      result.matched_keys.push_back(key);
      result.decisions.push_back({e.name, MatchOutcome::merged, key, best});
    } else {
      graph.insert_entity(e);
      result.matched_keys.push_back(e.key);
      result.decisions.push_back({e.name, MatchOutcome::inserted, e.key, best});
    }
  }
  return result;
}

struct EntityStageResult {
  std::vector<std::vector<std::string>> per_block_matched;  // deduped, first-hit order
  std::vector<MatchDecision> decisions;
  std::vector<SkippedDocument> skipped;
  int local_count = 0;
};

// Runs the matcher over all blocks in document order. With
// strict_first_block (default) the seeding block goes through the same
// threshold gate, so near-duplicates inside it also merge; switched off, the
// first block that reaches an empty global set is trusted to be pairwise
// distinct and only exact keys collapse.
inline EntityStageResult build_global_entities(const std::vector<SemanticBlock>& blocks,
                                               LlmBackend& llm, EmbeddingBackend& embedder,
                                               KnowledgeGraph& graph,
                                               const MatcherConfig& config) {
  EntityStageResult stage;
  for (const SemanticBlock& block : blocks) {
    std::vector<Entity> locals;
    try {
      locals = extract_local_entities(block, llm, embedder, config);
    } catch (const ExtractionFailedError& err) {
      stage.skipped.push_back({block.document_id, err.what()});
      stage.per_block_matched.emplace_back();
      continue;
    }
    stage.local_count += static_cast<int>(locals.size());
    MatcherConfig effective = config;
    if (!config.strict_first_block && graph.entities().empty()) {
      effective.threshold = std::numeric_limits<double>::infinity();
    }
    MatchResult matched = match_entities(locals, graph, effective);
    std::vector<std::string> dedup;
    for (const std::string& key : matched.matched_keys) {
      if (std::find(dedup.begin(), dedup.end(), key) == dedup.end()) dedup.push_back(key);
    }
    stage.per_block_matched.push_back(std::move(dedup));
    stage.decisions.insert(stage.decisions.end(), matched.decisions.begin(),
                           matched.decisions.end());
  }
  return stage;
}

}  // namespace kgforge
