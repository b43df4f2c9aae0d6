#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgforge/canonical.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

using EmbeddingVector = std::vector<double>;

// Scales to unit Euclidean norm in place. Zero vectors cannot be normalized.
inline void normalize(EmbeddingVector& v) {
  double sq = 0.0;
  for (double x : v) sq = sq + x * x;
  double n = std::sqrt(sq);
  if (!(n > 0.0)) throw Error("cannot normalize a zero-norm embedding vector");
  for (double& x : v) x /= n;
}

// Dot product of two unit vectors, clamped to [-1, 1] against rounding.
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.size() != v.size()) {
    throw DimensionMismatchError("cosine: dimension mismatch (" + std::to_string(u.size()) +
                                 " vs " + std::to_string(v.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s = s + u[i] * v[i];
  if (s > 1.0) return 1.0;
  if (s < -1.0) return -1.0;
  return s;
}

// A named node. `key` is always canonicalize(name); the embedding, when
// present, is unit-norm. Provenance records every source document id that
// contributed the entity through a merge.
struct Entity {
  std::string name;
  std::string key;
  std::string label;                   // optional category; empty = none
  EmbeddingVector embedding;           // empty = none
  std::set<std::string> provenance;

  Entity() = default;
  Entity(std::string_view raw_name, std::string label_in = {}, EmbeddingVector emb = {},
         std::set<std::string> prov = {})
      : name(trim(raw_name)),
        key(canonicalize(name)),
        label(std::move(label_in)),
        embedding(std::move(emb)),
        provenance(std::move(prov)) {
    if (key.empty()) throw Error("entity name is empty after trimming");
    if (!embedding.empty()) normalize(embedding);
  }
};

// A directed (subject, predicate, object) edge between entity keys. The
// embedding covers the predicate text only.
struct Relation {
  std::string subject_key;
  std::string predicate;               // display form, first insertion wins
  std::string predicate_key;
  std::string object_key;
  EmbeddingVector embedding;           // empty = none
  std::set<std::string> provenance;

  Relation() = default;
  Relation(std::string subject, std::string_view raw_predicate, std::string object,
           EmbeddingVector emb = {}, std::set<std::string> prov = {})
      : subject_key(std::move(subject)),
        predicate(trim(raw_predicate)),
        predicate_key(canonicalize(predicate)),
        object_key(std::move(object)),
        embedding(std::move(emb)),
        provenance(std::move(prov)) {
    if (subject_key.empty() || predicate_key.empty() || object_key.empty()) {
      throw Error("relation key components must be non-empty");
    }
    if (!embedding.empty()) normalize(embedding);
  }
};

struct RelationKey {
  std::string subject_key;
  std::string predicate_key;
  std::string object_key;
  auto operator<=>(const RelationKey&) const = default;
};

// One input document (or chunk). Ids are unique within a run and ordinals
// contiguous from 0; `validate_documents` checks both.
struct Document {
  std::string id;
  std::string text;
  int ordinal = 0;
};

inline void validate_documents(const std::vector<Document>& docs) {
  std::set<std::string_view> ids;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].id.empty()) throw ConfigError("document with empty id");
    if (!ids.insert(docs[i].id).second) throw ConfigError("duplicate document id: " + docs[i].id);
    if (docs[i].ordinal != static_cast<int>(i)) {
      throw ConfigError("document ordinals must be contiguous from 0");
    }
  }
}

enum class MatchOutcome { exact, merged, inserted };

inline const char* to_string(MatchOutcome o) {
  switch (o) {
    case MatchOutcome::exact: return "exact";
    case MatchOutcome::merged: return "merged";
    case MatchOutcome::inserted: return "inserted";
  }
  return "?";
}

// Audit record for one local item: what it was, what happened, where it
// landed. `similarity` is absent for exact key hits; for an insertion into
// an empty candidate set it is -1, the cosine floor (max over the empty set).
struct MatchDecision {
  std::string local_name;
  MatchOutcome outcome = MatchOutcome::inserted;
  std::string target_key;
  std::optional<double> similarity;
};

// The global sets: entities and relations in insertion order, with key
// uniqueness and referential integrity enforced on every insert.
class KnowledgeGraph {
 public:
  explicit KnowledgeGraph(int dimension) : dimension_(dimension) {
    if (dimension <= 0) throw Error("graph embedding dimension must be positive");
  }

  int dimension() const { return dimension_; }
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Relation>& relations() const { return relations_; }

  const Entity* find_entity(std::string_view key) const {
    auto it = entity_index_.find(std::string(key));
    return it == entity_index_.end() ? nullptr : &entities_[it->second];
  }

  std::optional<std::size_t> entity_ordinal(std::string_view key) const {
    auto it = entity_index_.find(std::string(key));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
  }

  const Relation* find_relation(const RelationKey& key) const {
    auto it = relation_index_.find(key);
    return it == relation_index_.end() ? nullptr : &relations_[it->second];
  }

  // Indices of relations sharing both endpoints, in insertion order.
  std::vector<std::size_t> relations_between(std::string_view subject_key,
                                             std::string_view object_key) const {
    auto it = endpoint_index_.find({std::string(subject_key), std::string(object_key)});
    if (it == endpoint_index_.end()) return {};
    return it->second;
  }

  // Same key: provenance union, no new node (existing name/label/embedding
  // kept). New key: appended. Returns the index of the resulting entity.
  std::size_t insert_entity(Entity entity, bool* inserted = nullptr) {
    if (!entity.embedding.empty() &&
        entity.embedding.size() != static_cast<std::size_t>(dimension_)) {
      throw DimensionMismatchError("entity '" + entity.name + "' embedding has dimension " +
                                   std::to_string(entity.embedding.size()) + ", graph expects " +
                                   std::to_string(dimension_));
    }
    auto it = entity_index_.find(entity.key);
    if (it != entity_index_.end()) {
      Entity& existing = entities_[it->second];
      existing.provenance.insert(entity.provenance.begin(), entity.provenance.end());
      if (inserted) *inserted = false;
      return it->second;
    }
    std::size_t idx = entities_.size();
    entity_index_.emplace(entity.key, idx);
    entities_.push_back(std::move(entity));
    if (inserted) *inserted = true;
    return idx;
  }

  // Exact triple duplicates merge provenance; otherwise appended. Both
  // endpoints must already exist in the entity set.
  std::size_t insert_relation(Relation relation, bool* inserted = nullptr) {
    if (!entity_index_.count(relation.subject_key)) {
      throw DanglingEndpointError("relation subject '" + relation.subject_key +
                                  "' is not in the entity set");
    }
    if (!entity_index_.count(relation.object_key)) {
      throw DanglingEndpointError("relation object '" + relation.object_key +
                                  "' is not in the entity set");
    }
    if (!relation.embedding.empty() &&
        relation.embedding.size() != static_cast<std::size_t>(dimension_)) {
      throw DimensionMismatchError("relation predicate embedding dimension mismatch");
    }
    RelationKey key{relation.subject_key, relation.predicate_key, relation.object_key};
    auto it = relation_index_.find(key);
    if (it != relation_index_.end()) {
      Relation& existing = relations_[it->second];
      existing.provenance.insert(relation.provenance.begin(), relation.provenance.end());
      if (inserted) *inserted = false;
      return it->second;
    }
    std::size_t idx = relations_.size();
    relation_index_.emplace(key, idx);
    endpoint_index_[{relation.subject_key, relation.object_key}].push_back(idx);
    relations_.push_back(std::move(relation));
    if (inserted) *inserted = true;
    return idx;
  }

  // Adds documents to the provenance of an existing entity/relation.
  void extend_entity_provenance(std::size_t index, const std::set<std::string>& docs) {
    entities_.at(index).provenance.insert(docs.begin(), docs.end());
  }
  void extend_relation_provenance(std::size_t index, const std::set<std::string>& docs) {
    relations_.at(index).provenance.insert(docs.begin(), docs.end());
  }

  // Removes entities that no relation references. Keeps insertion order.
  std::size_t prune_isolated_entities() {
    std::set<std::string> used;
    for (const Relation& r : relations_) {
      used.insert(r.subject_key);
      used.insert(r.object_key);
    }
    std::vector<Entity> kept;
    kept.reserve(entities_.size());
    for (Entity& e : entities_) {
      if (used.count(e.key)) kept.push_back(std::move(e));
    }
    std::size_t removed = entities_.size() - kept.size();
    entities_ = std::move(kept);
    rebuild_indexes();
    return removed;
  }

  // Full invariant sweep; used after deserialization.
  void validate() const {
    std::set<std::string_view> keys;
    for (const Entity& e : entities_) {
      if (e.key != canonicalize(e.name)) throw ParseError("entity key is not canonical: " + e.key);
      if (!keys.insert(e.key).second) throw ParseError("duplicate entity key: " + e.key);
      if (!e.embedding.empty()) {
        if (e.embedding.size() != static_cast<std::size_t>(dimension_)) {
          throw ParseError("entity '" + e.key + "' embedding dimension mismatch");
        }
        double sq = 0.0;
        for (double x : e.embedding) sq += x * x;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
          throw ParseError("entity '" + e.key + "' embedding is not unit-norm");
        }
      }
    }
    std::set<RelationKey> rkeys;
    for (const Relation& r : relations_) {
      if (!rkeys.insert({r.subject_key, r.predicate_key, r.object_key}).second) {
        throw ParseError("duplicate relation key triple: " + r.subject_key + " / " +
                         r.predicate_key + " / " + r.object_key);
      }
      if (!keys.count(r.subject_key) || !keys.count(r.object_key)) {
        throw ParseError("dangling relation endpoint: " + r.subject_key + " -> " + r.object_key);
      }
    }
  }

 private:
  void rebuild_indexes() {
    entity_index_.clear();
    relation_index_.clear();
    endpoint_index_.clear();
    for (std::size_t i = 0; i < entities_.size(); ++i) entity_index_.emplace(entities_[i].key, i);
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      const Relation& r = relations_[i];
      relation_index_.emplace(RelationKey{r.subject_key, r.predicate_key, r.object_key}, i);
      endpoint_index_[{r.subject_key, r.object_key}].push_back(i);
    }
  }

  int dimension_;
  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::unordered_map<std::string, std::size_t> entity_index_;
  std::map<RelationKey, std::size_t> relation_index_;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> endpoint_index_;
};

}  // namespace kgforge
