#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgforge/backend.hpp"
#include "kgforge/core.hpp"
#include "kgforge/distiller.hpp"
#include "kgforge/entity_matcher.hpp"
#include "kgforge/errors.hpp"
#include "kgforge/graph_json.hpp"
#include "kgforge/integrator.hpp"
#include "kgforge/mock_backend.hpp"
#include "kgforge/relation_matcher.hpp"

namespace kgforge {

// Everything one run needs. The pipeline validates thresholds into (0, 1];
// library callers can still drive the matcher outside that range directly.
struct PipelineConfig {
  std::string blueprint_path;
  MatcherConfig matcher;
  RelationContextMode relation_mode = RelationContextMode::local;
  EndpointPolicy endpoint_policy = EndpointPolicy::match_then_drop;

  std::string backend = "mock-hash";  // remote | mock-lookup | mock-hash
  std::string fixtures_path;          // mock LLM fixture file
  std::string embeddings_path;        // lookup embedder table
  int hash_dimension = 64;
  std::uint64_t hash_seed = 1;

  std::string remote_base_url = "https://api.openai.com/v1";
  std::string remote_chat_model = "gpt-4";
  std::string remote_embed_model = "text-embedding-3-large";
  int remote_timeout_seconds = 120;
  int remote_max_in_flight = 4;
  int remote_embed_dimensions = 0;

  bool split_keys = false;
  int chunk_chars = 0;
  bool prune_isolated = false;
  std::string out_dir;

  void validate() const {
    if (blueprint_path.empty()) throw ConfigError("config is missing the blueprint path");
    if (!std::filesystem::exists(blueprint_path)) {
      throw ConfigError("blueprint file does not exist: " + blueprint_path);
    }
    if (!(matcher.threshold > 0.0) || matcher.threshold > 1.0) {
      throw ConfigError("threshold must lie in (0, 1]");
    }
    if (backend == "mock-lookup") {
      if (embeddings_path.empty()) throw ConfigError("mock-lookup backend needs embeddings_table");
      if (!std::filesystem::exists(embeddings_path)) {
        throw ConfigError("embedding table does not exist: " + embeddings_path);
      }
    } else if (backend != "mock-hash" && backend != "remote") {
      throw ConfigError("unknown backend: " + backend + " (remote|mock-lookup|mock-hash)");
    }
    if ((backend == "mock-lookup" || backend == "mock-hash") && !fixtures_path.empty() &&
        !std::filesystem::exists(fixtures_path)) {
      throw ConfigError("fixture file does not exist: " + fixtures_path);
    }
    if (chunk_chars < 0) throw ConfigError("chunk-chars must be non-negative");
  }

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    auto resolve = [&base_dir](const std::string& p) -> std::string {
      if (p.empty()) return p;
      std::filesystem::path path(p);
      return path.is_absolute() ? path.string() : (base_dir / path).string();
    };
    PipelineConfig c;
    c.blueprint_path = resolve(j.value("blueprint", std::string{}));
    c.matcher.threshold = j.value("threshold", c.matcher.threshold);
    c.matcher.strict_first_block = j.value("strict_first_block", c.matcher.strict_first_block);
    c.matcher.embed_entity_as = j.value("embed_entity_as", c.matcher.embed_entity_as);
    c.matcher.max_retries = j.value("max_retries", c.matcher.max_retries);
    c.relation_mode =
        relation_mode_from_string(j.value("relation_mode", std::string{to_string(c.relation_mode)}));
    c.endpoint_policy = endpoint_policy_from_string(
        j.value("endpoint_policy", std::string{to_string(c.endpoint_policy)}));
    c.backend = j.value("backend", c.backend);
    c.fixtures_path = resolve(j.value("fixtures", std::string{}));
    c.embeddings_path = resolve(j.value("embeddings_table", std::string{}));
    c.hash_dimension = j.value("hash_dimension", c.hash_dimension);
    c.hash_seed = j.value("hash_seed", c.hash_seed);
    if (j.contains("remote")) {
      const auto& r = j["remote"];
      c.remote_base_url = r.value("base_url", c.remote_base_url);
      c.remote_chat_model = r.value("chat_model", c.remote_chat_model);
      c.remote_embed_model = r.value("embed_model", c.remote_embed_model);
      c.remote_timeout_seconds = r.value("timeout_seconds", c.remote_timeout_seconds);
      c.remote_max_in_flight = r.value("max_in_flight", c.remote_max_in_flight);
      c.remote_embed_dimensions = r.value("embed_dimensions", c.remote_embed_dimensions);
    }
    c.split_keys = j.value("split_keys", c.split_keys);
    c.chunk_chars = j.value("chunk_chars", c.chunk_chars);
    c.prune_isolated = j.value("prune_isolated", c.prune_isolated);
    c.out_dir = resolve(j.value("out", std::string{}));
    return c;
  }

  static PipelineConfig from_file(const std::string& path) {
    return from_json(load_json_file(path), std::filesystem::path(path).parent_path());
  }
};

struct Backends {
  std::unique_ptr<LlmBackend> llm;
  std::unique_ptr<EmbeddingBackend> embedder;
};

// The remote-capable factory lives in backend_factory.hpp so that pure-mock
// binaries never pull in the HTTP client.
inline Backends make_mock_backends(const PipelineConfig& config) {
  Backends b;
  if (config.fixtures_path.empty()) {
    b.llm = std::make_unique<FixtureLlm>(nlohmann::json::object());
  } else {
    b.llm = std::make_unique<FixtureLlm>(load_json_file(config.fixtures_path));
  }
  if (config.backend == "mock-lookup") {
    b.embedder = std::make_unique<LookupEmbedder>(LookupEmbedder::from_file(config.embeddings_path));
  } else {
    b.embedder = std::make_unique<HashEmbedder>(config.hash_dimension, config.hash_seed);
  }
  return b;
}

struct StageTimings {
  double distill_ms = 0.0;
  double entities_ms = 0.0;
  double relations_ms = 0.0;
  double export_ms = 0.0;
};

struct RunReport {
  int documents = 0;
  int blocks = 0;
  int local_entities = 0;       // extracted before merging
  int endpoint_inserted = 0;    // entities added by endpoint resolution
  int entities_after = 0;       // |E| at the end of the run
  int raw_relations = 0;        // seeds + extracted triples before merging
  int relations_after = 0;      // |R| at the end of the run
  int dropped_relations = 0;
  int pruned_isolated = 0;
  std::vector<SkippedDocument> skipped;
  std::vector<std::string> warnings;
  StageTimings timings;
  std::string aborted;  // non-empty when the run stopped on a backend failure

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["documents"] = documents;
    j["blocks"] = blocks;
    j["entities"] = {{"local", local_entities},
                     {"endpoint_inserted", endpoint_inserted},
                     {"after_merge", entities_after}};
    j["relations"] = {
        {"raw", raw_relations}, {"after_merge", relations_after}, {"dropped", dropped_relations}};
    if (pruned_isolated > 0) j["pruned_isolated"] = pruned_isolated;
    j["skipped"] = nlohmann::ordered_json::array();
    for (const SkippedDocument& s : skipped) {
      j["skipped"].push_back({{"id", s.id}, {"reason", s.reason}});
    }
    j["warnings"] = warnings;
    j["timings_ms"] = {{"distill", timings.distill_ms},
                       {"entities", timings.entities_ms},
                       {"relations", timings.relations_ms},
                       {"export", timings.export_ms}};
    if (!aborted.empty()) j["aborted"] = aborted;
    return j;
  }
};

struct PipelineResult {
  KnowledgeGraph graph;
  RunReport report;
  std::vector<SemanticBlock> blocks;
  std::vector<MatchDecision> entity_decisions;
  std::vector<RelationDecision> relation_decisions;
};

namespace detail {

inline nlohmann::ordered_json entity_decision_json(const MatchDecision& d) {
  nlohmann::ordered_json j;
  j["local_name"] = d.local_name;
  j["outcome"] = to_string(d.outcome);
  j["target_key"] = d.target_key;
  if (d.similarity) j["similarity"] = *d.similarity;
  return j;
}

inline nlohmann::ordered_json relation_decision_json(const RelationDecision& d) {
  nlohmann::ordered_json j;
  j["subject"] = d.triple.subject;
  j["predicate"] = d.triple.predicate;
  j["object"] = d.triple.object;
  j["document_id"] = d.triple.document_id;
  j["outcome"] = to_string(d.outcome);
  if (d.outcome != RelationOutcome::dropped) {
    j["target"] = {{"subject_key", d.target.subject_key},
                   {"predicate_key", d.target.predicate_key},
                   {"object_key", d.target.object_key}};
  }
  if (d.similarity) j["similarity"] = *d.similarity;
  j["endpoints"] = nlohmann::ordered_json::array();
  for (const EndpointResolution& e : d.endpoints) {
    nlohmann::ordered_json je;
    je["name"] = e.name;
    je["outcome"] = to_string(e.outcome);
    if (!e.target_key.empty()) je["target_key"] = e.target_key;
    if (e.similarity) je["similarity"] = *e.similarity;
    j["endpoints"].push_back(std::move(je));
  }
  if (!d.note.empty()) j["note"] = d.note;
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace detail

// Splits documents into chunks of at most `chunk_chars` code points, ids
// suffixed "#<n>", ordinals renumbered contiguously. chunk_chars <= 0 is a
// no-op.
inline std::vector<Document> chunk_documents(const std::vector<Document>& docs, int chunk_chars) {
  if (chunk_chars <= 0) return docs;
  std::vector<Document> out;
  for (const Document& doc : docs) {
    std::vector<std::string> pieces;
    std::size_t begin = 0;
    std::size_t i = 0;
    int count = 0;
    while (i < doc.text.size()) {
      detail::decode_utf8(doc.text, i);
      if (++count == chunk_chars) {
        pieces.push_back(doc.text.substr(begin, i - begin));
        begin = i;
        count = 0;
      }
    }
    if (begin < doc.text.size()) pieces.push_back(doc.text.substr(begin));
    if (pieces.empty()) pieces.push_back("");
    if (pieces.size() == 1) {
      out.push_back({doc.id, doc.text, static_cast<int>(out.size())});
      continue;
    }
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      out.push_back({doc.id + "#" + std::to_string(k), std::move(pieces[k]),
                     static_cast<int>(out.size())});
    }
  }
  return out;
}

// Reads one UTF-8 text file per document from a directory, lexicographic
// file-name order; a manifest (JSON array of file names) overrides order.
// Document ids are file stems.
inline std::vector<Document> load_documents(const std::string& docs_dir,
                                            const std::string& manifest_path = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(docs_dir)) throw ConfigError("not a document directory: " + docs_dir);
  std::vector<fs::path> files;
  if (!manifest_path.empty()) {
    nlohmann::json manifest = load_json_file(manifest_path);
    if (!manifest.is_array()) throw ParseError("manifest must be a JSON array of file names");
    for (const auto& name : manifest) files.emplace_back(fs::path(docs_dir) / name.get<std::string>());
  } else {
    for (const auto& entry : fs::directory_iterator(docs_dir)) {
      if (!entry.is_regular_file()) continue;
      std::string name = entry.path().filename().string();
      if (!name.empty() && name.front() == '.') continue;
      files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  }
  std::vector<Document> docs;
  for (const fs::path& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read document: " + file.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    docs.push_back({file.stem().string(), std::move(text), static_cast<int>(docs.size())});
  }
  validate_documents(docs);
  return docs;
}

namespace detail {

// The staged flow: distill -> entity matching -> relation matching, all
// mutations applied sequentially to the single caller-owned graph.
inline PipelineResult run_stages(const std::vector<Document>& documents,
                                 const PipelineConfig& config, KnowledgeGraph graph,
                                 LlmBackend& llm, EmbeddingBackend& embedder) {
  PipelineResult result{std::move(graph), {}, {}, {}, {}};
  RunReport& report = result.report;
  report.documents = static_cast<int>(documents.size());
  try {
    Blueprint blueprint =
        Blueprint::from_json(load_json_file<nlohmann::ordered_json>(config.blueprint_path));

    auto t0 = std::chrono::steady_clock::now();
    std::vector<Document> chunked = chunk_documents(documents, config.chunk_chars);
    DistillOptions distill_options{config.matcher.max_retries, config.split_keys};
    auto [blocks, distill_report] = distill(chunked, blueprint, llm, distill_options);
    result.blocks = std::move(blocks);
    report.blocks = static_cast<int>(result.blocks.size());
    report.skipped = std::move(distill_report.skipped);
    report.warnings = std::move(distill_report.warnings);
    report.timings.distill_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    EntityStageResult entity_stage =
        build_global_entities(result.blocks, llm, embedder, result.graph, config.matcher);
    result.entity_decisions = std::move(entity_stage.decisions);
    report.local_entities = entity_stage.local_count;
    for (const SkippedDocument& s : entity_stage.skipped) report.skipped.push_back(s);
    int entities_before_relations = static_cast<int>(result.graph.entities().size());
    report.timings.entities_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<SeedTriple>> seeds;
    seeds.reserve(result.blocks.size());
    for (const SemanticBlock& block : result.blocks) {
      seeds.push_back(render_concept_relations(block, blueprint));
    }
    RelationStageResult relation_stage = build_global_relations(
        result.blocks, entity_stage.per_block_matched, seeds, result.graph, llm, embedder,
        config.matcher, config.relation_mode, config.endpoint_policy);
    result.relation_decisions = std::move(relation_stage.decisions);
    report.raw_relations = relation_stage.raw_count;
    report.dropped_relations = relation_stage.dropped;
    for (const SkippedDocument& s : relation_stage.skipped) report.skipped.push_back(s);
    report.endpoint_inserted =
        static_cast<int>(result.graph.entities().size()) - entities_before_relations;
    report.timings.relations_ms = elapsed_ms(t0);

    if (config.prune_isolated) {
      report.pruned_isolated = static_cast<int>(result.graph.prune_isolated_entities());
    }
    report.entities_after = static_cast<int>(result.graph.entities().size());
    report.relations_after = static_cast<int>(result.graph.relations().size());
  } catch (const BackendUnreachableError& err) {
    report.aborted = err.what();
    report.entities_after = static_cast<int>(result.graph.entities().size());
    report.relations_after = static_cast<int>(result.graph.relations().size());
    if (!config.out_dir.empty()) {
      std::filesystem::create_directories(config.out_dir);
      write_text_file(std::filesystem::path(config.out_dir) / "report.json",
                      report.to_json().dump(2) + "\n");
    }
    throw;
  }
  return result;
}

}  // namespace detail

// Writes graph.json (embeddings included so the run can be resumed),
// graph.cypher, report.json, and both decision logs into out_dir.
inline void write_run_outputs(PipelineResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto t0 = std::chrono::steady_clock::now();
  detail::write_text_file(fs::path(out_dir) / "graph.json",
                          emit_graph_json(result.graph, /*include_embeddings=*/true,
                                          /*include_provenance=*/true));
  detail::write_text_file(fs::path(out_dir) / "graph.cypher", emit_cypher(result.graph));
  std::string entity_log;
  for (const MatchDecision& d : result.entity_decisions) {
    entity_log += detail::entity_decision_json(d).dump() + "\n";
  }
  detail::write_text_file(fs::path(out_dir) / "entity_decisions.jsonl", entity_log);
  std::string relation_log;
  for (const RelationDecision& d : result.relation_decisions) {
    relation_log += detail::relation_decision_json(d).dump() + "\n";
  }
  detail::write_text_file(fs::path(out_dir) / "relation_decisions.jsonl", relation_log);
  result.report.timings.export_ms = detail::elapsed_ms(t0);
  detail::write_text_file(fs::path(out_dir) / "report.json",
                          result.report.to_json().dump(2) + "\n");
}

// Full run from scratch over the given backends.
inline PipelineResult run_pipeline(const std::vector<Document>& documents,
                                   const PipelineConfig& config, LlmBackend& llm,
                                   EmbeddingBackend& embedder) {
  config.validate();
  validate_documents(documents);
  KnowledgeGraph graph(embedder.dimension());
  PipelineResult result =
      detail::run_stages(documents, config, std::move(graph), llm, embedder);
  if (!config.out_dir.empty()) write_run_outputs(result, config.out_dir);
  return result;
}

// Incremental continuation: loads a previously exported graph (embeddings
// required for merging) and processes the new documents against it exactly
// as if the original run had never stopped.
inline PipelineResult resume(const std::string& graph_json_path,
                             const std::vector<Document>& new_documents,
                             const PipelineConfig& config, LlmBackend& llm,
                             EmbeddingBackend& embedder) {
  config.validate();
  validate_documents(new_documents);
  std::ifstream in(graph_json_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open graph file: " + graph_json_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  KnowledgeGraph graph = parse_graph_json(text);
  if (graph.dimension() != embedder.dimension()) {
    throw DimensionMismatchError("graph file dimension " + std::to_string(graph.dimension()) +
                                 " does not match backend dimension " +
                                 std::to_string(embedder.dimension()));
  }
  for (const Entity& e : graph.entities()) {
    if (e.embedding.empty()) {
      throw ConfigError("graph file lacks entity embeddings; resumable exports must include them");
    }
  }
  PipelineResult result =
      detail::run_stages(new_documents, config, std::move(graph), llm, embedder);
  if (!config.out_dir.empty()) write_run_outputs(result, config.out_dir);
  return result;
}

}  // namespace kgforge
