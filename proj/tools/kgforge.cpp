// kgforge: incremental knowledge-graph construction from document collections.
//
// Subcommands: distill, build, resume, export, metrics, estimate-threshold.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <kgforge/backend_factory.hpp>
#include <kgforge/kgforge.hpp>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct BackendFlags {
  std::string backend;
  std::string fixtures;
  std::string embeddings_table;
  int dims = 0;
  std::uint64_t seed = 0;
  std::string base_url;
  std::string chat_model;
  std::string embed_model;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--backend", backend, "Backend: remote|mock-lookup|mock-hash");
    cmd->add_option("--fixtures", fixtures, "Mock LLM fixture file (JSON)");
    cmd->add_option("--embeddings-table", embeddings_table,
                    "Lookup embedder table (JSON text->vector)");
    cmd->add_option("--dims", dims, "Hash embedder dimension");
    cmd->add_option("--seed", seed, "Hash embedder seed");
    cmd->add_option("--base-url", base_url, "Remote API base URL");
    cmd->add_option("--chat-model", chat_model, "Remote chat model name");
    cmd->add_option("--embed-model", embed_model, "Remote embedding model name");
  }

  void apply(CLI::App* cmd, kgforge::PipelineConfig& config) const {
    if (cmd->count("--backend")) config.backend = backend;
    if (cmd->count("--fixtures")) config.fixtures_path = fixtures;
    if (cmd->count("--embeddings-table")) config.embeddings_path = embeddings_table;
    if (cmd->count("--dims")) config.hash_dimension = dims;
    if (cmd->count("--seed")) config.hash_seed = seed;
    if (cmd->count("--base-url")) config.remote_base_url = base_url;
    if (cmd->count("--chat-model")) config.remote_chat_model = chat_model;
    if (cmd->count("--embed-model")) config.remote_embed_model = embed_model;
  }
};

struct PipelineFlags {
  std::string config_path;
  std::string docs;
  std::string manifest;
  std::string blueprint;
  double threshold = 0.7;
  bool no_strict_first_block = false;
  std::string embed_entity_as;
  std::string relation_mode;
  std::string endpoint_policy;
  int chunk_chars = 0;
  bool split_keys = false;
  bool prune_isolated = false;
  int max_retries = 0;
  std::string out;
  BackendFlags backend;

  void add_to(CLI::App* cmd, bool docs_required) {
    cmd->add_option("--config", config_path, "Pipeline config file (JSON); flags override");
    auto* docs_opt = cmd->add_option("--docs", docs, "Directory with one text file per document");
    if (docs_required) docs_opt->required();
    cmd->add_option("--manifest", manifest, "JSON array of file names fixing document order");
    cmd->add_option("--blueprint", blueprint, "Blueprint file (JSON)");
    cmd->add_option("--threshold", threshold, "Cosine merge threshold in (0, 1]");
    cmd->add_flag("--no-strict-first-block", no_strict_first_block,
                  "Trust the first block to be pairwise distinct");
    cmd->add_option("--embed-entity-as", embed_entity_as,
                    "Entity embedding template, e.g. \"{name} ({label})\"");
    cmd->add_option("--relation-mode", relation_mode, "Relation context: global|local");
    cmd->add_option("--endpoint-policy", endpoint_policy,
                    "Unknown endpoints: drop|match_then_drop|match_then_insert");
    cmd->add_option("--chunk-chars", chunk_chars, "Split documents into chunks of N characters");
    cmd->add_flag("--split-keys", split_keys, "Emit one semantic block per filled key");
    cmd->add_flag("--prune-isolated", prune_isolated, "Drop entities no relation references");
    cmd->add_option("--max-retries", max_retries, "Structured-extraction attempts per document");
    cmd->add_option("--out", out, "Output directory");
    backend.add_to(cmd);
  }

  kgforge::PipelineConfig build_config(CLI::App* cmd) const {
    kgforge::PipelineConfig config;
    if (!config_path.empty()) config = kgforge::PipelineConfig::from_file(config_path);
    if (cmd->count("--blueprint")) config.blueprint_path = blueprint;
    if (cmd->count("--threshold")) config.matcher.threshold = threshold;
    if (no_strict_first_block) config.matcher.strict_first_block = false;
    if (cmd->count("--embed-entity-as")) config.matcher.embed_entity_as = embed_entity_as;
    if (cmd->count("--max-retries")) config.matcher.max_retries = max_retries;
    if (cmd->count("--relation-mode")) {
      config.relation_mode = kgforge::relation_mode_from_string(relation_mode);
    }
    if (cmd->count("--endpoint-policy")) {
      config.endpoint_policy = kgforge::endpoint_policy_from_string(endpoint_policy);
    }
    if (cmd->count("--chunk-chars")) config.chunk_chars = chunk_chars;
    if (split_keys) config.split_keys = true;
    if (prune_isolated) config.prune_isolated = true;
    if (cmd->count("--out")) config.out_dir = out;
    backend.apply(cmd, config);
    return config;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw kgforge::Error("cannot write file: " + path.string());
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw kgforge::ConfigError("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void print_run_summary(const kgforge::PipelineResult& result, const std::string& out_dir) {
  const kgforge::RunReport& r = result.report;
  std::cout << "documents: " << r.documents << ", blocks: " << r.blocks << "\n"
            << "entities:  " << r.local_entities << " local -> " << r.entities_after
            << " global\n"
            << "relations: " << r.raw_relations << " raw -> " << r.relations_after << " global ("
            << r.dropped_relations << " dropped)\n";
  if (!r.skipped.empty()) std::cout << "skipped:   " << r.skipped.size() << " document(s)\n";
  for (const std::string& w : r.warnings) std::cout << "warning:   " << w << "\n";
  if (!out_dir.empty()) std::cout << "outputs in " << out_dir << "\n";
}

int run_distill(CLI::App* cmd, const PipelineFlags& flags) {
  kgforge::PipelineConfig config = flags.build_config(cmd);
  if (config.blueprint_path.empty()) throw kgforge::ConfigError("--blueprint is required");
  config.validate();
  auto docs = kgforge::load_documents(flags.docs, flags.manifest);
  docs = kgforge::chunk_documents(docs, config.chunk_chars);
  kgforge::Backends backends = kgforge::make_backends(config);
  kgforge::Blueprint blueprint = kgforge::Blueprint::from_json(
      kgforge::load_json_file<nlohmann::ordered_json>(config.blueprint_path));
  kgforge::DistillOptions options{config.matcher.max_retries, config.split_keys};
  auto [blocks, report] = kgforge::distill(docs, blueprint, *backends.llm, options);

  ordered_json jblocks = ordered_json::array();
  for (const kgforge::SemanticBlock& b : blocks) {
    ordered_json jb;
    jb["document_id"] = b.document_id;
    jb["ordinal"] = b.ordinal;
    jb["sections"] = ordered_json::array();
    for (const auto& [key, value] : b.sections) jb["sections"].push_back({key, value});
    jb["text"] = b.text();
    jblocks.push_back(std::move(jb));
  }
  ordered_json jreport;
  jreport["processed"] = report.processed;
  jreport["skipped"] = ordered_json::array();
  for (const auto& s : report.skipped) jreport["skipped"].push_back({{"id", s.id}, {"reason", s.reason}});
  jreport["warnings"] = report.warnings;

  std::string out_dir = config.out_dir.empty() ? "." : config.out_dir;
  write_file(fs::path(out_dir) / "blocks.json", jblocks.dump(2) + "\n");
  write_file(fs::path(out_dir) / "distill_report.json", jreport.dump(2) + "\n");
  std::cout << "distilled " << report.processed << " block(s) from " << docs.size()
            << " document(s), " << report.skipped.size() << " skipped\n"
            << "outputs in " << out_dir << "\n";
  return 0;
}

int run_build(CLI::App* cmd, const PipelineFlags& flags, const std::string& resume_graph) {
  kgforge::PipelineConfig config = flags.build_config(cmd);
  config.validate();
  auto docs = kgforge::load_documents(flags.docs, flags.manifest);
  kgforge::Backends backends = kgforge::make_backends(config);
  kgforge::PipelineResult result =
      resume_graph.empty()
          ? kgforge::run_pipeline(docs, config, *backends.llm, *backends.embedder)
          : kgforge::resume(resume_graph, docs, config, *backends.llm, *backends.embedder);
  print_run_summary(result, config.out_dir);
  return 0;
}

int run_export(const std::string& graph_path, const std::string& format, const std::string& out,
               bool include_embeddings, bool no_provenance) {
  kgforge::KnowledgeGraph graph = kgforge::parse_graph_json(read_file(graph_path));
  kgforge::ExportOptions options;
  options.format = [&] {
    if (format == "cypher") return kgforge::ExportOptions::Format::cypher;
    if (format == "json") return kgforge::ExportOptions::Format::graph_json;
    throw kgforge::ConfigError("unknown export format: " + format + " (cypher|json)");
  }();
  options.include_embeddings = include_embeddings;
  options.include_provenance = !no_provenance;
  write_file(out, kgforge::export_graph(graph, options));
  std::cout << "exported " << graph.entities().size() << " entities, "
            << graph.relations().size() << " relations to " << out << "\n";
  return 0;
}

struct MetricsFlags {
  std::string annotations;
  std::string info_fractions;
  long long relevant = -1, total_triplets = -1;
  long long unresolved_entities = -1, total_entities = -1;
  long long unresolved_relations = -1, total_relations = -1;
  std::string pairs;
  std::string out;
  BackendFlags backend;
};

int run_metrics(CLI::App* cmd, const MetricsFlags& flags) {
  ordered_json report;
  bool any = false;
  if (!flags.annotations.empty()) {
    auto tallies = kgforge::aggregate_schema_tallies(
        kgforge::load_json_file<nlohmann::ordered_json>(flags.annotations));
    ordered_json per_key;
    for (const kgforge::KeyTally& t : tallies) {
      per_key[t.key] = kgforge::schema_consistency_key(t);
    }
    report["schema_consistency"] = {{"per_key", per_key},
                                    {"overall", kgforge::schema_consistency(tallies)}};
    any = true;
  }
  if (!flags.info_fractions.empty()) {
    nlohmann::json fractions = kgforge::load_json_file(flags.info_fractions);
    if (!fractions.is_array()) {
      throw kgforge::ParseError("--info-fractions file must be a JSON array of numbers");
    }
    std::map<std::string, int> histogram{{"very_different", 0},
                                         {"medium", 0},
                                         {"largely_consistent", 0},
                                         {"fully_consistent", 0}};
    for (const auto& f : fractions) {
      histogram[kgforge::to_string(
          kgforge::information_consistency_category(f.get<double>()))]++;
    }
    report["information_consistency"] = histogram;
    any = true;
  }
  if (flags.relevant >= 0 || flags.total_triplets >= 0) {
    report["precision"] = kgforge::triplet_precision(flags.relevant, flags.total_triplets);
    any = true;
  }
  if (flags.unresolved_entities >= 0 || flags.total_entities >= 0) {
    report["fdr_entities"] =
        kgforge::resolution_fdr(flags.unresolved_entities, flags.total_entities);
    any = true;
  }
  if (flags.unresolved_relations >= 0 || flags.total_relations >= 0) {
    report["fdr_relations"] =
        kgforge::resolution_fdr(flags.unresolved_relations, flags.total_relations);
    any = true;
  }
  if (!flags.pairs.empty()) {
    kgforge::PipelineConfig config;
    config.backend = flags.backend.backend.empty() ? "mock-hash" : flags.backend.backend;
    flags.backend.apply(cmd, config);
    kgforge::Backends backends = kgforge::make_backends(config);
    auto estimate = kgforge::estimate_threshold(kgforge::LabeledPairDataset::load_file(flags.pairs),
                                                *backends.embedder);
    report["threshold_estimate"] = {
        {"mean", estimate.mean}, {"std", estimate.stddev}, {"pairs", estimate.pairs}};
    any = true;
  }
  if (!any) throw kgforge::ConfigError("metrics: no inputs given (see --help)");
  std::string text = report.dump(2) + "\n";
  if (!flags.out.empty()) {
    write_file(flags.out, text);
    std::cout << "metric report written to " << flags.out << "\n";
  } else {
    std::cout << text;
  }
  return 0;
}

int run_estimate_threshold(CLI::App* cmd, const std::string& pairs_path, BackendFlags& flags,
                           const std::string& out) {
  kgforge::PipelineConfig config;
  config.backend = flags.backend.empty() ? "mock-hash" : flags.backend;
  flags.apply(cmd, config);
  kgforge::Backends backends = kgforge::make_backends(config);
  kgforge::LabeledPairDataset dataset = kgforge::LabeledPairDataset::load_file(pairs_path);
  kgforge::ThresholdEstimate estimate = kgforge::estimate_threshold(dataset, *backends.embedder);
  std::cout << "pairs: " << estimate.pairs << "\n"
            << "mean:  " << std::setprecision(17) << estimate.mean << "\n"
            << "std:   " << std::setprecision(17) << estimate.stddev << "\n";
  if (!out.empty()) {
    ordered_json j{{"mean", estimate.mean}, {"std", estimate.stddev}, {"pairs", estimate.pairs}};
    write_file(out, j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental knowledge-graph construction from document collections"};
  app.require_subcommand(1);

  PipelineFlags distill_flags;
  auto* distill_cmd = app.add_subcommand("distill", "Rewrite documents into semantic blocks");
  distill_flags.add_to(distill_cmd, /*docs_required=*/true);

  PipelineFlags build_flags;
  auto* build_cmd = app.add_subcommand("build", "Run the full pipeline into a fresh graph");
  build_flags.add_to(build_cmd, /*docs_required=*/true);

  PipelineFlags resume_flags;
  std::string resume_graph;
  auto* resume_cmd = app.add_subcommand("resume", "Continue a graph with new documents");
  resume_cmd->add_option("--graph", resume_graph, "Previously exported graph.json")->required();
  resume_flags.add_to(resume_cmd, /*docs_required=*/true);

  std::string export_graph_path, export_format = "json", export_out;
  bool export_embeddings = false, export_no_provenance = false;
  auto* export_cmd = app.add_subcommand("export", "Re-serialize a graph file");
  export_cmd->add_option("--graph", export_graph_path, "Graph JSON file")->required();
  export_cmd->add_option("--format", export_format, "cypher|json");
  export_cmd->add_option("--out", export_out, "Output file")->required();
  export_cmd->add_flag("--include-embeddings", export_embeddings, "Keep embeddings (json only)");
  export_cmd->add_flag("--no-provenance", export_no_provenance, "Drop provenance arrays");

  MetricsFlags metrics_flags;
  auto* metrics_cmd = app.add_subcommand("metrics", "Compute evaluation metrics");
  metrics_cmd->add_option("--annotations", metrics_flags.annotations,
                          "Schema-consistency annotations (JSON per document)");
  metrics_cmd->add_option("--info-fractions", metrics_flags.info_fractions,
                          "JSON array of information-consistency fractions");
  metrics_cmd->add_option("--relevant", metrics_flags.relevant, "Relevant triplet count");
  metrics_cmd->add_option("--total-triplets", metrics_flags.total_triplets,
                          "Total extracted triplets");
  metrics_cmd->add_option("--unresolved-entities", metrics_flags.unresolved_entities,
                          "Unresolved entity count");
  metrics_cmd->add_option("--total-entities", metrics_flags.total_entities,
                          "Total extracted entities");
  metrics_cmd->add_option("--unresolved-relations", metrics_flags.unresolved_relations,
                          "Unresolved relation count");
  metrics_cmd->add_option("--total-relations", metrics_flags.total_relations,
                          "Total extracted relations");
  metrics_cmd->add_option("--pairs", metrics_flags.pairs, "Labeled pair dataset (JSON lines)");
  metrics_cmd->add_option("--out", metrics_flags.out, "Report file (stdout when omitted)");
  metrics_flags.backend.add_to(metrics_cmd);

  std::string pairs_path, threshold_out;
  BackendFlags threshold_backend;
  auto* threshold_cmd =
      app.add_subcommand("estimate-threshold", "Cosine similarity statistics over labeled pairs");
  threshold_cmd->add_option("--pairs", pairs_path, "Labeled pair dataset (JSON lines)")->required();
  threshold_cmd->add_option("--out", threshold_out, "Also write the estimate as JSON");
  threshold_backend.add_to(threshold_cmd);

  try {
    app.parse(argc, argv);
    if (distill_cmd->parsed()) return run_distill(distill_cmd, distill_flags);
    if (build_cmd->parsed()) return run_build(build_cmd, build_flags, "");
    if (resume_cmd->parsed()) return run_build(resume_cmd, resume_flags, resume_graph);
    if (export_cmd->parsed()) {
      return run_export(export_graph_path, export_format, export_out, export_embeddings,
                        export_no_provenance);
    }
    if (metrics_cmd->parsed()) return run_metrics(metrics_cmd, metrics_flags);
    if (threshold_cmd->parsed()) {
      return run_estimate_threshold(threshold_cmd, pairs_path, threshold_backend, threshold_out);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  } catch (const kgforge::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
