#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgforge/backend.hpp"
#include "kgforge/core.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

// Per-key extraction tally: elements correctly matched to the schema,
// elements added that do not belong to it, and the total schema elements
// for the key.
struct KeyTally {
  std::string key;
  long long correct = 0;
  long long incorrect = 0;
  long long total = 0;

  void validate() const {
    if (correct < 0 || incorrect < 0) throw ConfigError("tally counts must be non-negative");
    if (total < 1) throw ConfigError("tally total must be at least 1 for key '" + key + "'");
    if (correct > total) throw ConfigError("tally correct exceeds total for key '" + key + "'");
  }
};

// SC(k) = (C - I) / T, clamped to 0 whenever C < I.
inline double schema_consistency_key(const KeyTally& tally) {
  tally.validate();
  if (tally.correct < tally.incorrect) return 0.0;
  return static_cast<double>(tally.correct - tally.incorrect) / static_cast<double>(tally.total);
}

// Arithmetic mean of the per-key scores over the schema's key set.
inline double schema_consistency(const std::vector<KeyTally>& tallies) {
  if (tallies.empty()) throw ConfigError("schema consistency needs at least one key tally");
  std::set<std::string> keys;
  for (const KeyTally& t : tallies) {
    if (!keys.insert(t.key).second) throw ConfigError("duplicate tally key: " + t.key);
  }
  double sum = 0.0;
  for (const KeyTally& t : tallies) sum += schema_consistency_key(t);
  return sum / static_cast<double>(tallies.size());
}

enum class ConsistencyCategory { very_different, medium, largely_consistent, fully_consistent };

inline const char* to_string(ConsistencyCategory c) {
  switch (c) {
    case ConsistencyCategory::very_different: return "very_different";
    case ConsistencyCategory::medium: return "medium";
    case ConsistencyCategory::largely_consistent: return "largely_consistent";
    case ConsistencyCategory::fully_consistent: return "fully_consistent";
  }
  return "?";
}

// Buckets are half-open [lo, hi) with the top bucket closed at 1, so every
// fraction lands in exactly one category.
inline ConsistencyCategory information_consistency_category(double fraction) {
  if (!(fraction >= 0.0) || !(fraction <= 1.0)) {
    throw ConfigError("information consistency fraction must lie in [0, 1]");
  }
  if (fraction < 0.30) return ConsistencyCategory::very_different;
  if (fraction < 0.60) return ConsistencyCategory::medium;
  if (fraction < 0.90) return ConsistencyCategory::largely_consistent;
  return ConsistencyCategory::fully_consistent;
}

inline double triplet_precision(long long relevant, long long total) {
  if (total < 1) throw ConfigError("triplet precision needs a positive total");
  if (relevant < 0 || relevant > total) throw ConfigError("relevant count out of range");
  return static_cast<double>(relevant) / static_cast<double>(total);
}

inline double resolution_fdr(long long unresolved, long long total) {
  if (total < 1) throw ConfigError("resolution FDR needs a positive total");
  if (unresolved < 0 || unresolved > total) throw ConfigError("unresolved count out of range");
  return static_cast<double>(unresolved) / static_cast<double>(total);
}

// Pairs judged semantically similar, used to estimate the merge threshold.
struct LabeledPairDataset {
  enum class Kind { entities, relationships };
  Kind kind = Kind::entities;
  std::vector<std::pair<std::string, std::string>> pairs;

  // JSON-lines: a {"kind": ...} header, then one {"a": ..., "b": ...} per line.
  static LabeledPairDataset load(std::istream& in) {
    LabeledPairDataset dataset;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw ParseError("invalid pair dataset line: " + line);
      if (!have_header) {
        std::string kind = j.value("kind", std::string{});
        if (kind == "entities") {
          dataset.kind = Kind::entities;
        } else if (kind == "relationships") {
          dataset.kind = Kind::relationships;
        } else {
          throw ParseError("pair dataset header must set kind to entities|relationships");
        }
        have_header = true;
        continue;
      }
      if (!j.contains("a") || !j.contains("b")) throw ParseError("pair line missing a/b: " + line);
      std::string a = j["a"].get<std::string>();
      std::string b = j["b"].get<std::string>();
      if (trim(a).empty() || trim(b).empty()) throw ParseError("pair texts must be non-empty");
      dataset.pairs.emplace_back(std::move(a), std::move(b));
    }
    if (!have_header) throw ParseError("pair dataset is missing its header line");
    if (dataset.pairs.empty()) throw ParseError("pair dataset has no pairs");
    return dataset;
  }

  static LabeledPairDataset load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open pair dataset: " + path);
    return load(in);
  }
};

struct ThresholdEstimate {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  int pairs = 0;
};

namespace detail {

// Kahan-compensated sum in fixed (file) order.
class CompensatedSum {
 public:
  void add(double x) {
    double y = x - compensation_;
    double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace detail

// Embeds both sides of every pair, takes cosines in file order, and returns
// the population mean and standard deviation of the similarity sample.
inline ThresholdEstimate estimate_threshold(const LabeledPairDataset& dataset,
                                            EmbeddingBackend& embedder) {
  if (dataset.pairs.empty()) throw ConfigError("threshold estimation needs at least one pair");
  std::vector<std::string> texts;
  texts.reserve(dataset.pairs.size() * 2);
  for (const auto& [a, b] : dataset.pairs) {
    texts.push_back(a);
    texts.push_back(b);
  }
  std::vector<EmbeddingVector> vectors = embedder.embed_batch(texts);
  std::vector<double> cosines;
  cosines.reserve(dataset.pairs.size());
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    cosines.push_back(cosine(vectors[2 * i], vectors[2 * i + 1]));
  }
  detail::CompensatedSum mean_sum;
  for (double c : cosines) mean_sum.add(c);
  double mean = mean_sum.value() / static_cast<double>(cosines.size());
  detail::CompensatedSum var_sum;
  for (double c : cosines) var_sum.add((c - mean) * (c - mean));
  double variance = var_sum.value() / static_cast<double>(cosines.size());
  return {mean, std::sqrt(variance), static_cast<int>(cosines.size())};
}

// Merges per-document annotation tallies by key (counts summed), keys kept
// in first-appearance order. Annotation file shape:
// {"doc": {"key": {"correct": C, "incorrect": I, "total": T}}}
inline std::vector<KeyTally> aggregate_schema_tallies(const nlohmann::ordered_json& annotations) {
  if (!annotations.is_object()) throw ParseError("annotation file must be a JSON object");
  std::vector<KeyTally> tallies;
  std::map<std::string, std::size_t> index;
  for (const auto& [doc_id, keys] : annotations.items()) {
    if (!keys.is_object()) throw ParseError("annotation for '" + doc_id + "' must be an object");
    for (const auto& [key, counts] : keys.items()) {
      if (!counts.is_object()) throw ParseError("tally for key '" + key + "' must be an object");
      auto [it, fresh] = index.try_emplace(key, tallies.size());
      if (fresh) tallies.push_back({key, 0, 0, 0});
      KeyTally& t = tallies[it->second];
      t.correct += counts.value("correct", 0LL);
      t.incorrect += counts.value("incorrect", 0LL);
      t.total += counts.value("total", 0LL);
    }
  }
  for (const KeyTally& t : tallies) t.validate();
  return tallies;
}

}  // namespace kgforge
