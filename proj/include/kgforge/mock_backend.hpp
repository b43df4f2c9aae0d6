#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgforge/backend.hpp"
#include "kgforge/canonical.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

template <typename Json = nlohmann::json>
inline Json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("invalid JSON in " + path);
  return j;
}

// Plays canned responses keyed by request tag. An object value is served as
// its JSON text; a string value is served verbatim (so fixtures can express
// malformed output); an array scripts successive attempts. Lookup falls back
// from "stage-variant/id" to "stage/id" to the bare document id, and a
// missing fixture plays "{}" (nothing to extract).
class FixtureLlm : public LlmBackend {
 public:
  explicit FixtureLlm(nlohmann::json fixtures) : fixtures_(std::move(fixtures)) {
    if (!fixtures_.is_object()) throw ParseError("LLM fixture file must be a JSON object");
  }

  std::string complete(const ExtractionRequest& request) override {
    const nlohmann::json* fixture = lookup(request.tag);
    if (!fixture) return "{}";
    if (fixture->is_array()) {
      std::lock_guard<std::mutex> lock(mutex_);
      std::size_t n = attempt_counts_[request.tag]++;
      if (fixture->empty()) return "{}";
      const nlohmann::json& step = (*fixture)[std::min(n, fixture->size() - 1)];
      return render(step);
    }
    return render(*fixture);
  }

 private:
  static std::string render(const nlohmann::json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
  }

  const nlohmann::json* lookup(const std::string& tag) const {
    std::vector<std::string> candidates{tag};
    auto slash = tag.find('/');
    if (slash != std::string::npos) {
      std::string stage = tag.substr(0, slash);
      std::string id = tag.substr(slash + 1);
      auto dash = stage.find('-');
      if (dash != std::string::npos) candidates.push_back(stage.substr(0, dash) + "/" + id);
      candidates.push_back(id);
    }
    for (const std::string& c : candidates) {
      auto it = fixtures_.find(c);
      if (it != fixtures_.end()) return &*it;
    }
    return nullptr;
  }

  nlohmann::json fixtures_;
  mutable std::mutex mutex_;
  std::map<std::string, std::size_t> attempt_counts_;
};

// Embeds from an explicit text -> vector table (normalized on load). Lookup
// is by exact text first, then by canonical key, so casing/spacing variants
// of a listed surface form share its vector.
class LookupEmbedder : public EmbeddingBackend {
 public:
  explicit LookupEmbedder(const nlohmann::ordered_json& table) {
    if (!table.is_object() || table.empty()) {
      throw ParseError("embedding table must be a non-empty JSON object");
    }
    for (const auto& [text, value] : table.items()) {
      if (!value.is_array() || value.empty()) {
        throw ParseError("embedding table entry '" + text + "' is not a vector");
      }
      EmbeddingVector vec;
      vec.reserve(value.size());
      for (const auto& x : value) {
        if (!x.is_number()) throw ParseError("embedding table entry '" + text + "' is not numeric");
        vec.push_back(x.get<double>());
      }
      if (dimension_ == 0) {
        dimension_ = static_cast<int>(vec.size());
      } else if (static_cast<int>(vec.size()) != dimension_) {
        throw ParseError("embedding table entry '" + text + "' has dimension " +
                         std::to_string(vec.size()) + ", expected " + std::to_string(dimension_));
      }
      normalize(vec);
      canonical_.emplace(canonicalize(text), vec);
      exact_.emplace(text, std::move(vec));
    }
  }

  static LookupEmbedder from_file(const std::string& path) {
    return LookupEmbedder(load_json_file<nlohmann::ordered_json>(path));
  }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
      auto it = exact_.find(text);
      if (it != exact_.end()) {
        out.push_back(it->second);
        continue;
      }
      auto cit = canonical_.find(canonicalize(text));
      if (cit == canonical_.end()) {
        throw Error("lookup embedder has no vector for \"" + text + "\"");
      }
      out.push_back(cit->second);
    }
    return out;
  }

  int dimension() override { return dimension_; }

 private:
  int dimension_ = 0;
  std::map<std::string, EmbeddingVector> exact_;
  std::map<std::string, EmbeddingVector> canonical_;  // first listed form wins
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic pseudo-embeddings: each component is derived from a 64-bit
// hash of (seed, text, component index), so identical text gives bit-identical
// vectors on every platform and run.
class HashEmbedder : public EmbeddingBackend {
 public:
  explicit HashEmbedder(int dimension = 64, std::uint64_t seed = 1)
      : dimension_(dimension), seed_(seed) {
    if (dimension <= 0) throw ConfigError("hash embedder dimension must be positive");
  }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
      std::uint64_t h = detail::fnv1a64(text) ^ seed_;
      EmbeddingVector vec(static_cast<std::size_t>(dimension_));
      for (int i = 0; i < dimension_; ++i) {
        std::uint64_t bits = detail::splitmix64(h + static_cast<std::uint64_t>(i));
        // top 53 bits -> [0, 1) -> [-1, 1)
        double u = static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
        vec[static_cast<std::size_t>(i)] = 2.0 * u - 1.0;
      }
      double sq = 0.0;
      for (double x : vec) sq += x * x;
      if (!(sq > 0.0)) vec[0] = 1.0;  // unreachable in practice
      normalize(vec);
      out.push_back(std::move(vec));
    }
    return out;
  }

  int dimension() override { return dimension_; }

 private:
  int dimension_;
  std::uint64_t seed_;
};

}  // namespace kgforge
