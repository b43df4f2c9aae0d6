#pragma once

#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kgforge/canonical.hpp"
#include "kgforge/errors.hpp"
#include "kgforge/core.hpp"

namespace kgforge {

enum class FieldKind { text, text_list, record_list };

inline const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::text: return "text";
    case FieldKind::text_list: return "text-list";
    case FieldKind::record_list: return "record-list";
  }
  return "?";
}

inline FieldKind field_kind_from_string(const std::string& s) {
  if (s == "text") return FieldKind::text;
  if (s == "text-list") return FieldKind::text_list;
  if (s == "record-list") return FieldKind::record_list;
  throw ConfigError("unknown field kind: " + s);
}

struct FieldSpec {
  FieldKind kind = FieldKind::text;
  std::string description;
  bool required = false;
};

// One structured-extraction call. `tag` identifies the request for
// diagnostics and fixture playback ("<stage>/<document id>").
struct ExtractionRequest {
  std::string instruction;
  std::string context;
  std::vector<std::pair<std::string, FieldSpec>> output_schema;
  std::string tag;

  void validate() const {
    if (output_schema.empty()) throw ConfigError("extraction request has an empty schema");
    std::map<std::string, int> seen;
    for (const auto& [key, spec] : output_schema) {
      if (key.empty()) throw ConfigError("extraction schema has an empty key");
      if (++seen[key] > 1) throw ConfigError("duplicate extraction schema key: " + key);
    }
  }
};

using RecordValue = std::map<std::string, std::string>;
using FieldValue = std::variant<std::string, std::vector<std::string>, std::vector<RecordValue>>;

// Keys whose information was absent from the context are simply missing
// from `values`; nothing is ever filled with placeholders.
struct ExtractionResult {
  std::vector<std::pair<std::string, FieldValue>> values;  // schema order
  std::string raw;
  int attempts = 1;

  const FieldValue* find(const std::string& key) const {
    for (const auto& [k, v] : values) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

// Transport for one completion attempt. Implementations must be safe for
// concurrent calls; retry and parsing live in extract_structured.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const ExtractionRequest& request) = 0;
  virtual int max_parallel() const { return 1; }
};

// Text embedding. Every returned vector is unit-norm with a stable
// dimension for the lifetime of the backend.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
  virtual int dimension() = 0;
};

namespace detail {

// Scalars coerce to their text form; structured values are a kind error.
inline bool coerce_scalar(const nlohmann::json& j, std::string& out) {
  if (j.is_string()) {
    out = trim(j.get<std::string>());
    return true;
  }
  if (j.is_number() || j.is_boolean()) {
    out = j.dump();
    return true;
  }
  return false;
}

struct FieldParseError {
  std::string message;
};

// Validates one schema field's value. Empty results signal "omit the key";
// a wrong shape throws FieldParseError so the attempt can be retried.
inline std::optional<FieldValue> parse_field(const std::string& key, const FieldSpec& spec,
                                             const nlohmann::json& value) {
  if (value.is_null()) return std::nullopt;
  switch (spec.kind) {
    case FieldKind::text: {
      std::string s;
      if (!coerce_scalar(value, s)) {
        throw FieldParseError{"key '" + key + "' expected text, got " + std::string(value.type_name())};
      }
      if (s.empty()) return std::nullopt;
      return FieldValue(std::move(s));
    }
    case FieldKind::text_list: {
      std::vector<std::string> items;
      if (value.is_array()) {
        for (const auto& elem : value) {
          std::string s;
          if (elem.is_null()) continue;
          if (!coerce_scalar(elem, s)) {
            throw FieldParseError{"key '" + key + "' expected a list of text values"};
          }
          if (!s.empty()) items.push_back(std::move(s));
        }
      } else {
        std::string s;
        if (!coerce_scalar(value, s)) {
          throw FieldParseError{"key '" + key + "' expected a list of text values"};
        }
        if (!s.empty()) items.push_back(std::move(s));
      }
      if (items.empty()) return std::nullopt;
      return FieldValue(std::move(items));
    }
    case FieldKind::record_list: {
      if (!value.is_array()) {
        throw FieldParseError{"key '" + key + "' expected a list of records"};
      }
      std::vector<RecordValue> records;
      for (const auto& elem : value) {
        if (elem.is_null()) continue;
        if (!elem.is_object()) {
          throw FieldParseError{"key '" + key + "' expected record objects"};
        }
        RecordValue rec;
        for (const auto& [k, v] : elem.items()) {
          if (v.is_null()) continue;
          std::string s;
          if (!coerce_scalar(v, s)) {
            throw FieldParseError{"key '" + key + "' record field '" + k + "' is not scalar"};
          }
          rec[k] = std::move(s);
        }
        bool all_empty = true;
        for (const auto& [k, v] : rec) {
          (void)k;
          if (!v.empty()) all_empty = false;
        }
        if (!rec.empty() && !all_empty) records.push_back(std::move(rec));
      }
      if (records.empty()) return std::nullopt;
      return FieldValue(std::move(records));
    }
  }
  return std::nullopt;
}

// Models often wrap JSON in prose or code fences; take the outermost braces.
inline std::string extract_json_object(const std::string& raw) {
  auto b = raw.find('{');
  auto e = raw.rfind('}');
  if (b == std::string::npos || e == std::string::npos || e < b) return raw;
  return raw.substr(b, e - b + 1);
}

}  // namespace detail

inline constexpr int kDefaultMaxRetries = 3;

// Runs the request against the backend, parse-validating each attempt's
// output against the schema. Keys absent from the output (or empty after
// trimming) are omitted; unknown keys are dropped. A response that stays
// malformed through `max_retries` attempts raises ExtractionFailedError.
inline ExtractionResult extract_structured(LlmBackend& backend, const ExtractionRequest& request,
                                           int max_retries = kDefaultMaxRetries) {
  request.validate();
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
  std::string last_raw;
  std::string last_error;
  for (int attempt = 1; attempt <= max_retries; ++attempt) {
    last_raw = backend.complete(request);
    nlohmann::json parsed =
        nlohmann::json::parse(detail::extract_json_object(last_raw), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      last_error = "output is not a JSON object";
      continue;
    }
    try {
      ExtractionResult result;
      result.raw = last_raw;
      result.attempts = attempt;
      for (const auto& [key, spec] : request.output_schema) {
        auto it = parsed.find(key);
        if (it == parsed.end()) continue;
        if (auto value = detail::parse_field(key, spec, *it)) {
          result.values.emplace_back(key, std::move(*value));
        }
      }
      return result;
    } catch (const detail::FieldParseError& err) {
      last_error = err.message;
    }
  }
  throw ExtractionFailedError("structured extraction failed after " +
                                  std::to_string(max_retries) + " attempts (" + last_error +
                                  ") for request '" + request.tag + "'",
                              last_raw, max_retries);
}

}  // namespace kgforge
