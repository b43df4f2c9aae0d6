#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <kgforge/backend.hpp>
#include <kgforge/mock_backend.hpp>

#include "support/test_util.hpp"

using namespace kgforge;
using nlohmann::json;

TEST_CASE("cosine of unit vectors") {
  CHECK(cosine({1, 0, 0}, {1, 0, 0}) == 1.0);
  CHECK(cosine({1, 0}, {0, 1}) == 0.0);
  CHECK(cosine({0.6, 0.8}, {0.8, 0.6}) == Catch::Approx(0.96).margin(1e-15));
  CHECK_THROWS_AS(cosine({1, 0}, {1, 0, 0}), DimensionMismatchError);
}

TEST_CASE("cosine is symmetric and clamps self-similarity") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 200; ++trial) {
    EmbeddingVector u(5), v(5);
    for (auto& x : u) x = gauss(rng);
    for (auto& x : v) x = gauss(rng);
    normalize(u);
    normalize(v);
    CHECK(cosine(u, v) == cosine(v, u));  // same op order, bit-identical
    CHECK(cosine(u, u) == Catch::Approx(1.0).margin(1e-9));
    CHECK(cosine(u, v) <= 1.0);
    CHECK(cosine(u, v) >= -1.0);
  }
}

TEST_CASE("hash embedder is deterministic and unit-norm") {
  HashEmbedder a(16, 99);
  HashEmbedder b(16, 99);
  auto va = a.embed_batch({"car", "car", "automobile"});
  auto vb = b.embed_batch({"car", "car", "automobile"});
  CHECK(va[0] == va[1]);
  CHECK(va[0] == vb[0]);
  CHECK(va[2] == vb[2]);
  CHECK(va[0] != va[2]);
  for (const auto& v : va) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-9);
  }
  // Independent dot-product route for the cross-text cosine.
  double dot = 0.0;
  for (std::size_t i = 0; i < va[0].size(); ++i) dot += va[0][i] * va[2][i];
  double c = cosine(va[0], va[2]);
  CHECK(c >= -1.0);
  CHECK(c <= 1.0);
  CHECK(c == Catch::Approx(dot).margin(1e-12));
}

TEST_CASE("hash embedder seeds produce different spaces") {
  HashEmbedder a(16, 1), b(16, 2);
  CHECK(a.embed_batch({"x"})[0] != b.embed_batch({"x"})[0]);
}

TEST_CASE("lookup embedder normalizes stored vectors and falls back to canonical text") {
  nlohmann::ordered_json table{{"car", {3.0, 4.0}}, {"bus", {0.0, 2.0}}};
  LookupEmbedder embedder(table);
  CHECK(embedder.dimension() == 2);
  auto vecs = embedder.embed_batch({"car", "CAR ", "bus"});
  CHECK(vecs[0][0] == Catch::Approx(0.6));
  CHECK(vecs[0][1] == Catch::Approx(0.8));
  CHECK(vecs[0] == vecs[1]);  // canonical fallback
  CHECK_THROWS_AS(embedder.embed_batch({"plane"}), Error);
}

TEST_CASE("lookup embedder rejects inconsistent tables") {
  CHECK_THROWS_AS(LookupEmbedder(nlohmann::ordered_json{{"a", {1.0}}, {"b", {1.0, 0.0}}}),
                  ParseError);
  CHECK_THROWS_AS(LookupEmbedder(nlohmann::ordered_json{{"a", {0.0, 0.0}}}), Error);
  CHECK_THROWS_AS(LookupEmbedder(nlohmann::ordered_json::object()), ParseError);
}

namespace {

ExtractionRequest simple_request(std::string tag) {
  return {"extract",
          "context",
          {{"name", {FieldKind::text, "the name", true}},
           {"skills", {FieldKind::text_list, "skills", false}}},
          std::move(tag)};
}

}  // namespace

TEST_CASE("fixture llm plays back canned values exactly") {
  FixtureLlm llm(json{{"cv_01", {{"name", "Ada"}, {"skills", {"math", "code"}}}}});
  auto result = extract_structured(llm, simple_request("distill/cv_01"));
  CHECK(result.attempts == 1);
  REQUIRE(result.find("name"));
  CHECK(std::get<std::string>(*result.find("name")) == "Ada");
  REQUIRE(result.find("skills"));
  CHECK(std::get<std::vector<std::string>>(*result.find("skills")) ==
        std::vector<std::string>{"math", "code"});
}

TEST_CASE("missing fixture information yields an empty result on the first attempt") {
  FixtureLlm llm(json::object());
  auto result = extract_structured(llm, simple_request("distill/unknown"));
  CHECK(result.values.empty());
  CHECK(result.attempts == 1);
}

TEST_CASE("persistently malformed output fails after the retry budget") {
  FixtureLlm llm(json{{"cv_01", "this is not json {"}});
  try {
    extract_structured(llm, simple_request("distill/cv_01"), 3);
    FAIL("expected ExtractionFailedError");
  } catch (const ExtractionFailedError& err) {
    CHECK(err.attempts == 3);
    CHECK(err.raw == "this is not json {");
  }
}

TEST_CASE("a scripted fixture can recover on a later attempt") {
  FixtureLlm llm(json{{"cv_01", {"garbage", "{\"name\": \"Ada\"}"}}});
  auto result = extract_structured(llm, simple_request("distill/cv_01"), 3);
  CHECK(result.attempts == 2);
  CHECK(std::get<std::string>(*result.find("name")) == "Ada");
}

TEST_CASE("values are validated against the schema") {
  SECTION("unknown keys are dropped") {
    FixtureLlm llm(json{{"cv_01", {{"name", "Ada"}, {"bogus", "zzz"}}}});
    auto result = extract_structured(llm, simple_request("distill/cv_01"));
    CHECK(result.values.size() == 1);
    CHECK(result.find("bogus") == nullptr);
  }
  SECTION("empty strings and nulls are omitted, not kept as placeholders") {
    FixtureLlm llm(json{{"cv_01", {{"name", "  "}, {"skills", json::array()}}}});
    auto result = extract_structured(llm, simple_request("distill/cv_01"));
    CHECK(result.values.empty());
  }
  SECTION("wrong kinds count as malformed output") {
    FixtureLlm llm(json{{"cv_01", {{"name", {{"nested", "object"}}}}}});
    CHECK_THROWS_AS(extract_structured(llm, simple_request("distill/cv_01"), 2),
                    ExtractionFailedError);
  }
  SECTION("scalars coerce into singleton lists") {
    FixtureLlm llm(json{{"cv_01", {{"skills", "solo"}}}});
    auto result = extract_structured(llm, simple_request("distill/cv_01"));
    CHECK(std::get<std::vector<std::string>>(*result.find("skills")) ==
          std::vector<std::string>{"solo"});
  }
}

TEST_CASE("record lists parse field maps and skip empty records") {
  FixtureLlm llm(json{{"e/cv", {{"entities", {{{"name", "Ada"}, {"label", "Person"}}, {{"name", ""}}}}}}});
  ExtractionRequest request{"x", "y", {{"entities", {FieldKind::record_list, "", true}}}, "e/cv"};
  auto result = extract_structured(llm, request);
  auto records = std::get<std::vector<RecordValue>>(*result.find("entities"));
  REQUIRE(records.size() == 1);
  CHECK(records[0].at("name") == "Ada");
  CHECK(records[0].at("label") == "Person");
}

TEST_CASE("json wrapped in prose or code fences still parses") {
  FixtureLlm llm(json{{"cv_01", "Sure! ```json\n{\"name\": \"Ada\"}\n``` hope that helps"}});
  auto result = extract_structured(llm, simple_request("distill/cv_01"));
  CHECK(std::get<std::string>(*result.find("name")) == "Ada");
}

TEST_CASE("fixture lookup falls back from stage-qualified tags to the document id") {
  FixtureLlm llm(json{{"relations/cv_01", {{"name", "stage"}}}, {"cv_02", {{"name", "bare"}}}});
  ExtractionRequest r1 = simple_request("relations-global/cv_01");
  CHECK(std::get<std::string>(*extract_structured(llm, r1).find("name")) == "stage");
  ExtractionRequest r2 = simple_request("entities/cv_02");
  CHECK(std::get<std::string>(*extract_structured(llm, r2).find("name")) == "bare");
}

TEST_CASE("requests are validated before any backend call") {
  FixtureLlm llm(json::object());
  ExtractionRequest empty_schema{"i", "c", {}, "t"};
  CHECK_THROWS_AS(extract_structured(llm, empty_schema), ConfigError);
  ExtractionRequest dup{"i", "c",
                        {{"k", {FieldKind::text, "", false}}, {"k", {FieldKind::text, "", false}}},
                        "t"};
  CHECK_THROWS_AS(extract_structured(llm, dup), ConfigError);
}

TEST_CASE("embed_batch preserves input order") {
  LookupEmbedder embedder(nlohmann::ordered_json{{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}});
  auto vecs = embedder.embed_batch({"b", "a", "b"});
  CHECK(vecs[0][1] == 1.0);
  CHECK(vecs[1][0] == 1.0);
  CHECK(vecs[2] == vecs[0]);
}
