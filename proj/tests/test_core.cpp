#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include <kgforge/core.hpp>

using namespace kgforge;

namespace {

EmbeddingVector unit2(double x, double y) {
  EmbeddingVector v{x, y};
  normalize(v);
  return v;
}

}  // namespace

TEST_CASE("entity construction canonicalizes and normalizes") {
  Entity e("  Knowledge   Graph ", "Concept", {3.0, 4.0}, {"d0"});
  CHECK(e.name == "Knowledge   Graph");
  CHECK(e.key == "knowledge graph");
  CHECK(e.embedding[0] == Catch::Approx(0.6));
  CHECK(e.embedding[1] == Catch::Approx(0.8));
  CHECK_THROWS_AS(Entity("   "), Error);
}

TEST_CASE("inserting into an empty graph adds one entity") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("Paris", "City", unit2(1, 0), {"d0"}));
  CHECK(g.entities().size() == 1);
}

TEST_CASE("entities with the same canonical key merge provenance") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("paris", "", unit2(1, 0), {"d0"}));
  bool inserted = true;
  g.insert_entity(Entity("Paris ", "", unit2(1, 0), {"d1"}), &inserted);
  CHECK_FALSE(inserted);
  REQUIRE(g.entities().size() == 1);
  CHECK(g.entities()[0].provenance == std::set<std::string>{"d0", "d1"});
  CHECK(g.entities()[0].name == "paris");  // incumbent display form kept
}

TEST_CASE("distinct keys keep insertion order") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("b", "", unit2(1, 0)));
  g.insert_entity(Entity("a", "", unit2(0, 1)));
  g.insert_entity(Entity("c", "", unit2(1, 1)));
  REQUIRE(g.entities().size() == 3);
  CHECK(g.entities()[0].key == "b");
  CHECK(g.entities()[1].key == "a");
  CHECK(g.entities()[2].key == "c");
}

TEST_CASE("entity embedding dimension is checked against the graph") {
  KnowledgeGraph g(3);
  CHECK_THROWS_AS(g.insert_entity(Entity("x", "", unit2(1, 0))), DimensionMismatchError);
}

TEST_CASE("exact relation triples deduplicate") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("a", "", unit2(1, 0)));
  g.insert_entity(Entity("b", "", unit2(0, 1)));
  g.insert_relation(Relation("a", "works at", "b", {}, {"d0"}));
  bool inserted = true;
  g.insert_relation(Relation("a", "works at", "b", {}, {"d1"}), &inserted);
  CHECK_FALSE(inserted);
  REQUIRE(g.relations().size() == 1);
  CHECK(g.relations()[0].provenance == std::set<std::string>{"d0", "d1"});
}

TEST_CASE("relation direction is part of the key") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("a", "", unit2(1, 0)));
  g.insert_entity(Entity("b", "", unit2(0, 1)));
  g.insert_relation(Relation("a", "works at", "b"));
  g.insert_relation(Relation("b", "works at", "a"));
  CHECK(g.relations().size() == 2);
}

TEST_CASE("relations with unknown endpoints are rejected") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("a", "", unit2(1, 0)));
  CHECK_THROWS_AS(g.insert_relation(Relation("a", "works at", "ghost")), DanglingEndpointError);
  CHECK_THROWS_AS(g.insert_relation(Relation("ghost", "works at", "a")), DanglingEndpointError);
}

TEST_CASE("relations_between is endpoint scoped and ordered") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("a", "", unit2(1, 0)));
  g.insert_entity(Entity("b", "", unit2(0, 1)));
  g.insert_entity(Entity("c", "", unit2(1, 1)));
  g.insert_relation(Relation("a", "x", "b"));
  g.insert_relation(Relation("a", "y", "c"));
  g.insert_relation(Relation("a", "z", "b"));
  auto between = g.relations_between("a", "b");
  REQUIRE(between.size() == 2);
  CHECK(g.relations()[between[0]].predicate == "x");
  CHECK(g.relations()[between[1]].predicate == "z");
  CHECK(g.relations_between("b", "a").empty());
}

TEST_CASE("prune_isolated_entities drops nodes without edges") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("a", "", unit2(1, 0)));
  g.insert_entity(Entity("loner", "", unit2(0, 1)));
  g.insert_entity(Entity("b", "", unit2(1, 1)));
  g.insert_relation(Relation("a", "knows", "b"));
  CHECK(g.prune_isolated_entities() == 1);
  REQUIRE(g.entities().size() == 2);
  CHECK(g.find_entity("loner") == nullptr);
  CHECK(g.find_entity("a") != nullptr);
  g.validate();
}

TEST_CASE("random insert sequences keep keys distinct and references intact") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> name_pick(0, 11);
  std::uniform_int_distribution<int> casing(0, 2);
  const char* names[] = {"alpha", "Beta",  "GAMMA", "delta", "Epsilon", "zeta",
                         "eta",   "Theta", "iota",  "kappa", "Lambda",  "mu"};
  for (int trial = 0; trial < 50; ++trial) {
    KnowledgeGraph g(2);
    std::uniform_int_distribution<int> ops(5, 40);
    int n = ops(rng);
    for (int i = 0; i < n; ++i) {
      std::string name = names[name_pick(rng)];
      if (casing(rng) == 0) name = " " + name + "  ";
      if (casing(rng) == 1) {
        for (char& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      g.insert_entity(Entity(name, "", unit2(1, 0), {"d" + std::to_string(i % 3)}));
      if (g.entities().size() >= 2 && i % 3 == 0) {
        std::uniform_int_distribution<std::size_t> pick(0, g.entities().size() - 1);
        g.insert_relation(Relation(g.entities()[pick(rng)].key, "rel" + std::to_string(i % 4),
                                   g.entities()[pick(rng)].key));
      }
    }
    std::set<std::string> keys;
    for (const Entity& e : g.entities()) CHECK(keys.insert(e.key).second);
    std::set<RelationKey> rkeys;
    for (const Relation& r : g.relations()) {
      CHECK(rkeys.insert({r.subject_key, r.predicate_key, r.object_key}).second);
      CHECK(keys.count(r.subject_key) == 1);
      CHECK(keys.count(r.object_key) == 1);
    }
    g.validate();
  }
}

TEST_CASE("validate rejects corrupted graphs") {
  KnowledgeGraph g(2);
  g.insert_entity(Entity("a", "", unit2(1, 0)));
  g.validate();
  CHECK_THROWS_AS(KnowledgeGraph(0), Error);
}

TEST_CASE("document validation enforces unique ids and contiguous ordinals") {
  CHECK_NOTHROW(validate_documents({{"a", "", 0}, {"b", "", 1}}));
  CHECK_THROWS_AS(validate_documents({{"a", "", 0}, {"a", "", 1}}), ConfigError);
  CHECK_THROWS_AS(validate_documents({{"a", "", 0}, {"b", "", 2}}), ConfigError);
  CHECK_THROWS_AS(validate_documents({{"", "", 0}}), ConfigError);
}
