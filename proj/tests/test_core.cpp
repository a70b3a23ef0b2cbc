#include "doctest.h"
#include "helpers.hpp"

using namespace sgcanon;
using testutil::objects;

TEST_CASE("vocabulary ids are dense and names unique") {
  RelationVocab v({"left", "right", "above"}, {"cat", "dog"}, {{"size", {"S", "L"}}});
  CHECK(v.num_relations() == 3);
  CHECK(v.relation_id("above") == 2);
  CHECK(v.category_name(1) == "dog");
  CHECK_THROWS_AS(v.relation_id("below"), VocabError);
  CHECK_THROWS_AS(v.check_relation(3), VocabError);
  CHECK_THROWS_AS(v.check_attributes({{"size", "M"}}), VocabError);
  CHECK_THROWS_AS(v.check_attributes({{"color", "red"}}), VocabError);
  CHECK_NOTHROW(v.check_attributes({{"size", "S"}}));
  CHECK_THROWS_AS(RelationVocab({"a", "a"}, {"c"}), VocabError);
  CHECK_THROWS_AS(RelationVocab({"a"}, {"c", "c"}), VocabError);
}

TEST_CASE("scene graph edges form a set without self-loops") {
  SceneGraph g(objects(3));
  CHECK(g.insert({0, 0, 1}));
  CHECK_FALSE(g.insert({0, 0, 1}));
  CHECK(g.num_edges() == 1);
  // Parallel edges with different relations are allowed.
  CHECK(g.insert({0, 1, 1}));
  CHECK(g.num_edges() == 2);
  CHECK_THROWS_AS(g.insert({1, 0, 1}), ValidationError);
  CHECK_THROWS_AS(g.insert({0, 0, 3}), ValidationError);
  CHECK_THROWS_AS(g.insert({-1, 0, 2}), ValidationError);
}

TEST_CASE("weighted graph rejects weights outside (0, 1]") {
  WeightedSceneGraph g(objects(2));
  CHECK_THROWS(g.set({0, 0, 1}, 0.0));
  CHECK_THROWS(g.set({0, 0, 1}, 1.5));
  g.set({0, 0, 1}, 0.3);
  g.set_max({0, 0, 1}, 0.2);
  CHECK(g.weight({0, 0, 1}) == 0.3);
  g.set_max({0, 0, 1}, 0.9);
  CHECK(g.weight({0, 0, 1}) == 0.9);
  CHECK(g.weight({1, 0, 0}) == 0.0);
}

TEST_CASE("layout coordinates must lie in the unit square") {
  CHECK_NOTHROW(Layout({{0, 0, 1, 1}}));
  CHECK_THROWS_AS(Layout({{0, 0, 1.01, 1}}), ValidationError);
  CHECK_THROWS_AS(Layout({{-0.1, 0, 1, 1}}), ValidationError);
}

TEST_CASE("per-relation subgraph filters by relation") {
  RelationVocab v({"left", "above"}, {"x"});
  SceneGraph g(objects(3), {{0, 0, 1}, {1, 1, 2}});
  const Digraph d = per_relation_subgraph(g, 0, v);
  CHECK(d.num_nodes == 3);
  CHECK(d.arcs == std::vector<std::pair<int, int>>{{0, 1}});

  SceneGraph empty(objects(4));
  CHECK(per_relation_subgraph(empty, 1, v).arcs.empty());
  CHECK(per_relation_subgraph(empty, 1, v).num_nodes == 4);
  CHECK_THROWS_AS(per_relation_subgraph(g, 2, v), VocabError);
}

TEST_CASE("per-relation subgraphs partition the edge set") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const SceneGraph g = testutil::random_graph(rng, 6, 3, 0.2);
    EdgeSet rebuilt;
    for (int r = 0; r < 3; ++r)
      for (auto [i, j] : per_relation_subgraph(g, r, 3).arcs) {
        CHECK(rebuilt.insert({i, r, j}).second);
      }
    CHECK(rebuilt == g.edges());
  }
}

TEST_CASE("transitive closure matches repeated squaring") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + uniform_int(rng, 7);
    Digraph d{n, {}};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && bernoulli(rng, 0.2)) d.arcs.push_back({i, j});
    // Oracle: reachability by BFS from every node.
    std::vector<std::vector<char>> expect(n, std::vector<char>(n, 0));
    for (int s = 0; s < n; ++s) {
      std::vector<int> frontier{s};
      while (!frontier.empty()) {
        const int u = frontier.back();
        frontier.pop_back();
        for (auto [a, b] : d.arcs)
          if (a == u && !expect[s][b]) {
            expect[s][b] = 1;
            frontier.push_back(b);
          }
      }
    }
    CHECK(transitive_closure(d) == expect);
  }
}
